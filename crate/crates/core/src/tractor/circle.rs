//! Parallel tractors on a one-dimensional chart with parameter `μ`.
//!
//! With unit-speed parameter `t` a parallel tractor is `(s, s', −(s'' + μs))`
//! where `s` solves `(s'' + 2μs)' = 0`.

use nalgebra::Matrix3;

use crate::fields::ScalarExpr;

#[derive(Debug, Clone)]
pub struct CircleSolutions {
    pub mu: f64,
    /// Closed-form basis in the curve variable `t`; the first entry is constant.
    pub basis: [ScalarExpr; 3],
}

pub fn circle_ode_solutions(mu: f64) -> CircleSolutions {
    let t = ScalarExpr::var(0);
    let basis = if mu > 0.0 {
        let k = (2.0 * mu).sqrt();
        [ScalarExpr::one(), (k * &t).cos(), (k * &t).sin()]
    } else if mu < 0.0 {
        let k = (-2.0 * mu).sqrt();
        [ScalarExpr::one(), (k * &t).exp(), (-k * &t).exp()]
    } else {
        [ScalarExpr::one(), t.clone(), t.powi(2)]
    };
    CircleSolutions { mu, basis }
}

impl CircleSolutions {
    pub fn combination(&self, c: [f64; 3]) -> ScalarExpr {
        self.basis.iter().zip(c).fold(ScalarExpr::zero(), |acc, (b, k)| acc + k * b)
    }

    /// `(s, s', −(s'' + μs))`.
    pub fn parallel_triple(&self, s: &ScalarExpr) -> [ScalarExpr; 3] {
        let ds = s.diff(0);
        let dds = ds.diff(0);
        [s.clone(), ds, -(dds + self.mu * s)]
    }

    /// `(s'' + 2μs)'` at `t`.
    pub fn ode_residual(&self, s: &ScalarExpr, t: f64) -> f64 {
        let e = s.diff(0).diff(0) + 2.0 * self.mu * s;
        e.diff(0).eval(&[t]).unwrap_or(f64::NAN)
    }

    pub fn period(&self) -> Option<f64> {
        (self.mu > 0.0).then(|| 2.0 * std::f64::consts::PI / (2.0 * self.mu).sqrt())
    }

    /// Dimension of the space of solutions with `s(t + L) = s(t)`.
    pub fn periodic_dimension(&self, period: f64) -> usize {
        // a solution is L-periodic iff its 2-jet at 0 and at L agree
        let mut m = Matrix3::zeros();
        for (j, b) in self.basis.iter().enumerate() {
            let jets = [b.clone(), b.diff(0), b.diff(0).diff(0)];
            for (i, e) in jets.iter().enumerate() {
                m[(i, j)] = e.eval(&[period]).unwrap() - e.eval(&[0.0]).unwrap();
            }
        }
        let scale = m.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        let sv = m.singular_values();
        sv.iter().filter(|&&s| s <= 1e-9 * scale).count()
    }
}

/// Zeros of `f(t)` in `[a, b)`, located by sign changes on `n` cells and
/// refined by bisection.
pub fn zeros_in(f: &ScalarExpr, a: f64, b: f64, n: usize) -> Vec<f64> {
    let eval = |t: f64| f.eval(&[t]).unwrap_or(f64::NAN);
    let h = (b - a) / n as f64;
    let mut out = Vec::new();
    let mut prev = eval(a);
    if prev == 0.0 {
        out.push(a);
    }
    for i in 1..=n {
        let t = a + h * i as f64;
        let cur = eval(t);
        if prev != 0.0 && cur != 0.0 && prev.signum() != cur.signum() {
            let (mut lo, mut hi) = (t - h, t);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if eval(mid).signum() == prev.signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo < 1e-14 {
                    break;
                }
            }
            out.push(0.5 * (lo + hi));
        } else if cur == 0.0 && i < n {
            out.push(t);
        }
        prev = cur;
    }
    out
}
