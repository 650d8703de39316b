use serde_json::{json, Value};

use super::chart::{Chart, MetricJet};
use super::tensor::{invert, Tensor};
use crate::error::{Error, Result};
use crate::real::Real;

/// Levi-Civita data and Schouten tensor at one point, generic over the scalar
/// type so that evaluating at a [`crate::real::Grad`] point also yields first
/// partials of every entry.
#[derive(Debug, Clone)]
pub struct LocalGeometry<T> {
    pub dim: usize,
    pub g: Tensor<T>,
    pub ginv: Tensor<T>,
    /// `gamma[[c, a, b]] = Γ^c_{ab}`.
    pub gamma: Tensor<T>,
    /// `dgamma[[k, c, a, b]] = ∂_k Γ^c_{ab}`.
    pub dgamma: Tensor<T>,
    pub ricci: Tensor<T>,
    pub scalar: T,
    pub schouten: Tensor<T>,
    pub j: T,
}

impl<T: Real> LocalGeometry<T> {
    pub fn at(chart: &Chart, x: &[T]) -> Result<Self> {
        Self::from_jet(&chart.jet(x)?)
    }

    pub fn from_jet(jet: &MetricJet<T>) -> Result<Self> {
        let d = jet.g.dim;
        let g = jet.g.clone();
        let ginv = invert(&g).ok_or_else(|| Error::InvalidChart("metric is singular".into()))?;
        let half = T::cst(0.5);

        // Γ_{e,ab} = ½(∂_a g_eb + ∂_b g_ea − ∂_e g_ab) and its partials
        let lower = Tensor::from_fn(d, |[e, a, b]| half * (jet.dg[[a, e, b]] + jet.dg[[b, e, a]] - jet.dg[[e, a, b]]));
        let dlower = Tensor::from_fn(d, |[k, e, a, b]| {
            half * (jet.ddg[[k, a, e, b]] + jet.ddg[[k, b, e, a]] - jet.ddg[[k, e, a, b]])
        });
        let gamma = Tensor::from_fn(d, |[c, a, b]| {
            let mut s = T::zero();
            for e in 0..d {
                s += ginv[[c, e]] * lower[[e, a, b]];
            }
            s
        });
        // ∂_k g^{ce} = −g^{cp} ∂_k g_pq g^{qe}, so ∂_kΓ^c_ab = g^{ce}(∂_kΓ_eab − ∂_k g_ep Γ^p_ab)
        let dgamma = Tensor::from_fn(d, |[k, c, a, b]| {
            let mut s = T::zero();
            for e in 0..d {
                let mut t = dlower[[k, e, a, b]];
                for p in 0..d {
                    t -= jet.dg[[k, e, p]] * gamma[[p, a, b]];
                }
                s += ginv[[c, e]] * t;
            }
            s
        });
        let ricci = Tensor::from_fn(d, |[b, dd]| {
            let mut s = T::zero();
            for a in 0..d {
                s += dgamma[[a, a, b, dd]] - dgamma[[b, a, a, dd]];
                for e in 0..d {
                    s += gamma[[a, a, e]] * gamma[[e, b, dd]] - gamma[[a, b, e]] * gamma[[e, a, dd]];
                }
            }
            s
        });
        let scalar = contract(&ginv, &ricci);

        let (schouten, j) = match &jet.low {
            None => {
                let df = T::cst((d - 2) as f64);
                let j = scalar / T::cst(2.0 * (d - 1) as f64);
                (Tensor::from_fn(d, |[a, b]| (ricci[[a, b]] - j * g[[a, b]]) / df), j)
            }
            Some(low) => {
                // Einstein scale: P = μ g_E; other scales by the usual transformation
                let ginv_e = invert(&low.base).ok_or_else(|| Error::InvalidChart("metric is singular".into()))?;
                let gamma_e = Tensor::from_fn(d, |[c, a, b]| {
                    let mut s = T::zero();
                    for e in 0..d {
                        s += ginv_e[[c, e]]
                            * half
                            * (low.dbase[[a, e, b]] + low.dbase[[b, e, a]] - low.dbase[[e, a, b]]);
                    }
                    s
                });
                let u = &low.domega;
                let mut u2 = T::zero();
                for a in 0..d {
                    for b in 0..d {
                        u2 += ginv_e[[a, b]] * u[a] * u[b];
                    }
                }
                let mu = T::cst(low.mu);
                let p = Tensor::from_fn(d, |[a, b]| {
                    let mut grad_u = low.ddomega[[a, b]];
                    for c in 0..d {
                        grad_u -= gamma_e[[c, a, b]] * u[c];
                    }
                    mu * low.base[[a, b]] - grad_u + u[a] * u[b] - half * u2 * low.base[[a, b]]
                });
                let j = contract(&ginv, &p);
                (p, j)
            }
        };
        Ok(LocalGeometry { dim: d, g, ginv, gamma, dgamma, ricci, scalar, schouten, j })
    }

    /// `R_{ab}{}^c{}_d`, indexed `[[a, b, c, d]]`.
    pub fn riemann(&self) -> Tensor<T> {
        let n = self.dim;
        let (gm, dg) = (&self.gamma, &self.dgamma);
        Tensor::from_fn(n, |[a, b, c, d]| {
            let mut s = dg[[a, c, b, d]] - dg[[b, c, a, d]];
            for e in 0..n {
                s += gm[[c, a, e]] * gm[[e, b, d]] - gm[[c, b, e]] * gm[[e, a, d]];
            }
            s
        })
    }

    /// `R_{abcd}` with the third index lowered.
    pub fn riemann_lowered(&self) -> Tensor<T> {
        lower_third(&self.riemann(), &self.g)
    }

    /// Fully lowered Weyl tensor; zero in dimensions one and two.
    pub fn weyl(&self) -> Tensor<T> {
        let n = self.dim;
        if n <= 2 {
            return Tensor::zeros(n, 4);
        }
        let r = self.riemann_lowered();
        let (g, p) = (&self.g, &self.schouten);
        Tensor::from_fn(n, |[a, b, c, d]| {
            r[[a, b, c, d]]
                - (g[[c, a]] * p[[b, d]] - g[[c, b]] * p[[a, d]] + g[[d, b]] * p[[a, c]] - g[[d, a]] * p[[b, c]])
        })
    }

    /// `P_a{}^c`, indexed `[[a, c]]`.
    pub fn schouten_mixed(&self) -> Tensor<T> {
        let n = self.dim;
        Tensor::from_fn(n, |[a, c]| {
            let mut s = T::zero();
            for e in 0..n {
                s += self.schouten[[a, e]] * self.ginv[[e, c]];
            }
            s
        })
    }
}

fn contract<T: Real>(ginv: &Tensor<T>, t: &Tensor<T>) -> T {
    let mut s = T::zero();
    for (a, b) in ginv.data.iter().zip(&t.data) {
        s += *a * *b;
    }
    s
}

fn lower_third<T: Real>(r: &Tensor<T>, g: &Tensor<T>) -> Tensor<T> {
    let n = g.dim;
    Tensor::from_fn(n, |[a, b, c, d]| {
        let mut s = T::zero();
        for e in 0..n {
            s += g[[c, e]] * r[[a, b, e, d]];
        }
        s
    })
}

/// The full curvature stack at a point.
#[derive(Debug, Clone)]
pub struct CurvaturePack {
    pub point: Vec<f64>,
    pub metric: Tensor<f64>,
    pub gamma: Tensor<f64>,
    pub riemann: Tensor<f64>,
    pub ricci: Tensor<f64>,
    pub scalar: f64,
    pub schouten: Tensor<f64>,
    pub j: f64,
    pub weyl: Tensor<f64>,
}

/// Residuals of the algebraic identities a curvature pack must satisfy.
#[derive(Debug, Clone, Copy)]
pub struct IdentityResiduals {
    pub ricci_split: f64,
    pub weyl_trace: f64,
    pub riemann_split: f64,
    pub bianchi: f64,
}

impl IdentityResiduals {
    pub fn max(&self) -> f64 {
        self.ricci_split.max(self.weyl_trace).max(self.riemann_split).max(self.bianchi)
    }
}

impl CurvaturePack {
    pub fn dim(&self) -> usize {
        self.metric.dim
    }

    /// Identity residuals, each relative to the size of the curvature involved.
    pub fn identity_residuals(&self) -> IdentityResiduals {
        let n = self.dim();
        let g = &self.metric;
        let ginv = invert(g).expect("metric is invertible");
        let scale = self.riemann.max_abs().max(self.ricci.max_abs()).max(1.0);
        let r = lower_third(&self.riemann, g);

        let ricci_split = if n >= 3 {
            let rebuilt = Tensor::from_fn(n, |[a, b]| (n - 2) as f64 * self.schouten[[a, b]] + g[[a, b]] * self.j);
            rebuilt.max_abs_diff(&self.ricci)
        } else {
            0.0
        };
        let mut weyl_trace = 0.0f64;
        for (x, y) in [(0, 2), (0, 3), (1, 2), (1, 3), (0, 1), (2, 3)] {
            for p in 0..n {
                for q in 0..n {
                    let mut s = 0.0;
                    for i in 0..n {
                        for k in 0..n {
                            let mut ix = [0; 4];
                            let (mut slot, free) = (0, [p, q]);
                            for (pos, v) in ix.iter_mut().enumerate() {
                                if pos == x {
                                    *v = i;
                                } else if pos == y {
                                    *v = k;
                                } else {
                                    *v = free[slot];
                                    slot += 1;
                                }
                            }
                            s += ginv[[i, k]] * self.weyl[ix];
                        }
                    }
                    weyl_trace = weyl_trace.max(s.abs());
                }
            }
        }
        let riemann_split = if n >= 3 {
            let (p, c) = (&self.schouten, &self.weyl);
            let rebuilt = Tensor::from_fn(n, |[a, b, cc, d]| {
                c[[a, b, cc, d]] + g[[cc, a]] * p[[b, d]] - g[[cc, b]] * p[[a, d]] + g[[d, b]] * p[[a, cc]]
                    - g[[d, a]] * p[[b, cc]]
            });
            rebuilt.max_abs_diff(&r)
        } else {
            0.0
        };
        let mut bianchi = 0.0f64;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        let s = r[[a, b, c, d]] + r[[b, c, a, d]] + r[[c, a, b, d]];
                        bianchi = bianchi.max(s.abs());
                    }
                }
            }
        }
        IdentityResiduals {
            ricci_split: ricci_split / scale,
            weyl_trace: weyl_trace / scale,
            riemann_split: riemann_split / scale,
            bianchi: bianchi / scale,
        }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "point": self.point,
            "metric": self.metric.to_json(),
            "christoffel": self.gamma.to_json(),
            "riemann": self.riemann.to_json(),
            "ricci": self.ricci.to_json(),
            "scalar": self.scalar,
            "schouten": self.schouten.to_json(),
            "J": self.j,
            "weyl": self.weyl.to_json(),
        })
    }
}

pub fn curvature(chart: &Chart, x: &[f64]) -> Result<CurvaturePack> {
    chart.check_point(x)?;
    let geo = LocalGeometry::at(chart, x)?;
    Ok(CurvaturePack {
        point: x.to_vec(),
        riemann: geo.riemann(),
        weyl: geo.weyl(),
        metric: geo.g,
        gamma: geo.gamma,
        ricci: geo.ricci,
        scalar: geo.scalar,
        schouten: geo.schouten,
        j: geo.j,
    })
}

/// `max |Ric_ab − (d−1)λ g_ab|` at `x`.
pub fn einstein_residual(chart: &Chart, lambda: f64, x: &[f64]) -> Result<f64> {
    let d = chart.dim();
    if d < 2 {
        return Err(Error::Invalid("einstein residual needs dimension at least 2".into()));
    }
    chart.check_point(x)?;
    let geo = LocalGeometry::at(chart, x)?;
    let target = geo.g.map(|v| (d - 1) as f64 * lambda * v);
    Ok(geo.ricci.max_abs_diff(&target))
}
