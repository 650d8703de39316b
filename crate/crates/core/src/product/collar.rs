use super::schouten_constant;
use crate::error::{Error, Result};
use crate::fields::ScalarExpr;
use crate::geometry::Chart;

/// Collar samples stay above this fraction of `r_max`.
const R_MIN_FRACTION: f64 = 0.05;
const FACTOR_TOL: f64 = 1e-8;

/// The largest radius used by default: 90% of the first zero of `1 − μr²/2`.
pub fn default_r_max(mu: f64) -> f64 {
    0.9 * (2.0 / mu).sqrt()
}

fn check(chart1: &Chart, chart2: Option<&Chart>, mu: f64, r_max: f64) -> Result<()> {
    if !(mu > 0.0 && r_max > 0.0) || mu * r_max * r_max / 2.0 >= 1.0 {
        return Err(Error::BadInterval { mu, r_max });
    }
    let (l1, r1) = schouten_constant(chart1)?;
    if r1 > FACTOR_TOL {
        return Err(Error::NotEinsteinFactor { residual: r1 });
    }
    let l2 = match chart2 {
        Some(c) => {
            let (l2, r2) = schouten_constant(c)?;
            if r2 > FACTOR_TOL {
                return Err(Error::NotEinsteinFactor { residual: r2 });
            }
            -l2
        }
        None => mu,
    };
    if (l1 - mu).abs() > FACTOR_TOL || (l2 - mu).abs() > FACTOR_TOL {
        return Err(Error::ScalarMismatch { mu1: l1, mu2: l2 });
    }
    Ok(())
}

/// Assembles `w₀ dx₀² + w₁ g₁ + w₂ g₂` with factor coordinates after `x₀`.
fn warped(
    name: String,
    r_bounds: (f64, f64),
    w: [ScalarExpr; 3],
    chart1: &Chart,
    chart2: Option<&Chart>,
) -> Result<Chart> {
    let m1 = chart1.dim();
    let m2 = chart2.map_or(0, |c| c.dim());
    let d = 1 + m1 + m2;
    let mut metric = vec![vec![ScalarExpr::zero(); d]; d];
    metric[0][0] = w[0].clone();
    let mut bounds = vec![r_bounds];
    let mut periodic = vec![false];
    let mut off = 1;
    for (c, wi) in [(Some(chart1), &w[1]), (chart2, &w[2])] {
        let Some(c) = c else { continue };
        for (i, row) in c.metric().into_iter().enumerate() {
            for (j, e) in row.into_iter().enumerate() {
                metric[off + i][off + j] = wi * e.shift_vars(off);
            }
        }
        bounds.extend_from_slice(c.bounds());
        periodic.extend_from_slice(c.periodic());
        off += c.dim();
    }
    let mu = (d <= 2).then_some(-0.5);
    Chart::new(name, bounds, metric, mu)?.with_periodic(periodic)
}

/// `r⁻²(dr² + (1 − μr²/2)² g₁ + (1 + μr²/2)² g₂)` on `r ∈ [0.05 r_max, r_max]`,
/// with `r` the first coordinate. Without a second factor its term is dropped.
pub fn build_collar(chart1: &Chart, chart2: Option<&Chart>, mu: f64, r_max: f64) -> Result<Chart> {
    check(chart1, chart2, mu, r_max)?;
    let r = ScalarExpr::var(0);
    let inv2 = 1.0 / r.powi(2);
    let q = 0.5 * mu * r.powi(2);
    let w = [inv2.clone(), &inv2 * (1.0 - &q).powi(2), &inv2 * (1.0 + &q).powi(2)];
    let name = match chart2 {
        Some(c) => format!("collar({},{})", chart1.name(), c.name()),
        None => format!("collar({})", chart1.name()),
    };
    warped(name, (R_MIN_FRACTION * r_max, r_max), w, chart1, chart2)
}

/// The same collar in `s = ln(√(μ/2) r)`: `ds² + 2μ(sinh²s g₁ + cosh²s g₂)`.
pub fn collar_log_chart(chart1: &Chart, chart2: Option<&Chart>, mu: f64, r_max: f64) -> Result<Chart> {
    check(chart1, chart2, mu, r_max)?;
    let s = ScalarExpr::var(0);
    let c = (mu / 2.0).sqrt();
    let w = [ScalarExpr::one(), 2.0 * mu * s.sinh().powi(2), 2.0 * mu * s.cosh().powi(2)];
    let bounds = ((c * R_MIN_FRACTION * r_max).ln(), (c * r_max).ln());
    warped(format!("collar-log({})", chart1.name()), bounds, w, chart1, chart2)
}

/// Max over `points` (collar coordinates) of the difference between the
/// collar metric and the pull-back of the log-form metric under `r ↦ s`.
pub fn collar_form_residual(collar: &Chart, log: &Chart, mu: f64, points: &[Vec<f64>]) -> Result<f64> {
    let c = (mu / 2.0).sqrt();
    let mut worst = 0.0f64;
    for p in points {
        let r = p[0];
        let mut q = p.clone();
        q[0] = (c * r).ln();
        let g = collar.metric_at(p)?;
        let h = log.metric_at(&q)?;
        // ds/dr = 1/r
        let jac = |i: usize| if i == 0 { 1.0 / r } else { 1.0 };
        for i in 0..g.nrows() {
            for j in 0..g.ncols() {
                worst = worst.max((g[(i, j)] - jac(i) * jac(j) * h[(i, j)]).abs());
            }
        }
    }
    Ok(worst)
}
