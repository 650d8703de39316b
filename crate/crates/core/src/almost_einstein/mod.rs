//! Almost-Einstein structures: densities `σ` with
//! `trace-free(∇_a∇_b σ + P_ab σ) = 0`, equivalently parallel tractors
//! `I = (1/d) D σ`.

mod classify;
mod parallel;
mod zeros;

pub use classify::{classify, Classification, ScaleType};
pub use parallel::{parallel_space, parallel_space_with, primary_residual_of_parallel, ParallelSpace, ParallelSpaceOptions};
pub use zeros::{effective_grid, extract_zeros, SingularityKind, SingularitySet};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::fields::ScalarExpr;
use crate::geometry::{Chart, LocalGeometry, Tensor};
use crate::real::{Grad, Real};
use crate::tractor::{derivative_from_jet, pair, thomas_d_at, SecondJet, TractorValue};

/// Points used to certify pointwise identities over a chart.
pub fn verification_points(chart: &Chart) -> Vec<Vec<f64>> {
    let n = match chart.dim() {
        1 => 33,
        2 => 13,
        3 => 7,
        4 => 5,
        5 => 4,
        _ => 3,
    };
    chart.grid(n)
}

/// `trace-free(∇∇σ + Pσ)` components and a magnitude scale for relative tests.
fn primary_tensor<T: Real>(geo: &LocalGeometry<T>, s: T, ds: &[T], dds: &Tensor<T>) -> (Tensor<T>, f64) {
    let d = geo.dim;
    let mut scale = 0.0f64;
    let t = Tensor::from_fn(d, |[a, b]| {
        let mut h = dds[[a, b]];
        for c in 0..d {
            h -= geo.gamma[[c, a, b]] * ds[c];
        }
        let ps = geo.schouten[[a, b]] * s;
        scale = scale.max(h.value().abs()).max(ps.value().abs());
        h + ps
    });
    let mut tr = T::zero();
    for a in 0..d {
        for b in 0..d {
            tr += geo.ginv[[a, b]] * t[[a, b]];
        }
    }
    let tr = tr / T::cst(d as f64);
    (Tensor::from_fn(d, |[a, b]| t[[a, b]] - tr * geo.g[[a, b]]), scale)
}

/// Max-norm of `trace-free(∇_a∇_b σ + P_ab σ)` at `x`. In dimensions one and
/// two that equation is empty, and the residual reported is instead
/// `max |∇((1/d) D σ)|`.
pub fn ae_residual(chart: &Chart, sigma: &ScalarExpr, x: &[f64]) -> Result<f64> {
    chart.check_point(x)?;
    let jet = SecondJet::new(sigma, chart.dim());
    Ok(residuals_at(chart, &jet, x)?.0)
}

/// (residual, its scale, max |∇I|, I) at one point.
fn residuals_at(chart: &Chart, jet: &SecondJet, x: &[f64]) -> Result<(f64, f64, f64, Vec<f64>)> {
    let d = chart.dim();
    let xg = Grad::seed(x);
    let geo_g = LocalGeometry::at(chart, &xg)?;
    let (s, ds, dds) = jet.eval(&xg)?;
    let inv_d = Grad::cst(1.0 / d as f64);
    let i: Vec<Grad> = thomas_d_at(&geo_g, s, &ds, &dds, 1.0).into_iter().map(|v| v * inv_d).collect();
    let geo = LocalGeometry::at(chart, x)?;
    let nabla = derivative_from_jet(&geo, &i);
    let par = nabla.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let vals: Vec<f64> = i.iter().map(|v| v.v).collect();
    let scale = vals.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    if d <= 2 {
        return Ok((par, scale, par, vals));
    }
    let (sv, dsv, ddsv) = (s.v, ds.iter().map(|v| v.v).collect::<Vec<_>>(), dds.values());
    let (tf, tscale) = primary_tensor(&geo, sv, &dsv, &ddsv);
    Ok((tf.max_abs(), tscale.max(1.0), par, vals))
}

/// A verified almost-Einstein structure on a chart.
#[derive(Debug, Clone)]
pub struct AEStructure {
    pub chart: Chart,
    pub sigma: ScalarExpr,
    /// `S = −h(I, I)`, evaluated at the chart center.
    pub s: f64,
    /// Largest `trace-free(∇∇σ + Pσ)` over the verification points.
    pub residual: f64,
    /// Largest `|∇I|` over the verification points.
    pub parallel_residual: f64,
    /// Spread of `−h(I, I)` over the verification points.
    pub s_spread: f64,
    jet: SecondJet,
}

impl AEStructure {
    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    /// `I = (1/d) D σ` at `x`, in the chart's scale.
    pub fn tractor_at(&self, x: &[f64]) -> Result<TractorValue> {
        let geo = LocalGeometry::at(&self.chart, x)?;
        let (s, ds, dds) = self.jet.eval(x)?;
        let d = self.dim() as f64;
        let slots: Vec<f64> = thomas_d_at(&geo, s, &ds, &dds, 1.0).into_iter().map(|v| v / d).collect();
        Ok(TractorValue::from_slots(&slots, self.chart.name()))
    }

    /// `max |∇_a I|` at `x`.
    pub fn parallel_residual_at(&self, x: &[f64]) -> Result<f64> {
        Ok(residuals_at(&self.chart, &self.jet, x)?.2)
    }

    pub fn sigma_jet(&self) -> &SecondJet {
        &self.jet
    }

    /// `|∇σ|_g` at `x`.
    pub fn gradient_norm(&self, x: &[f64]) -> Result<f64> {
        let (_, ds, _) = self.jet.eval(x)?;
        let g = self.chart.metric_at(x)?;
        let ginv = g.try_inverse().ok_or_else(|| Error::InvalidChart("metric is singular".into()))?;
        let d = self.dim();
        let mut s = 0.0;
        for a in 0..d {
            for b in 0..d {
                s += ginv[(a, b)] * ds[a] * ds[b];
            }
        }
        Ok(s.max(0.0).sqrt())
    }

    /// The structure for `c·σ`.
    pub fn scaled(&self, c: f64) -> AEStructure {
        let sigma = c * &self.sigma;
        AEStructure {
            jet: SecondJet::new(&sigma, self.dim()),
            sigma,
            s: c * c * self.s,
            residual: c.abs() * self.residual,
            parallel_residual: c.abs() * self.parallel_residual,
            s_spread: c * c * self.s_spread,
            chart: self.chart.clone(),
        }
    }
}

/// Verifies `σ` over the chart and builds its structure.
pub fn make_ae(chart: &Chart, sigma: &ScalarExpr, cfg: &Config) -> Result<AEStructure> {
    let d = chart.dim();
    let jet = SecondJet::new(sigma, d);
    let mut residual = 0.0f64;
    let mut parallel = 0.0f64;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for x in verification_points(chart) {
        let (r, scale, par, i) = residuals_at(chart, &jet, &x)?;
        if r > cfg.tol * scale {
            return Err(Error::NotAlmostEinstein { residual: r, tol: cfg.tol * scale });
        }
        residual = residual.max(r);
        let iscale = i.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        if par > cfg.loose_tol * iscale {
            return Err(Error::NotParallel { residual: par, tol: cfg.loose_tol * iscale });
        }
        parallel = parallel.max(par);
        let geo = LocalGeometry::at(chart, &x)?;
        let s = -pair(&geo.ginv, &i, &i);
        lo = lo.min(s);
        hi = hi.max(s);
    }
    let center = chart.center();
    let geo = LocalGeometry::at(chart, &center)?;
    let (s0, ds0, dds0) = jet.eval(&center)?;
    let i0: Vec<f64> = thomas_d_at(&geo, s0, &ds0, &dds0, 1.0).into_iter().map(|v| v / d as f64).collect();
    let s = -pair(&geo.ginv, &i0, &i0);
    Ok(AEStructure {
        chart: chart.clone(),
        sigma: sigma.clone(),
        s,
        residual,
        parallel_residual: parallel,
        s_spread: hi - lo,
        jet,
    })
}

#[cfg(test)]
mod tests;
