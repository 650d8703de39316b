//! Level hypersurfaces `{σ = 0}` and their tractor data: the normal tractor
//! `N = (0, n_a, −H)`, the trace-free second fundamental form, and the
//! generalized mean curvature `−h(K, N)`.

use serde::Serialize;

use crate::almost_einstein::{extract_zeros, AEStructure};
use crate::error::{Error, Result};
use crate::fields::ScalarExpr;
use crate::geometry::{Chart, LocalGeometry, Tensor};
use crate::tractor::{pair, SecondJet, TractorValue};

/// Smallest `|∇σ|_g` accepted at a surface sample.
pub const MIN_GRADIENT: f64 = 1e-6;

/// The zero set of a weight-one density, sampled at refined points.
#[derive(Debug, Clone)]
pub struct LevelSurface {
    pub sigma: ScalarExpr,
    pub points: Vec<Vec<f64>>,
    /// Name of the chart (scale) the conormal data refers to.
    pub scale: String,
    jet: SecondJet,
}

/// Extrinsic data at one surface point, in the chart's scale.
#[derive(Debug, Clone, Serialize)]
pub struct SurfacePoint {
    pub point: Vec<f64>,
    /// Unit conormal `n_a = ∇_aσ / |∇σ|`.
    pub normal: Vec<f64>,
    pub grad_norm: f64,
    /// Mean curvature `H = g^{ab} II_ab / (d − 1)`.
    pub mean_curvature: f64,
    /// Max-norm of `II_ab − H (g_ab − n_a n_b)`.
    pub umbilicity: f64,
}

impl LevelSurface {
    /// Samples `{σ = 0}` from sign changes on an `n`-per-axis grid.
    pub fn extract(chart: &Chart, sigma: &ScalarExpr, n: usize) -> Result<LevelSurface> {
        let zeros = extract_zeros(sigma, chart.bounds(), n)?;
        LevelSurface::from_points(chart, sigma, zeros.crossings)
    }

    /// Wraps given points, checking that each is a regular zero.
    pub fn from_points(chart: &Chart, sigma: &ScalarExpr, points: Vec<Vec<f64>>) -> Result<LevelSurface> {
        let s = LevelSurface { sigma: sigma.clone(), points, scale: chart.name().to_string(), jet: SecondJet::new(sigma, chart.dim()) };
        for p in &s.points {
            let (v, ds, _) = s.jet.eval(p)?;
            if v.abs() > 1e-8 {
                return Err(Error::Invalid(format!("σ = {v:e} at surface point {p:?}")));
            }
            let ginv = crate::tractor::inverse_metric(chart, p)?;
            let g = grad_norm(&ginv, &ds);
            if g < MIN_GRADIENT {
                return Err(Error::SingularLevelSet { point: p.clone(), grad: g });
            }
        }
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Extrinsic data at `p`, which need not be one of the stored samples.
    pub fn at(&self, chart: &Chart, p: &[f64]) -> Result<SurfacePoint> {
        surface_point(chart, &self.jet, p)
    }
}

fn grad_norm(ginv: &Tensor<f64>, ds: &[f64]) -> f64 {
    let d = ds.len();
    let mut s = 0.0;
    for a in 0..d {
        for b in 0..d {
            s += ginv[[a, b]] * ds[a] * ds[b];
        }
    }
    s.max(0.0).sqrt()
}

pub(crate) fn surface_point(chart: &Chart, jet: &SecondJet, p: &[f64]) -> Result<SurfacePoint> {
    chart.check_point(p)?;
    let d = chart.dim();
    if d < 2 {
        return Err(Error::Invalid("hypersurfaces need dimension at least 2".into()));
    }
    let geo = LocalGeometry::at(chart, p)?;
    let (_, ds, dds) = jet.eval(p)?;
    let gn = grad_norm(&geo.ginv, &ds);
    if gn < MIN_GRADIENT {
        return Err(Error::SingularLevelSet { point: p.to_vec(), grad: gn });
    }
    let n: Vec<f64> = ds.iter().map(|v| v / gn).collect();
    let n_up: Vec<f64> = (0..d).map(|a| (0..d).map(|b| geo.ginv[[a, b]] * n[b]).sum()).collect();
    let hess = Tensor::from_fn(d, |[a, b]| dds[[a, b]] - (0..d).map(|c| geo.gamma[[c, a, b]] * ds[c]).sum::<f64>());
    // Π_a^b = δ_a^b − n_a n^b
    let proj = Tensor::from_fn(d, |[a, b]| if a == b { 1.0 } else { 0.0 } - n[a] * n_up[b]);
    let ph = Tensor::from_fn(d, |[a, e]| (0..d).map(|c| proj[[a, c]] * hess[[c, e]]).sum::<f64>());
    let ii = Tensor::from_fn(d, |[a, b]| (0..d).map(|e| ph[[a, e]] * proj[[b, e]]).sum::<f64>() / gn);
    let mut tr = 0.0;
    for a in 0..d {
        for b in 0..d {
            tr += geo.ginv[[a, b]] * ii[[a, b]];
        }
    }
    let h = tr / (d - 1) as f64;
    let tf = Tensor::from_fn(d, |[a, b]| ii[[a, b]] - h * (geo.g[[a, b]] - n[a] * n[b]));
    Ok(SurfacePoint { point: p.to_vec(), normal: n, grad_norm: gn, mean_curvature: h, umbilicity: tf.max_abs() })
}

/// `N = (0, n_a, −H)` at a surface point.
pub fn normal_tractor(chart: &Chart, surf: &LevelSurface, p: &[f64]) -> Result<TractorValue> {
    if surf.scale != chart.name() {
        return Err(Error::ScaleMismatch { left: surf.scale.clone(), right: chart.name().to_string() });
    }
    let sp = surf.at(chart, p)?;
    Ok(TractorValue::new(0.0, sp.normal, -sp.mean_curvature, chart.name()))
}

/// Max-norm of the trace-free second fundamental form at `p`.
pub fn umbilicity_residual(chart: &Chart, surf: &LevelSurface, p: &[f64]) -> Result<f64> {
    Ok(surf.at(chart, p)?.umbilicity)
}

/// `−h(K, N(p))`.
pub fn generalized_mean_curvature(k: &AEStructure, surf: &LevelSurface, p: &[f64]) -> Result<f64> {
    let n = normal_tractor(&k.chart, surf, p)?;
    let kv = k.tractor_at(p)?;
    let ginv = crate::tractor::inverse_metric(&k.chart, p)?;
    Ok(-pair(&ginv, &kv.slots(), &n.slots()))
}
