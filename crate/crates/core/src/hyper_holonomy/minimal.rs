//! Pairs of almost-Einstein structures: the generalized mean curvature of one
//! scale singularity set with respect to the other structure, and the
//! intersection of two singularity sets.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::surface::{generalized_mean_curvature, normal_tractor, LevelSurface};
use crate::almost_einstein::{extract_zeros, AEStructure};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::geometry::{Chart, LocalGeometry};
use crate::tractor::{inverse_metric, pair, SecondJet};

/// Samples of `σ₁` closer to zero than this are treated as lying on `Σ₁`.
const AWAY_FROM_ZERO: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct MeanCurvatureReport {
    pub samples: usize,
    /// Samples dropped for lying on the zero set of the first structure.
    pub skipped: usize,
    pub values: Vec<f64>,
    pub mean: f64,
    pub spread: f64,
    /// `−h(K₁, K₂)`.
    pub expected: f64,
    /// Largest `|−h(K₁, N) + h(K₁, K₂)|` over the samples.
    pub deviation: f64,
    /// Largest slot difference between `N` and `K₂ / √(−S₂)` on the surface.
    pub normal_mismatch: f64,
}

/// Evenly spaced subsample of at most `n` items.
fn thin<T: Clone>(v: &[T], n: usize) -> Vec<T> {
    if v.len() <= n || n == 0 {
        return v.to_vec();
    }
    (0..n).map(|i| v[i * v.len() / n].clone()).collect()
}

/// `−h(K₁, N)` over samples of `Σ₂ = {σ₂ = 0}`, where `N` is the normal
/// tractor of `Σ₂`. When `S₂ < 0` this is constant and equals `−h(K₁, K₂)`
/// up to the normalization of `K₂`.
pub fn mean_curvature_constancy(
    k1: &AEStructure,
    k2: &AEStructure,
    samples: usize,
    cfg: &Config,
) -> Result<MeanCurvatureReport> {
    if k1.chart.name() != k2.chart.name() {
        return Err(Error::ScaleMismatch { left: k1.chart.name().into(), right: k2.chart.name().into() });
    }
    if k2.s >= 0.0 {
        return Err(Error::Invalid(format!("the surface structure needs S < 0, got {}", k2.s)));
    }
    let chart = &k1.chart;
    let surf = LevelSurface::extract(chart, &k2.sigma, cfg.grid)?;
    if surf.is_empty() {
        return Err(Error::Invalid("the zero set of σ₂ is empty on this chart".into()));
    }
    let norm = (-k2.s).sqrt();
    let center = chart.center();
    let ginv0 = inverse_metric(chart, &center)?;
    let expected = -pair(&ginv0, &k1.tractor_at(&center)?.slots(), &k2.tractor_at(&center)?.slots()) / norm;
    let mut values = Vec::new();
    let mut skipped = 0;
    let mut normal_mismatch = 0.0f64;
    for p in thin(&surf.points, samples) {
        if k1.sigma.eval(&p)?.abs() < AWAY_FROM_ZERO {
            skipped += 1;
            continue;
        }
        values.push(generalized_mean_curvature(k1, &surf, &p)?);
        let n = normal_tractor(chart, &surf, &p)?.slots();
        let k = k2.tractor_at(&p)?.slots();
        for (a, b) in n.iter().zip(&k) {
            normal_mismatch = normal_mismatch.max((a - b / norm).abs());
        }
    }
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let mean = values.iter().sum::<f64>() / values.len().max(1) as f64;
    let deviation = values.iter().map(|v| (v - expected).abs()).fold(0.0, f64::max);
    Ok(MeanCurvatureReport {
        samples: values.len(),
        skipped,
        spread: if values.is_empty() { 0.0 } else { hi - lo },
        values,
        mean,
        expected,
        deviation,
        normal_mismatch,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntersectionStatus {
    Checked,
    Empty,
    /// The sampled intersection is too small or too close to tangential to
    /// tell a surface from a (double) point.
    Indeterminate,
}

#[derive(Debug, Clone, Serialize)]
pub struct IntersectionReport {
    pub status: IntersectionStatus,
    pub samples: usize,
    /// Largest trace-free second fundamental form of `Σ₁ ∩ Σ₂` inside `Σ₂`.
    pub umbilicity: f64,
    /// Smallest `sin` of the angle between `∇σ₁` and `∇σ₂` on the intersection.
    pub transversality: f64,
    /// Coordinate diameter of the samples.
    pub diameter: f64,
    /// `h(K₁, K₂)`.
    pub pairing: f64,
}

/// Newton iteration onto `{σ₁ = σ₂ = 0}` with minimum-norm steps.
fn project(j1: &SecondJet, j2: &SecondJet, x0: &[f64]) -> Option<Vec<f64>> {
    let mut x = x0.to_vec();
    for _ in 0..50 {
        let (f1, g1, _) = j1.eval(&x).ok()?;
        let (f2, g2, _) = j2.eval(&x).ok()?;
        if f1.abs().max(f2.abs()) < 1e-14 {
            return Some(x);
        }
        let j = DMatrix::from_row_slice(2, x.len(), &[g1, g2].concat());
        let jjt = (&j * j.transpose()).try_inverse()?;
        let step = j.transpose() * (jjt * DVector::from_vec(vec![f1, f2]));
        for (xi, s) in x.iter_mut().zip(step.iter()) {
            *xi -= s;
        }
    }
    let (f1, _, _) = j1.eval(&x).ok()?;
    let (f2, _, _) = j2.eval(&x).ok()?;
    (f1.abs().max(f2.abs()) < 1e-11).then_some(x)
}

/// `(umbilicity, sin angle)` of `Σ₁ ∩ Σ₂` as a hypersurface of `Σ₂` at `p`.
fn intersection_point(chart: &Chart, j1: &SecondJet, j2: &SecondJet, p: &[f64]) -> Result<(f64, f64)> {
    let d = chart.dim();
    let geo = LocalGeometry::at(chart, p)?;
    let (_, d1, dd1) = j1.eval(p)?;
    let (_, d2, dd2) = j2.eval(p)?;
    let g = DMatrix::from_fn(d, d, |a, b| geo.g[[a, b]]);
    let ginv = DMatrix::from_fn(d, d, |a, b| geo.ginv[[a, b]]);
    let hess = |ds: &[f64], dds: &crate::geometry::Tensor<f64>| {
        DMatrix::from_fn(d, d, |a, b| dds[[a, b]] - (0..d).map(|c| geo.gamma[[c, a, b]] * ds[c]).sum::<f64>())
    };
    let (h1, h2) = (hess(&d1, &dd1), hess(&d2, &dd2));
    let ip = |u: &DVector<f64>, v: &DVector<f64>| (u.transpose() * &g * v)[(0, 0)];
    let v1 = &ginv * DVector::from_vec(d1);
    let v2 = &ginv * DVector::from_vec(d2);
    let n2 = &v2 / ip(&v2, &v2).sqrt();
    let beta = ip(&v1, &n2);
    let perp = &v1 - &n2 * beta;
    let alpha = ip(&perp, &perp).sqrt();
    let sin = alpha / ip(&v1, &v1).sqrt();
    let nu = &perp / alpha;
    // g-orthonormal tangent frame of the intersection
    let mut frame: Vec<DVector<f64>> = vec![n2.clone(), nu];
    for a in 0..d {
        let mut e = DVector::from_fn(d, |i, _| if i == a { 1.0 } else { 0.0 });
        for f in &frame {
            e -= f * ip(f, &e);
        }
        let len = ip(&e, &e).sqrt();
        if len > 1e-8 && frame.len() < d {
            frame.push(e / len);
        }
    }
    let tangent = &frame[2..];
    let k = tangent.len();
    let gn2 = ip(&v2, &v2).sqrt();
    // ⟨∇_X Y, ν⟩ from X(σ₁) = X(σ₂) = 0 along the intersection
    let ii = DMatrix::from_fn(k, k, |i, j| {
        let (x, y) = (&tangent[i], &tangent[j]);
        let along_n2 = -(x.transpose() * &h2 * y)[(0, 0)] / gn2;
        (-(x.transpose() * &h1 * y)[(0, 0)] - beta * along_n2) / alpha
    });
    if k == 0 {
        return Ok((0.0, sin));
    }
    let mean = ii.trace() / k as f64;
    let tf = ii - DMatrix::identity(k, k) * mean;
    Ok((tf.amax(), sin))
}

/// Umbilicity of `Σ₁ ∩ Σ₂` inside `Σ₂`, sampled by projecting zeros of `σ₂`
/// onto the intersection.
pub fn intersection_umbilicity(k1: &AEStructure, k2: &AEStructure, cfg: &Config) -> Result<IntersectionReport> {
    let chart = &k1.chart;
    if chart.dim() < 3 {
        return Err(Error::Invalid("intersections need dimension at least 3".into()));
    }
    let center = chart.center();
    let pairing = pair(&inverse_metric(chart, &center)?, &k1.tractor_at(&center)?.slots(), &k2.tractor_at(&center)?.slots());
    let zeros = extract_zeros(&k2.sigma, chart.bounds(), cfg.grid)?;
    let spacing = chart
        .bounds()
        .iter()
        .map(|(lo, hi)| (hi - lo) / (zeros.grid - 1) as f64)
        .fold(f64::INFINITY, f64::min);
    let (j1, j2) = (k1.sigma_jet(), k2.sigma_jet());
    let mut cands: Vec<(f64, Vec<f64>)> = zeros
        .crossings
        .iter()
        .filter_map(|p| k1.sigma.eval(p).ok().map(|v| (v.abs(), p.clone())))
        .collect();
    cands.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut pts: Vec<Vec<f64>> = Vec::new();
    for (_, p) in cands.into_iter().take(400) {
        let Some(q) = project(j1, j2, &p) else { continue };
        if !chart.contains(&q) || pts.iter().any(|r| r.iter().zip(&q).all(|(a, b)| (a - b).abs() < 0.25 * spacing)) {
            continue;
        }
        pts.push(q);
        if pts.len() >= 50 {
            break;
        }
    }
    let mut report = IntersectionReport {
        status: IntersectionStatus::Empty,
        samples: pts.len(),
        umbilicity: 0.0,
        transversality: 1.0,
        diameter: 0.0,
        pairing,
    };
    if pts.is_empty() {
        return Ok(report);
    }
    for (i, p) in pts.iter().enumerate() {
        for q in &pts[i + 1..] {
            let dist = p.iter().zip(q).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            report.diameter = report.diameter.max(dist);
        }
        let (u, s) = intersection_point(chart, j1, j2, p)?;
        report.umbilicity = report.umbilicity.max(u);
        report.transversality = report.transversality.min(s);
    }
    report.status = if report.transversality < 1e-3 || report.diameter < 2.0 * spacing {
        IntersectionStatus::Indeterminate
    } else {
        IntersectionStatus::Checked
    };
    Ok(report)
}
