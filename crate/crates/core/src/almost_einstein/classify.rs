use serde::Serialize;

use super::zeros::{extract_zeros, SingularityKind, SingularitySet};
use super::AEStructure;
use crate::config::Config;
use crate::conformal::rescale_chart_unchecked;
use crate::error::Result;
use crate::geometry::einstein_residual;
use crate::hyper_holonomy::surface_point;

/// `|S|` below this is Ricci-flat type.
pub const S_ZERO_BAND: f64 = 1e-9;
/// Einstein-residual samples are drawn where `|σ|` exceeds this.
const EINSTEIN_SIGMA_MIN: f64 = 0.1;
const EINSTEIN_SAMPLES: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScaleType {
    /// `S > 0`: positive scalar curvature off Σ, Σ empty.
    Positive,
    /// `S = 0`: Ricci-flat, Σ isolated points.
    RicciFlat,
    /// `S < 0`: negative scalar curvature, Σ a totally umbilic hypersurface.
    Negative,
}

impl ScaleType {
    pub fn of(s: f64) -> ScaleType {
        if s.abs() < S_ZERO_BAND {
            ScaleType::RicciFlat
        } else if s > 0.0 {
            ScaleType::Positive
        } else {
            ScaleType::Negative
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Classification {
    pub s: f64,
    pub scale_type: ScaleType,
    pub singular_set: SingularitySet,
    /// Largest `|∇σ|` at isolated zeros.
    pub gradient_at_zeros: f64,
    /// Largest trace-free second fundamental form over hypersurface samples.
    pub umbilicity: Option<f64>,
    pub umbilicity_samples: usize,
    /// Hypersurface samples skipped for lying within a grid spacing of the box boundary.
    pub boundary_skipped: usize,
    /// Largest `|Ric(σ⁻²g) − (d−1) S σ⁻²g|` where `|σ| > 0.1`.
    pub einstein_residual: Option<f64>,
    pub einstein_samples: usize,
    /// Whether the zero set and Einstein data agree with the sign of `S`.
    pub consistent: bool,
    pub notes: Vec<String>,
}

/// Extracts the scale singularity set and checks it against the sign of `S`.
pub fn classify(ae: &AEStructure, cfg: &Config) -> Result<Classification> {
    let chart = &ae.chart;
    let d = chart.dim();
    let s = ae.s;
    let scale_type = ScaleType::of(s);
    let set = extract_zeros(&ae.sigma, chart.bounds(), cfg.grid)?;
    let mut notes = Vec::new();
    let mut consistent = true;

    let mut gradient_at_zeros = 0.0f64;
    for p in &set.isolated {
        gradient_at_zeros = gradient_at_zeros.max(ae.gradient_norm(p)?);
    }

    let spacing: Vec<f64> = chart.bounds().iter().map(|(lo, hi)| (hi - lo) / (set.grid - 1) as f64).collect();
    let mut umbilicity = None;
    let mut samples = 0;
    let mut skipped = 0;
    if d >= 2 && !set.crossings.is_empty() {
        let mut worst = 0.0f64;
        for p in &set.crossings {
            let near_edge = p.iter().zip(chart.bounds()).zip(&spacing).any(|((&x, &(lo, hi)), &h)| x - lo < h || hi - x < h);
            if near_edge {
                skipped += 1;
                continue;
            }
            worst = worst.max(surface_point(chart, ae.sigma_jet(), p)?.umbilicity);
            samples += 1;
        }
        if samples > 0 {
            umbilicity = Some(worst);
        }
    }

    match scale_type {
        ScaleType::Positive => {
            if !set.is_empty() {
                consistent = false;
                notes.push(format!("S > 0 but {} zeros were found", set.len()));
            }
        }
        ScaleType::RicciFlat => {
            if !set.crossings.is_empty() {
                consistent = false;
                notes.push("S = 0 but σ changes sign".into());
            }
            if gradient_at_zeros >= cfg.loose_tol {
                consistent = false;
                notes.push(format!("∇σ = {gradient_at_zeros:e} at an isolated zero"));
            }
        }
        ScaleType::Negative => {
            if !set.isolated.is_empty() {
                consistent = false;
                notes.push("S < 0 but σ has non-crossing zeros".into());
            }
            if let Some(u) = umbilicity {
                if u >= 100.0 * cfg.tol {
                    consistent = false;
                    notes.push(format!("zero set is not umbilic: residual {u:e}"));
                }
            }
        }
    }
    if skipped > 0 {
        notes.push(format!("{skipped} zero-set samples near the box boundary were not checked for umbilicity"));
    }
    if set.kind == SingularityKind::Empty && scale_type != ScaleType::Positive {
        notes.push("no zeros inside the box".into());
    }

    let (einstein, einstein_samples) = if d >= 3 {
        let omega = -0.5 * ae.sigma.powi(2).ln();
        let rescaled = rescale_chart_unchecked(chart, &omega);
        let pts: Vec<Vec<f64>> = chart
            .grid(effective_sample_grid(d))
            .into_iter()
            .filter(|x| ae.sigma.eval(x).map(|v| v.abs() > EINSTEIN_SIGMA_MIN).unwrap_or(false))
            .collect();
        let step = pts.len().div_ceil(EINSTEIN_SAMPLES).max(1);
        let mut worst = 0.0f64;
        let mut count = 0;
        for x in pts.iter().step_by(step) {
            worst = worst.max(einstein_residual(&rescaled, s, x)?);
            count += 1;
        }
        if count > 0 && worst >= cfg.loose_tol {
            consistent = false;
            notes.push(format!("σ⁻²g misses Ric = (d−1)Sg by {worst:e}"));
        }
        (if count > 0 { Some(worst) } else { None }, count)
    } else {
        notes.push("Einstein check of σ⁻²g skipped below dimension three".into());
        (None, 0)
    };

    Ok(Classification {
        s,
        scale_type,
        singular_set: set,
        gradient_at_zeros,
        umbilicity,
        umbilicity_samples: samples,
        boundary_skipped: skipped,
        einstein_residual: einstein,
        einstein_samples,
        consistent,
        notes,
    })
}

fn effective_sample_grid(d: usize) -> usize {
    match d {
        3 => 9,
        4 => 6,
        5 => 4,
        _ => 3,
    }
}
