//! The space of parallel tractors on a chart, found as the joint nullspace of
//! the tractor curvature transported back to a base point, then confirmed by
//! transport around closed loops.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::geometry::{grid_points, Chart, LocalGeometry};
use crate::linalg::{max_abs, nullspace};
use crate::tractor::{tractor_curvature, transport_fixed, transport_matrix, Curve, TractorValue, TransportOptions};

#[derive(Debug, Clone, Copy)]
pub struct ParallelSpaceOptions {
    /// Samples per axis for the coarse and refined curvature grids.
    pub coarse: usize,
    pub fine: usize,
    /// Fraction of the box (about its center) that is sampled.
    pub shrink: f64,
    /// Relative singular-value cut for the curvature nullspace.
    pub rel_tol: f64,
    /// Allowed loop-closure defect of a verified parallel tractor.
    pub closure_tol: f64,
    pub transport: TransportOptions,
}

impl ParallelSpaceOptions {
    pub fn for_chart(chart: &Chart, cfg: &Config) -> Self {
        let (coarse, fine) = if chart.dim() >= 5 { (2, 3) } else { (3, 5) };
        ParallelSpaceOptions {
            coarse,
            fine,
            shrink: 0.9,
            rel_tol: 1e-6,
            closure_tol: cfg.loose_tol,
            transport: TransportOptions::from(cfg),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ParallelSpace {
    pub dim: usize,
    pub base_point: Vec<f64>,
    /// Orthonormal (Euclidean, in slots) basis of the parallel tractors at the base point.
    pub basis: Vec<TractorValue>,
    pub coarse_dim: usize,
    /// Nullspace dimension on the refined grid, before loop verification.
    pub candidate_dim: usize,
    pub closure_residual: f64,
    pub loops: usize,
    pub singular_values: Vec<f64>,
}

impl ParallelSpace {
    /// Basis vectors as matrix columns.
    pub fn basis_matrix(&self) -> DMatrix<f64> {
        let n = self.base_point.len() + 2;
        let cols: Vec<DVector<f64>> = self.basis.iter().map(|v| DVector::from_vec(v.slots())).collect();
        if cols.is_empty() {
            DMatrix::zeros(n, 0)
        } else {
            DMatrix::from_columns(&cols)
        }
    }
}

fn sample_box(chart: &Chart, shrink: f64) -> Vec<(f64, f64)> {
    chart
        .bounds()
        .iter()
        .map(|&(lo, hi)| {
            let (c, r) = (0.5 * (lo + hi), 0.5 * (hi - lo) * shrink);
            (c - r, c + r)
        })
        .collect()
}

/// Rows `Ω_ab(x) T(x0 → x)` for every sample `x`.
fn constraint_rows(chart: &Chart, base: &[f64], n: usize, opts: &ParallelSpaceOptions) -> Result<DMatrix<f64>> {
    let pts = grid_points(&sample_box(chart, opts.shrink), n);
    let d = chart.dim();
    let m = d + 2;
    let mut rows: Vec<DVector<f64>> = Vec::new();
    for x in pts {
        let omega = tractor_curvature(chart, &x)?;
        let t = if x.iter().zip(base).all(|(p, q)| p == q) {
            DMatrix::identity(m, m)
        } else {
            transport_matrix(chart, &Curve::segment(base, &x), &opts.transport)?.matrix
        };
        for a in 0..d {
            for b in a + 1..d {
                let om = DMatrix::from_fn(m, m, |i, j| omega[a][b][[i, j]]);
                let c = om * &t;
                for i in 0..m {
                    rows.push(c.row(i).transpose());
                }
            }
        }
    }
    for mono in monodromies(chart, base, &opts.transport)? {
        let c = mono - DMatrix::identity(m, m);
        for i in 0..m {
            rows.push(c.row(i).transpose());
        }
    }
    if rows.is_empty() {
        return Ok(DMatrix::zeros(0, m));
    }
    Ok(DMatrix::from_columns(&rows).transpose())
}

/// Transport once around each periodic axis, starting and ending at `base`.
fn monodromies(chart: &Chart, base: &[f64], opts: &TransportOptions) -> Result<Vec<DMatrix<f64>>> {
    let mut out = Vec::new();
    for (a, &periodic) in chart.periodic().iter().enumerate() {
        if !periodic {
            continue;
        }
        let (lo, hi) = chart.bounds()[a];
        let mut top = base.to_vec();
        top[a] = hi;
        let mut bottom = base.to_vec();
        bottom[a] = lo;
        let up = transport_matrix(chart, &Curve::segment(base, &top), opts)?.matrix;
        let back = transport_matrix(chart, &Curve::segment(&bottom, base), opts)?.matrix;
        out.push(back * up);
    }
    Ok(out)
}

/// Coordinate-plane rectangles through `base`, one per quadrant of each plane.
pub(crate) fn rectangle_loops(chart: &Chart, base: &[f64], extent: f64) -> Vec<Vec<Curve>> {
    let d = chart.dim();
    let mut loops = Vec::new();
    for a in 0..d {
        for b in a + 1..d {
            let ra = extent * 0.5 * (chart.bounds()[a].1 - chart.bounds()[a].0);
            let rb = extent * 0.5 * (chart.bounds()[b].1 - chart.bounds()[b].0);
            for (sa, sb) in [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)] {
                let p0 = base.to_vec();
                let mut p1 = p0.clone();
                p1[a] += sa * ra;
                let mut p2 = p1.clone();
                p2[b] += sb * rb;
                let mut p3 = p0.clone();
                p3[b] += sb * rb;
                loops.push(vec![
                    Curve::segment(&p0, &p1),
                    Curve::segment(&p1, &p2),
                    Curve::segment(&p2, &p3),
                    Curve::segment(&p3, &p0),
                ]);
            }
        }
    }
    loops
}

/// Dimension and basis of the parallel tractors, with default options.
pub fn parallel_space(chart: &Chart, cfg: &Config) -> Result<ParallelSpace> {
    parallel_space_with(chart, &ParallelSpaceOptions::for_chart(chart, cfg))
}

pub fn parallel_space_with(chart: &Chart, opts: &ParallelSpaceOptions) -> Result<ParallelSpace> {
    let base = chart.center();
    let m = chart.dim() + 2;
    let coarse = nullspace(&constraint_rows(chart, &base, opts.coarse, opts)?, opts.rel_tol);
    let (cand, sv) = nullspace(&constraint_rows(chart, &base, opts.fine, opts)?, opts.rel_tol);
    if coarse.0.ncols() != cand.ncols() {
        return Err(Error::RankUnstable { coarse: coarse.0.ncols(), fine: cand.ncols() });
    }

    let loops = rectangle_loops(chart, &base, 0.8);
    let mut defects: Vec<DMatrix<f64>> = Vec::new();
    for pieces in &loops {
        let mut mono = DMatrix::identity(m, m);
        for c in pieces {
            mono = transport_matrix(chart, c, &opts.transport)?.matrix * mono;
        }
        defects.push(mono - DMatrix::identity(m, m));
    }
    defects.extend(monodromies(chart, &base, &opts.transport)?.into_iter().map(|mm| mm - DMatrix::identity(m, m)));

    // keep the part of the candidate space that every loop fixes
    let basis = if cand.ncols() == 0 || defects.is_empty() {
        cand.clone()
    } else {
        let k = cand.ncols();
        let mut stacked = DMatrix::zeros(defects.len() * m, k);
        for (i, dm) in defects.iter().enumerate() {
            stacked.view_mut((i * m, 0), (m, k)).copy_from(&(dm * &cand));
        }
        let svd = stacked.svd(false, true);
        let vt = svd.v_t.expect("requested right singular vectors");
        let keep: Vec<DVector<f64>> = svd
            .singular_values
            .iter()
            .enumerate()
            .filter(|(_, &s)| s < opts.closure_tol)
            .map(|(i, _)| &cand * vt.row(i).transpose())
            .collect();
        if keep.is_empty() {
            DMatrix::zeros(m, 0)
        } else {
            DMatrix::from_columns(&keep)
        }
    };
    let closure = defects.iter().map(|dm| max_abs(&(dm * &basis))).fold(0.0, f64::max);
    Ok(ParallelSpace {
        dim: basis.ncols(),
        basis: basis.column_iter().map(|c| TractorValue::from_slots(c.as_slice(), chart.name())).collect(),
        base_point: base,
        coarse_dim: coarse.0.ncols(),
        candidate_dim: cand.ncols(),
        closure_residual: closure,
        loops: defects.len(),
        singular_values: sv,
    })
}

/// Residual of the almost-Einstein equation for `σ = h(X, I)`, where `I` is
/// the parallel extension of `value` (given at `base`). Derivatives of the
/// extension are Richardson-extrapolated central differences of fixed-step
/// transports from `base`; the residual is
/// `max(|∂σ − μ|, |trace-free(∂_aμ_b − Γ^c_ab μ_c + P_ab σ)|)`, which vanishes
/// together with `trace-free(∇∇σ + Pσ)` once `μ = ∇σ`.
pub fn primary_residual_of_parallel(chart: &Chart, base: &[f64], value: &TractorValue, x: &[f64]) -> Result<f64> {
    const STEPS: usize = 200;
    const H: f64 = 1e-3;
    let d = chart.dim();
    let u0 = DVector::from_vec(value.slots());
    let field_at = |p: &[f64]| -> Result<DVector<f64>> {
        if p.iter().zip(base).all(|(a, b)| a == b) {
            return Ok(u0.clone());
        }
        Ok(transport_fixed(chart, &Curve::segment(base, p), STEPS)? * &u0)
    };
    let u = field_at(x)?;
    let mut du: Vec<DVector<f64>> = Vec::with_capacity(d);
    for a in 0..d {
        let shifted = |t: f64| -> Result<DVector<f64>> {
            let mut p = x.to_vec();
            p[a] += t;
            field_at(&p)
        };
        let d1 = (shifted(H)? - shifted(-H)?) / (2.0 * H);
        let d2 = (shifted(2.0 * H)? - shifted(-2.0 * H)?) / (4.0 * H);
        du.push((4.0 * d1 - d2) / 3.0);
    }
    let geo = LocalGeometry::at(chart, x)?;
    let sigma = u[0];
    let mut first = 0.0f64;
    for a in 0..d {
        first = first.max((du[a][0] - u[a + 1]).abs());
    }
    let t = DMatrix::from_fn(d, d, |a, b| {
        let mut v = du[a][b + 1] + geo.schouten[[a, b]] * sigma;
        for c in 0..d {
            v -= geo.gamma[[c, a, b]] * u[c + 1];
        }
        v
    });
    let mut tr = 0.0;
    for a in 0..d {
        for b in 0..d {
            tr += geo.ginv[[a, b]] * t[(a, b)];
        }
    }
    let tf = DMatrix::from_fn(d, d, |a, b| t[(a, b)] - tr / d as f64 * geo.g[[a, b]]);
    Ok(first.max(if d >= 3 { max_abs(&tf) } else { 0.0 }))
}
