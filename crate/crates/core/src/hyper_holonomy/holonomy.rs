//! Conformal holonomy sampled on closed loops, and a search for a splitting
//! of tractor space that every sampled element preserves.
//!
//! Loops are coordinate-plane rectangles and, on periodic axes, one turn
//! around the axis. A loop based away from the reference point is conjugated
//! back along a straight segment, so every matrix acts on the tractor space at
//! the reference point.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::Chart;
use crate::linalg::{max_abs, nullspace};
use crate::tractor::{metric_matrix_at, transport_matrix, Curve, TransportOptions};

/// Fractions of the box half-width used as rectangle sides.
const SCALES: [f64; 3] = [0.15, 0.3, 0.45];
/// Base points are drawn from this fraction of the box about its center.
const BASE_SPREAD: f64 = 0.4;

/// A closed loop as a chain of curves starting and ending at the reference point.
#[derive(Debug, Clone)]
pub struct Loop {
    pub id: String,
    pub pieces: Vec<Curve>,
}

/// The default family: rectangles in each coordinate plane at three sizes
/// through five base points (the center and four seeded points), plus one
/// turn around each periodic axis per base point.
pub fn default_loops(chart: &Chart, seed: u64) -> Vec<Loop> {
    let d = chart.dim();
    let center = chart.center();
    let half: Vec<f64> = chart.bounds().iter().map(|(lo, hi)| 0.5 * (hi - lo)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bases = vec![center.clone()];
    for _ in 0..4 {
        bases.push((0..d).map(|a| center[a] + half[a] * BASE_SPREAD * rng.random_range(-1.0..=1.0)).collect());
    }
    let mut loops = Vec::new();
    for (i, p) in bases.iter().enumerate() {
        let (to, back) = if i == 0 {
            (None, None)
        } else {
            (Some(Curve::segment(&center, p)), Some(Curve::segment(p, &center)))
        };
        let conjugate = |inner: Vec<Curve>| -> Vec<Curve> {
            to.iter().cloned().chain(inner).chain(back.iter().cloned()).collect()
        };
        for a in 0..d {
            for b in a + 1..d {
                for (k, s) in SCALES.iter().enumerate() {
                    // the rectangle opens toward the center so it stays in the box
                    let sa = if p[a] > center[a] { -1.0 } else { 1.0 };
                    let sb = if p[b] > center[b] { -1.0 } else { 1.0 };
                    let p1 = with(p, a, p[a] + sa * s * half[a]);
                    let p2 = with(&p1, b, p[b] + sb * s * half[b]);
                    let p3 = with(p, b, p[b] + sb * s * half[b]);
                    loops.push(Loop {
                        id: format!("b{i}-x{}x{}-s{k}", a + 1, b + 1),
                        pieces: conjugate(vec![
                            Curve::segment(p, &p1),
                            Curve::segment(&p1, &p2),
                            Curve::segment(&p2, &p3),
                            Curve::segment(&p3, p),
                        ]),
                    });
                }
            }
        }
        for (a, &periodic) in chart.periodic().iter().enumerate() {
            if periodic {
                let (lo, hi) = chart.bounds()[a];
                loops.push(Loop {
                    id: format!("b{i}-turn{}", a + 1),
                    pieces: conjugate(vec![
                        Curve::segment(p, &with(p, a, hi)),
                        Curve::segment(&with(p, a, lo), p),
                    ]),
                });
            }
        }
    }
    loops
}

fn with(p: &[f64], a: usize, v: f64) -> Vec<f64> {
    let mut q = p.to_vec();
    q[a] = v;
    q
}

#[derive(Debug, Clone, Serialize)]
pub struct LoopHolonomy {
    pub id: String,
    pub matrix: Vec<Vec<f64>>,
    /// Sum over the loop's pieces of the integrator's local error estimates.
    pub closure_residual: f64,
    /// `max |Mᵀ h M − h|`.
    pub metric_residual: f64,
}

impl LoopHolonomy {
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.matrix.len();
        DMatrix::from_fn(n, n, |i, j| self.matrix[i][j])
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HolonomySample {
    pub chart: String,
    pub base_point: Vec<f64>,
    pub loops: Vec<LoopHolonomy>,
    pub metric_residual: f64,
    /// `max_loops |M − 1|`.
    pub max_deviation: f64,
    /// Tractor metric at the base point.
    #[serde(skip)]
    pub metric: DMatrix<f64>,
}

impl HolonomySample {
    pub fn matrices(&self) -> Vec<DMatrix<f64>> {
        self.loops.iter().map(LoopHolonomy::matrix).collect()
    }

    pub fn tractor_dim(&self) -> usize {
        self.base_point.len() + 2
    }

    /// SHA-256 over the loop ids and the little-endian bytes of every matrix,
    /// row by row, hex encoded.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for l in &self.loops {
            h.update(l.id.as_bytes());
            for row in &l.matrix {
                for v in row {
                    h.update(v.to_le_bytes());
                }
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn transport_loop(chart: &Chart, l: &Loop, h: &DMatrix<f64>, opts: &TransportOptions) -> Result<LoopHolonomy> {
    let n = chart.dim() + 2;
    let mut m = DMatrix::identity(n, n);
    let mut err = 0.0;
    for c in &l.pieces {
        let r = transport_matrix(chart, c, opts)?;
        err += r.max_local_error * r.steps as f64;
        m = r.matrix * m;
    }
    let metric_residual = max_abs(&(m.transpose() * h * &m - h));
    Ok(LoopHolonomy {
        id: l.id.clone(),
        matrix: m.row_iter().map(|r| r.iter().copied().collect()).collect(),
        closure_residual: err,
        metric_residual,
    })
}

/// Transports around every loop; all loops must start and end at the chart center.
pub fn holonomy_sample(chart: &Chart, loops: &[Loop], opts: &TransportOptions) -> Result<HolonomySample> {
    let base = chart.center();
    for l in loops {
        for c in &l.pieces {
            c.validate(chart)?;
        }
    }
    let h = metric_matrix_at(chart, &base)?;
    #[cfg(feature = "parallel")]
    let results: Vec<Result<LoopHolonomy>> = {
        use rayon::prelude::*;
        loops.par_iter().map(|l| transport_loop(chart, l, &h, opts)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<Result<LoopHolonomy>> = loops.iter().map(|l| transport_loop(chart, l, &h, opts)).collect();
    let loops = results.into_iter().collect::<Result<Vec<_>>>()?;
    let n = chart.dim() + 2;
    let id = DMatrix::<f64>::identity(n, n);
    let metric_residual = loops.iter().map(|l| l.metric_residual).fold(0.0, f64::max);
    let max_deviation = loops.iter().map(|l| max_abs(&(l.matrix() - &id))).fold(0.0, f64::max);
    Ok(HolonomySample { chart: chart.name().to_string(), base_point: base, loops, metric_residual, max_deviation, metric: h })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING-KEBAB-CASE")]
pub enum SplittingVerdict {
    /// Every sampled element is the identity: every subspace is invariant.
    TrivialHolonomy,
    /// A direct sum of nondegenerate subspaces preserved by every sample.
    Decomposable,
    NoWitness,
}

/// A subspace of tractor space with the signature of `h` restricted to it.
#[derive(Debug, Clone, Serialize)]
pub struct InvariantSubspace {
    pub dim: usize,
    /// (positive, negative, null) directions of `h` on the subspace.
    pub signature: (usize, usize, usize),
    /// Whether every sampled element acts as the identity on it.
    pub fixed: bool,
    /// Orthonormal (Euclidean, in slots) basis as columns.
    #[serde(skip)]
    pub basis: DMatrix<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Splitting {
    pub verdict: SplittingVerdict,
    /// Always "numerical witness": sampled loops can exhibit a splitting, not prove one.
    pub label: &'static str,
    pub subspaces: Vec<InvariantSubspace>,
    /// Largest entry, over samples, of the part of `M` mapping one subspace into another.
    pub off_block: f64,
    /// Dimension of the `h`-self-adjoint commutant of the sampled elements.
    pub commutant_dim: usize,
    pub loops: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct SplittingOptions {
    /// Threshold on `|M − 1|` below which a sample counts as the identity.
    pub trivial_tol: f64,
    /// Relative singular-value cut for the commutant, and the off-block bound.
    pub tol: f64,
    pub seed: u64,
}

impl Default for SplittingOptions {
    fn default() -> Self {
        SplittingOptions { trivial_tol: 1e-8, tol: 1e-6, seed: 7 }
    }
}

pub fn signature(h: &DMatrix<f64>, basis: &DMatrix<f64>) -> (usize, usize, usize) {
    if basis.ncols() == 0 {
        return (0, 0, 0);
    }
    let q = basis.transpose() * h * basis;
    let ev = nalgebra::SymmetricEigen::new(0.5 * (&q + q.transpose())).eigenvalues;
    let pos = ev.iter().filter(|&&v| v > 1e-9).count();
    let neg = ev.iter().filter(|&&v| v < -1e-9).count();
    (pos, neg, ev.len() - pos - neg)
}

/// Largest off-diagonal-block entry of `B⁻¹ M B` over the samples, where `B`
/// stacks the given bases.
pub fn off_block_norm(sample: &HolonomySample, blocks: &[DMatrix<f64>]) -> Result<f64> {
    let n = sample.tractor_dim();
    let cols: Vec<DVector<f64>> = blocks.iter().flat_map(|b| b.column_iter().map(|c| c.into_owned())).collect();
    if cols.len() != n {
        return Err(Error::Invalid(format!("blocks span {} of {n} dimensions", cols.len())));
    }
    let b = DMatrix::from_columns(&cols);
    let binv = b.clone().try_inverse().ok_or_else(|| Error::Invalid("blocks are not independent".into()))?;
    let mut owner = Vec::with_capacity(n);
    for (k, blk) in blocks.iter().enumerate() {
        owner.extend(std::iter::repeat_n(k, blk.ncols()));
    }
    let mut worst = 0.0f64;
    for m in sample.matrices() {
        let c = &binv * m * &b;
        for i in 0..n {
            for j in 0..n {
                if owner[i] != owner[j] {
                    worst = worst.max(c[(i, j)].abs());
                }
            }
        }
    }
    Ok(worst)
}

/// `h`-self-adjoint `X` commuting with every generator, as flattened columns.
fn commutant(gens: &[DMatrix<f64>], h: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let n = h.nrows();
    let nn = n * n;
    let idx = |i: usize, j: usize| i * n + j;
    let mut rows: Vec<DVector<f64>> = Vec::new();
    for a in gens {
        // (X A − A X)_{ij} = Σ_k X_ik A_kj − A_ik X_kj
        for i in 0..n {
            for j in 0..n {
                let mut r = DVector::zeros(nn);
                for k in 0..n {
                    r[idx(i, k)] += a[(k, j)];
                    r[idx(k, j)] -= a[(i, k)];
                }
                rows.push(r);
            }
        }
    }
    // h X symmetric
    for i in 0..n {
        for j in i + 1..n {
            let mut r = DVector::zeros(nn);
            for k in 0..n {
                r[idx(k, j)] += h[(i, k)];
                r[idx(k, i)] -= h[(j, k)];
            }
            rows.push(r);
        }
    }
    let m = DMatrix::from_columns(&rows).transpose();
    nullspace(&m, tol).0
}

/// Invariant subspaces of `x` from clusters of its eigenvalues; a complex
/// pair yields the real kernel of `x² − 2 Re λ x + |λ|²`.
fn eigenspaces(x: &DMatrix<f64>, tol: f64) -> Vec<DMatrix<f64>> {
    let n = x.nrows();
    let Some(schur) = x.clone().try_schur(1e-12, 100_000) else { return Vec::new() };
    let ev = schur.complex_eigenvalues();
    let scale = ev.iter().map(|z| z.norm()).fold(1e-300, f64::max);
    let mut clusters: Vec<nalgebra::Complex<f64>> = Vec::new();
    for z in ev.iter() {
        let z = if z.im < 0.0 { z.conj() } else { *z };
        if !clusters.iter().any(|c| (c - z).norm() < 1e3 * tol * scale) {
            clusters.push(z);
        }
    }
    let id = DMatrix::<f64>::identity(n, n);
    clusters
        .iter()
        .map(|z| {
            let p = if z.im.abs() < 1e3 * tol * scale {
                x - &id * z.re
            } else {
                x * x - x * (2.0 * z.re) + &id * z.norm_sqr()
            };
            // generalized eigenspace: kernel of pⁿ
            let mut q = p.clone();
            for _ in 1..n {
                q = &q * &p;
                q /= max_abs(&q).max(1e-300);
            }
            nullspace(&q, 1e2 * tol).0
        })
        .filter(|b| b.ncols() > 0)
        .collect()
}

/// Searches for a splitting preserved by every sampled element, using the
/// `h`-self-adjoint commutant: a generic element's eigenspaces are invariant.
/// The subspace on which every element is the identity is kept as one block,
/// and its `h`-orthogonal complement is used when the eigenspaces are not
/// available.
pub fn detect_splitting(sample: &HolonomySample, opts: &SplittingOptions) -> Result<Splitting> {
    let n = sample.tractor_dim();
    if sample.loops.len() < 10 {
        return Err(Error::Invalid(format!("splitting detection needs at least 10 loops, got {}", sample.loops.len())));
    }
    let h = &sample.metric;
    let id = DMatrix::<f64>::identity(n, n);
    let mats = sample.matrices();
    let devs: Vec<DMatrix<f64>> = mats.iter().map(|m| m - &id).collect();
    let whole = |verdict, commutant_dim| Splitting {
        verdict,
        label: "numerical witness",
        subspaces: vec![InvariantSubspace { dim: n, signature: signature(h, &id), fixed: verdict == SplittingVerdict::TrivialHolonomy, basis: id.clone() }],
        off_block: 0.0,
        commutant_dim,
        loops: mats.len(),
    };
    if sample.max_deviation < opts.trivial_tol {
        return Ok(whole(SplittingVerdict::TrivialHolonomy, n * (n + 1) / 2));
    }
    let gens: Vec<DMatrix<f64>> =
        devs.iter().filter(|a| max_abs(a) >= opts.trivial_tol).map(|a| a / max_abs(a)).collect();
    let comm = commutant(&gens, h, opts.tol);
    if comm.ncols() <= 1 {
        return Ok(whole(SplittingVerdict::NoWitness, comm.ncols()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let coeffs = DVector::from_fn(comm.ncols(), |_, _| rng.random_range(-1.0..1.0));
    let flat = &comm * coeffs;
    let x = DMatrix::from_fn(n, n, |i, j| flat[i * n + j]);
    let is_fixed = |b: &DMatrix<f64>| devs.iter().all(|a| max_abs(&(a * b)) < opts.tol);
    let mut stacked = DMatrix::zeros(devs.len() * n, n);
    for (k, a) in devs.iter().enumerate() {
        stacked.view_mut((k * n, 0), (n, n)).copy_from(a);
    }
    let fixed = nullspace(&stacked, opts.tol).0;
    let moving: Vec<DMatrix<f64>> = eigenspaces(&x, opts.tol).into_iter().filter(|b| !is_fixed(b)).collect();
    let mut blocks: Vec<(DMatrix<f64>, bool)> = Vec::new();
    if fixed.ncols() > 0 {
        blocks.push((fixed.clone(), true));
    }
    if fixed.ncols() + moving.iter().map(|b| b.ncols()).sum::<usize>() == n {
        blocks.extend(moving.into_iter().map(|b| (b, false)));
    } else if fixed.ncols() > 0 && signature(h, &fixed).2 == 0 {
        // h-orthogonal complement of the fixed subspace
        blocks.push((nullspace(&(fixed.transpose() * h), 1e-12).0, false));
    }
    let total: usize = blocks.iter().map(|(b, _)| b.ncols()).sum();
    if blocks.len() < 2 || total != n {
        return Ok(whole(SplittingVerdict::NoWitness, comm.ncols()));
    }
    let bases: Vec<DMatrix<f64>> = blocks.iter().map(|(b, _)| b.clone()).collect();
    let off_block = off_block_norm(sample, &bases)?;
    let subspaces: Vec<InvariantSubspace> = blocks
        .into_iter()
        .map(|(basis, fixed)| InvariantSubspace { dim: basis.ncols(), signature: signature(h, &basis), fixed, basis })
        .collect();
    let nondegenerate = subspaces.iter().all(|s| s.signature.2 == 0);
    let verdict = if off_block < opts.tol && nondegenerate {
        SplittingVerdict::Decomposable
    } else {
        SplittingVerdict::NoWitness
    };
    Ok(Splitting { verdict, label: "numerical witness", subspaces, off_block, commutant_dim: comm.ncols(), loops: mats.len() })
}
