//! Conformal Killing fields, their prolongation to tractor 2-forms, wedges of
//! parallel tractors, and the essentiality test at zeros of conformal gradients.
//!
//! A tractor 2-form is stored as the antisymmetric matrix `M` of its
//! components `𝕂^{AB} = M_ij e_i^A e_j^B` in the slot basis `(Y, Z_a, X)`, so
//! `u ∧ v = u vᵀ − v uᵀ` on slot vectors. The blocks are
//!
//! ```text
//! M[0][a+1]   = k_a                                   (Y∧Z)
//! M[a+1][b+1] = ∇_[a k_b]                             (Z∧Z)
//! M[d+1][0]   = (1/d) ∇^c k_c                         (X∧Y)
//! M[d+1][a+1] = P_a^c k_c − (1/d)(∇^c∇_(c k_a)₀ − ∇_a∇^c k_c)   (X∧Z)
//! ```
//!
//! The sign of the `X∧Z` block is the one for which `I₁ ∧ I₂` of two parallel
//! tractors is the prolongation of `σ₁∇σ₂ − σ₂∇σ₁`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::almost_einstein::{verification_points, AEStructure};
use crate::config::Config;
use crate::conformal::rescale_chart_unchecked;
use crate::error::{Error, Result};
use crate::fields::{ScalarExpr, Tape};
use crate::geometry::{Chart, LocalGeometry, Tensor};
use crate::real::{Grad, Real};
use crate::tractor::{connection_matrices, metric_matrix, thomas_d_at, tractor_curvature, SecondJet};

/// A tractor 2-form at a point, in a scale.
#[derive(Debug, Clone, Serialize)]
pub struct TwoFormTractor {
    pub matrix: Vec<Vec<f64>>,
    pub scale: String,
}

impl TwoFormTractor {
    fn from_matrix(m: &Tensor<f64>, scale: &str) -> Self {
        TwoFormTractor { matrix: (0..m.dim).map(|i| (0..m.dim).map(|j| m[[i, j]]).collect()).collect(), scale: scale.into() }
    }

    pub fn dim(&self) -> usize {
        self.matrix.len() - 2
    }

    /// `k_a`, the `Y∧Z` slot.
    pub fn yz(&self) -> Vec<f64> {
        (0..self.dim()).map(|a| self.matrix[0][a + 1]).collect()
    }

    /// `∇_[a k_b]`, the `Z∧Z` slot.
    pub fn zz(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        (0..d).map(|a| (0..d).map(|b| self.matrix[a + 1][b + 1]).collect()).collect()
    }

    /// `(1/d) ∇^c k_c`, the `X∧Y` slot.
    pub fn w(&self) -> f64 {
        self.matrix[self.dim() + 1][0]
    }

    /// The `X∧Z` slot.
    pub fn xz(&self) -> Vec<f64> {
        let d = self.dim();
        (0..d).map(|a| self.matrix[d + 1][a + 1]).collect()
    }

    /// Largest entry outside the primary `Y∧Z` slot.
    pub fn non_primary_max(&self) -> f64 {
        let zz = self.zz().into_iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        zz.max(self.w().abs()).max(self.xz().iter().fold(0.0f64, |m, v| m.max(v.abs())))
    }

    pub fn max_abs(&self) -> f64 {
        self.matrix.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// A covector field `k_a` compiled with its first and second partials.
struct CovectorJet {
    dim: usize,
    tape: Tape,
}

impl CovectorJet {
    fn new(k: &[ScalarExpr]) -> Self {
        let d = k.len();
        let mut roots: Vec<ScalarExpr> = k.to_vec();
        for c in k {
            for a in 0..d {
                roots.push(c.diff(a));
            }
        }
        for c in k {
            for a in 0..d {
                let ca = c.diff(a);
                for b in 0..d {
                    roots.push(ca.diff(b));
                }
            }
        }
        CovectorJet { dim: d, tape: Tape::compile(&roots) }
    }

    /// `(k_c, ∂_a k_c [[a, c]], ∂_a∂_b k_c [[a, b, c]])`.
    fn eval<T: Real>(&self, x: &[T]) -> Result<(Vec<T>, Tensor<T>, Tensor<T>)> {
        let d = self.dim;
        let out = self.tape.eval(x)?;
        let k = out[..d].to_vec();
        let dk = Tensor::from_fn(d, |[a, c]| out[d + c * d + a]);
        let base = d + d * d;
        let ddk = Tensor::from_fn(d, |[a, b, c]| out[base + c * d * d + a * d + b]);
        Ok((k, dk, ddk))
    }
}

/// `k_b = g_bc k^c` as expressions.
fn lower(chart: &Chart, k: &[ScalarExpr]) -> Result<Vec<ScalarExpr>> {
    let d = chart.dim();
    if k.len() != d {
        return Err(Error::Invalid(format!("vector field has {} components, chart dimension is {d}", k.len())));
    }
    Ok((0..d)
        .map(|b| (0..d).fold(ScalarExpr::zero(), |acc, c| acc + chart.metric_entry(b, c) * &k[c]))
        .collect())
}

struct Derivs<T> {
    k: Vec<T>,
    /// `∇_a k_b`
    nk: Tensor<T>,
    /// `∇_e ∇_a k_b`
    nnk: Tensor<T>,
}

fn derivs<T: Real>(geo: &LocalGeometry<T>, k: Vec<T>, dk: &Tensor<T>, ddk: &Tensor<T>) -> Derivs<T> {
    let d = geo.dim;
    let nk = Tensor::from_fn(d, |[a, b]| {
        let mut v = dk[[a, b]];
        for c in 0..d {
            v -= geo.gamma[[c, a, b]] * k[c];
        }
        v
    });
    let nnk = Tensor::from_fn(d, |[e, a, b]| {
        // ∂_e(∇_a k_b) − Γ^f_ea ∇_f k_b − Γ^f_eb ∇_a k_f
        let mut v = ddk[[e, a, b]];
        for c in 0..d {
            v -= geo.dgamma[[e, c, a, b]] * k[c] + geo.gamma[[c, a, b]] * dk[[e, c]];
        }
        for f in 0..d {
            v -= geo.gamma[[f, e, a]] * nk[[f, b]] + geo.gamma[[f, e, b]] * nk[[a, f]];
        }
        v
    });
    Derivs { k, nk, nnk }
}

/// Trace-free symmetrized `∇_(a k_b)₀`.
fn ck_tensor<T: Real>(geo: &LocalGeometry<T>, nk: &Tensor<T>) -> (Tensor<T>, T) {
    let d = geo.dim;
    let mut div = T::zero();
    for a in 0..d {
        for b in 0..d {
            div += geo.ginv[[a, b]] * nk[[a, b]];
        }
    }
    let inv_d = T::cst(1.0 / d as f64);
    let half = T::cst(0.5);
    (Tensor::from_fn(d, |[a, b]| half * (nk[[a, b]] + nk[[b, a]]) - inv_d * div * geo.g[[a, b]]), div)
}

fn prolong_at<T: Real>(geo: &LocalGeometry<T>, dv: &Derivs<T>) -> Tensor<T> {
    let d = geo.dim;
    let n = d + 2;
    let inv_d = T::cst(1.0 / d as f64);
    let half = T::cst(0.5);
    let (_, div) = ck_tensor(geo, &dv.nk);
    // ∇_e(∇^c k_c) and ∇^c S_ca with S the trace-free symmetric part
    let ddiv: Vec<T> = (0..d)
        .map(|e| {
            let mut s = T::zero();
            for a in 0..d {
                for b in 0..d {
                    s += geo.ginv[[a, b]] * dv.nnk[[e, a, b]];
                }
            }
            s
        })
        .collect();
    let mut m = Tensor::zeros(n, 2);
    for a in 0..d {
        m[[0, a + 1]] = dv.k[a];
        m[[a + 1, 0]] = -dv.k[a];
        for b in 0..d {
            m[[a + 1, b + 1]] = half * (dv.nk[[a, b]] - dv.nk[[b, a]]);
        }
        let mut div_s = T::zero();
        for c in 0..d {
            for e in 0..d {
                div_s += geo.ginv[[c, e]] * half * (dv.nnk[[e, c, a]] + dv.nnk[[e, a, c]]);
            }
        }
        div_s -= inv_d * ddiv[a];
        let mut pk = T::zero();
        for c in 0..d {
            for e in 0..d {
                pk += geo.schouten[[a, c]] * geo.ginv[[c, e]] * dv.k[e];
            }
        }
        let xz = pk - inv_d * (div_s - ddiv[a]);
        m[[n - 1, a + 1]] = xz;
        m[[a + 1, n - 1]] = -xz;
    }
    m[[n - 1, 0]] = inv_d * div;
    m[[0, n - 1]] = -(inv_d * div);
    m
}

/// A conformal Killing field given by its vector components.
pub struct ConformalKilling {
    chart: Chart,
    /// Contravariant components `k^a`.
    pub vector: Vec<ScalarExpr>,
    jet: CovectorJet,
}

impl ConformalKilling {
    pub fn new(chart: &Chart, k: &[ScalarExpr]) -> Result<Self> {
        let lowered = lower(chart, k)?;
        Ok(ConformalKilling { chart: chart.clone(), vector: k.to_vec(), jet: CovectorJet::new(&lowered) })
    }

    /// From covector components `k_a`; `vector` is then left empty.
    fn from_covector(chart: &Chart, k: &[ScalarExpr]) -> Self {
        ConformalKilling { chart: chart.clone(), vector: Vec::new(), jet: CovectorJet::new(k) }
    }

    fn derivs<T: Real>(&self, x: &[T]) -> Result<(LocalGeometry<T>, Derivs<T>)> {
        let geo = LocalGeometry::at(&self.chart, x)?;
        let (k, dk, ddk) = self.jet.eval(x)?;
        let dv = derivs(&geo, k, &dk, &ddk);
        Ok((geo, dv))
    }

    pub fn residual(&self, x: &[f64]) -> Result<f64> {
        let (geo, dv) = self.derivs(x)?;
        Ok(ck_tensor(&geo, &dv.nk).0.max_abs())
    }

    /// Max-norm of `∇_[a k_b]`: zero iff `k` is locally a gradient in this scale.
    pub fn curl(&self, x: &[f64]) -> Result<f64> {
        let (_, dv) = self.derivs(x)?;
        let d = self.chart.dim();
        Ok(Tensor::from_fn(d, |[a, b]| 0.5 * (dv.nk[[a, b]] - dv.nk[[b, a]])).max_abs())
    }

    pub fn prolong(&self, x: &[f64]) -> Result<TwoFormTractor> {
        let (geo, dv) = self.derivs(x)?;
        Ok(TwoFormTractor::from_matrix(&prolong_at(&geo, &dv), self.chart.name()))
    }

    /// `max_a |∇_a 𝕂 − k^b Ω_ba|` with `𝕂` the prolongation, `∇` the tractor
    /// connection on 2-forms and `Ω_ab = [∇_a, ∇_b]` raised to a 2-form by `h`.
    pub fn transport_residual(&self, x: &[f64]) -> Result<f64> {
        let d = self.chart.dim();
        let n = d + 2;
        let (geo_g, dv_g) = self.derivs(&Grad::seed(x))?;
        let mg = prolong_at(&geo_g, &dv_g);
        let geo = LocalGeometry::at(&self.chart, x)?;
        let m = DMatrix::from_fn(n, n, |i, j| mg[[i, j]].v);
        let conn: Vec<DMatrix<f64>> =
            connection_matrices(&geo).iter().map(|t| DMatrix::from_fn(n, n, |i, j| t[[i, j]])).collect();
        let omega = tractor_curvature(&self.chart, x)?;
        let hm = metric_matrix(&geo.ginv);
        let hinv = DMatrix::from_fn(n, n, |i, j| hm[[i, j]]).try_inverse().expect("tractor metric is invertible");
        let k_up: Vec<f64> = (0..d).map(|a| (0..d).map(|b| geo.ginv[[a, b]] * dv_g.k[b].v).sum()).collect();
        let mut worst = 0.0f64;
        for a in 0..d {
            let dm = DMatrix::from_fn(n, n, |i, j| mg[[i, j]].dx(a));
            let mut r = dm + &conn[a] * &m + &m * conn[a].transpose();
            for b in 0..d {
                let om = DMatrix::from_fn(n, n, |i, j| omega[a][b][[i, j]]);
                r += k_up[b] * om * &hinv;
            }
            worst = worst.max(r.amax());
        }
        Ok(worst)
    }
}

/// Max-norm of `∇_(a k_b)₀` for the vector field `k^a` at `p`.
pub fn ck_residual(chart: &Chart, k: &[ScalarExpr], p: &[f64]) -> Result<f64> {
    chart.check_point(p)?;
    ConformalKilling::new(chart, k)?.residual(p)
}

#[derive(Debug, Clone, Serialize)]
pub struct Prolongation {
    /// Largest conformal Killing residual over the verification points.
    pub ck_residual: f64,
    /// Largest residual of `∇_a 𝕂 − k^b Ω_ba = 0` over the verification points.
    pub transport_residual: f64,
    /// Largest `|X_A Z_B^a 𝕂^{AB} − k^a|`.
    pub primary_mismatch: f64,
    pub points: usize,
}

/// Verifies a conformal Killing field over the chart and checks its prolongation.
pub fn prolong_ck(chart: &Chart, k: &[ScalarExpr], cfg: &Config) -> Result<(ConformalKilling, Prolongation)> {
    let ck = ConformalKilling::new(chart, k)?;
    let vt = Tape::compile(k);
    let mut out = Prolongation { ck_residual: 0.0, transport_residual: 0.0, primary_mismatch: 0.0, points: 0 };
    for x in verification_points(chart) {
        let r = ck.residual(&x)?;
        if r > cfg.tol {
            return Err(Error::NotConformalKilling(r));
        }
        out.ck_residual = out.ck_residual.max(r);
        out.transport_residual = out.transport_residual.max(ck.transport_residual(&x)?);
        let kk = ck.prolong(&x)?;
        let ginv = crate::tractor::inverse_metric(chart, &x)?;
        let kv = vt.eval(&x)?;
        let yz = kk.yz();
        for a in 0..chart.dim() {
            let up: f64 = (0..chart.dim()).map(|b| ginv[[a, b]] * yz[b]).sum();
            out.primary_mismatch = out.primary_mismatch.max((up - kv[a]).abs());
        }
        out.points += 1;
    }
    Ok((ck, out))
}

#[derive(Debug, Clone, Serialize)]
pub struct Wedge {
    /// `𝕂 = I₁ ∧ I₂` at the chart center.
    pub at_center: TwoFormTractor,
    /// Largest `|∇𝕂|` over the verification points.
    pub parallel_residual: f64,
    /// Largest conformal Killing residual of `k = σ₁∇σ₂ − σ₂∇σ₁`.
    pub ck_residual: f64,
    /// Largest difference between `I₁ ∧ I₂` and the prolongation of `k`.
    pub prolongation_mismatch: f64,
    /// When `σ₁` has no zero on the grid: largest `|k − grad_{g₁}(σ₂/σ₁)|` with `g₁ = σ₁⁻²g`.
    pub gradient_residual: Option<f64>,
}

/// `𝕂 = I₁ ∧ I₂` and the conformal Killing field `k_a = σ₁∇_aσ₂ − σ₂∇_aσ₁`.
pub fn wedge_parallel(i1: &AEStructure, i2: &AEStructure, cfg: &Config) -> Result<(Wedge, Vec<ScalarExpr>)> {
    let chart = &i1.chart;
    if chart.digest() != i2.chart.digest() {
        return Err(Error::ScaleMismatch { left: chart.name().into(), right: i2.chart.name().into() });
    }
    let d = chart.dim();
    let n = d + 2;
    let (s1, s2) = (&i1.sigma, &i2.sigma);
    let k_low: Vec<ScalarExpr> = (0..d).map(|a| s1 * s2.diff(a) - s2 * s1.diff(a)).collect();
    let ck = ConformalKilling::from_covector(chart, &k_low);
    let (j1, j2) = (SecondJet::new(s1, d), SecondJet::new(s2, d));
    let inv_d = 1.0 / d as f64;

    let wedge_at = |x: &[f64]| -> Result<(Tensor<Grad>, LocalGeometry<f64>)> {
        let xg = Grad::seed(x);
        let geo = LocalGeometry::at(chart, &xg)?;
        let t = |j: &SecondJet| -> Result<Vec<Grad>> {
            let (v, dv, ddv) = j.eval(&xg)?;
            Ok(thomas_d_at(&geo, v, &dv, &ddv, 1.0).into_iter().map(|c| c.scale(inv_d)).collect())
        };
        let (u, v) = (t(&j1)?, t(&j2)?);
        Ok((Tensor::from_fn(n, |[i, j]| u[i] * v[j] - u[j] * v[i]), LocalGeometry::at(chart, x)?))
    };

    let mut out = Wedge {
        at_center: TwoFormTractor::from_matrix(&wedge_at(&chart.center())?.0.values(), chart.name()),
        parallel_residual: 0.0,
        ck_residual: 0.0,
        prolongation_mismatch: 0.0,
        gradient_residual: None,
    };
    let pts = verification_points(chart);
    let mut biggest = 0.0f64;
    for x in &pts {
        let (w, geo) = wedge_at(x)?;
        let m = DMatrix::from_fn(n, n, |i, j| w[[i, j]].v);
        biggest = biggest.max(m.amax());
        for (a, c) in connection_matrices(&geo).iter().enumerate() {
            let c = DMatrix::from_fn(n, n, |i, j| c[[i, j]]);
            let dm = DMatrix::from_fn(n, n, |i, j| w[[i, j]].dx(a));
            out.parallel_residual = out.parallel_residual.max((dm + &c * &m + &m * c.transpose()).amax());
        }
        out.ck_residual = out.ck_residual.max(ck.residual(x)?);
        let pk = ck.prolong(x)?;
        for i in 0..n {
            for j in 0..n {
                out.prolongation_mismatch = out.prolongation_mismatch.max((pk.matrix[i][j] - m[(i, j)]).abs());
            }
        }
    }
    if biggest < 1e-10 {
        return Err(Error::LinearlyDependent);
    }

    let s1_values: Vec<f64> = pts.iter().map(|x| s1.eval(x)).collect::<Result<_, _>>()?;
    if s1_values.iter().all(|v| v.abs() > 1e-8) && s1_values.iter().all(|v| v.signum() == s1_values[0].signum()) {
        // in the scale g₁ = σ₁⁻²g, k^b = g₁^{bc} ∂_c(σ₂/σ₁)
        let g1 = rescale_chart_unchecked(chart, &(-0.5 * s1.powi(2).ln()));
        let ratio = s2 / s1;
        let grad: Vec<ScalarExpr> = (0..d).map(|a| ratio.diff(a)).collect();
        let gt = Tape::compile(&grad);
        let kt = Tape::compile(&k_low);
        let mut worst = 0.0f64;
        for x in &pts {
            let ginv = crate::tractor::inverse_metric(chart, x)?;
            let g1inv = crate::tractor::inverse_metric(&g1, x)?;
            let (ds, kl) = (gt.eval(x)?, kt.eval(x)?);
            for b in 0..d {
                let k_up: f64 = (0..d).map(|c| ginv[[b, c]] * kl[c]).sum();
                let gr: f64 = (0..d).map(|c| g1inv[[b, c]] * ds[c]).sum();
                worst = worst.max((k_up - gr).abs());
            }
        }
        out.gradient_residual = Some(worst);
    }
    if out.ck_residual > cfg.loose_tol {
        return Err(Error::NotConformalKilling(out.ck_residual));
    }
    Ok((out, k_low))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING-KEBAB-CASE")]
pub enum Verdict {
    Essential,
    Inconclusive,
    NotApplicableNongradient,
}

#[derive(Debug, Clone, Serialize)]
pub struct EssentialWitness {
    pub verdict: Verdict,
    pub slots: TwoFormTractor,
    /// Largest `|∇_[a k_b]|` over the chart; zero for gradients.
    pub curl: f64,
    pub point: Vec<f64>,
}

/// Decides essentiality of a conformal gradient at one of its zeros from the
/// prolonged 2-form there.
pub fn essential_witness(chart: &Chart, k: &[ScalarExpr], p: &[f64], cfg: &Config) -> Result<EssentialWitness> {
    chart.check_point(p)?;
    let kv = Tape::compile(k).eval(p)?;
    let norm = kv.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm >= 1e-10 {
        return Err(Error::NotAZero(norm));
    }
    let (ck, _) = prolong_ck(chart, k, cfg)?;
    let mut curl = 0.0f64;
    for x in verification_points(chart) {
        curl = curl.max(ck.curl(&x)?);
    }
    let slots = ck.prolong(p)?;
    let verdict = if curl > cfg.tol {
        Verdict::NotApplicableNongradient
    } else if slots.non_primary_max() > cfg.tol {
        Verdict::Essential
    } else {
        Verdict::Inconclusive
    };
    Ok(EssentialWitness { verdict, slots, curl, point: p.to_vec() })
}

#[cfg(test)]
mod tests;
