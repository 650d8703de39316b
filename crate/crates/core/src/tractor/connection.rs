use super::value::{TractorField, TractorValue};
use crate::error::{Error, Result};
use crate::fields::{ScalarExpr, Tape};
use crate::geometry::{curvature, Chart, LocalGeometry, Tensor};
use crate::real::{Grad, Real};

/// Matrices `𝒜_a` with `∇_a U = ∂_a U + 𝒜_a U` on slot vectors:
///
/// ```text
/// ∇_a σ   = ∂_a σ − μ_a
/// ∇_a μ_b = ∂_a μ_b − Γ^c_ab μ_c + g_ab ρ + P_ab σ
/// ∇_a ρ   = ∂_a ρ − P_a^c μ_c
/// ```
///
/// In dimensions one and two `P` comes from the `μ`-rule, which turns this
/// into the trivialized low-dimensional connection.
pub fn connection_matrices<T: Real>(geo: &LocalGeometry<T>) -> Vec<Tensor<T>> {
    let d = geo.dim;
    let n = d + 2;
    let pm = geo.schouten_mixed();
    (0..d)
        .map(|a| {
            let mut m = Tensor::zeros(n, 2);
            m[[0, a + 1]] = -T::one();
            for b in 0..d {
                for c in 0..d {
                    m[[b + 1, c + 1]] = -geo.gamma[[c, a, b]];
                }
                m[[b + 1, n - 1]] = geo.g[[a, b]];
                m[[b + 1, 0]] = geo.schouten[[a, b]];
            }
            for c in 0..d {
                m[[n - 1, c + 1]] = -pm[[a, c]];
            }
            m
        })
        .collect()
}

pub(crate) fn apply<T: Real>(m: &Tensor<T>, v: &[T]) -> Vec<T> {
    let n = m.dim;
    (0..n)
        .map(|i| {
            let mut s = T::zero();
            for j in 0..n {
                s += m[[i, j]] * v[j];
            }
            s
        })
        .collect()
}

/// `∇_a U` for every direction `a`, from slot values carrying first partials.
pub fn derivative_from_jet(geo: &LocalGeometry<f64>, u: &[Grad]) -> Vec<Vec<f64>> {
    let vals: Vec<f64> = u.iter().map(|v| v.v).collect();
    connection_matrices(geo)
        .iter()
        .enumerate()
        .map(|(a, m)| apply(m, &vals).iter().zip(u).map(|(c, v)| c + v.dx(a)).collect())
        .collect()
}

/// `∇_a U` for all `a` at `x`.
pub fn tractor_derivative(chart: &Chart, field: &TractorField, x: &[f64]) -> Result<Vec<TractorValue>> {
    if field.scale != chart.name() {
        return Err(Error::ScaleMismatch { left: field.scale.clone(), right: chart.name().to_string() });
    }
    chart.check_point(x)?;
    let geo = LocalGeometry::at(chart, x)?;
    let u = field.eval(&Grad::seed(x))?;
    Ok(derivative_from_jet(&geo, &u)
        .into_iter()
        .map(|s| TractorValue::from_slots(&s, field.scale.clone()))
        .collect())
}

/// `∇_a U` at `x` in coordinate direction `a`.
pub fn tractor_connection(chart: &Chart, field: &TractorField, a: usize, x: &[f64]) -> Result<TractorValue> {
    if a >= chart.dim() {
        return Err(Error::Invalid(format!("direction {a} out of range")));
    }
    Ok(tractor_derivative(chart, field, x)?.swap_remove(a))
}

/// The connection on a one- or two-dimensional chart. Two-dimensional charts
/// must have constant scalar curvature in their Einstein scale.
pub fn low_dim_connection(chart: &Chart, field: &TractorField, x: &[f64]) -> Result<Vec<TractorValue>> {
    match chart.dim() {
        1 => {}
        2 => check_constant_scalar_curvature(chart)?,
        d => return Err(Error::Invalid(format!("low-dimensional connection needs d <= 2, got {d}"))),
    }
    tractor_derivative(chart, field, x)
}

fn check_constant_scalar_curvature(chart: &Chart) -> Result<()> {
    let base = chart.base_chart();
    let values: Vec<f64> =
        base.grid(9).iter().map(|x| curvature(&base, x).map(|p| p.scalar)).collect::<Result<_>>()?;
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    if hi - lo > 1e-8 * hi.abs().max(1.0) {
        return Err(Error::NotEinstein(format!("scalar curvature ranges over [{lo}, {hi}]")));
    }
    Ok(())
}

/// Tractor curvature `Ω_ab = ∂_a𝒜_b − ∂_b𝒜_a + [𝒜_a, 𝒜_b]`, indexed `[a][b]`.
pub fn tractor_curvature(chart: &Chart, x: &[f64]) -> Result<Vec<Vec<Tensor<f64>>>> {
    let geo = LocalGeometry::at(chart, &Grad::seed(x))?;
    Ok(curvature_from_matrices(&connection_matrices(&geo)))
}

fn curvature_from_matrices(a: &[Tensor<Grad>]) -> Vec<Vec<Tensor<f64>>> {
    let d = a.len();
    let n = a[0].dim;
    let vals: Vec<Tensor<f64>> = a.iter().map(|m| m.values()).collect();
    (0..d)
        .map(|i| {
            (0..d)
                .map(|j| {
                    Tensor::from_fn(n, |[p, q]| {
                        let mut s = a[j][[p, q]].dx(i) - a[i][[p, q]].dx(j);
                        for k in 0..n {
                            s += vals[i][[p, k]] * vals[j][[k, q]] - vals[j][[p, k]] * vals[i][[k, q]];
                        }
                        s
                    })
                })
                .collect()
        })
        .collect()
}

/// A scalar field with its first and second partials compiled together.
#[derive(Debug, Clone)]
pub struct SecondJet {
    dim: usize,
    tape: Tape,
}

impl SecondJet {
    pub fn new(f: &ScalarExpr, dim: usize) -> Self {
        let mut roots = vec![f.clone()];
        let first: Vec<_> = (0..dim).map(|a| f.diff(a)).collect();
        roots.extend(first.iter().cloned());
        for a in 0..dim {
            for b in a..dim {
                roots.push(first[a].diff(b));
            }
        }
        SecondJet { dim, tape: Tape::compile(&roots) }
    }

    pub fn eval<T: Real>(&self, x: &[T]) -> Result<(T, Vec<T>, Tensor<T>)> {
        let d = self.dim;
        let out = self.tape.eval(x)?;
        let mut dd = Tensor::zeros(d, 2);
        let mut k = d + 1;
        for a in 0..d {
            for b in a..d {
                dd[[a, b]] = out[k];
                dd[[b, a]] = out[k];
                k += 1;
            }
        }
        Ok((out[0], out[1..=d].to_vec(), dd))
    }
}

/// `D_A V = ((d+2w−2)wV, (d+2w−2)∇_aV, (Δ − wJ)V)` with `Δ = −∇^b∇_b`.
pub fn thomas_d_at<T: Real>(geo: &LocalGeometry<T>, v: T, dv: &[T], ddv: &Tensor<T>, w: f64) -> Vec<T> {
    let d = geo.dim;
    let k = T::cst(d as f64 + 2.0 * w - 2.0);
    let mut lap = T::zero();
    for a in 0..d {
        for b in 0..d {
            let mut hess = ddv[[a, b]];
            for c in 0..d {
                hess -= geo.gamma[[c, a, b]] * dv[c];
            }
            lap -= geo.ginv[[a, b]] * hess;
        }
    }
    let mut out = Vec::with_capacity(d + 2);
    out.push(k * T::cst(w) * v);
    out.extend(dv.iter().map(|&x| k * x));
    out.push(lap - T::cst(w) * geo.j * v);
    out
}

/// The Thomas D-operator on a weight-`w` density at `x`.
pub fn thomas_d(chart: &Chart, v: &ScalarExpr, w: f64, x: &[f64]) -> Result<TractorValue> {
    chart.check_point(x)?;
    let geo = LocalGeometry::at(chart, x)?;
    let (f, df, ddf) = SecondJet::new(v, chart.dim()).eval(x)?;
    Ok(TractorValue::from_slots(&thomas_d_at(&geo, f, &df, &ddf, w), chart.name()))
}
