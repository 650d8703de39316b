use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::conformal::ConformalRescale;
use crate::error::{Error, Result};
use crate::fields::{parse_chart_expr, ScalarExpr};
use crate::geometry::{invert, Chart, Tensor};
use crate::real::Real;

/// Tractor components `(σ, μ_a, ρ)` at a point, in the splitting determined by
/// the metric of the chart named in `scale`.
///
/// As a slot vector the layout is `[σ, μ_1, .., μ_d, ρ]`; `σ` pairs with `ρ`
/// and `μ` with itself through `g^{-1}`, so `X = (0, 0, 1)` and `Y = (1, 0, 0)`
/// satisfy `h(X, Y) = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TractorValue {
    pub sigma: f64,
    pub mu: Vec<f64>,
    pub rho: f64,
    pub scale: String,
}

impl TractorValue {
    pub fn new(sigma: f64, mu: Vec<f64>, rho: f64, scale: impl Into<String>) -> Self {
        TractorValue { sigma, mu, rho, scale: scale.into() }
    }

    pub fn from_slots(slots: &[f64], scale: impl Into<String>) -> Self {
        let n = slots.len();
        TractorValue { sigma: slots[0], mu: slots[1..n - 1].to_vec(), rho: slots[n - 1], scale: scale.into() }
    }

    pub fn slots(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.mu.len() + 2);
        v.push(self.sigma);
        v.extend_from_slice(&self.mu);
        v.push(self.rho);
        v
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// The canonical tractor `X`, whose pairing extracts the `σ` slot.
    pub fn canonical_x(dim: usize, scale: impl Into<String>) -> Self {
        TractorValue::new(0.0, vec![0.0; dim], 1.0, scale)
    }

    /// Parses `"s;m1,...,md;r"`.
    pub fn parse(src: &str, dim: usize, scale: impl Into<String>) -> Result<Self> {
        let parts: Vec<&str> = src.split(';').collect();
        let num = |s: &str| {
            s.trim().parse::<f64>().map_err(|_| Error::Invalid(format!("bad tractor component '{s}' in '{src}'")))
        };
        if parts.len() != 3 {
            return Err(Error::Invalid(format!("tractor must be 's;m1,...;r', got '{src}'")));
        }
        let mu = if parts[1].trim().is_empty() && dim == 0 {
            vec![]
        } else {
            parts[1].split(',').map(num).collect::<Result<Vec<_>>>()?
        };
        if mu.len() != dim {
            return Err(Error::Invalid(format!("tractor has {} middle slots, chart dimension is {dim}", mu.len())));
        }
        Ok(TractorValue::new(num(parts[0])?, mu, num(parts[2])?, scale))
    }

    pub fn max_abs(&self) -> f64 {
        self.slots().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &TractorValue) -> f64 {
        self.slots().iter().zip(other.slots()).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// A tractor field given by closed-form slots in one scale.
#[derive(Debug, Clone)]
pub struct TractorField {
    pub sigma: ScalarExpr,
    pub mu: Vec<ScalarExpr>,
    pub rho: ScalarExpr,
    pub scale: String,
}

impl TractorField {
    pub fn new(sigma: ScalarExpr, mu: Vec<ScalarExpr>, rho: ScalarExpr, scale: impl Into<String>) -> Self {
        TractorField { sigma, mu, rho, scale: scale.into() }
    }

    pub fn constant(v: &TractorValue) -> Self {
        TractorField {
            sigma: v.sigma.into(),
            mu: v.mu.iter().map(|&m| m.into()).collect(),
            rho: v.rho.into(),
            scale: v.scale.clone(),
        }
    }

    /// Parses `"s;m1,...,md;r"` with each slot an expression in the chart coordinates.
    pub fn parse(src: &str, dim: usize, scale: impl Into<String>) -> Result<Self> {
        let parts: Vec<&str> = src.split(';').collect();
        if parts.len() != 3 {
            return Err(Error::Invalid(format!("tractor field must be 's;m1,...;r', got '{src}'")));
        }
        let mu = parts[1].split(',').map(|s| parse_chart_expr(s, dim)).collect::<Result<Vec<_>, _>>()?;
        if mu.len() != dim {
            return Err(Error::Invalid(format!("tractor field has {} middle slots, expected {dim}", mu.len())));
        }
        Ok(TractorField::new(parse_chart_expr(parts[0], dim)?, mu, parse_chart_expr(parts[2], dim)?, scale))
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn slot_exprs(&self) -> Vec<ScalarExpr> {
        let mut v = Vec::with_capacity(self.dim() + 2);
        v.push(self.sigma.clone());
        v.extend(self.mu.iter().cloned());
        v.push(self.rho.clone());
        v
    }

    pub fn eval<T: Real>(&self, x: &[T]) -> Result<Vec<T>> {
        Ok(self.slot_exprs().iter().map(|e| e.eval(x)).collect::<Result<Vec<_>, _>>()?)
    }

    pub fn value_at(&self, x: &[f64]) -> Result<TractorValue> {
        Ok(TractorValue::from_slots(&self.eval(x)?, self.scale.clone()))
    }
}

/// The tractor metric as a matrix on slot vectors, given `g^{-1}`.
pub fn metric_matrix<T: Real>(ginv: &Tensor<T>) -> Tensor<T> {
    let d = ginv.dim;
    let n = d + 2;
    let mut h = Tensor::zeros(n, 2);
    h[[0, n - 1]] = T::one();
    h[[n - 1, 0]] = T::one();
    for a in 0..d {
        for b in 0..d {
            h[[a + 1, b + 1]] = ginv[[a, b]];
        }
    }
    h
}

/// `σρ' + ρσ' + g^{ab}μ_aμ'_b` on slot vectors.
pub fn pair<T: Real>(ginv: &Tensor<T>, u: &[T], v: &[T]) -> T {
    let d = ginv.dim;
    let n = d + 2;
    let mut s = u[0] * v[n - 1] + u[n - 1] * v[0];
    for a in 0..d {
        for b in 0..d {
            s += ginv[[a, b]] * u[a + 1] * v[b + 1];
        }
    }
    s
}

pub(crate) fn inverse_metric(chart: &Chart, x: &[f64]) -> Result<Tensor<f64>> {
    let g = chart.metric_at(x)?;
    let d = chart.dim();
    let t = Tensor::from_fn(d, |[a, b]| g[(a, b)]);
    invert(&t).ok_or_else(|| Error::InvalidChart("metric is singular".into()))
}

/// `h(U, V)` at `x`.
pub fn tractor_metric(chart: &Chart, u: &TractorValue, v: &TractorValue, x: &[f64]) -> Result<f64> {
    if u.scale != v.scale {
        return Err(Error::ScaleMismatch { left: u.scale.clone(), right: v.scale.clone() });
    }
    if u.dim() != chart.dim() || v.dim() != chart.dim() {
        return Err(Error::Invalid("tractor and chart dimensions differ".into()));
    }
    Ok(pair(&inverse_metric(chart, x)?, &u.slots(), &v.slots()))
}

pub fn metric_matrix_at(chart: &Chart, x: &[f64]) -> Result<DMatrix<f64>> {
    let h = metric_matrix(&inverse_metric(chart, x)?);
    let n = h.dim;
    Ok(DMatrix::from_fn(n, n, |i, j| h[[i, j]]))
}

/// Re-expresses slots in the scale `ĝ = e^{2ω}g`, trivialized by `ĝ`:
/// `(e^ω σ, e^ω(μ_b + σΥ_b), e^{−ω}(ρ − Υ^bμ_b − ½σ|Υ|²))`. At points where
/// `ω = 0` these are exactly the weighted components of the transformation law.
pub fn transform_slots<T: Real>(u: &[T], omega: T, upsilon: &[T], ginv: &Tensor<T>) -> Vec<T> {
    let d = ginv.dim;
    let n = d + 2;
    let (s, r) = (u[0], u[n - 1]);
    let mut u_mu = T::zero();
    let mut u2 = T::zero();
    for a in 0..d {
        for b in 0..d {
            u_mu += ginv[[a, b]] * upsilon[a] * u[b + 1];
            u2 += ginv[[a, b]] * upsilon[a] * upsilon[b];
        }
    }
    let (up, down) = (omega.exp(), (-omega).exp());
    let mut out = Vec::with_capacity(n);
    out.push(up * s);
    for a in 0..d {
        out.push(up * (u[a + 1] + s * upsilon[a]));
    }
    out.push(down * (r - u_mu - T::cst(0.5) * s * u2));
    out
}

/// The tractor `U`, given in `chart`'s scale at `x`, expressed in the scale of
/// `rescale_chart(chart, ω)`.
pub fn transform_tractor(
    chart: &Chart,
    u: &TractorValue,
    rescale: &ConformalRescale,
    x: &[f64],
) -> Result<TractorValue> {
    if u.scale != chart.name() {
        return Err(Error::ScaleMismatch { left: u.scale.clone(), right: chart.name().to_string() });
    }
    let (w, ups, _) = rescale.jet(x)?;
    let slots = transform_slots(&u.slots(), w, &ups, &inverse_metric(chart, x)?);
    Ok(TractorValue::from_slots(&slots, format!("{}~", chart.name())))
}
