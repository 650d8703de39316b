//! Parallel transport: the linear ODE `dU/dt = −ċ^a 𝒜_a U` along a curve,
//! integrated with classical RK4 and step doubling.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::connection::connection_matrices;
use super::value::{metric_matrix, TractorValue};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::fields::{parse, ScalarExpr, Tape, Vars};
use crate::geometry::{Chart, LocalGeometry};

/// A curve `t ↦ c(t)`, `t ∈ [0, 1]`, given by closed-form coordinates.
#[derive(Debug, Clone)]
pub struct Curve {
    pub coords: Vec<ScalarExpr>,
    tape: Tape,
}

impl Curve {
    pub fn new(coords: Vec<ScalarExpr>) -> Self {
        let mut roots = coords.clone();
        roots.extend(coords.iter().map(|c| c.diff(0)));
        Curve { tape: Tape::compile(&roots), coords }
    }

    /// Parses one expression in `t` per coordinate.
    pub fn parse(exprs: &[&str]) -> Result<Self> {
        let coords = exprs.iter().map(|s| parse(s, &Vars::Curve)).collect::<Result<Vec<_>, _>>()?;
        Ok(Curve::new(coords))
    }

    /// The straight segment from `a` to `b`.
    pub fn segment(a: &[f64], b: &[f64]) -> Self {
        let t = ScalarExpr::var(0);
        Curve::new(a.iter().zip(b).map(|(&p, &q)| p + (q - p) * &t).collect())
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// Position and velocity at `t`.
    pub fn at(&self, t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let out = self.tape.eval(&[t])?;
        let d = self.dim();
        Ok((out[..d].to_vec(), out[d..].to_vec()))
    }

    /// Checks that the curve stays in the box with finite velocity.
    pub fn validate(&self, chart: &Chart) -> Result<()> {
        if self.dim() != chart.dim() {
            return Err(Error::Invalid(format!(
                "curve has {} coordinates, chart has dimension {}",
                self.dim(),
                chart.dim()
            )));
        }
        for i in 0..=64 {
            let (x, v) = self.at(i as f64 / 64.0)?;
            chart.check_point(&x)?;
            if v.iter().any(|c| !c.is_finite()) {
                return Err(Error::Invalid("curve velocity is not finite".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TransportOptions {
    /// Absolute tolerance on the local error of each accepted step.
    pub tol: f64,
    pub max_steps: usize,
}

impl Default for TransportOptions {
    fn default() -> Self {
        TransportOptions::from(&Config::default())
    }
}

impl From<&Config> for TransportOptions {
    fn from(c: &Config) -> Self {
        TransportOptions { tol: c.rk_tol, max_steps: c.max_steps }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TransportResult {
    /// Propagator from the tractor space at `c(0)` to that at `c(1)`, on slot vectors.
    #[serde(skip)]
    pub matrix: DMatrix<f64>,
    pub endpoint: Option<TractorValue>,
    /// Accepted mesh `(t, c(t))`.
    pub path: Vec<(f64, Vec<f64>)>,
    pub steps: usize,
    pub rejected: usize,
    /// Largest local error estimate over accepted steps.
    pub max_local_error: f64,
    /// `max_t |M(t)ᵀ H(c(t)) M(t) − H(c(0))|`: drift of the tractor metric.
    pub metric_drift: f64,
}

struct Sampler<'a> {
    chart: &'a Chart,
    curve: &'a Curve,
}

impl Sampler<'_> {
    /// Generator `F(t) = −ċ^a 𝒜_a(c(t))` and the tractor metric at `c(t)`.
    fn eval(&self, t: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let (x, v) = self.curve.at(t)?;
        if !self.chart.contains(&x) {
            return Err(Error::OutsideBox { point: x });
        }
        let geo = LocalGeometry::at(self.chart, &x)?;
        let n = geo.dim + 2;
        let mut f = DMatrix::zeros(n, n);
        for (a, m) in connection_matrices(&geo).iter().enumerate() {
            if v[a] == 0.0 {
                continue;
            }
            for i in 0..n {
                for j in 0..n {
                    f[(i, j)] -= v[a] * m[[i, j]];
                }
            }
        }
        let h = metric_matrix(&geo.ginv);
        Ok((f, DMatrix::from_fn(n, n, |i, j| h[[i, j]])))
    }
}

fn rk4(y: &DMatrix<f64>, h: f64, f0: &DMatrix<f64>, fm: &DMatrix<f64>, f1: &DMatrix<f64>) -> DMatrix<f64> {
    let k1 = f0 * y;
    let k2 = fm * (y + &k1 * (0.5 * h));
    let k3 = fm * (y + &k2 * (0.5 * h));
    let k4 = f1 * (y + &k3 * h);
    y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, v| a.max(v.abs()))
}

/// Propagator of the tractor connection along `curve`.
pub fn transport_matrix(chart: &Chart, curve: &Curve, opts: &TransportOptions) -> Result<TransportResult> {
    if curve.dim() != chart.dim() {
        return Err(Error::Invalid("curve and chart dimensions differ".into()));
    }
    let s = Sampler { chart, curve };
    let n = chart.dim() + 2;
    let mut y = DMatrix::<f64>::identity(n, n);
    let (mut f_t, h0) = s.eval(0.0)?;
    let mut t = 0.0f64;
    let mut h = 1.0f64 / 16.0;
    let mut res = TransportResult {
        matrix: DMatrix::zeros(0, 0),
        endpoint: None,
        path: vec![(0.0, curve.at(0.0)?.0)],
        steps: 0,
        rejected: 0,
        max_local_error: 0.0,
        metric_drift: 0.0,
    };
    while t < 1.0 {
        if res.steps + res.rejected >= opts.max_steps {
            return Err(Error::StepFailure(format!("step budget of {} exhausted at t = {t}", opts.max_steps)));
        }
        h = h.min(1.0 - t);
        if h < 1e-13 {
            return Err(Error::StepFailure(format!("step size underflow at t = {t}")));
        }
        let (fq, _) = s.eval(t + 0.25 * h)?;
        let (fm, _) = s.eval(t + 0.5 * h)?;
        let (f3q, _) = s.eval(t + 0.75 * h)?;
        let (f1, h1) = s.eval(t + h)?;
        let full = rk4(&y, h, &f_t, &fm, &f1);
        let half = rk4(&rk4(&y, 0.5 * h, &f_t, &fq, &fm), 0.5 * h, &fm, &f3q, &f1);
        let err = max_abs(&(&half - &full)) / 15.0;
        if err <= opts.tol || h < 1e-12 {
            y = &half + (&half - &full) / 15.0;
            t = if 1.0 - (t + h) < 1e-15 { 1.0 } else { t + h };
            f_t = f1;
            res.steps += 1;
            res.max_local_error = res.max_local_error.max(err);
            res.path.push((t, curve.at(t)?.0));
            let drift = max_abs(&(y.transpose() * &h1 * &y - &h0));
            res.metric_drift = res.metric_drift.max(drift);
        } else {
            res.rejected += 1;
        }
        let factor = if err == 0.0 { 4.0 } else { (0.9 * (opts.tol / err).powf(0.2)).clamp(0.2, 4.0) };
        h *= factor;
    }
    res.matrix = y;
    Ok(res)
}

/// Transports `u0` from `c(0)` to `c(1)`.
pub fn parallel_transport(
    chart: &Chart,
    curve: &Curve,
    u0: &TractorValue,
    opts: &TransportOptions,
) -> Result<TransportResult> {
    if u0.scale != chart.name() {
        return Err(Error::ScaleMismatch { left: u0.scale.clone(), right: chart.name().to_string() });
    }
    curve.validate(chart)?;
    let mut res = transport_matrix(chart, curve, opts)?;
    let end = &res.matrix * DVector::from_vec(u0.slots());
    res.endpoint = Some(TractorValue::from_slots(end.as_slice(), chart.name()));
    Ok(res)
}

/// Propagator along a chain of curves, each starting where the previous ends.
pub fn transport_chain(chart: &Chart, pieces: &[Curve], opts: &TransportOptions) -> Result<DMatrix<f64>> {
    let n = chart.dim() + 2;
    let mut m = DMatrix::identity(n, n);
    for c in pieces {
        m = transport_matrix(chart, c, opts)?.matrix * m;
    }
    Ok(m)
}

/// Propagator by classical RK4 with `steps` equal steps. The result depends
/// smoothly on the curve, which makes it suitable for differencing.
pub fn transport_fixed(chart: &Chart, curve: &Curve, steps: usize) -> Result<DMatrix<f64>> {
    if curve.dim() != chart.dim() {
        return Err(Error::Invalid("curve and chart dimensions differ".into()));
    }
    let s = Sampler { chart, curve };
    let n = chart.dim() + 2;
    let h = 1.0 / steps as f64;
    let mut y = DMatrix::<f64>::identity(n, n);
    let mut f0 = s.eval(0.0)?.0;
    for i in 0..steps {
        let t = i as f64 * h;
        let fm = s.eval(t + 0.5 * h)?.0;
        let f1 = s.eval(t + h)?.0;
        y = rk4(&y, h, &f0, &fm, &f1);
        f0 = f1;
    }
    Ok(y)
}
