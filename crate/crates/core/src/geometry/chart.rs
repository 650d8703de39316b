use std::path::Path;
use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::fields::{parse_chart_expr, ScalarExpr, Tape};
use crate::real::{Real, MAX_DIM};

/// A coordinate box carrying a Riemannian metric `e^{2ω} b_ij dx^i dx^j`.
///
/// The log factor `ω` is kept apart from the base matrix `b` so that repeated
/// rescales compose additively, and so that in dimensions one and two the
/// Einstein scale (where `b` lives) stays available for the `μ`-rule.
#[derive(Debug, Clone)]
pub struct Chart {
    name: String,
    bounds: Vec<(f64, f64)>,
    base: Vec<ScalarExpr>,
    omega: ScalarExpr,
    mu: Option<f64>,
    periodic: Vec<bool>,
    jets: OnceLock<Arc<JetTape>>,
}

/// On-disk chart description.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ChartFile {
    #[serde(default)]
    pub name: Option<String>,
    pub dim: usize,
    #[serde(rename = "box")]
    pub bounds: Vec<[f64; 2]>,
    pub metric: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub periodic: Option<Vec<bool>>,
}

impl Chart {
    /// Registers a chart, checking symmetry and positive-definiteness of the
    /// metric on a grid over the box.
    pub fn new(
        name: impl Into<String>,
        bounds: Vec<(f64, f64)>,
        metric: Vec<Vec<ScalarExpr>>,
        mu: Option<f64>,
    ) -> Result<Chart> {
        let dim = bounds.len();
        if metric.len() != dim || metric.iter().any(|row| row.len() != dim) {
            return Err(Error::InvalidChart(format!("metric must be a {dim}x{dim} matrix")));
        }
        let base = metric.into_iter().flatten().collect();
        Chart::assemble(name.into(), bounds, base, ScalarExpr::zero(), mu, vec![false; dim])
    }

    /// Conformally flat chart `e^{2ω}δ`.
    pub fn conformally_flat(
        name: impl Into<String>,
        bounds: Vec<(f64, f64)>,
        factor: ScalarExpr,
        mu: Option<f64>,
    ) -> Result<Chart> {
        let d = bounds.len();
        let metric = (0..d)
            .map(|i| (0..d).map(|j| if i == j { factor.clone() } else { ScalarExpr::zero() }).collect())
            .collect();
        Chart::new(name, bounds, metric, mu)
    }

    pub fn diagonal(
        name: impl Into<String>,
        bounds: Vec<(f64, f64)>,
        diag: Vec<ScalarExpr>,
        mu: Option<f64>,
    ) -> Result<Chart> {
        let d = bounds.len();
        if diag.len() != d {
            return Err(Error::InvalidChart(format!("expected {d} diagonal entries")));
        }
        let metric = (0..d)
            .map(|i| (0..d).map(|j| if i == j { diag[i].clone() } else { ScalarExpr::zero() }).collect())
            .collect();
        Chart::new(name, bounds, metric, mu)
    }

    fn assemble(
        name: String,
        bounds: Vec<(f64, f64)>,
        base: Vec<ScalarExpr>,
        omega: ScalarExpr,
        mu: Option<f64>,
        periodic: Vec<bool>,
    ) -> Result<Chart> {
        let dim = bounds.len();
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidChart(format!("dimension must be in 1..={MAX_DIM}, got {dim}")));
        }
        for (i, &(lo, hi)) in bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidChart(format!("box interval {i} is [{lo}, {hi}]")));
            }
        }
        match (dim <= 2, mu) {
            (true, None) => return Err(Error::MissingMu { dim }),
            (false, Some(_)) => {
                return Err(Error::InvalidChart(format!("mu is only meaningful in dimension 1 or 2, got {dim}")))
            }
            (_, Some(m)) if !m.is_finite() => return Err(Error::InvalidChart("mu is not finite".into())),
            _ => {}
        }
        if periodic.len() != dim {
            return Err(Error::InvalidChart("periodic flags must match the dimension".into()));
        }
        let max_var = base.iter().chain([&omega]).filter_map(|e| e.max_var()).max();
        if let Some(v) = max_var {
            if v >= dim {
                return Err(Error::InvalidChart(format!("metric references x{} in dimension {dim}", v + 1)));
            }
        }
        let chart = Chart { name, bounds, base, omega, mu, periodic, jets: OnceLock::new() };
        chart.validate()?;
        Ok(chart)
    }

    /// Same chart without re-running the grid validation; used for scales that
    /// are singular somewhere in the box.
    pub(crate) fn rescaled_unchecked(&self, omega: &ScalarExpr, name: String) -> Chart {
        Chart {
            name,
            bounds: self.bounds.clone(),
            base: self.base.clone(),
            omega: &self.omega + omega,
            mu: self.mu,
            periodic: self.periodic.clone(),
            jets: OnceLock::new(),
        }
    }

    pub(crate) fn rescaled(&self, omega: &ScalarExpr, name: String) -> Result<Chart> {
        let c = self.rescaled_unchecked(omega, name);
        c.validate()?;
        Ok(c)
    }

    pub fn with_periodic(mut self, periodic: Vec<bool>) -> Result<Chart> {
        if periodic.len() != self.dim() {
            return Err(Error::InvalidChart("periodic flags must match the dimension".into()));
        }
        self.periodic = periodic;
        Ok(self)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Chart {
        self.name = name.into();
        self
    }

    /// Restricts the chart to a sub-box.
    pub fn with_bounds(&self, bounds: Vec<(f64, f64)>) -> Result<Chart> {
        if bounds.len() != self.dim() {
            return Err(Error::InvalidChart("box dimension mismatch".into()));
        }
        Chart::assemble(
            self.name.clone(),
            bounds,
            self.base.clone(),
            self.omega.clone(),
            self.mu,
            self.periodic.clone(),
        )
    }

    fn validate(&self) -> Result<()> {
        let d = self.dim();
        let per_axis = match d {
            1..=3 => 9,
            4 => 7,
            5 => 5,
            _ => 3,
        };
        for x in self.grid(per_axis) {
            let g = self
                .metric_at(&x)
                .map_err(|e| Error::InvalidChart(format!("metric not defined at {x:?}: {e}")))?;
            let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for i in 0..d {
                for j in 0..i {
                    if (g[(i, j)] - g[(j, i)]).abs() > 1e-12 * scale.max(1.0) {
                        return Err(Error::InvalidChart(format!("metric is not symmetric at {x:?}")));
                    }
                }
            }
            if g.cholesky().is_none() {
                return Err(Error::InvalidChart(format!("metric is not positive definite at {x:?}")));
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn mu(&self) -> Option<f64> {
        self.mu
    }

    pub fn periodic(&self) -> &[bool] {
        &self.periodic
    }

    /// The log conformal factor relative to the base matrix.
    pub fn log_factor(&self) -> &ScalarExpr {
        &self.omega
    }

    pub fn base_entry(&self, i: usize, j: usize) -> &ScalarExpr {
        &self.base[i * self.dim() + j]
    }

    /// Metric component `g_ij` as an expression.
    pub fn metric_entry(&self, i: usize, j: usize) -> ScalarExpr {
        let b = self.base_entry(i, j);
        if self.omega.is_zero() {
            b.clone()
        } else {
            (2.0 * &self.omega).exp() * b
        }
    }

    pub fn metric(&self) -> Vec<Vec<ScalarExpr>> {
        let d = self.dim();
        (0..d).map(|i| (0..d).map(|j| self.metric_entry(i, j)).collect()).collect()
    }

    /// The chart with the log factor dropped. In dimensions one and two this is
    /// the scale in which the `μ`-rule defines the Schouten tensor.
    pub fn base_chart(&self) -> Chart {
        Chart {
            name: self.name.clone(),
            bounds: self.bounds.clone(),
            base: self.base.clone(),
            omega: ScalarExpr::zero(),
            mu: self.mu,
            periodic: self.periodic.clone(),
            jets: OnceLock::new(),
        }
    }

    pub fn center(&self) -> Vec<f64> {
        self.bounds.iter().map(|(a, b)| 0.5 * (a + b)).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter().zip(&self.bounds).all(|(&v, &(lo, hi))| {
                let slack = 1e-9 * (hi - lo);
                v >= lo - slack && v <= hi + slack
            })
    }

    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Invalid(format!(
                "point has {} coordinates, chart has dimension {}",
                x.len(),
                self.dim()
            )));
        }
        if !self.contains(x) {
            return Err(Error::OutsideBox { point: x.to_vec() });
        }
        Ok(())
    }

    /// Tensor-product grid with `n` nodes per axis, endpoints included.
    pub fn grid(&self, n: usize) -> Vec<Vec<f64>> {
        grid_points(&self.bounds, n)
    }

    /// Metric matrix at a point.
    pub fn metric_at(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let d = self.dim();
        let factor = (2.0 * self.omega.eval(x)?).exp();
        let mut g = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                g[(i, j)] = factor * self.base_entry(i, j).eval(x)?;
            }
        }
        Ok(g)
    }

    pub(crate) fn jet_tape(&self) -> &JetTape {
        self.jets.get_or_init(|| Arc::new(JetTape::build(self)))
    }

    /// Metric and its first two partials at `x`.
    pub fn jet<T: Real>(&self, x: &[T]) -> Result<MetricJet<T>> {
        self.jet_tape().eval(x)
    }

    pub fn to_file(&self) -> ChartFile {
        let d = self.dim();
        ChartFile {
            name: Some(self.name.clone()),
            dim: d,
            bounds: self.bounds.iter().map(|&(a, b)| [a, b]).collect(),
            metric: (0..d).map(|i| (0..d).map(|j| self.base_entry(i, j).to_string()).collect()).collect(),
            mu: self.mu,
            omega: (!self.omega.is_zero()).then(|| self.omega.to_string()),
            periodic: self.periodic.iter().any(|&p| p).then(|| self.periodic.clone()),
        }
    }

    pub fn from_file(f: &ChartFile) -> Result<Chart> {
        let d = f.dim;
        if f.bounds.len() != d {
            return Err(Error::InvalidChart(format!("box has {} intervals, dim is {d}", f.bounds.len())));
        }
        if f.metric.len() != d || f.metric.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidChart(format!("metric must be a {d}x{d} matrix")));
        }
        let mut base = Vec::with_capacity(d * d);
        for row in &f.metric {
            for s in row {
                base.push(parse_chart_expr(s, d)?);
            }
        }
        let omega = match &f.omega {
            Some(s) => parse_chart_expr(s, d)?,
            None => ScalarExpr::zero(),
        };
        Chart::assemble(
            f.name.clone().unwrap_or_else(|| "chart".into()),
            f.bounds.iter().map(|&[a, b]| (a, b)).collect(),
            base,
            omega,
            f.mu,
            f.periodic.clone().unwrap_or_else(|| vec![false; d]),
        )
    }

    pub fn from_json(s: &str) -> Result<Chart> {
        let f: ChartFile =
            serde_json::from_str(s).map_err(|e| Error::InvalidChart(format!("malformed chart file: {e}")))?;
        Chart::from_file(&f)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Chart> {
        Chart::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("chart file serializes")
    }

    /// SHA-256 of the canonical chart file, hex encoded.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(&self.to_file()).expect("chart file serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub(crate) fn grid_points(bounds: &[(f64, f64)], n: usize) -> Vec<Vec<f64>> {
    let n = n.max(2);
    let d = bounds.len();
    let total = n.pow(d as u32);
    let mut out = Vec::with_capacity(total);
    let mut ix = vec![0usize; d];
    for _ in 0..total {
        out.push(
            ix.iter()
                .zip(bounds)
                .map(|(&i, &(lo, hi))| lo + (hi - lo) * i as f64 / (n - 1) as f64)
                .collect(),
        );
        for slot in (0..d).rev() {
            ix[slot] += 1;
            if ix[slot] < n {
                break;
            }
            ix[slot] = 0;
        }
    }
    out
}

/// Values of the metric and its partials at one point.
#[derive(Debug, Clone)]
pub struct MetricJet<T> {
    pub g: Tensor<T>,
    /// `dg[[k, i, j]] = ∂_k g_ij`.
    pub dg: Tensor<T>,
    /// `ddg[[k, l, i, j]] = ∂_k ∂_l g_ij`.
    pub ddg: Tensor<T>,
    /// Einstein-scale data for dimensions one and two.
    pub low: Option<LowDimJet<T>>,
}

#[derive(Debug, Clone)]
pub struct LowDimJet<T> {
    pub mu: f64,
    pub base: Tensor<T>,
    pub dbase: Tensor<T>,
    pub omega: T,
    pub domega: Vec<T>,
    pub ddomega: Tensor<T>,
}

#[derive(Debug)]
pub(crate) struct JetTape {
    dim: usize,
    mu: Option<f64>,
    tape: Tape,
}

fn pairs(d: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..d).flat_map(move |i| (i..d).map(move |j| (i, j)))
}

impl JetTape {
    fn build(chart: &Chart) -> JetTape {
        let d = chart.dim();
        let mut roots = Vec::new();
        for (i, j) in pairs(d) {
            let g = chart.metric_entry(i, j);
            let dg: Vec<_> = (0..d).map(|k| g.diff(k)).collect();
            roots.push(g);
            for (k, dk) in dg.iter().enumerate() {
                roots.push(dk.clone());
                for l in k..d {
                    roots.push(dk.diff(l));
                }
            }
        }
        if d <= 2 {
            for (i, j) in pairs(d) {
                let b = chart.base_entry(i, j);
                roots.push(b.clone());
                roots.extend((0..d).map(|k| b.diff(k)));
            }
            let w = chart.log_factor();
            roots.push(w.clone());
            for k in 0..d {
                let dk = w.diff(k);
                roots.push(dk.clone());
                roots.extend((k..d).map(|l| dk.diff(l)));
            }
        }
        JetTape { dim: d, mu: chart.mu(), tape: Tape::compile(&roots) }
    }

    fn eval<T: Real>(&self, x: &[T]) -> Result<MetricJet<T>> {
        let d = self.dim;
        if x.len() != d {
            return Err(Error::Invalid(format!("expected {d} coordinates, got {}", x.len())));
        }
        let out = self.tape.eval(x)?;
        let mut it = out.into_iter();
        let mut next = || it.next().expect("tape output count");
        let mut g = Tensor::zeros(d, 2);
        let mut dg = Tensor::zeros(d, 3);
        let mut ddg = Tensor::zeros(d, 4);
        for (i, j) in pairs(d) {
            let v = next();
            g[[i, j]] = v;
            g[[j, i]] = v;
            for k in 0..d {
                let v = next();
                dg[[k, i, j]] = v;
                dg[[k, j, i]] = v;
                for l in k..d {
                    let v = next();
                    for (a, b) in [(k, l), (l, k)] {
                        ddg[[a, b, i, j]] = v;
                        ddg[[a, b, j, i]] = v;
                    }
                }
            }
        }
        let low = if d <= 2 {
            let mut base = Tensor::zeros(d, 2);
            let mut dbase = Tensor::zeros(d, 3);
            for (i, j) in pairs(d) {
                let v = next();
                base[[i, j]] = v;
                base[[j, i]] = v;
                for k in 0..d {
                    let v = next();
                    dbase[[k, i, j]] = v;
                    dbase[[k, j, i]] = v;
                }
            }
            let omega = next();
            let mut domega = vec![T::zero(); d];
            let mut ddomega = Tensor::zeros(d, 2);
            for k in 0..d {
                domega[k] = next();
                for l in k..d {
                    let v = next();
                    ddomega[[k, l]] = v;
                    ddomega[[l, k]] = v;
                }
            }
            Some(LowDimJet {
                mu: self.mu.expect("low-dimensional charts carry mu"),
                base,
                dbase,
                omega,
                domega,
                ddomega,
            })
        } else {
            None
        };
        Ok(MetricJet { g, dg, ddg, low })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::norm_squared;

    fn sphere(d: usize) -> Chart {
        let f = 4.0 / (1.0 + norm_squared(d)).powi(2);
        Chart::conformally_flat("sphere", vec![(-1.0, 1.0); d], f, (d <= 2).then_some(0.5)).unwrap()
    }

    #[test]
    fn registration_rejects_bad_metrics() {
        let x = ScalarExpr::var;
        let indefinite = Chart::diagonal("bad", vec![(-1.0, 1.0); 3], vec![1.0.into(), (-1.0).into(), 1.0.into()], None);
        assert!(matches!(indefinite, Err(Error::InvalidChart(_))));
        let degenerate = Chart::diagonal("bad", vec![(-1.0, 1.0); 3], vec![x(0), 1.0.into(), 1.0.into()], None);
        assert!(degenerate.is_err());
        let missing_mu = Chart::diagonal("bad", vec![(-1.0, 1.0); 2], vec![1.0.into(), 1.0.into()], None);
        assert!(matches!(missing_mu, Err(Error::MissingMu { dim: 2 })));
        let stray_mu = Chart::diagonal("bad", vec![(-1.0, 1.0); 3], vec![1.0.into(); 3], Some(1.0));
        assert!(stray_mu.is_err());
    }

    #[test]
    fn file_round_trip_preserves_digest() {
        let c = sphere(3);
        let again = Chart::from_json(&c.to_json()).unwrap();
        assert_eq!(c.digest(), again.digest());
        assert_eq!(again.metric_entry(1, 1), c.metric_entry(1, 1));
    }

    #[test]
    fn jet_matches_direct_differentiation() {
        let c = sphere(3);
        let x = [0.2, -0.3, 0.5];
        let jet = c.jet(&x).unwrap();
        let g11 = c.metric_entry(1, 1);
        assert_eq!(jet.g[[1, 1]], g11.eval(&x).unwrap());
        assert!((jet.dg[[2, 1, 1]] - g11.diff(2).eval(&x).unwrap()).abs() < 1e-14);
        assert!((jet.ddg[[0, 2, 1, 1]] - g11.diff(0).diff(2).eval(&x).unwrap()).abs() < 1e-14);
        assert_eq!(jet.g[[0, 1]], 0.0);
    }

    #[test]
    fn box_membership() {
        let c = sphere(3);
        assert!(c.check_point(&[0.0, 1.0, -1.0]).is_ok());
        assert!(matches!(c.check_point(&[0.0, 1.1, 0.0]), Err(Error::OutsideBox { .. })));
    }
}
