//! Conformal rescaling `ĝ = e^{2ω} g` and the transformation laws that
//! cross-scale comparisons are checked against.

use crate::error::{Error, Result};
use crate::fields::ScalarExpr;
use crate::geometry::{Chart, LocalGeometry, Tensor, TensorField};
use crate::real::Real;

/// A change of scale, with `Υ = dω` differentiated exactly.
#[derive(Debug, Clone)]
pub struct ConformalRescale {
    pub omega: ScalarExpr,
    pub upsilon: Vec<ScalarExpr>,
}

impl ConformalRescale {
    pub fn new(omega: ScalarExpr, dim: usize) -> Self {
        let upsilon = (0..dim).map(|a| omega.diff(a)).collect();
        ConformalRescale { omega, upsilon }
    }

    pub fn dim(&self) -> usize {
        self.upsilon.len()
    }

    /// `ω`, `Υ_a` and `∂_aΥ_b` at `x`.
    pub fn jet<T: Real>(&self, x: &[T]) -> Result<(T, Vec<T>, Tensor<T>)> {
        let d = self.dim();
        let w = self.omega.eval(x)?;
        let u = self.upsilon.iter().map(|e| e.eval(x)).collect::<Result<Vec<_>, _>>()?;
        let mut du = Tensor::zeros(d, 2);
        for a in 0..d {
            for b in a..d {
                let v = self.upsilon[b].diff(a).eval(x)?;
                du[[a, b]] = v;
                du[[b, a]] = v;
            }
        }
        Ok((w, u, du))
    }
}

/// Tensor components carrying a density weight in a declared scale.
#[derive(Debug, Clone)]
pub struct WeightedField {
    pub field: TensorField,
    /// Conformal weight; integer or half-integer.
    pub weight: f64,
}

impl WeightedField {
    pub fn new(field: TensorField, weight: f64) -> Result<Self> {
        if (2.0 * weight).fract() != 0.0 {
            return Err(Error::Invalid(format!("weight {weight} is not a half-integer")));
        }
        Ok(WeightedField { field, weight })
    }

    pub fn density(dim: usize, f: ScalarExpr, weight: f64) -> Result<Self> {
        WeightedField::new(TensorField::scalar(dim, f), weight)
    }

    /// Components expressed in the rescaled chart: multiplied by `e^{wω}`.
    pub fn rescale(&self, r: &ConformalRescale) -> WeightedField {
        let factor = (self.weight * &r.omega).exp();
        let components = self.field.components.iter().map(|c| &factor * c).collect();
        WeightedField { field: TensorField { components, ..self.field.clone() }, weight: self.weight }
    }
}

/// The chart with metric `e^{2ω} g`. In dimensions one and two the `μ`-datum
/// is carried along and the low-dimensional Schouten tensor transforms by the
/// usual law, since the Einstein base scale is kept.
pub fn rescale_chart(chart: &Chart, omega: &ScalarExpr) -> Result<Chart> {
    let name = format!("{}~", chart.name());
    chart.rescaled(omega, name)
}

/// Same as [`rescale_chart`] but without grid validation, for scales that
/// degenerate somewhere in the box (e.g. `σ^{-2} g` across the zero set of `σ`).
pub fn rescale_chart_unchecked(chart: &Chart, omega: &ScalarExpr) -> Chart {
    chart.rescaled_unchecked(omega, format!("{}~", chart.name()))
}

/// `P̂_ab = P_ab − ∇_aΥ_b + Υ_aΥ_b − ½|Υ|² g_ab` and its `ĝ`-trace.
pub fn schouten_transform_at<T: Real>(
    geo: &LocalGeometry<T>,
    schouten: &Tensor<T>,
    omega: T,
    upsilon: &[T],
    dupsilon: &Tensor<T>,
) -> (Tensor<T>, T) {
    let d = geo.dim;
    let mut u2 = T::zero();
    for a in 0..d {
        for b in 0..d {
            u2 += geo.ginv[[a, b]] * upsilon[a] * upsilon[b];
        }
    }
    let half = T::cst(0.5);
    let p = Tensor::from_fn(d, |[a, b]| {
        let mut grad_u = dupsilon[[a, b]];
        for c in 0..d {
            grad_u -= geo.gamma[[c, a, b]] * upsilon[c];
        }
        schouten[[a, b]] - grad_u + upsilon[a] * upsilon[b] - half * u2 * geo.g[[a, b]]
    });
    let mut j = T::zero();
    for a in 0..d {
        for b in 0..d {
            j += geo.ginv[[a, b]] * p[[a, b]];
        }
    }
    (p, j * (T::cst(-2.0) * omega).exp())
}

/// Evaluates the Schouten transformation law at `x`, given `P` and `J`
/// computed in the chart's own scale.
pub fn schouten_transform(
    chart: &Chart,
    schouten: &Tensor<f64>,
    j: f64,
    rescale: &ConformalRescale,
    x: &[f64],
) -> Result<(Tensor<f64>, f64)> {
    chart.check_point(x)?;
    let geo = LocalGeometry::at(chart, x)?;
    let (w, u, du) = rescale.jet(x)?;
    if u.iter().all(|v| *v == 0.0) && du.max_abs() == 0.0 && w == 0.0 {
        return Ok((schouten.clone(), j));
    }
    Ok(schouten_transform_at(&geo, schouten, w, &u, &du))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{norm_squared, parse_chart_expr};
    use crate::geometry::curvature;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn flat(d: usize) -> Chart {
        Chart::conformally_flat("flat", vec![(-1.0, 1.0); d], 1.0.into(), (d <= 2).then_some(0.0)).unwrap()
    }

    fn random_omega(rng: &mut ChaCha8Rng, d: usize) -> ScalarExpr {
        let x = ScalarExpr::var;
        let mut w = ScalarExpr::constant(rng.random_range(-0.3..0.3));
        for a in 0..d {
            w = w + rng.random_range(-0.4..0.4) * x(a)
                + rng.random_range(-0.3..0.3) * (rng.random_range(0.5..1.5) * x(a)).sin();
        }
        w + rng.random_range(-0.2..0.2) * x(0) * x(d - 1)
    }

    fn fixtures() -> Vec<Chart> {
        let x = ScalarExpr::var;
        let sphere = Chart::conformally_flat(
            "sphere",
            vec![(-1.0, 1.0); 3],
            4.0 / (1.0 + norm_squared(3)).powi(2),
            None,
        )
        .unwrap();
        let warped = Chart::diagonal(
            "warped",
            vec![(-0.5, 0.5); 4],
            vec![1.0.into(), (1.0 + 0.3 * x(0).powi(2)).into(), (2.0 + x(0) * x(1)).into(), x(2).cosh()],
            None,
        )
        .unwrap();
        let s2 = Chart::conformally_flat("s2", vec![(-1.0, 1.0); 2], 4.0 / (1.0 + norm_squared(2)).powi(2), Some(0.5))
            .unwrap();
        vec![sphere, warped, s2]
    }

    #[test]
    fn trivial_and_constant_rescales() {
        let f = flat(3);
        let same = rescale_chart(&f, &ScalarExpr::zero()).unwrap();
        assert_eq!(same.metric_entry(0, 0), f.metric_entry(0, 0));
        let four = rescale_chart(&f, &ScalarExpr::constant(2f64.ln())).unwrap();
        assert!((four.metric_entry(1, 1).eval(&[0.3, 0.2, 0.1]).unwrap() - 4.0).abs() < 1e-14);
        let punctured = Chart::conformally_flat("flat", vec![(0.5, 1.5); 3], 1.0.into(), None).unwrap();
        let inv = rescale_chart(&punctured, &-(norm_squared(3).ln())).unwrap();
        let x = [0.7, 1.1, 0.9];
        let r2: f64 = x.iter().map(|v| v * v).sum();
        assert!((inv.metric_entry(2, 2).eval(&x).unwrap() - r2.powi(-2)).abs() < 1e-14);
    }

    #[test]
    fn schouten_of_exponential_rescale_of_flat_space() {
        let f = flat(3);
        let r = ConformalRescale::new(ScalarExpr::var(0), 3);
        let (p, _) = schouten_transform(&f, &Tensor::zeros(3, 2), 0.0, &r, &[0.2, 0.1, -0.3]).unwrap();
        assert!((p[[0, 0]] - 0.5).abs() < 1e-15);
        assert!((p[[1, 1]] + 0.5).abs() < 1e-15);
        assert!((p[[2, 2]] + 0.5).abs() < 1e-15);
        assert_eq!(p[[0, 1]], 0.0);
        let zero = ConformalRescale::new(ScalarExpr::zero(), 3);
        let (q, j) = schouten_transform(&f, &p, 1.25, &zero, &[0.0; 3]).unwrap();
        assert_eq!((q, j), (p, 1.25));
    }

    #[test]
    fn rescale_composition_is_exact() {
        let f = flat(3);
        let w1 = parse_chart_expr("0.1*x1 + sin(x2)", 3).unwrap();
        let w2 = parse_chart_expr("x3^2/3", 3).unwrap();
        let twice = rescale_chart(&rescale_chart(&f, &w1).unwrap(), &w2).unwrap();
        let once = rescale_chart(&f, &(&w1 + &w2)).unwrap();
        assert_eq!(twice.metric(), once.metric());
    }

    #[test]
    fn transformation_law_matches_recomputation_and_weyl_is_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for chart in fixtures() {
            let d = chart.dim();
            for _ in 0..5 {
                let w = random_omega(&mut rng, d);
                let hat = rescale_chart(&chart, &w).unwrap();
                let r = ConformalRescale::new(w.clone(), d);
                let x: Vec<f64> = chart.bounds().iter().map(|&(a, b)| rng.random_range(a..b) * 0.9).collect();
                let before = curvature(&chart, &x).unwrap();
                let after = curvature(&hat, &x).unwrap();
                let (p, j) = schouten_transform(&chart, &before.schouten, before.j, &r, &x).unwrap();
                let scale = p.max_abs().max(1.0);
                assert!(p.max_abs_diff(&after.schouten) < 1e-8 * scale, "{}", chart.name());
                assert!((j - after.j).abs() < 1e-8 * scale);
                // the (3,1) Weyl tensor is invariant, so lowered components scale by e^{2ω}
                let e2w = (2.0 * w.eval(&x).unwrap()).exp();
                let lowered = before.weyl.map(|v| v * e2w);
                assert!(lowered.max_abs_diff(&after.weyl) < 1e-8 * lowered.max_abs().max(1.0));
            }
        }
    }

    #[test]
    fn weighted_density_scales() {
        let f = WeightedField::density(3, ScalarExpr::var(0), 1.0).unwrap();
        let r = ConformalRescale::new(ScalarExpr::constant(0.5), 3);
        let g = f.rescale(&r);
        assert!((g.field.components[0].eval(&[2.0, 0.0, 0.0]).unwrap() - 2.0 * 0.5f64.exp()).abs() < 1e-14);
        assert!(WeightedField::density(3, ScalarExpr::one(), 0.3).is_err());
    }
}
