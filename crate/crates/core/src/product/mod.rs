//! Special Einstein products `(M₁ × M₂, g₁ × g₂)` with `P^{g_i} = ±μ g_i`,
//! their split tractor bundle `T₁^⊥ ⊕ T₂^⊥`, lifted almost-Einstein
//! structures, the Poincaré–Einstein collar, and a catalog of fixture charts.

mod catalog;
mod collar;

pub use catalog::{catalog, catalog_list, CatalogEntry, Params};
pub use collar::{build_collar, collar_form_residual, collar_log_chart, default_r_max};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::almost_einstein::{extract_zeros, make_ae, AEStructure};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::fields::ScalarExpr;
use crate::geometry::{Chart, LocalGeometry};
use crate::tractor::{inverse_metric, pair};

const FACTOR_TOL: f64 = 1e-8;

fn factor_grid(chart: &Chart) -> Vec<Vec<f64>> {
    let n = match chart.dim() {
        1 => 9,
        2 => 7,
        3 => 5,
        4 => 4,
        _ => 3,
    };
    chart.grid(n)
}

/// `λ` with `P^g = λ g` on an Einstein chart, and the worst deviation from
/// that form (including `Sc = 4λ` on surfaces, where `P` comes from `μ`).
pub fn schouten_constant(chart: &Chart) -> Result<(f64, f64)> {
    let m = chart.dim();
    let center = LocalGeometry::at(chart, &chart.center())?;
    let lambda = center.j / m as f64;
    let mut worst = 0.0f64;
    for x in factor_grid(chart) {
        let geo = LocalGeometry::at(chart, &x)?;
        let target = geo.g.map(|v| lambda * v);
        let mut r = geo.schouten.max_abs_diff(&target);
        if m == 2 {
            r = r.max((geo.scalar - 4.0 * lambda).abs());
        }
        worst = worst.max(r / lambda.abs().max(1.0));
    }
    Ok((lambda, worst))
}

#[derive(Debug, Clone)]
pub struct SpecialProductSpec {
    pub chart1: Chart,
    pub chart2: Chart,
    /// `P^{g₁} = μ g₁` and `P^{g₂} = −μ g₂`.
    pub mu: f64,
    pub factor_residuals: (f64, f64),
}

/// Checks the special-product relation `|I₁|² = −|I₂|² ≠ 0` between two
/// Einstein factors, with the positive one first.
pub fn validate_special_product(chart1: &Chart, chart2: &Chart) -> Result<SpecialProductSpec> {
    let (m1, m2) = (chart1.dim(), chart2.dim());
    if m1 + m2 < 3 {
        return Err(Error::Invalid(format!("product dimension {} is below 3", m1 + m2)));
    }
    let (l1, r1) = schouten_constant(chart1)?;
    if r1 > FACTOR_TOL {
        return Err(Error::NotEinsteinFactor { residual: r1 });
    }
    let (l2, r2) = schouten_constant(chart2)?;
    if r2 > FACTOR_TOL {
        return Err(Error::NotEinsteinFactor { residual: r2 });
    }
    if l1 <= 0.0 || (l1 + l2).abs() > FACTOR_TOL * l1.abs().max(1.0) {
        return Err(Error::ScalarMismatch { mu1: l1, mu2: -l2 });
    }
    Ok(SpecialProductSpec { chart1: chart1.clone(), chart2: chart2.clone(), mu: l1, factor_residuals: (r1, r2) })
}

/// Block-diagonal product of charts, factor `i` using the coordinates after
/// those of the earlier factors.
pub fn block_product(name: impl Into<String>, charts: &[&Chart]) -> Result<Chart> {
    let d: usize = charts.iter().map(|c| c.dim()).sum();
    let mut metric = vec![vec![ScalarExpr::zero(); d]; d];
    let mut bounds = Vec::with_capacity(d);
    let mut periodic = Vec::with_capacity(d);
    let mut off = 0;
    for c in charts {
        for (i, row) in c.metric().into_iter().enumerate() {
            for (j, e) in row.into_iter().enumerate() {
                metric[off + i][off + j] = e.shift_vars(off);
            }
        }
        bounds.extend_from_slice(c.bounds());
        periodic.extend_from_slice(c.periodic());
        off += c.dim();
    }
    Chart::new(name, bounds, metric, None)?.with_periodic(periodic)
}

impl SpecialProductSpec {
    pub fn m1(&self) -> usize {
        self.chart1.dim()
    }

    pub fn m2(&self) -> usize {
        self.chart2.dim()
    }

    pub fn dim(&self) -> usize {
        self.m1() + self.m2()
    }

    /// `λ_i` with `P^{g_i} = λ_i g_i`.
    pub fn lambda(&self, factor: usize) -> f64 {
        if factor == 1 {
            self.mu
        } else {
            -self.mu
        }
    }

    fn factor(&self, factor: usize) -> &Chart {
        if factor == 1 {
            &self.chart1
        } else {
            &self.chart2
        }
    }

    /// Coordinate range of the factor inside the product.
    fn range(&self, factor: usize) -> std::ops::Range<usize> {
        if factor == 1 {
            0..self.m1()
        } else {
            self.m1()..self.dim()
        }
    }

    /// Factor Einstein tractor `I_i = (1, 0, −λ_i)` in the factor scale.
    pub fn einstein_tractor(&self, factor: usize) -> Vec<f64> {
        let m = self.factor(factor).dim();
        let mut v = vec![0.0; m + 2];
        v[0] = 1.0;
        v[m + 1] = -self.lambda(factor);
        v
    }

    /// Linear map from product slots to the concatenated factor slots,
    /// `(σ, μ, ρ) ↦ ((σλ_i + ρ)/(2λ_i), μ^{(i)}, (σλ_i + ρ)/2)`.
    pub fn split_matrix(&self) -> DMatrix<f64> {
        let (m1, m2, d) = (self.m1(), self.m2(), self.dim());
        let mut s = DMatrix::zeros(d + 4, d + 2);
        let mut row = 0;
        for f in [1, 2] {
            let l = self.lambda(f);
            let m = if f == 1 { m1 } else { m2 };
            s[(row, 0)] = 0.5;
            s[(row, d + 1)] = 0.5 / l;
            for (k, a) in self.range(f).enumerate() {
                s[(row + 1 + k, a + 1)] = 1.0;
            }
            s[(row + m + 1, 0)] = 0.5 * l;
            s[(row + m + 1, d + 1)] = 0.5;
            row += m + 2;
        }
        s
    }

    /// Product slots from the pair of factor parts.
    pub fn join_matrix(&self) -> DMatrix<f64> {
        let (m1, d) = (self.m1(), self.dim());
        let mut j = DMatrix::zeros(d + 2, d + 4);
        let mut col = 0;
        for f in [1, 2] {
            let m = self.factor(f).dim();
            j[(0, col)] = 1.0;
            j[(d + 1, col + m + 1)] = 1.0;
            let off = if f == 1 { 0 } else { m1 };
            for k in 0..m {
                j[(off + k + 1, col + 1 + k)] = 1.0;
            }
            col += m + 2;
        }
        j
    }

    pub fn split(&self, u: &[f64]) -> ProductTractor {
        let v = self.split_matrix() * DMatrix::from_column_slice(u.len(), 1, u);
        let k = self.m1() + 2;
        ProductTractor { part1: v.as_slice()[..k].to_vec(), part2: v.as_slice()[k..].to_vec() }
    }

    pub fn join(&self, t: &ProductTractor) -> Vec<f64> {
        let mut v = t.part1.clone();
        v.extend_from_slice(&t.part2);
        (self.join_matrix() * DMatrix::from_vec(v.len(), 1, v)).as_slice().to_vec()
    }

    /// Product canonical tractor `X = (X₁^⊥, X₂^⊥)` with `X_i^⊥ = (1/(2λ_i), 0, ½)`.
    pub fn canonical_x(&self) -> ProductTractor {
        let part = |f: usize| {
            let m = self.factor(f).dim();
            let mut v = vec![0.0; m + 2];
            v[0] = 0.5 / self.lambda(f);
            v[m + 1] = 0.5;
            v
        };
        ProductTractor { part1: part(1), part2: part(2) }
    }

    /// Product-slot bases (as columns) of `T₁^⊥ ⊕ 0` and `0 ⊕ T₂^⊥`.
    pub fn block_subspaces(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let d = self.dim();
        let block = |f: usize| {
            let r = self.range(f);
            let mut b = DMatrix::zeros(d + 2, r.len() + 1);
            // part for the other factor vanishes iff σλ_j + ρ = 0
            b[(0, 0)] = 1.0;
            b[(d + 1, 0)] = self.lambda(f);
            for (k, a) in r.enumerate() {
                b[(a + 1, k + 1)] = 1.0;
            }
            b
        };
        (block(1), block(2))
    }

    /// Projection of a product point onto factor `i`.
    pub fn factor_point(&self, factor: usize, x: &[f64]) -> Vec<f64> {
        x[self.range(factor)].to_vec()
    }

    /// `h₁(part₁, part₁') + h₂(part₂, part₂')` at the product point `x`.
    pub fn pair(&self, x: &[f64], a: &ProductTractor, b: &ProductTractor) -> Result<f64> {
        let g1 = inverse_metric(&self.chart1, &self.factor_point(1, x))?;
        let g2 = inverse_metric(&self.chart2, &self.factor_point(2, x))?;
        Ok(pair(&g1, &a.part1, &b.part1) + pair(&g2, &a.part2, &b.part2))
    }

    /// `max_i |h_i(part_i, I_i)|`.
    pub fn projection_residual(&self, t: &ProductTractor) -> f64 {
        let p = |part: &[f64], f: usize| {
            let i = self.einstein_tractor(f);
            let m = part.len() - 2;
            (part[0] * i[m + 1] + part[m + 1] * i[0]).abs()
        };
        p(&t.part1, 1).max(p(&t.part2, 2))
    }
}

/// A product tractor as a pair of factor tractors in `T₁^⊥ ⊕ T₂^⊥`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProductTractor {
    pub part1: Vec<f64>,
    pub part2: Vec<f64>,
}

/// The product chart of a validated spec.
pub fn build_product_chart(spec: &SpecialProductSpec) -> Result<Chart> {
    block_product(format!("{}x{}", spec.chart1.name(), spec.chart2.name()), &[&spec.chart1, &spec.chart2])
}

/// A factor structure lifted to the product as `K̃ = (K, 0)`.
#[derive(Debug, Clone)]
pub struct LiftedTractor {
    pub factor: AEStructure,
    pub lifted: AEStructure,
    /// `h(K, I_i)` on the factor.
    pub orthogonality: f64,
    /// Zero-crossing counts of `σ_K` on the factor grid and of `σ_{K̃}` on the product grid.
    pub factor_zeros: usize,
    pub product_zeros: usize,
    /// Whether the product zero set is the factor zero set times the other factor.
    pub singular_set_matches: bool,
}

/// Lifts the parallel tractor `K = (1/m)Dσ_K` of factor `factor` (1 or 2),
/// given by its density `σ_K` in the factor coordinates.
pub fn lift_tractor(
    spec: &SpecialProductSpec,
    factor: usize,
    sigma_k: &ScalarExpr,
    cfg: &Config,
) -> Result<LiftedTractor> {
    if factor != 1 && factor != 2 {
        return Err(Error::Invalid(format!("factor must be 1 or 2, got {factor}")));
    }
    let fchart = spec.factor(factor);
    let k = make_ae(fchart, sigma_k, cfg)?;
    let center = fchart.center();
    let kv = k.tractor_at(&center)?.slots();
    let ginv = inverse_metric(fchart, &center)?;
    let orth = pair(&ginv, &kv, &spec.einstein_tractor(factor));
    if orth.abs() > cfg.tol {
        return Err(Error::NotOrthogonal(orth));
    }
    let product = build_product_chart(spec)?;
    let off = spec.range(factor).start;
    let lifted = make_ae(&product, &sigma_k.shift_vars(off), cfg)?;

    // with σ constant along the other factor, crossings sit on factor-direction edges only
    let n = crate::almost_einstein::effective_grid(cfg.grid.min(9), spec.dim());
    let fz = extract_zeros(sigma_k, fchart.bounds(), n)?;
    let pz = extract_zeros(&lifted.sigma, product.bounds(), n)?;
    let other = spec.dim() - fchart.dim();
    let expected = fz.crossings.len() * n.pow(other as u32);
    let on_factor = pz
        .crossings
        .iter()
        .all(|p| sigma_k.eval(&p[spec.range(factor)]).map(|v| v.abs() < 1e-10).unwrap_or(false));
    Ok(LiftedTractor {
        orthogonality: orth,
        factor_zeros: fz.crossings.len(),
        product_zeros: pz.crossings.len(),
        singular_set_matches: on_factor && pz.crossings.len() == expected,
        factor: k,
        lifted,
    })
}
