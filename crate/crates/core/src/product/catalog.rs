use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{block_product, build_collar, build_product_chart, default_r_max, validate_special_product};
use crate::conformal::rescale_chart;
use crate::error::{Error, Result};
use crate::fields::{norm_squared, ScalarExpr};
use crate::geometry::Chart;

pub type Params = BTreeMap<String, f64>;

#[derive(Debug, Clone, Serialize)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub params: Vec<(&'static str, f64)>,
    pub description: &'static str,
}

const ENTRIES: &[(&str, &[(&str, f64)], &str)] = &[
    ("flat", &[("d", 3.0), ("r", 1.0)], "Euclidean metric on the box [-r, r]^d"),
    ("sphere_stereo", &[("d", 3.0), ("radius", 1.0)], "round sphere in stereographic coordinates, 4R²(1+|x|²)⁻²δ"),
    ("hyperbolic_ball", &[("d", 3.0), ("radius", 1.0), ("r", 0.6)], "Poincaré ball 4R²(1−|x|²)⁻²δ"),
    ("circle", &[("mu", 0.5), ("periods", 1.0), ("length", 2.0 * PI)], "periodic interval dt² with tractor datum μ; μ > 0 uses whole periods of the circle ODE"),
    ("product_s2_h2", &[("mu", 0.5)], "special Einstein product S² × H² (conformally flat)"),
    ("product_s2_s1_exotic", &[], "unit S² times the unit circle with μ = −½"),
    ("product_s1_h2h2", &[], "regular circle (μ = 1/6) times H² × H²"),
    ("collar_s2_h2", &[("mu", 0.5)], "Poincaré–Einstein collar over S² × H²"),
    ("collar_hyperbolic", &[("m", 2.0), ("mu", 0.5)], "collar over the round sphere alone: hyperbolic space"),
    ("scale_singular_product", &[("m1", 2.0)], "(x¹)⁻²(g_rd × g_H²) with x¹ the first ambient coordinate of the sphere factor"),
    ("perturbed", &[("seed", 0.0), ("eps", 0.05), ("d", 3.0)], "flat metric plus a seeded random quadratic perturbation"),
];

pub fn catalog_list() -> Vec<CatalogEntry> {
    ENTRIES
        .iter()
        .map(|&(name, params, description)| CatalogEntry { name, params: params.to_vec(), description })
        .collect()
}

fn get(params: &Params, entry: &[(&str, f64)], key: &str) -> f64 {
    params.get(key).copied().unwrap_or_else(|| entry.iter().find(|(k, _)| *k == key).map_or(0.0, |p| p.1))
}

fn dim(v: f64) -> Result<usize> {
    if v >= 1.0 && v.fract() == 0.0 {
        Ok(v as usize)
    } else {
        Err(Error::Invalid(format!("dimension parameter must be a positive integer, got {v}")))
    }
}

pub(crate) fn sphere(d: usize, radius: f64) -> Result<Chart> {
    let f = 4.0 * radius * radius / (1.0 + norm_squared(d)).powi(2);
    let mu = (d <= 2).then_some(0.5 / (radius * radius));
    Chart::conformally_flat(format!("S{d}"), vec![(-1.0, 1.0); d], f, mu)
}

pub(crate) fn hyperbolic(d: usize, radius: f64, r: f64) -> Result<Chart> {
    let f = 4.0 * radius * radius / (1.0 - norm_squared(d)).powi(2);
    let mu = (d <= 2).then_some(-0.5 / (radius * radius));
    Chart::conformally_flat(format!("H{d}"), vec![(-r, r); d], f, mu)
}

pub(crate) fn circle(mu: f64, periods: f64, length: f64) -> Result<Chart> {
    let l = if mu > 0.0 { periods * 2.0 * PI / (2.0 * mu).sqrt() } else { length };
    Chart::diagonal("S1", vec![(0.0, l)], vec![1.0.into()], Some(mu))?.with_periodic(vec![true])
}

/// A registered fixture chart.
pub fn catalog(name: &str, params: &Params) -> Result<Chart> {
    let entry = ENTRIES.iter().find(|e| e.0 == name).ok_or_else(|| Error::UnknownFixture(name.to_string()))?.1;
    for k in params.keys() {
        if !entry.iter().any(|(p, _)| p == k) {
            return Err(Error::Invalid(format!("fixture {name} has no parameter {k}")));
        }
    }
    let p = |k: &str| get(params, entry, k);
    let chart = match name {
        "flat" => {
            let d = dim(p("d"))?;
            Chart::conformally_flat("flat", vec![(-p("r"), p("r")); d], 1.0.into(), (d <= 2).then_some(0.0))?
        }
        "sphere_stereo" => sphere(dim(p("d"))?, p("radius"))?,
        "hyperbolic_ball" => hyperbolic(dim(p("d"))?, p("radius"), p("r"))?,
        "circle" => circle(p("mu"), p("periods"), p("length"))?,
        "product_s2_h2" => {
            let radius = (0.5 / p("mu")).sqrt();
            build_product_chart(&validate_special_product(&sphere(2, radius)?, &hyperbolic(2, radius, 0.6)?)?)?
        }
        "product_s2_s1_exotic" => {
            build_product_chart(&validate_special_product(&sphere(2, 1.0)?, &circle(-0.5, 1.0, 2.0 * PI)?)?)?
        }
        "product_s1_h2h2" => {
            let h = hyperbolic(2, 1.0, 0.6)?;
            let h2h2 = block_product("H2xH2", &[&h, &h])?;
            build_product_chart(&validate_special_product(&circle(1.0 / 6.0, 1.0, 0.0)?, &h2h2)?)?
        }
        "collar_s2_h2" => {
            let mu = p("mu");
            let radius = (0.5 / mu).sqrt();
            build_collar(&sphere(2, radius)?, Some(&hyperbolic(2, radius, 0.6)?), mu, default_r_max(mu))?
        }
        "collar_hyperbolic" => {
            let mu = p("mu");
            build_collar(&sphere(dim(p("m"))?, (0.5 / mu).sqrt())?, None, mu, default_r_max(mu))?
        }
        "scale_singular_product" => {
            let m1 = dim(p("m1"))?;
            if m1 < 2 {
                return Err(Error::Invalid("scale_singular_product needs m1 >= 2".into()));
            }
            let mut bounds = vec![(-0.6, 0.6); m1];
            bounds[0] = (0.25, 1.0);
            let s = sphere(m1, 1.0)?.with_bounds(bounds)?;
            let prod = build_product_chart(&validate_special_product(&s, &hyperbolic(2, 1.0, 0.6)?)?)?;
            // first ambient coordinate of the unit sphere in stereographic coordinates
            let x1 = 2.0 * ScalarExpr::var(0) / (1.0 + norm_squared(m1));
            rescale_chart(&prod, &(-x1.ln()))?
        }
        "perturbed" => perturbed(p("seed") as u64, p("eps"), dim(p("d"))?)?,
        _ => unreachable!("every catalog entry is handled"),
    };
    Ok(chart.with_name(name))
}

/// `δ + ε·(quadratic symmetric perturbation with seeded random coefficients)`.
fn perturbed(seed: u64, eps: f64, d: usize) -> Result<Chart> {
    if d < 3 {
        return Err(Error::Invalid("perturbed fixtures need dimension at least 3".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = ScalarExpr::var;
    let mut metric = vec![vec![ScalarExpr::zero(); d]; d];
    for i in 0..d {
        for j in i..d {
            let mut e = if i == j { ScalarExpr::one() } else { ScalarExpr::zero() };
            for a in 0..d {
                e = e + eps * rng.random_range(-1.0..1.0) * x(a);
                for b in a..d {
                    e = e + eps * rng.random_range(-1.0..1.0) * x(a) * x(b);
                }
            }
            metric[i][j] = e.clone();
            metric[j][i] = e;
        }
    }
    Chart::new("perturbed", vec![(-0.5, 0.5); d], metric, None)
}
