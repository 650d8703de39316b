//! Browser bindings. Each exported function takes plain numbers or strings
//! and returns a JSON string; failures come back as `{"error": "..."}`.

use serde_json::{json, Value};
use tractor::almost_einstein::{classify, make_ae};
use tractor::fields::parse_chart_expr;
use tractor::geometry::{einstein_residual, Chart};
use tractor::product::{build_collar, catalog, default_r_max, Params};
use tractor::tractor::{circle_ode_solutions, zeros_in};
use tractor::{Config, Result};
use wasm_bindgen::prelude::wasm_bindgen;

fn respond(r: Result<Value>) -> String {
    r.unwrap_or_else(|e| json!({ "error": e.to_string() })).to_string()
}

fn linspace(a: f64, b: f64, n: usize) -> impl Iterator<Item = f64> {
    let n = n.max(2);
    (0..n).map(move |i| a + (b - a) * i as f64 / (n - 1) as f64)
}

/// `s = c₀·b₀ + c₁·b₁ + c₂·b₂` in the solution basis of the circle ODE with
/// datum `μ`, sampled on `[0, length]`, with its zeros and the number of
/// independent `length`-periodic solutions.
pub fn circle_profile(mu: f64, c: [f64; 3], length: f64, samples: usize) -> Result<Value> {
    if !(length > 0.0 && length.is_finite()) {
        return Err(tractor::Error::Invalid(format!("length must be positive, got {length}")));
    }
    let sol = circle_ode_solutions(mu);
    let s = sol.combination(c);
    let t: Vec<f64> = linspace(0.0, length, samples).collect();
    let values = t.iter().map(|&t| s.eval(&[t])).collect::<Result<Vec<f64>, _>>()?;
    Ok(json!({
        "t": t,
        "s": values,
        "zeros": zeros_in(&s, 0.0, length, 4 * samples.max(2)),
        "period": sol.period(),
        "periodic_dimension": sol.periodic_dimension(length),
    }))
}

/// Verifies `σ` on the flat box `[-r, r]^d` and classifies its scale singularity set.
pub fn classify_flat(sigma: &str, d: usize, r: f64, grid: usize) -> Result<Value> {
    let chart = catalog("flat", &Params::from([("d".into(), d as f64), ("r".into(), r)]))?;
    let cfg = Config::default().with_grid(grid);
    let ae = make_ae(&chart, &parse_chart_expr(sigma, d)?, &cfg)?;
    let cls = classify(&ae, &cfg)?;
    let points: Vec<&Vec<f64>> = cls.singular_set.points().collect();
    let step = points.len().div_ceil(400).max(1);
    Ok(json!({
        "S": ae.s,
        "scale_type": cls.scale_type,
        "kind": cls.singular_set.kind,
        "residual": ae.residual,
        "parallel_residual": ae.parallel_residual,
        "umbilicity": cls.umbilicity,
        "einstein_residual": cls.einstein_residual,
        "consistent": cls.consistent,
        "point_count": points.len(),
        "points": points.into_iter().step_by(step).collect::<Vec<_>>(),
        "notes": cls.notes,
    }))
}

/// Warp factors of the collar `r⁻²(dr² + (1 − μr²/2)² g_{S²} + (1 + μr²/2)² g_{H²})`
/// and its Einstein residual against `−1` along the `r` axis.
pub fn collar_profile(mu: f64, samples: usize) -> Result<Value> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(tractor::Error::Invalid(format!("mu must be positive, got {mu}")));
    }
    let radius = (0.5 / mu).sqrt();
    let factor = |name: &str| -> Result<Chart> {
        catalog(name, &Params::from([("d".into(), 2.0), ("radius".into(), radius)]))
    };
    let collar = build_collar(&factor("sphere_stereo")?, Some(&factor("hyperbolic_ball")?), mu, default_r_max(mu))?;
    let (lo, hi) = collar.bounds()[0];
    let mut x = collar.center();
    let (mut r, mut w1, mut w2, mut residual) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for v in linspace(lo, hi, samples) {
        let q = 0.5 * mu * v * v;
        x[0] = v;
        r.push(v);
        w1.push((1.0 - q).powi(2));
        w2.push((1.0 + q).powi(2));
        residual.push(einstein_residual(&collar, -1.0, &x)?);
    }
    Ok(json!({ "r": r, "sphere_warp": w1, "hyperbolic_warp": w2, "einstein_residual": residual, "r_max": hi }))
}

#[wasm_bindgen(js_name = circleProfile)]
pub fn circle_profile_js(mu: f64, c0: f64, c1: f64, c2: f64, length: f64, samples: usize) -> String {
    respond(circle_profile(mu, [c0, c1, c2], length, samples))
}

#[wasm_bindgen(js_name = classifyFlat)]
pub fn classify_flat_js(sigma: &str, d: usize, r: f64, grid: usize) -> String {
    respond(classify_flat(sigma, d, r, grid))
}

#[wasm_bindgen(js_name = collarProfile)]
pub fn collar_profile_js(mu: f64, samples: usize) -> String {
    respond(collar_profile(mu, samples))
}
