use serde_json::{json, Value};
use tractor::almost_einstein::{classify, make_ae, parallel_space};
use tractor::certificate::CertificateBuilder;
use tractor::conformal::{rescale_chart, schouten_transform, ConformalRescale};
use tractor::fields::{parse_chart_expr, Point, ScalarExpr};
use tractor::geometry::{curvature, einstein_residual, Chart};
use tractor::hyper_holonomy::{
    default_loops, detect_splitting, holonomy_sample, mean_curvature_constancy, umbilicity_residual, LevelSurface,
    SplittingOptions,
};
use tractor::killing::{essential_witness, prolong_ck};
use tractor::product::{
    build_collar, build_product_chart, catalog, catalog_list, collar_form_residual, collar_log_chart, default_r_max,
    validate_special_product, Params,
};
use tractor::selftest::{run_all, run_criterion};
use tractor::tractor::{metric_matrix_at, parallel_transport, Curve, TractorValue, TransportOptions};
use tractor::{Config, Error, Result};

use crate::Command;

/// `k=v` pairs.
fn parse_params<'a>(pairs: impl IntoIterator<Item = &'a str>) -> Result<Params> {
    let mut p = Params::new();
    for kv in pairs {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::Invalid(format!("parameter '{kv}' is not key=value")))?;
        let v: f64 = v.trim().parse().map_err(|_| Error::Invalid(format!("parameter '{kv}' has a bad value")))?;
        p.insert(k.trim().to_string(), v);
    }
    Ok(p)
}

/// A chart file path, or `catalog:NAME` / `catalog:NAME?k=v,k=v` for a fixture.
fn load_chart(spec: &str) -> Result<Chart> {
    let Some(fixture) = spec.strip_prefix("catalog:") else {
        return Chart::load(spec);
    };
    match fixture.split_once('?') {
        Some((name, params)) => catalog(name, &parse_params(params.split(','))?),
        None => catalog(fixture, &Params::new()),
    }
}

fn expr(src: &str, chart: &Chart) -> Result<ScalarExpr> {
    Ok(parse_chart_expr(src, chart.dim())?)
}

fn exprs(src: &str, chart: &Chart) -> Result<Vec<ScalarExpr>> {
    let v = src.split(',').map(|s| expr(s, chart)).collect::<Result<Vec<_>>>()?;
    if v.len() != chart.dim() {
        return Err(Error::Invalid(format!("expected {} components, got {}", chart.dim(), v.len())));
    }
    Ok(v)
}

fn point(src: &str, chart: &Chart) -> Result<Vec<f64>> {
    let x = Point::parse_coords(src)?;
    chart.check_point(&x)?;
    Ok(x)
}

fn thin<T: Clone>(v: &[T], n: usize) -> Vec<T> {
    if v.len() <= n {
        return v.to_vec();
    }
    (0..n).map(|i| v[i * v.len() / n].clone()).collect()
}

/// Runs `cmd`, filling `cert`; returns the chart the command produced, if any.
pub fn run(cmd: &Command, cfg: &Config, cert: &mut CertificateBuilder) -> Result<Option<Chart>> {
    match cmd {
        Command::Curvature { chart, point: p } => {
            let chart = load_chart(chart)?;
            cert.chart(&chart);
            let x = match p {
                Some(p) => point(p, &chart)?,
                None => chart.center(),
            };
            let pack = curvature(&chart, &x)?;
            let id = pack.identity_residuals();
            cert.residual("ricci_split", id.ricci_split)
                .residual("weyl_trace", id.weyl_trace)
                .residual("riemann_split", id.riemann_split)
                .residual("bianchi", id.bianchi)
                .verdict("identities", id.max() < cfg.tol)
                .result(pack.to_json());
            Ok(None)
        }
        Command::Rescale { chart, omega } => {
            let chart = load_chart(chart)?;
            cert.chart(&chart);
            let w = expr(omega, &chart)?;
            let hat = rescale_chart(&chart, &w)?;
            let x = chart.center();
            let mut notes = Vec::new();
            if chart.dim() >= 3 {
                let before = curvature(&chart, &x)?;
                let after = curvature(&hat, &x)?;
                let r = ConformalRescale::new(w.clone(), chart.dim());
                let (p, j) = schouten_transform(&chart, &before.schouten, before.j, &r, &x)?;
                let scale = p.max_abs().max(1.0);
                let law = (p.max_abs_diff(&after.schouten) / scale).max((j - after.j).abs() / scale);
                let e2w = (2.0 * w.eval(&x)?).exp();
                let lowered = before.weyl.map(|v| v * e2w);
                let weyl = lowered.max_abs_diff(&after.weyl) / lowered.max_abs().max(1.0);
                cert.residual("schouten_law", law)
                    .residual("weyl_invariance", weyl)
                    .verdict("transformation_laws", law < cfg.tol && weyl < cfg.tol);
            } else {
                notes.push("curvature transformation laws are checked only in dimension 3 and above");
            }
            cert.result(json!({ "chart": hat.to_file(), "digest": hat.digest(), "checked_at": x, "notes": notes }));
            Ok(Some(hat))
        }
        Command::Transport { chart, curve, tractor } => {
            let chart = load_chart(chart)?;
            cert.chart(&chart);
            let parts: Vec<&str> = curve.split(',').collect();
            let c = Curve::parse(&parts)?;
            let u0 = TractorValue::parse(tractor, chart.dim(), chart.name())?;
            let res = parallel_transport(&chart, &c, &u0, &TransportOptions::from(cfg))?;
            let end = res.endpoint.clone().expect("parallel_transport sets the endpoint");
            let (x0, _) = c.at(0.0)?;
            let (x1, _) = c.at(1.0)?;
            let norm = |x: &[f64], u: &TractorValue| -> Result<f64> {
                let v = nalgebra::DVector::from_vec(u.slots());
                Ok((v.transpose() * metric_matrix_at(&chart, x)? * &v)[(0, 0)])
            };
            let (h0, h1) = (norm(&x0, &u0)?, norm(&x1, &end)?);
            let norm_change = (h1 - h0).abs() / h0.abs().max(1.0);
            cert.residual("metric_drift", res.metric_drift)
                .residual("norm_change", norm_change)
                .residual("max_local_error", res.max_local_error)
                .verdict("metric_preserved", res.metric_drift < cfg.loose_tol && norm_change < cfg.loose_tol)
                .result(json!({
                    "start": x0,
                    "end": x1,
                    "endpoint": end,
                    "steps": res.steps,
                    "rejected": res.rejected,
                }));
            Ok(None)
        }
        Command::VerifyAe { chart, sigma } => {
            let chart = load_chart(chart)?;
            cert.chart(&chart);
            let ae = make_ae(&chart, &expr(sigma, &chart)?, cfg)?;
            let cls = classify(&ae, cfg)?;
            cert.residual("residual", ae.residual)
                .residual("parallel", ae.parallel_residual)
                .residual("s_spread", ae.s_spread)
                .residual("gradient_at_zeros", cls.gradient_at_zeros);
            if let Some(u) = cls.umbilicity {
                cert.residual("umbilicity", u);
            }
            if let Some(e) = cls.einstein_residual {
                cert.residual("einstein", e);
            }
            let set = &cls.singular_set;
            let points: Vec<&Vec<f64>> = set.points().collect();
            cert.verdict("almost_einstein", ae.residual < cfg.tol)
                .verdict("parallel", ae.parallel_residual < cfg.loose_tol)
                .verdict("classification_consistent", cls.consistent)
                .result(json!({
                    "residual": ae.residual,
                    "S": ae.s,
                    "scale_type": cls.scale_type,
                    "classification": set.kind,
                    "singular_point_count": points.len(),
                    "singular_points": thin(&points, 200),
                    "grid": set.grid,
                    "notes": cls.notes,
                }));
            Ok(None)
        }
        Command::ParallelSpace { chart } => {
            let chart = load_chart(chart)?;
            cert.chart(&chart);
            let ps = parallel_space(&chart, cfg)?;
            cert.residual("closure", ps.closure_residual)
                .verdict("closure", ps.closure_residual < cfg.loose_tol)
                .result(json!({
                    "dim": ps.dim,
                    "base_point": ps.base_point,
                    "basis": ps.basis.iter().map(|v| v.slots()).collect::<Vec<_>>(),
                    "coarse_dim": ps.coarse_dim,
                    "candidate_dim": ps.candidate_dim,
                    "loops": ps.loops,
                    "singular_values": ps.singular_values,
                }));
            Ok(None)
        }
        Command::BuildProduct { chart } => {
            let [a, b] = chart.as_slice() else {
                return Err(Error::Invalid(format!("build-product needs exactly two --chart arguments, got {}", chart.len())));
            };
            let spec = validate_special_product(&load_chart(a)?, &load_chart(b)?)?;
            let prod = build_product_chart(&spec)?;
            cert.chart(&prod);
            // P = μg₁ − μg₂ on the product
            let m1 = spec.m1();
            let mut worst = 0.0f64;
            for x in prod.grid(3) {
                let c = curvature(&prod, &x)?;
                for i in 0..prod.dim() {
                    for j in 0..prod.dim() {
                        let want = match (i < m1, j < m1) {
                            (true, true) => spec.mu * c.metric[[i, j]],
                            (false, false) => -spec.mu * c.metric[[i, j]],
                            _ => 0.0,
                        };
                        worst = worst.max((c.schouten[[i, j]] - want).abs() / spec.mu.max(1.0));
                    }
                }
            }
            cert.residual("factor1_einstein", spec.factor_residuals.0)
                .residual("factor2_einstein", spec.factor_residuals.1)
                .residual("product_schouten", worst)
                .verdict("special_einstein_product", worst < cfg.loose_tol)
                .result(json!({ "chart": prod.to_file(), "digest": prod.digest(), "mu": spec.mu }));
            Ok(Some(prod))
        }
        Command::BuildCollar { chart, mu, r_max } => {
            let charts = chart.iter().map(|c| load_chart(c)).collect::<Result<Vec<_>>>()?;
            if charts.len() > 2 {
                return Err(Error::Invalid("build-collar takes one or two --chart arguments".into()));
            }
            let r_max = r_max.unwrap_or_else(|| default_r_max(*mu));
            let second = charts.get(1);
            let collar = build_collar(&charts[0], second, *mu, r_max)?;
            let log = collar_log_chart(&charts[0], second, *mu, r_max)?;
            cert.chart(&collar);
            let pts = collar.grid(3);
            let mut einstein = 0.0f64;
            for p in &pts {
                einstein = einstein.max(einstein_residual(&collar, -1.0, p)?);
            }
            let form = collar_form_residual(&collar, &log, *mu, &pts)?;
            cert.residual("einstein_minus_one", einstein)
                .residual("log_form", form)
                .verdict("poincare_einstein", einstein < cfg.loose_tol)
                .verdict("log_form", form < cfg.loose_tol)
                .result(json!({ "chart": collar.to_file(), "digest": collar.digest(), "r_max": r_max, "samples": pts.len() }));
            Ok(Some(collar))
        }
        Command::Catalog { list, name, params } => {
            if *list {
                let entries = catalog_list();
                cert.verdict("nonempty", !entries.is_empty()).result(json!({ "fixtures": entries }));
                return Ok(None);
            }
            let name = name.as_deref().ok_or_else(|| Error::Invalid("give a fixture name or --list".into()))?;
            let chart = catalog(name, &parse_params(params.iter().map(String::as_str))?)?;
            cert.chart(&chart).result(json!({ "chart": chart.to_file(), "digest": chart.digest() }));
            Ok(Some(chart))
        }
        Command::Killing { chart, field, point: pts } => {
            let chart = load_chart(chart)?;
            cert.chart(&chart);
            let k = exprs(field, &chart)?;
            let (ck, pro) = prolong_ck(&chart, &k, cfg)?;
            cert.residual("ck", pro.ck_residual)
                .residual("transport", pro.transport_residual)
                .residual("primary_mismatch", pro.primary_mismatch)
                .verdict("conformal_killing", pro.ck_residual < cfg.tol)
                .verdict("prolongation_parallel", pro.transport_residual < cfg.loose_tol);
            let mut at = Vec::new();
            for src in pts {
                let x = point(src, &chart)?;
                let slots = ck.prolong(&x)?;
                let witness = essential_witness(&chart, &k, &x, cfg).ok();
                at.push(json!({ "point": x, "slots": slots, "witness": witness }));
            }
            cert.result(json!({ "sample_points": pro.points, "points": at }));
            Ok(None)
        }
        Command::Surface { chart, sigma, ae, samples } => {
            let chart = load_chart(chart)?;
            cert.chart(&chart);
            let k1 = make_ae(&chart, &expr(sigma, &chart)?, cfg)?;
            let k2 = make_ae(&chart, &expr(ae, &chart)?, cfg)?;
            let r = mean_curvature_constancy(&k1, &k2, *samples, cfg)?;
            let surf = LevelSurface::extract(&chart, &k2.sigma, cfg.grid)?;
            let umb = thin(&surf.points, *samples)
                .iter()
                .map(|p| umbilicity_residual(&chart, &surf, p))
                .collect::<Result<Vec<f64>>>()?;
            let worst_umb = umb.iter().copied().fold(0.0, f64::max);
            cert.residual("spread", r.spread)
                .residual("deviation", r.deviation)
                .residual("normal_mismatch", r.normal_mismatch)
                .residual("umbilicity", worst_umb)
                .verdict("constant_mean_curvature", r.spread < cfg.loose_tol)
                .verdict("matches_pairing", r.deviation < cfg.loose_tol)
                .verdict("umbilic", worst_umb < 100.0 * cfg.tol)
                .result(json!({
                    "H": r.values,
                    "mean": r.mean,
                    "expected": r.expected,
                    "skipped": r.skipped,
                    "umbilicity": umb,
                }));
            Ok(None)
        }
        Command::Holonomy { chart, loops, seed } => {
            let chart = load_chart(chart)?;
            cert.chart(&chart);
            let mut family = default_loops(&chart, *seed);
            if let Some(n) = loops {
                family = thin(&family, *n);
            }
            let s = holonomy_sample(&chart, &family, &TransportOptions::from(cfg))?;
            let closure = s.loops.iter().map(|l| l.closure_residual).fold(0.0, f64::max);
            cert.residual("metric", s.metric_residual)
                .residual("closure", closure)
                .residual("max_deviation", s.max_deviation)
                .verdict("metric_preserved", s.metric_residual < cfg.loose_tol);
            let splitting = if s.loops.len() >= 10 {
                serde_json::to_value(detect_splitting(&s, &SplittingOptions::default())?)?
            } else {
                Value::String(format!("not attempted with {} loops (needs 10)", s.loops.len()))
            };
            cert.result(json!({
                "matrices_digest": s.digest(),
                "loops": s.loops.len(),
                "base_point": s.base_point,
                "metric_residual": s.metric_residual,
                "max_deviation": s.max_deviation,
                "splitting": splitting,
            }));
            Ok(None)
        }
        Command::Selftest { criterion } => {
            let reports = match criterion {
                Some(i) => vec![run_criterion(*i, cfg)?],
                None => run_all(cfg),
            };
            for r in &reports {
                eprintln!("{}", r.summary_line());
                cert.verdict(format!("criterion_{:02}", r.id), r.passed);
                for (k, m) in &r.residuals {
                    cert.residual(format!("c{:02}.{k}", r.id), m.value);
                }
            }
            cert.result(serde_json::to_value(&reports)?);
            Ok(None)
        }
    }
}
