//! The acceptance suite. Each criterion runs against catalog fixtures, records
//! named residuals with their limits and boolean checks, and passes only when
//! every residual is finite and below its limit and every check holds.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::almost_einstein::{
    classify, make_ae, parallel_space, parallel_space_with, primary_residual_of_parallel, ParallelSpaceOptions,
    SingularityKind,
};
use crate::config::Config;
use crate::conformal::{rescale_chart, schouten_transform, ConformalRescale};
use crate::error::{Error, Result};
use crate::fields::{parse_chart_expr, ScalarExpr};
use crate::geometry::{curvature, einstein_residual, Chart, LocalGeometry};
use crate::hyper_holonomy::{
    default_loops, detect_splitting, holonomy_sample, mean_curvature_constancy, off_block_norm, SplittingOptions,
    SplittingVerdict,
};
use crate::killing::{essential_witness, prolong_ck, Verdict};
use crate::linalg::max_abs;
use crate::product::{
    build_collar, catalog, collar_form_residual, collar_log_chart, default_r_max, lift_tractor,
    validate_special_product, Params, SpecialProductSpec,
};
use crate::real::Grad;
use crate::tractor::{
    circle_ode_solutions, derivative_from_jet, low_dim_connection, tractor_derivative, transform_slots,
    transform_tractor, zeros_in, TractorField, TransportOptions,
};

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Measured {
    pub value: f64,
    pub limit: f64,
}

impl Measured {
    pub fn ok(&self) -> bool {
        self.value.is_finite() && self.value < self.limit
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionReport {
    pub id: usize,
    pub title: &'static str,
    pub passed: bool,
    pub residuals: BTreeMap<String, Measured>,
    pub checks: BTreeMap<String, bool>,
    pub notes: Vec<String>,
    pub error: Option<String>,
    pub seconds: f64,
}

impl CriterionReport {
    /// `PASS`/`FAIL`, the id and title, and the first failing item if any.
    pub fn summary_line(&self) -> String {
        let status = if self.passed { "PASS" } else { "FAIL" };
        let mut line = format!("{status} criterion {:>2}: {} ({:.1} s)", self.id, self.title, self.seconds);
        if let Some(e) = &self.error {
            line += &format!(" [error: {e}]");
        } else if let Some((k, m)) = self.residuals.iter().find(|(_, m)| !m.ok()) {
            line += &format!(" [{k} = {:.3e}, limit {:.0e}]", m.value, m.limit);
        } else if let Some((k, _)) = self.checks.iter().find(|(_, ok)| !**ok) {
            line += &format!(" [{k} failed]");
        }
        line
    }
}

#[derive(Default)]
struct Check {
    residuals: BTreeMap<String, Measured>,
    checks: BTreeMap<String, bool>,
    notes: Vec<String>,
}

impl Check {
    fn below(&mut self, name: impl Into<String>, value: f64, limit: f64) {
        self.residuals.insert(name.into(), Measured { value, limit });
    }

    fn flag(&mut self, name: impl Into<String>, ok: bool) {
        self.checks.insert(name.into(), ok);
    }

    fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }
}

type Runner = fn(&Config, &mut Check) -> Result<()>;

/// `(title, wall-clock budget in seconds, runner)`.
const CRITERIA: [(&str, Option<f64>, Runner); 10] = [
    ("curvature identities on the fixtures", Some(30.0), curvature_identities),
    ("conformal covariance", None, conformal_covariance),
    ("almost-Einstein scales are parallel", None, parallel_scales),
    ("flat families classify by the sign of S", None, flat_classification),
    ("parallel space dimensions", Some(120.0), parallel_dimensions),
    ("Poincaré-Einstein collar", None, collar),
    ("constant generalized mean curvature", None, mean_curvature),
    ("conformal Killing prolongation", None, killing),
    ("circle solutions", None, circle),
    ("holonomy splitting", Some(120.0), holonomy),
];

pub fn criteria() -> Vec<(usize, &'static str)> {
    CRITERIA.iter().enumerate().map(|(i, c)| (i + 1, c.0)).collect()
}

/// Runs criterion `id` (1-based). Errors raised inside the criterion are
/// reported as a failure, not returned.
pub fn run_criterion(id: usize, cfg: &Config) -> Result<CriterionReport> {
    let (title, budget, run) =
        *CRITERIA.get(id.wrapping_sub(1)).ok_or_else(|| Error::Invalid(format!("no criterion {id}; valid ids are 1-10")))?;
    let started = Instant::now();
    let mut check = Check::default();
    let error = run(cfg, &mut check).err().map(|e| e.to_string());
    let seconds = started.elapsed().as_secs_f64();
    if let Some(b) = budget {
        check.flag(format!("runtime under {b} s"), seconds < b);
    }
    let passed =
        error.is_none() && check.residuals.values().all(Measured::ok) && check.checks.values().all(|&ok| ok);
    Ok(CriterionReport {
        id,
        title,
        passed,
        residuals: check.residuals,
        checks: check.checks,
        notes: check.notes,
        error,
        seconds,
    })
}

pub fn run_all(cfg: &Config) -> Vec<CriterionReport> {
    (1..=CRITERIA.len()).map(|id| run_criterion(id, cfg).expect("ids are in range")).collect()
}

fn fixture(name: &str, params: &[(&str, f64)]) -> Result<Chart> {
    catalog(name, &params.iter().map(|(k, v)| (k.to_string(), *v)).collect::<Params>())
}

fn flat(d: usize, r: f64) -> Result<Chart> {
    fixture("flat", &[("d", d as f64), ("r", r)])
}

fn expr(src: &str, d: usize) -> Result<ScalarExpr> {
    Ok(parse_chart_expr(src, d)?)
}

/// Uniform points in the central 90% of the chart box.
fn sample_points(chart: &Chart, n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            chart
                .bounds()
                .iter()
                .map(|&(lo, hi)| {
                    let (c, h) = (0.5 * (lo + hi), 0.45 * (hi - lo));
                    c + h * rng.random_range(-1.0..1.0)
                })
                .collect()
        })
        .collect()
}

fn s2_h2_spec() -> Result<SpecialProductSpec> {
    validate_special_product(&fixture("sphere_stereo", &[("d", 2.0)])?, &fixture("hyperbolic_ball", &[("d", 2.0)])?)
}

fn curvature_identities(_: &Config, c: &mut Check) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let charts = [
        flat(3, 1.0)?,
        fixture("sphere_stereo", &[])?,
        fixture("hyperbolic_ball", &[])?,
        fixture("product_s2_h2", &[])?,
        fixture("collar_s2_h2", &[])?,
        fixture("perturbed", &[("seed", 1.0), ("d", 3.0)])?.with_name("perturbed_1"),
        fixture("perturbed", &[("seed", 2.0), ("d", 4.0)])?.with_name("perturbed_2"),
    ];
    for chart in &charts {
        let mut worst = 0.0f64;
        for p in sample_points(chart, 100, &mut rng) {
            worst = worst.max(curvature(chart, &p)?.identity_residuals().max());
        }
        c.below(format!("{}.identities", chart.name()), worst, 1e-8);
    }
    c.note("identity residuals are relative to max(1, |Riem|, |Ric|) at each point");
    Ok(())
}

fn random_omega(rng: &mut ChaCha8Rng, d: usize) -> ScalarExpr {
    let x = ScalarExpr::var;
    let mut w = ScalarExpr::constant(rng.random_range(-0.3..0.3));
    for a in 0..d {
        w = w + rng.random_range(-0.4..0.4) * x(a) + rng.random_range(-0.3..0.3) * (rng.random_range(0.5..1.5) * x(a)).sin();
    }
    w + rng.random_range(-0.2..0.2) * x(0) * x(d - 1)
}

/// A tractor field with every slot non-constant.
fn generic_field(chart: &Chart) -> TractorField {
    let d = chart.dim();
    let x = ScalarExpr::var;
    let mu = (0..d).map(|a| (0.1 * a as f64 + x(a)).sin() + 0.2 * x((a + 1) % d)).collect();
    TractorField::new(0.3 + x(0) * x(1), mu, x(0).cos() - x(d - 1), chart.name())
}

fn conformal_covariance(_: &Config, c: &mut Check) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let charts = [
        fixture("sphere_stereo", &[])?,
        fixture("hyperbolic_ball", &[])?,
        fixture("product_s2_h2", &[])?,
        fixture("perturbed", &[("seed", 1.0), ("d", 3.0)])?.with_name("perturbed_1"),
    ];
    for chart in &charts {
        let d = chart.dim();
        let u = generic_field(chart);
        let (mut schouten, mut weyl, mut connection) = (0.0f64, 0.0f64, 0.0f64);
        for _ in 0..5 {
            let w = random_omega(&mut rng, d);
            let hat = rescale_chart(chart, &w)?;
            let r = ConformalRescale::new(w.clone(), d);
            let x = sample_points(chart, 1, &mut rng).remove(0);
            let before = curvature(chart, &x)?;
            let after = curvature(&hat, &x)?;
            let (p, j) = schouten_transform(chart, &before.schouten, before.j, &r, &x)?;
            let scale = p.max_abs().max(1.0);
            schouten = schouten.max(p.max_abs_diff(&after.schouten) / scale).max((j - after.j).abs() / scale);
            let e2w = (2.0 * w.eval(&x)?).exp();
            let lowered = before.weyl.map(|v| v * e2w);
            weyl = weyl.max(lowered.max_abs_diff(&after.weyl) / lowered.max_abs().max(1.0));
            // transform after differentiating vs differentiate the transformed field
            let lhs: Vec<Vec<f64>> = tractor_derivative(chart, &u, &x)?
                .iter()
                .map(|v| transform_tractor(chart, v, &r, &x).map(|t| t.slots()))
                .collect::<Result<_>>()?;
            let xg = Grad::seed(&x);
            let geo = LocalGeometry::at(chart, &xg)?;
            let (wg, ug, _) = r.jet(&xg)?;
            let moved = transform_slots(&u.eval(&xg)?, wg, &ug, &geo.ginv);
            let rhs = derivative_from_jet(&LocalGeometry::at(&hat, &x)?, &moved);
            for (l, rr) in lhs.iter().zip(&rhs) {
                for (a, b) in l.iter().zip(rr) {
                    connection = connection.max((a - b).abs() / a.abs().max(1.0));
                }
            }
        }
        c.below(format!("{}.schouten_law", chart.name()), schouten, 1e-8);
        c.below(format!("{}.weyl_invariance", chart.name()), weyl, 1e-8);
        c.below(format!("{}.tractor_connection", chart.name()), connection, 1e-8);
    }
    c.note("five random conformal factors per chart, each at a random point; residuals are relative");
    Ok(())
}

fn parallel_scales(cfg: &Config, c: &mut Check) -> Result<()> {
    let f3 = flat(3, 1.5)?;
    for (name, src) in [
        ("flat_negative", "(1 - x1^2 - x2^2 - x3^2)/2"),
        ("flat_zero", "(x1^2 + x2^2 + x3^2)/2"),
        ("flat_positive", "(1 + x1^2 + x2^2 + x3^2)/2"),
    ] {
        let ae = make_ae(&f3, &expr(src, 3)?, cfg)?;
        c.below(format!("{name}.parallel"), ae.parallel_residual, 1e-7);
    }
    let s3 = fixture("sphere_stereo", &[])?;
    c.below("sphere_round.parallel", make_ae(&s3, &ScalarExpr::one(), cfg)?.parallel_residual, 1e-7);

    let spec = s2_h2_spec()?;
    let lift = lift_tractor(&spec, 1, &expr("2*x1/(1 + x1^2 + x2^2)", 2)?, cfg)?;
    c.below("s2_h2_lift.parallel", lift.lifted.parallel_residual, 1e-7);
    c.flag("s2_h2_lift.singular_set_is_a_product", lift.singular_set_matches);

    let circ = validate_special_product(&fixture("circle", &[("mu", 0.5)])?, &fixture("hyperbolic_ball", &[("d", 2.0)])?)?;
    let lift = lift_tractor(&circ, 1, &ScalarExpr::var(0).cos(), cfg)?;
    c.below("s1_h2_lift.parallel", lift.lifted.parallel_residual, 1e-7);
    c.flag("s1_h2_lift.two_singular_fibers", lift.factor_zeros == 2 && lift.singular_set_matches);

    // conversely, parallel tractors solve the primary equation
    for chart in [&f3, &s3] {
        let ps = parallel_space(chart, cfg)?;
        let mut worst = 0.0f64;
        for v in &ps.basis {
            for x in [[0.3, -0.2, 0.1], [-0.4, 0.35, 0.5]] {
                worst = worst.max(primary_residual_of_parallel(chart, &ps.base_point, v, &x)?);
            }
        }
        c.flag(format!("{}.parallel_basis_nonempty", chart.name()), !ps.basis.is_empty());
        c.below(format!("{}.converse_primary", chart.name()), worst, 1e-7);
    }
    Ok(())
}

fn flat_classification(cfg: &Config, c: &mut Check) -> Result<()> {
    let f3 = flat(3, 1.5)?;
    let classify_src = |src: &str| -> Result<_> { classify(&make_ae(&f3, &expr(src, 3)?, cfg)?, cfg) };

    let neg = classify_src("(1 - x1^2 - x2^2 - x3^2)/2")?;
    c.below("negative.s_error", (neg.s + 1.0).abs(), 1e-10);
    c.flag("negative.hypersurface", neg.singular_set.kind == SingularityKind::Hypersurface);
    let off_sphere = neg
        .singular_set
        .crossings
        .iter()
        .map(|p| (p.iter().map(|v| v * v).sum::<f64>().sqrt() - 1.0).abs())
        .fold(0.0, f64::max);
    c.below("negative.distance_from_unit_sphere", off_sphere, 1e-8);
    c.below("negative.einstein", neg.einstein_residual.unwrap_or(f64::NAN), 1e-7);

    let zero = classify_src("(x1^2 + x2^2 + x3^2)/2")?;
    c.below("zero.s_error", zero.s.abs(), 1e-10);
    c.flag("zero.isolated_point", zero.singular_set.kind == SingularityKind::IsolatedPoints && zero.singular_set.isolated.len() == 1);
    let at_origin = zero.singular_set.isolated.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    c.below("zero.distance_from_origin", at_origin, 1e-8);
    c.below("zero.gradient_at_zero", zero.gradient_at_zeros, 1e-7);
    c.below("zero.einstein", zero.einstein_residual.unwrap_or(f64::NAN), 1e-7);

    let pos = classify_src("(1 + x1^2 + x2^2 + x3^2)/2")?;
    c.below("positive.s_error", (pos.s - 1.0).abs(), 1e-10);
    c.flag("positive.empty", pos.singular_set.kind == SingularityKind::Empty);
    c.below("positive.einstein", pos.einstein_residual.unwrap_or(f64::NAN), 1e-7);
    Ok(())
}

fn parallel_dimensions(cfg: &Config, c: &mut Check) -> Result<()> {
    let product = fixture("product_s2_h2", &[])?;
    for (chart, want) in [(flat(3, 1.0)?, 5), (fixture("sphere_stereo", &[])?, 5), (product.clone(), 6)] {
        let opts = ParallelSpaceOptions::for_chart(&chart, cfg);
        let ps = parallel_space_with(&chart, &opts)?;
        let refined = ParallelSpaceOptions { coarse: opts.fine, fine: 2 * opts.fine - 1, ..opts };
        let fine = parallel_space_with(&chart, &refined)?;
        c.flag(format!("{}.dim_is_{want}", chart.name()), ps.dim == want);
        c.flag(format!("{}.stable_under_refinement", chart.name()), fine.dim == ps.dim);
        c.below(format!("{}.closure", chart.name()), ps.closure_residual, 1e-7);
        c.note(format!("{}: dim {} (refined grid {} gives {})", chart.name(), ps.dim, refined.fine, fine.dim));
        if chart.name() == product.name() {
            let (b1, b2) = s2_h2_spec()?.block_subspaces();
            c.flag("product_s2_h2.blocks_are_3_and_3", b1.ncols() == 3 && b2.ncols() == 3);
            let span = DMatrix::from_fn(b1.nrows(), ps.basis.len(), |i, j| ps.basis[j].slots()[i]);
            let q = span.qr().q();
            let mut outside = 0.0f64;
            for b in [&b1, &b2] {
                outside = outside.max(max_abs(&(b - &q * (q.transpose() * b))));
            }
            c.below("product_s2_h2.blocks_in_parallel_space", outside, 1e-6);
        }
    }
    Ok(())
}

fn collar(_: &Config, c: &mut Check) -> Result<()> {
    let mu = 0.5;
    let (s2, h2) = (fixture("sphere_stereo", &[("d", 2.0)])?, fixture("hyperbolic_ball", &[("d", 2.0)])?);
    let r_max = default_r_max(mu);
    let chart = build_collar(&s2, Some(&h2), mu, r_max)?;
    let log = collar_log_chart(&s2, Some(&h2), mu, r_max)?;
    let pts = sample_points(&chart, 200, &mut ChaCha8Rng::seed_from_u64(6));
    let mut worst = 0.0f64;
    for p in &pts {
        worst = worst.max(einstein_residual(&chart, -1.0, p)?);
    }
    c.below("collar.einstein_minus_one", worst, 1e-7);
    c.below("collar.log_form", collar_form_residual(&chart, &log, mu, &pts)?, 1e-9);
    Ok(())
}

fn mean_curvature(cfg: &Config, c: &mut Check) -> Result<()> {
    let f3 = flat(3, 1.5)?;
    let k2 = make_ae(&f3, &expr("(1 - x1^2 - x2^2 - x3^2)/2", 3)?, cfg)?;
    let k1 = make_ae(&f3, &ScalarExpr::one(), cfg)?;
    let r = mean_curvature_constancy(&k1, &k2, 50, cfg)?;
    c.flag("fifty_samples", r.samples == 50);
    c.below("spread", r.spread, 1e-7);
    c.below("value_minus_expected", (r.mean + 1.0).abs(), 1e-7);
    c.below("expected_is_minus_one", (r.expected + 1.0).abs(), 1e-12);
    let orth = make_ae(&f3, &expr("(1 + x1^2 + x2^2 + x3^2)/2", 3)?, cfg)?;
    let r = mean_curvature_constancy(&orth, &k2, 50, cfg)?;
    c.below("orthogonal.max_abs", r.values.iter().fold(0.0f64, |m, v| m.max(v.abs())), 1e-7);
    c.flag("orthogonal.samples", r.samples > 0);
    Ok(())
}

fn killing(cfg: &Config, c: &mut Check) -> Result<()> {
    let x = ScalarExpr::var;
    let dilation = vec![x(0), x(1), x(2)];
    let rotation = vec![-x(1), x(0), ScalarExpr::zero()];
    let f3 = flat(3, 1.0)?;
    for chart in [&f3, &fixture("sphere_stereo", &[])?] {
        for (name, k) in [("dilation", &dilation), ("rotation", &rotation)] {
            let (_, pro) = prolong_ck(chart, k, cfg)?;
            c.below(format!("{}.{name}.ck", chart.name()), pro.ck_residual, 1e-9);
            c.below(format!("{}.{name}.transport", chart.name()), pro.transport_residual, 1e-8);
        }
    }
    let w = essential_witness(&f3, &dilation, &[0.0; 3], cfg)?;
    c.flag("dilation_is_essential", w.verdict == Verdict::Essential);
    Ok(())
}

fn circle(_: &Config, c: &mut Check) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let regular = circle_ode_solutions(0.5);
    let period = regular.period().ok_or_else(|| Error::Invalid("μ = ½ has a period".into()))?;
    let (mut lo, mut hi, mut ode) = (usize::MAX, 0, 0.0f64);
    for _ in 0..20 {
        let (c1, c2) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let s = regular.combination([0.0, c1, c2]);
        let t0 = rng.random_range(0.0..period);
        let n = zeros_in(&s, t0, t0 + period, 512).len();
        (lo, hi) = (lo.min(n), hi.max(n));
        ode = ode.max(regular.ode_residual(&s, t0).abs());
    }
    c.flag("regular.two_zeros_per_period", lo == 2 && hi == 2);
    c.below("regular.ode", ode, 1e-12);
    c.note(format!("zeros per period over 20 random combinations: {lo}..={hi}"));

    let exotic = circle_ode_solutions(-0.5);
    let triple = exotic.parallel_triple(&ScalarExpr::one());
    let at0: Vec<f64> = triple.iter().map(|e| e.eval(&[0.0]).map_err(Error::from)).collect::<Result<_>>()?;
    c.flag("exotic.constant_triple_is_(1,0,1/2)", at0 == [1.0, 0.0, 0.5]);
    let chart = fixture("circle", &[("mu", -0.5)])?;
    let [s, ds, rho] = triple;
    let field = TractorField::new(s, vec![ds], rho, chart.name());
    let mut nabla = 0.0f64;
    for p in sample_points(&chart, 16, &mut rng) {
        nabla = nabla.max(low_dim_connection(&chart, &field, &p)?.iter().fold(0.0, |m, v| m.max(v.max_abs())));
    }
    c.below("exotic.parallel", nabla, 1e-12);
    let dims: Vec<usize> = (1..=200).map(|i| exotic.periodic_dimension(4.0 * PI * i as f64 / 200.0)).collect();
    c.flag("exotic.one_periodic_solution_for_every_length", dims.iter().all(|&n| n == 1));
    Ok(())
}

fn holonomy(_: &Config, c: &mut Check) -> Result<()> {
    let opts = TransportOptions::default();
    let sample = |chart: &Chart| holonomy_sample(chart, &default_loops(chart, 1), &opts);
    for chart in [flat(3, 1.0)?, fixture("circle", &[("mu", 0.5)])?] {
        let s = sample(&chart)?;
        c.below(format!("{}.deviation_from_identity", chart.name()), s.max_deviation, 1e-8);
        c.below(format!("{}.metric", chart.name()), s.metric_residual, 1e-7);
    }
    let s = sample(&fixture("product_s2_h2", &[])?)?;
    let (b1, b2) = s2_h2_spec()?.block_subspaces();
    c.below("product_s2_h2.off_block", off_block_norm(&s, &[b1, b2])?, 1e-7);
    c.below("product_s2_h2.metric", s.metric_residual, 1e-7);
    c.note(format!("product_s2_h2: {} loops, deviation from identity {:.2e}", s.loops.len(), s.max_deviation));

    let s = sample(&fixture("product_s1_h2h2", &[])?)?;
    let split = detect_splitting(&s, &SplittingOptions::default())?;
    let dims: Vec<usize> = split.subspaces.iter().map(|b| b.dim).collect();
    c.flag("product_s1_h2h2.decomposable", split.verdict == SplittingVerdict::Decomposable);
    c.flag("product_s1_h2h2.blocks_2_and_5", dims == [2, 5]);
    c.below("product_s1_h2h2.off_block", split.off_block, 1e-7);
    c.below("product_s1_h2h2.metric", s.metric_residual, 1e-7);
    c.note(format!(
        "product_s1_h2h2: {} loops, deviation {:.2e}, commutant dimension {}, {}",
        s.loops.len(),
        s.max_deviation,
        split.commutant_dim,
        split.label
    ));
    Ok(())
}
