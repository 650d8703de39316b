use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::conformal::{rescale_chart, ConformalRescale};
use crate::fields::{norm_squared, parse_chart_expr, ScalarExpr};
use crate::geometry::{Chart, LocalGeometry};
use crate::real::Grad;

fn flat(d: usize) -> Chart {
    Chart::conformally_flat("flat", vec![(-1.0, 1.0); d], 1.0.into(), (d <= 2).then_some(0.0)).unwrap()
}

fn sphere(d: usize) -> Chart {
    let f = 4.0 / (1.0 + norm_squared(d)).powi(2);
    Chart::conformally_flat("sphere", vec![(-1.0, 1.0); d], f, (d <= 2).then_some(0.5)).unwrap()
}

fn circle(mu: f64) -> Chart {
    let tau = 2.0 * std::f64::consts::PI;
    Chart::diagonal("circle", vec![(0.0, tau)], vec![1.0.into()], Some(mu)).unwrap()
}

fn field(src: &str, chart: &Chart) -> TractorField {
    TractorField::parse(src, chart.dim(), chart.name()).unwrap()
}

fn max_norm(vs: &[TractorValue]) -> f64 {
    vs.iter().fold(0.0, |m, v| m.max(v.max_abs()))
}

#[test]
fn tractor_metric_examples() {
    let f = flat(3);
    let x = [0.3, -0.2, 0.5];
    let y = TractorValue::new(1.0, vec![0.0; 3], 0.0, "flat");
    assert_eq!(tractor_metric(&f, &y, &y, &x).unwrap(), 0.0);
    let u = TractorValue::new(1.0, vec![0.0; 3], 1.0, "flat");
    assert_eq!(tractor_metric(&f, &u, &u, &x).unwrap(), 2.0);
    let i = field("(1 - x1^2 - x2^2 - x3^2)/2; -x1,-x2,-x3; 1", &f);
    for p in f.grid(4) {
        let v = i.value_at(&p).unwrap();
        assert!((tractor_metric(&f, &v, &v, &p).unwrap() - 1.0).abs() < 1e-14);
    }
    let other = TractorValue::new(1.0, vec![0.0; 3], 0.0, "elsewhere");
    assert!(matches!(tractor_metric(&f, &y, &other, &x), Err(crate::Error::ScaleMismatch { .. })));
}

#[test]
fn canonical_tractor_extracts_sigma() {
    let s = sphere(3);
    let x = [0.1, 0.4, -0.3];
    let u = TractorValue::new(0.7, vec![0.3, -1.0, 2.0], 5.0, "sphere");
    let xx = TractorValue::canonical_x(3, "sphere");
    assert_eq!(tractor_metric(&s, &xx, &u, &x).unwrap(), 0.7);
}

#[test]
fn transform_examples() {
    let f = flat(3);
    let u = TractorValue::new(1.0, vec![0.0; 3], 0.0, "flat");
    let r = ConformalRescale::new(ScalarExpr::var(0), 3);
    let v = transform_tractor(&f, &u, &r, &[0.0, 0.3, -0.4]).unwrap();
    assert_eq!(v.slots(), vec![1.0, 1.0, 0.0, 0.0, -0.5]);
    let zero = ConformalRescale::new(ScalarExpr::zero(), 3);
    let w = TractorValue::new(0.3, vec![1.0, 2.0, 3.0], -0.2, "flat");
    assert_eq!(transform_tractor(&f, &w, &zero, &[0.1, 0.2, 0.3]).unwrap().slots(), w.slots());
}

#[test]
fn transform_preserves_the_tractor_metric() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let s = sphere(3);
    for _ in 0..20 {
        let w = parse_chart_expr(
            &format!("{}*x1 + {}*sin(x2) + {}*x3^2", rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
            3,
        )
        .unwrap();
        let hat = rescale_chart(&s, &w).unwrap();
        let r = ConformalRescale::new(w, 3);
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-0.9..0.9)).collect();
        let mut rand_t = || {
            TractorValue::new(rng.random_range(-2.0..2.0), (0..3).map(|_| rng.random_range(-2.0..2.0)).collect(), rng.random_range(-2.0..2.0), "sphere")
        };
        let (u, v) = (rand_t(), rand_t());
        let before = tractor_metric(&s, &u, &v, &x).unwrap();
        let (tu, tv) = (transform_tractor(&s, &u, &r, &x).unwrap(), transform_tractor(&s, &v, &r, &x).unwrap());
        let after = tractor_metric(&hat, &tu, &tv, &x).unwrap();
        assert!((before - after).abs() < 1e-10 * before.abs().max(1.0));
    }
}

#[test]
fn connection_examples() {
    let f = flat(3);
    let x = [0.3, -0.6, 0.2];
    assert_eq!(max_norm(&tractor_derivative(&f, &field("1;0,0,0;0", &f), &x).unwrap()), 0.0);
    let u = field("(x1^2+x2^2+x3^2)/2; x1,x2,x3; -1", &f);
    assert!(max_norm(&tractor_derivative(&f, &u, &x).unwrap()) < 1e-15);
    let s = sphere(3);
    let i = field("1;0,0,0;-0.5", &s);
    for p in s.grid(3) {
        assert!(max_norm(&tractor_derivative(&s, &i, &p).unwrap()) < 1e-13);
    }
}

#[test]
fn derivative_of_x_shifts_into_the_middle_slot() {
    let s = sphere(3);
    let xx = field("0;0,0,0;1", &s);
    let x = [0.2, 0.1, -0.5];
    let g = s.metric_at(&x).unwrap();
    for (a, v) in tractor_derivative(&s, &xx, &x).unwrap().iter().enumerate() {
        assert_eq!(v.sigma, 0.0);
        for b in 0..3 {
            assert!((v.mu[b] - g[(a, b)]).abs() < 1e-15);
        }
        assert_eq!(v.rho, 0.0);
    }
}

#[test]
fn thomas_d_examples() {
    let f = flat(3);
    let x = [0.3, -0.5, 0.25];
    let d = thomas_d(&f, &parse_chart_expr("(x1^2+x2^2+x3^2)/2", 3).unwrap(), 1.0, &x).unwrap();
    let r2: f64 = x.iter().map(|v| v * v).sum();
    let expect = [r2 / 2.0, x[0], x[1], x[2], -1.0];
    for (a, b) in d.slots().iter().zip(expect) {
        assert!((a / 3.0 - b).abs() < 1e-14);
    }
    let one = thomas_d(&f, &ScalarExpr::one(), 1.0, &x).unwrap();
    assert_eq!(one.slots().iter().map(|v| v / 3.0).collect::<Vec<_>>(), vec![1.0, 0.0, 0.0, 0.0, 0.0]);
    let s = sphere(3);
    let round = thomas_d(&s, &ScalarExpr::one(), 1.0, &x).unwrap();
    let expect = [1.0, 0.0, 0.0, 0.0, -0.5];
    for (a, b) in round.slots().iter().zip(expect) {
        assert!((a / 3.0 - b).abs() < 1e-14);
    }
}

#[test]
fn low_dimensional_examples() {
    let exotic = circle(-0.5);
    let u = field("1;0;0.5", &exotic);
    assert_eq!(max_norm(&low_dim_connection(&exotic, &u, &[1.3]).unwrap()), 0.0);

    let regular = circle(0.5);
    let cos = field("cos(x1); -sin(x1); 0.5*cos(x1)", &regular);
    for t in [0.0, 0.7, 2.0, 5.5] {
        assert!(max_norm(&low_dim_connection(&regular, &cos, &[t]).unwrap()) < 1e-15);
    }

    let s2 = sphere(2);
    let i = field("1;0,0;-0.5", &s2);
    assert!(max_norm(&low_dim_connection(&s2, &i, &[0.3, -0.2]).unwrap()) < 1e-14);

    let x = ScalarExpr::var;
    let lumpy = Chart::conformally_flat("lumpy", vec![(-1.0, 1.0); 2], 1.0 + 0.2 * x(0).powi(2), Some(0.5)).unwrap();
    let j = field("1;0,0;-0.5", &lumpy);
    assert!(matches!(low_dim_connection(&lumpy, &j, &[0.0, 0.0]), Err(crate::Error::NotEinstein(_))));
}

#[test]
fn circle_solutions() {
    let tau = 2.0 * std::f64::consts::PI;
    let reg = circle_ode_solutions(0.5);
    assert!((reg.period().unwrap() - tau).abs() < 1e-15);
    assert_eq!(reg.periodic_dimension(tau), 3);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let c = [0.0, rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let s = reg.combination(c);
        assert_eq!(zeros_in(&s, 0.3, 0.3 + tau, 512).len(), 2);
        for t in [0.0, 1.0, 4.0] {
            assert!(reg.ode_residual(&s, t).abs() < 1e-14);
        }
    }
    let exo = circle_ode_solutions(-0.5);
    for k in 1..=200 {
        assert_eq!(exo.periodic_dimension(2.0 * tau * k as f64 / 200.0), 1);
    }
    let zero = circle_ode_solutions(0.0);
    assert_eq!(zeros_in(&zero.basis[1], -1.0, 1.0, 64).len(), 1);

    // the induced triples are parallel on the circle chart
    let chart = circle(0.5);
    for b in &reg.basis {
        let [s, m, r] = reg.parallel_triple(b);
        let f = TractorField::new(s, vec![m], r, "circle");
        assert!(max_norm(&low_dim_connection(&chart, &f, &[1.1]).unwrap()) < 1e-14);
    }
}

#[test]
fn transport_examples() {
    let opts = TransportOptions::default();
    let f = flat(3);
    let curve = Curve::parse(&["0.5*sin(3*t)", "t^2 - 0.5", "0.2*cos(t)"]).unwrap();
    let u0 = TractorValue::new(1.0, vec![0.0; 3], 0.0, "flat");
    let r = parallel_transport(&f, &curve, &u0, &opts).unwrap();
    assert!(r.endpoint.unwrap().max_abs_diff(&u0) < 1e-12);

    let loop_ = Curve::parse(&["0.6*cos(2*pi*t)", "0.6*sin(2*pi*t)", "0.3*sin(4*pi*t)"]).unwrap();
    let m = transport_matrix(&f, &loop_, &opts).unwrap().matrix;
    let id = nalgebra::DMatrix::<f64>::identity(5, 5);
    assert!((m - id).abs().max() < 1e-9);

    let s = sphere(3);
    let u0 = TractorValue::new(0.4, vec![1.0, -0.5, 0.2], 2.0, "sphere");
    let c = Curve::parse(&["0.8*sin(2*t)", "t - 0.5", "0.5*t^3"]).unwrap();
    let r = parallel_transport(&s, &c, &u0, &opts).unwrap();
    assert!(r.metric_drift < 1e-9, "drift {}", r.metric_drift);
    let h0 = tractor_metric(&s, &u0, &u0, &c.at(0.0).unwrap().0).unwrap();
    let end = r.endpoint.unwrap();
    let h1 = tractor_metric(&s, &end, &end, &c.at(1.0).unwrap().0).unwrap();
    assert!((h0 - h1).abs() < 1e-9);
}

#[test]
fn transport_agrees_with_known_parallel_field() {
    // transporting (1/d)D of a solution reproduces the field at the endpoint
    let f = flat(3);
    let i = field("(1 - x1^2 - x2^2 - x3^2)/2; -x1,-x2,-x3; 1", &f);
    let c = Curve::parse(&["-0.7 + 1.2*t", "0.5*sin(5*t)", "0.3 - t^2"]).unwrap();
    let (a, b) = (c.at(0.0).unwrap().0, c.at(1.0).unwrap().0);
    let r = parallel_transport(&f, &c, &i.value_at(&a).unwrap(), &TransportOptions::default()).unwrap();
    assert!(r.endpoint.unwrap().max_abs_diff(&i.value_at(&b).unwrap()) < 1e-9);
}

#[test]
fn connection_is_conformally_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = ScalarExpr::var;
    let warped = Chart::diagonal(
        "warped",
        vec![(-0.5, 0.5); 3],
        vec![1.0.into(), 1.0 + 0.3 * x(0).powi(2), (x(2) * x(1)).exp()],
        None,
    )
    .unwrap();
    for chart in [sphere(3), warped] {
        let u = field("x1*x2 + 0.3; sin(x3), x1^2, -x2; cos(x1) - x3", &chart);
        for _ in 0..5 {
            let w = parse_chart_expr(&format!("{}*x1*x3 + {}*cos(x2)", rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)), 3).unwrap();
            let hat = rescale_chart(&chart, &w).unwrap();
            let r = ConformalRescale::new(w.clone(), 3);
            let p: Vec<f64> = (0..3).map(|_| rng.random_range(-0.45..0.45)).collect();
            // ∇ in the original scale, then transformed
            let du = tractor_derivative(&chart, &u, &p).unwrap();
            let lhs: Vec<TractorValue> = du
                .iter()
                .map(|v| transform_tractor(&chart, v, &r, &p).unwrap())
                .collect();
            // transformed field differentiated in the rescaled chart
            let xg = Grad::seed(&p);
            let geo_g = LocalGeometry::at(&chart, &xg).unwrap();
            let (wg, ug, _) = r.jet(&xg).unwrap();
            let moved = transform_slots(&u.eval(&xg).unwrap(), wg, &ug, &geo_g.ginv);
            let geo_hat = LocalGeometry::at(&hat, &p).unwrap();
            let rhs = derivative_from_jet(&geo_hat, &moved);
            for (l, r) in lhs.iter().zip(&rhs) {
                for (a, b) in l.slots().iter().zip(r) {
                    assert!((a - b).abs() < 1e-8 * a.abs().max(1.0), "{a} vs {b}");
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn connection_preserves_the_tractor_metric(
        c in proptest::collection::vec(-1.0f64..1.0, 10),
        p in proptest::collection::vec(-0.8f64..0.8, 3),
    ) {
        let s = sphere(3);
        let u = TractorField::parse(
            &format!("{}*x1 + {}; {}*x2, sin({}*x3), x1*x2; {}*x3^2 + {}", c[0], c[1], c[2], c[3], c[4], c[5]),
            3, "sphere").unwrap();
        let v = TractorField::parse(
            &format!("cos({}*x1); x3, {}*x1, {}; exp({}*x2)", c[6], c[7], c[8], c[9]),
            3, "sphere").unwrap();
        let xg = Grad::seed(&p);
        let geo_g = LocalGeometry::at(&s, &xg).unwrap();
        let huv = pair(&geo_g.ginv, &u.eval(&xg).unwrap(), &v.eval(&xg).unwrap());
        let du = tractor_derivative(&s, &u, &p).unwrap();
        let dv = tractor_derivative(&s, &v, &p).unwrap();
        let (uv, vv) = (u.value_at(&p).unwrap(), v.value_at(&p).unwrap());
        for a in 0..3 {
            let rhs = tractor_metric(&s, &du[a], &vv, &p).unwrap() + tractor_metric(&s, &uv, &dv[a], &p).unwrap();
            prop_assert!((huv.dx(a) - rhs).abs() < 1e-9 * rhs.abs().max(1.0));
        }
    }
}
