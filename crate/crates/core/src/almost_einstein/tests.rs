use proptest::prelude::*;

use super::*;
use crate::fields::{norm_squared, parse_chart_expr};

fn flat(d: usize, r: f64) -> Chart {
    Chart::conformally_flat("flat", vec![(-r, r); d], 1.0.into(), (d <= 2).then_some(0.0)).unwrap()
}

fn sphere(d: usize) -> Chart {
    let f = 4.0 / (1.0 + norm_squared(d)).powi(2);
    Chart::conformally_flat("sphere", vec![(-1.0, 1.0); d], f, (d <= 2).then_some(0.5)).unwrap()
}

fn expr(s: &str, d: usize) -> ScalarExpr {
    parse_chart_expr(s, d).unwrap()
}

#[test]
fn residual_examples() {
    let c = flat(3, 1.0);
    let p = [0.3, -0.4, 0.2];
    assert_eq!(ae_residual(&c, &expr("(1 - x1^2 - x2^2 - x3^2)/2", 3), &p).unwrap(), 0.0);
    assert!(ae_residual(&sphere(3), &ScalarExpr::one(), &p).unwrap() < 1e-14);
    assert!((ae_residual(&c, &expr("x1*x2", 3), &p).unwrap() - 1.0).abs() < 1e-15);
}

#[test]
fn flat_families_give_the_three_signs() {
    let c = flat(3, 1.0);
    let cfg = Config::default();
    let x = [0.2, -0.5, 0.7];
    for (src, s, sign) in [
        ("(1 - x1^2 - x2^2 - x3^2)/2", -1.0, -1.0),
        ("(1 + x1^2 + x2^2 + x3^2)/2", 1.0, 1.0),
        ("(x1^2 + x2^2 + x3^2)/2", 0.0, 1.0),
    ] {
        let ae = make_ae(&c, &expr(src, 3), &cfg).unwrap();
        assert!((ae.s - s).abs() < 1e-14, "{src}: S = {}", ae.s);
        assert!(ae.s_spread < 1e-8);
        assert!(ae.parallel_residual < 1e-12);
        let i = ae.tractor_at(&x).unwrap();
        let sigma = ae.sigma.eval(&x).unwrap();
        assert!((i.sigma - sigma).abs() < 1e-15);
        for a in 0..3 {
            assert!((i.mu[a] - sign * x[a]).abs() < 1e-14);
        }
        assert!((i.rho + sign).abs() < 1e-14, "{src}: ρ = {}", i.rho);
    }
}

#[test]
fn non_solutions_are_rejected() {
    let cfg = Config::default();
    assert!(matches!(make_ae(&flat(3, 1.0), &expr("x1*x2", 3), &cfg), Err(Error::NotAlmostEinstein { .. })));
}

#[test]
fn sphere_round_scale() {
    let ae = make_ae(&sphere(3), &ScalarExpr::one(), &Config::default()).unwrap();
    // Ric = 2g on the unit 3-sphere, so (d−1)S = 2
    assert!((ae.s - 1.0).abs() < 1e-12);
    assert!(ae.s_spread < 1e-8);
}

#[test]
fn classification_of_flat_families() {
    let c = flat(3, 1.5);
    let cfg = Config::default();
    let neg = classify(&make_ae(&c, &expr("(1 - x1^2 - x2^2 - x3^2)/2", 3), &cfg).unwrap(), &cfg).unwrap();
    assert_eq!(neg.scale_type, ScaleType::Negative);
    assert_eq!(neg.singular_set.kind, SingularityKind::Hypersurface);
    assert!(neg.consistent, "{:?}", neg.notes);
    for p in &neg.singular_set.crossings {
        let r: f64 = p.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((r - 1.0).abs() < 1e-10);
    }
    assert!(neg.umbilicity.unwrap() < 1e-6);
    assert!(neg.einstein_residual.unwrap() < 1e-7);

    let zero = classify(&make_ae(&c, &expr("(x1^2 + x2^2 + x3^2)/2", 3), &cfg).unwrap(), &cfg).unwrap();
    assert_eq!(zero.scale_type, ScaleType::RicciFlat);
    assert_eq!(zero.singular_set.kind, SingularityKind::IsolatedPoints);
    assert_eq!(zero.singular_set.isolated.len(), 1);
    assert!(zero.singular_set.isolated[0].iter().all(|v| v.abs() < 1e-12));
    assert!(zero.gradient_at_zeros < 1e-7);
    assert!(zero.consistent, "{:?}", zero.notes);
    assert!(zero.einstein_residual.unwrap() < 1e-7);

    let pos = classify(&make_ae(&c, &expr("(1 + x1^2 + x2^2 + x3^2)/2", 3), &cfg).unwrap(), &cfg).unwrap();
    assert_eq!(pos.scale_type, ScaleType::Positive);
    assert!(pos.singular_set.is_empty());
    assert!(pos.consistent);
    assert!(pos.einstein_residual.unwrap() < 1e-7);
}

#[test]
fn parallel_space_dimensions() {
    let cfg = Config::default();
    for chart in [flat(3, 1.0), sphere(3)] {
        let ps = parallel_space(&chart, &cfg).unwrap();
        assert_eq!(ps.dim, 5, "{}", chart.name());
        assert_eq!(ps.coarse_dim, 5);
        assert!(ps.closure_residual < 1e-7);
    }
}

#[test]
fn parallel_tractors_solve_the_primary_equation() {
    let cfg = Config::default();
    let chart = sphere(3);
    let ps = parallel_space(&chart, &cfg).unwrap();
    for v in &ps.basis {
        for x in [[0.3, -0.2, 0.1], [-0.4, 0.35, 0.5]] {
            let r = primary_residual_of_parallel(&chart, &ps.base_point, v, &x).unwrap();
            assert!(r < 1e-7, "residual {r}");
        }
    }
}

#[test]
fn curved_non_einstein_chart_has_few_parallel_tractors() {
    let x = ScalarExpr::var;
    let metric = vec![
        vec![1.0 + 0.3 * x(1).powi(2), ScalarExpr::zero(), ScalarExpr::zero()],
        vec![ScalarExpr::zero(), 1.0.into(), 0.2 * x(0) * x(2)],
        vec![ScalarExpr::zero(), 0.2 * x(0) * x(2), 1.0 + 0.1 * x(0).powi(2)],
    ];
    let chart = Chart::new("lumpy", vec![(-0.5, 0.5); 3], metric, None).unwrap();
    assert_eq!(parallel_space(&chart, &Config::default()).unwrap().dim, 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn scaling_equivariance(c in prop_oneof![-3.0f64..-0.1, 0.1f64..3.0]) {
        let chart = flat(3, 1.0);
        let cfg = Config::default();
        let sigma = expr("(1 - x1^2 - x2^2 - x3^2)/2", 3);
        let a = make_ae(&chart, &sigma, &cfg).unwrap();
        let b = make_ae(&chart, &(c * &sigma), &cfg).unwrap();
        prop_assert!((b.s - c * c * a.s).abs() < 1e-12);
        let x = [0.1, 0.2, -0.3];
        let (ia, ib) = (a.tractor_at(&x).unwrap(), b.tractor_at(&x).unwrap());
        prop_assert!(ia.slots().iter().zip(ib.slots()).all(|(p, q)| (c * p - q).abs() < 1e-12));
    }
}
