use proptest::prelude::*;

use super::*;
use crate::fields::{norm_squared, ScalarExpr};
use crate::real::Grad;

fn flat(d: usize) -> Chart {
    let mu = (d <= 2).then_some(0.0);
    Chart::conformally_flat("flat", vec![(-1.0, 1.0); d], 1.0.into(), mu).unwrap()
}

fn sphere(d: usize) -> Chart {
    let f = 4.0 / (1.0 + norm_squared(d)).powi(2);
    Chart::conformally_flat("sphere", vec![(-1.0, 1.0); d], f, (d <= 2).then_some(0.5)).unwrap()
}

fn ball(d: usize) -> Chart {
    let f = 4.0 / (1.0 - norm_squared(d)).powi(2);
    Chart::conformally_flat("ball", vec![(-0.4, 0.4); d], f, (d <= 2).then_some(-0.5)).unwrap()
}

/// δ + ε·(random quadratic symmetric perturbation).
fn perturbed(c: &[f64]) -> Chart {
    let x = ScalarExpr::var;
    let d = 3;
    let mut metric = vec![vec![ScalarExpr::zero(); d]; d];
    let mut k = 0;
    for i in 0..d {
        for j in i..d {
            let e = c[k] * x(0) * x(1) + c[k + 1] * x(2).powi(2) + c[k + 2] * x(i) + if i == j { 1.0 } else { 0.0 };
            k += 3;
            metric[i][j] = e.clone();
            metric[j][i] = e;
        }
    }
    Chart::new("perturbed", vec![(-0.5, 0.5); d], metric, None).unwrap()
}

#[test]
fn flat_chart_has_no_curvature() {
    let p = curvature(&flat(4), &[0.3, -0.2, 0.1, 0.9]).unwrap();
    for t in [&p.gamma, &p.riemann, &p.schouten, &p.weyl] {
        assert_eq!(t.max_abs(), 0.0);
    }
    assert_eq!(p.j, 0.0);
    assert_eq!(einstein_residual(&flat(3), 0.0, &[0.1, 0.2, 0.3]).unwrap(), 0.0);
}

#[test]
fn stereographic_sphere_at_origin() {
    let p = curvature(&sphere(3), &[0.0; 3]).unwrap();
    assert!((p.scalar - 6.0).abs() < 1e-12);
    assert!((p.j - 1.5).abs() < 1e-12);
    for a in 0..3 {
        for b in 0..3 {
            assert!((p.schouten[[a, b]] - 0.5 * p.metric[[a, b]]).abs() < 1e-12);
        }
    }
    // sectional curvature of the 1-2 plane: R_{1212} / (g11 g22 − g12²) with R_abcd = g_ce R_ab^e_d
    let r = p.riemann[[0, 1, 0, 1]] * p.metric[[0, 0]];
    let k = r / (p.metric[[0, 0]] * p.metric[[1, 1]]);
    assert!((k - 1.0).abs() < 1e-12, "sectional curvature {k}");
}

#[test]
fn space_forms_are_einstein() {
    for x in [[0.1, 0.2, -0.3], [0.3, -0.1, 0.0]] {
        assert!(einstein_residual(&sphere(3), 1.0, &x).unwrap() < 1e-8);
        assert!(einstein_residual(&ball(3), -1.0, &x).unwrap() < 1e-8);
    }
    assert!(einstein_residual(&sphere(5), 1.0, &[0.1, 0.2, -0.3, 0.0, 0.5]).unwrap() < 1e-8);
}

#[test]
fn low_dimensional_schouten_follows_mu() {
    // Einstein scale: P = μ g
    let s = sphere(2).base_chart();
    let p = curvature(&s, &[0.3, 0.1]).unwrap();
    assert_eq!(p.weyl.max_abs(), 0.0);
    assert!((p.j - 1.0).abs() < 1e-12);
    let c = Chart::diagonal("circle", vec![(0.0, 6.0)], vec![1.0.into()], Some(0.25)).unwrap();
    let p = curvature(&c, &[1.0]).unwrap();
    assert_eq!(p.schouten[[0, 0]], 0.25);
    assert_eq!(p.j, 0.25);
}

#[test]
fn metric_is_parallel_and_coordinates_have_unit_gradient() {
    let s = sphere(3);
    let x = [0.2, -0.4, 0.3];
    let dg = covariant_derivative(&s, &TensorField::metric(&s), &x).unwrap();
    assert!(dg.max_abs() < 1e-12);
    let v = TensorField::vector((0..3).map(ScalarExpr::var).collect());
    let dv = covariant_derivative(&flat(3), &v, &x).unwrap();
    for a in 0..3 {
        for b in 0..3 {
            assert_eq!(dv[[a, b]], if a == b { 1.0 } else { 0.0 });
        }
    }
}

#[test]
fn rotations_are_killing_on_the_sphere() {
    let s = sphere(3);
    let x = ScalarExpr::var;
    let up = [-x(1), x(0), ScalarExpr::zero()];
    let g = s.metric();
    let k = (0..3)
        .map(|a| (0..3).fold(ScalarExpr::zero(), |acc, b| acc + &g[a][b] * &up[b]))
        .collect();
    let field = TensorField::covector(k);
    for p in [[0.1, 0.2, 0.3], [-0.5, 0.4, 0.0], [0.7, -0.7, 0.2]] {
        let dk = covariant_derivative(&s, &field, &p).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                assert!((dk[[a, b]] + dk[[b, a]]).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn high_valence_is_rejected() {
    let f = TensorField::new(2, 2, 0, vec![ScalarExpr::zero(); 4]).unwrap();
    assert!(matches!(
        covariant_derivative(&flat(2), &f, &[0.0, 0.0]),
        Err(crate::Error::UnsupportedValence { up: 2, down: 0 })
    ));
}

#[test]
fn grad_evaluation_differentiates_the_schouten_tensor() {
    let s = perturbed(&[0.1, -0.2, 0.3, 0.05, 0.1, -0.1, 0.2, 0.0, 0.1, -0.3, 0.2, 0.1, 0.0, 0.1, 0.2, -0.1, 0.1, 0.3]);
    let x = [0.1, 0.2, -0.15];
    let geo = LocalGeometry::at(&s, &Grad::seed(&x)).unwrap();
    let h = 1e-5;
    for k in 0..3 {
        let fd = |h: f64| {
            let mut a = x;
            let mut b = x;
            a[k] += h;
            b[k] -= h;
            let pa = LocalGeometry::at(&s, &a).unwrap().schouten;
            let pb = LocalGeometry::at(&s, &b).unwrap().schouten;
            pa.data.iter().zip(&pb.data).map(|(u, v)| (u - v) / (2.0 * h)).collect::<Vec<_>>()
        };
        let (c1, c2) = (fd(h), fd(h / 2.0));
        for (i, p) in geo.schouten.data.iter().enumerate() {
            let rich = (4.0 * c2[i] - c1[i]) / 3.0;
            assert!((p.dx(k) - rich).abs() < 1e-7, "{} vs {rich}", p.dx(k));
        }
    }
}

#[test]
fn identities_hold_on_space_forms() {
    for c in [sphere(3), ball(4), sphere(5)] {
        for x in c.grid(3).iter().step_by(7) {
            let p = curvature(&c, x).unwrap();
            assert!(p.identity_residuals().max() < 1e-9, "{}: {:?}", c.name(), p.identity_residuals());
            assert!(p.weyl.max_abs() < 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn bianchi_and_weyl_trace_on_perturbed_metrics(
        c in proptest::collection::vec(-0.3f64..0.3, 18),
        x in proptest::collection::vec(-0.5f64..0.5, 3),
    ) {
        let chart = perturbed(&c);
        let p = curvature(&chart, &x).unwrap();
        let r = p.identity_residuals();
        prop_assert!(r.bianchi < 1e-9, "{r:?}");
        prop_assert!(r.weyl_trace < 1e-9, "{r:?}");
        prop_assert!(r.ricci_split < 1e-9 && r.riemann_split < 1e-9, "{r:?}");
    }
}
