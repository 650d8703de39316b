use super::*;
use crate::almost_einstein::make_ae;
use crate::fields::{norm_squared, parse_chart_expr};

fn flat(d: usize) -> Chart {
    Chart::conformally_flat("flat", vec![(-1.0, 1.0); d], 1.0.into(), None).unwrap()
}

fn sphere(d: usize) -> Chart {
    let f = 4.0 / (1.0 + norm_squared(d)).powi(2);
    Chart::conformally_flat("sphere", vec![(-1.0, 1.0); d], f, None).unwrap()
}

fn field(srcs: &[&str], d: usize) -> Vec<ScalarExpr> {
    srcs.iter().map(|s| parse_chart_expr(s, d).unwrap()).collect()
}

#[test]
fn conformal_killing_residuals() {
    let c = flat(3);
    let p = [0.3, -0.5, 0.2];
    assert_eq!(ck_residual(&c, &field(&["-x2", "x1", "0"], 3), &p).unwrap(), 0.0);
    assert!(ck_residual(&c, &field(&["x1", "x2", "x3"], 3), &p).unwrap() < 1e-15);
    // S_11 = 2x²/3, S_12 = x¹/2, S_22 = S_33 = −x²/3
    let r = ck_residual(&c, &field(&["x1*x2", "0", "0"], 3), &p).unwrap();
    assert!((r - 2.0 * 0.5 / 3.0).abs() < 1e-15);
}

#[test]
fn dilation_and_rotation_slots() {
    let c = flat(3);
    let cfg = Config::default();
    let (dil, rep) = prolong_ck(&c, &field(&["x1", "x2", "x3"], 3), &cfg).unwrap();
    let x = [0.3, -0.5, 0.2];
    let s = dil.prolong(&x).unwrap();
    assert_eq!(s.yz(), x.to_vec());
    assert!(s.zz().iter().flatten().all(|v| *v == 0.0));
    assert!((s.w() - 1.0).abs() < 1e-15);
    assert!(s.xz().iter().all(|v| v.abs() < 1e-15));
    assert!(rep.transport_residual < 1e-12 && rep.primary_mismatch < 1e-15);

    let (rot, _) = prolong_ck(&c, &field(&["-x2", "x1", "0"], 3), &cfg).unwrap();
    let s = rot.prolong(&x).unwrap();
    assert_eq!(s.w(), 0.0);
    let zz = s.zz();
    assert_eq!((zz[0][1], zz[1][0], zz[0][2], zz[1][2]), (1.0, -1.0, 0.0, 0.0));
    assert!(matches!(prolong_ck(&c, &field(&["x1*x2", "0", "0"], 3), &cfg), Err(Error::NotConformalKilling(_))));
}

#[test]
fn prolonged_transport_on_the_sphere() {
    let (_, rep) = prolong_ck(&sphere(3), &field(&["-x2", "x1", "0"], 3), &Config::default()).unwrap();
    assert!(rep.ck_residual < 1e-12);
    assert!(rep.transport_residual < 1e-8, "{}", rep.transport_residual);
    assert!(rep.primary_mismatch < 1e-9);
}

#[test]
fn curvature_term_on_a_curved_chart() {
    // metric independent of x¹, not conformally flat: ∂₁ is Killing and Ω enters
    let x = ScalarExpr::var;
    let z = ScalarExpr::zero;
    let metric = vec![
        vec![1.0 + 0.5 * x(1).powi(2), 0.3 * x(2), z(), z()],
        vec![0.3 * x(2), 1.0 + 0.4 * x(3).powi(2), z(), z()],
        vec![z(), z(), 1.0 + 0.5 * x(1) * x(3), z()],
        vec![z(), z(), z(), 1.0 + 0.3 * x(2).powi(2)],
    ];
    let chart = Chart::new("curved", vec![(-0.5, 0.5); 4], metric, None).unwrap();
    assert!(crate::geometry::curvature(&chart, &[0.1, 0.2, 0.3, -0.2]).unwrap().weyl.max_abs() > 1e-3);
    let (ck, rep) = prolong_ck(&chart, &field(&["1", "0", "0", "0"], 4), &Config::default()).unwrap();
    assert!(rep.transport_residual < 1e-8, "{}", rep.transport_residual);
    assert!(ck.prolong(&[0.1, 0.2, 0.3, -0.2]).unwrap().max_abs() > 0.0);
}

#[test]
fn wedge_of_flat_structures() {
    let c = flat(3);
    let cfg = Config::default();
    let ae = |s: &str| make_ae(&c, &parse_chart_expr(s, 3).unwrap(), &cfg).unwrap();
    let (w, k) = wedge_parallel(&ae("(1 - x1^2 - x2^2 - x3^2)/2"), &ae("(1 + x1^2 + x2^2 + x3^2)/2"), &cfg).unwrap();
    let x = [0.3, -0.5, 0.2];
    for a in 0..3 {
        assert!((k[a].eval(&x).unwrap() - x[a]).abs() < 1e-15, "dilation expected");
    }
    assert!(w.parallel_residual < 1e-12);
    assert!(w.prolongation_mismatch < 1e-12);
    assert!(w.gradient_residual.is_none());

    let (w, k) = wedge_parallel(&ae("1"), &ae("(1 - x1^2 - x2^2 - x3^2)/2"), &cfg).unwrap();
    assert!((k[1].eval(&x).unwrap() + x[1]).abs() < 1e-15);
    assert!(w.gradient_residual.unwrap() < 1e-12);
    assert!(matches!(
        wedge_parallel(&ae("(1 - x1^2 - x2^2 - x3^2)/2"), &ae("1 - x1^2 - x2^2 - x3^2"), &cfg),
        Err(Error::LinearlyDependent)
    ));
}

#[test]
fn wedge_on_the_sphere_matches_the_prolongation() {
    let c = sphere(3);
    let cfg = Config::default();
    let ae = |s: &str| make_ae(&c, &parse_chart_expr(s, 3).unwrap(), &cfg).unwrap();
    let (w, _) = wedge_parallel(&ae("1"), &ae("2*x1/(1 + x1^2 + x2^2 + x3^2)"), &cfg).unwrap();
    assert!(w.parallel_residual < 1e-10);
    assert!(w.prolongation_mismatch < 1e-10);
    assert!(w.gradient_residual.unwrap() < 1e-12);
}

#[test]
fn essentiality() {
    let c = flat(3);
    let cfg = Config::default();
    let o = [0.0; 3];
    let dil = essential_witness(&c, &field(&["x1", "x2", "x3"], 3), &o, &cfg).unwrap();
    assert_eq!(dil.verdict, Verdict::Essential);
    assert_eq!(dil.slots.w(), 1.0);
    let rot = essential_witness(&c, &field(&["-x2", "x1", "0"], 3), &o, &cfg).unwrap();
    assert_eq!(rot.verdict, Verdict::NotApplicableNongradient);
    assert!(rot.slots.non_primary_max() > 0.0);
    assert!(matches!(essential_witness(&c, &field(&["1", "0", "0"], 3), &o, &cfg), Err(Error::NotAZero(_))));
}


