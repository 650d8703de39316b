use super::*;
use crate::almost_einstein::make_ae;
use crate::config::Config;
use crate::error::Error;
use crate::fields::{parse_chart_expr, ScalarExpr};
use crate::geometry::Chart;
use crate::product::{catalog, validate_special_product, Params, SpecialProductSpec};
use crate::tractor::{pair, inverse_metric, TransportOptions};

fn flat(d: usize, r: f64) -> Chart {
    Chart::conformally_flat("flat", vec![(-r, r); d], 1.0.into(), (d <= 2).then_some(0.0)).unwrap()
}

fn expr(s: &str, d: usize) -> ScalarExpr {
    parse_chart_expr(s, d).unwrap()
}

fn unit_sphere_points(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            let t = 0.3 + i as f64 * 0.7;
            let z = -0.8 + 1.6 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            vec![r * t.cos(), r * t.sin(), z]
        })
        .collect()
}

#[test]
fn normal_tractor_of_round_sphere_and_plane() {
    let c = flat(3, 1.5);
    let sigma = expr("(1 - x1^2 - x2^2 - x3^2)/2", 3);
    let surf = LevelSurface::from_points(&c, &sigma, unit_sphere_points(12)).unwrap();
    for p in &surf.points {
        let n = normal_tractor(&c, &surf, p).unwrap();
        assert_eq!(n.sigma, 0.0);
        for a in 0..3 {
            assert!((n.mu[a] + p[a]).abs() < 1e-12);
        }
        assert!((n.rho - 1.0).abs() < 1e-12, "H = −1 on the unit sphere with inward conormal");
        let ginv = inverse_metric(&c, p).unwrap();
        assert!((pair(&ginv, &n.slots(), &n.slots()) - 1.0).abs() < 1e-9);
        assert!(umbilicity_residual(&c, &surf, p).unwrap() < 1e-8);
    }
    let plane = LevelSurface::from_points(&c, &expr("x1", 3), vec![vec![0.0, 0.2, -0.4]]).unwrap();
    let n = normal_tractor(&c, &plane, &[0.0, 0.2, -0.4]).unwrap();
    assert_eq!((n.sigma, n.mu.clone(), n.rho), (0.0, vec![1.0, 0.0, 0.0], 0.0));
}

#[test]
fn singular_and_off_surface_points_are_rejected() {
    let c = flat(3, 1.0);
    let cone = expr("x1^2 - x2^2 - x3^2", 3);
    assert!(matches!(LevelSurface::from_points(&c, &cone, vec![vec![0.0; 3]]), Err(Error::SingularLevelSet { .. })));
    assert!(LevelSurface::from_points(&c, &cone, vec![vec![0.5, 0.0, 0.0]]).is_err());
}

#[test]
fn ellipsoid_is_not_umbilic() {
    let c = flat(3, 1.5);
    let surf = LevelSurface::extract(&c, &expr("1 - x1^2 - 2*x2^2 - 3*x3^2", 3), 9).unwrap();
    let worst = surf.points.iter().map(|p| umbilicity_residual(&c, &surf, p).unwrap()).fold(0.0, f64::max);
    assert!(worst > 0.1);
}

#[test]
fn negative_type_singularity_set_is_umbilic_on_the_sphere() {
    let s3 = catalog("sphere_stereo", &Params::new()).unwrap();
    let k = make_ae(&s3, &expr("2*x1/(1 + x1^2 + x2^2 + x3^2)", 3), &Config::default()).unwrap();
    assert!(k.s < 0.0);
    let surf = LevelSurface::extract(&s3, &k.sigma, 9).unwrap();
    assert!(!surf.is_empty());
    for p in &surf.points {
        assert!(umbilicity_residual(&s3, &surf, p).unwrap() < 1e-6);
    }
}

#[test]
fn mean_curvature_is_constant_along_the_singularity_set() {
    let c = flat(3, 1.5);
    let cfg = Config::default();
    let k2 = make_ae(&c, &expr("(1 - x1^2 - x2^2 - x3^2)/2", 3), &cfg).unwrap();
    let flat_scale = make_ae(&c, &ScalarExpr::one(), &cfg).unwrap();
    let r = mean_curvature_constancy(&flat_scale, &k2, 50, &cfg).unwrap();
    assert_eq!(r.samples, 50);
    assert!((r.expected + 1.0).abs() < 1e-15);
    assert!(r.spread < 1e-7 && r.deviation < 1e-7, "{r:?}");
    assert!(r.normal_mismatch < 1e-7);

    let orth = make_ae(&c, &expr("(1 + x1^2 + x2^2 + x3^2)/2", 3), &cfg).unwrap();
    let r = mean_curvature_constancy(&orth, &k2, 50, &cfg).unwrap();
    assert!(r.expected.abs() < 1e-15);
    assert!(r.values.iter().all(|v| v.abs() < 1e-7), "minimal");

    // against itself the pairing is S
    let surf = LevelSurface::extract(&c, &k2.sigma, 9).unwrap();
    let v = generalized_mean_curvature(&k2, &surf, &surf.points[0]).unwrap();
    assert!((v - k2.s).abs() < 1e-9);

    assert!(mean_curvature_constancy(&k2, &flat_scale, 10, &cfg).is_err(), "S = 0 has no hypersurface");
}

#[test]
fn orthogonal_spacelike_pair_meets_umbilically() {
    let c = flat(4, 1.5);
    let cfg = Config::default().with_grid(13);
    let k2 = make_ae(&c, &expr("(1 - x1^2 - x2^2 - x3^2 - x4^2)/2", 4), &cfg).unwrap();
    let k1 = make_ae(&c, &expr("1/2 + 1.5*x1 + (x1^2 + x2^2 + x3^2 + x4^2)/2", 4), &cfg).unwrap();
    assert!(k1.s < 0.0 && k2.s < 0.0);
    let r = intersection_umbilicity(&k1, &k2, &cfg).unwrap();
    assert!(r.pairing.abs() < 1e-14);
    assert_eq!(r.status, IntersectionStatus::Checked, "{r:?}");
    assert!(r.samples >= 10);
    assert!(r.umbilicity < 1e-5, "{}", r.umbilicity);

    // externally tangent unit spheres meet in a double point
    let tangent = make_ae(&c, &expr("((x1 - 2)^2 + x2^2 + x3^2 + x4^2 - 1)/2", 4), &cfg).unwrap();
    let r = intersection_umbilicity(&tangent, &k2, &cfg).unwrap();
    assert_ne!(r.status, IntersectionStatus::Checked);

    let far = make_ae(&c, &expr("((x1 - 5)^2 + x2^2 + x3^2 + x4^2 - 1)/2", 4), &cfg).unwrap();
    assert_eq!(intersection_umbilicity(&far, &k2, &cfg).unwrap().status, IntersectionStatus::Empty);
}

fn sample(chart: &Chart) -> HolonomySample {
    holonomy_sample(chart, &default_loops(chart, 1), &TransportOptions::default()).unwrap()
}

#[test]
fn loop_family_is_deterministic_and_closed() {
    let c = flat(3, 1.0);
    let a = default_loops(&c, 3);
    let b = default_loops(&c, 3);
    assert_eq!(a.len(), 3 * 3 * 5);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.id, y.id);
        let start = x.pieces[0].at(0.0).unwrap().0;
        let end = x.pieces.last().unwrap().at(1.0).unwrap().0;
        assert_eq!(start, vec![0.0; 3]);
        assert!(end.iter().all(|v| v.abs() < 1e-15));
        assert_eq!(start, y.pieces[0].at(0.0).unwrap().0);
    }
}

#[test]
fn flat_and_regular_circle_have_trivial_holonomy() {
    let s = sample(&flat(3, 1.0));
    assert!(s.max_deviation < 1e-8 && s.metric_residual < 1e-7);
    let split = detect_splitting(&s, &SplittingOptions::default()).unwrap();
    assert_eq!(split.verdict, SplittingVerdict::TrivialHolonomy);

    let circle = catalog("circle", &Params::from([("mu".to_string(), 0.5)])).unwrap();
    let loops = default_loops(&circle, 1);
    assert_eq!(loops.len(), 5);
    let s = holonomy_sample(&circle, &loops, &TransportOptions::default()).unwrap();
    assert!(s.max_deviation < 1e-8, "{}", s.max_deviation);
}

#[test]
fn conformally_flat_product_preserves_its_splitting() {
    let p = catalog("product_s2_h2", &Params::new()).unwrap();
    let s = sample(&p);
    assert!(s.loops.len() >= 10 && s.metric_residual < 1e-7);
    let (b1, b2) = s2_h2_spec().block_subspaces();
    assert!(off_block_norm(&s, &[b1, b2]).unwrap() < 1e-7);
}

fn s2_h2_spec() -> SpecialProductSpec {
    let s2 = catalog("sphere_stereo", &Params::from([("d".into(), 2.0)])).unwrap();
    let h2 = catalog("hyperbolic_ball", &Params::from([("d".into(), 2.0)])).unwrap();
    validate_special_product(&s2, &h2).unwrap()
}

#[test]
fn curved_product_has_a_decomposable_witness() {
    let p = catalog("product_s1_h2h2", &Params::new()).unwrap();
    let s = sample(&p);
    assert!(s.metric_residual < 1e-7, "{}", s.metric_residual);
    assert!(s.max_deviation > 1e-3);
    let split = detect_splitting(&s, &SplittingOptions::default()).unwrap();
    assert_eq!(split.verdict, SplittingVerdict::Decomposable, "{split:?}");
    let dims: Vec<usize> = split.subspaces.iter().map(|b| b.dim).collect();
    assert_eq!(dims, vec![2, 5]);
    assert!(split.off_block < 1e-7);
}

#[test]
fn perturbed_metric_has_no_witness() {
    let p = catalog("perturbed", &Params::from([("eps".to_string(), 0.3)])).unwrap();
    let s = sample(&p);
    assert!(s.metric_residual < 1e-7);
    let split = detect_splitting(&s, &SplittingOptions::default()).unwrap();
    assert_eq!(split.verdict, SplittingVerdict::NoWitness, "{split:?}");
    assert_eq!(split.commutant_dim, 1);
}

