use std::f64::consts::PI;

use tractor_web::{circle_profile, circle_profile_js, classify_flat, collar_profile};

#[test]
fn regular_circle_solution_has_two_zeros() {
    let v = circle_profile(0.5, [0.0, 1.0, 0.3], 2.0 * PI, 200).unwrap();
    assert_eq!(v["zeros"].as_array().unwrap().len(), 2);
    assert!((v["period"].as_f64().unwrap() - 2.0 * PI).abs() < 1e-12);
    assert_eq!(v["periodic_dimension"], 3);
    assert_eq!(v["t"].as_array().unwrap().len(), 200);
}

#[test]
fn exotic_circle_has_only_constants_periodic() {
    let v = circle_profile(-0.5, [1.0, 0.0, 0.0], 4.0 * PI, 50).unwrap();
    assert_eq!(v["periodic_dimension"], 1);
    assert!(v["period"].is_null());
    assert!(v["s"].as_array().unwrap().iter().all(|s| s.as_f64() == Some(1.0)));
}

#[test]
fn flat_families_classify() {
    let neg = classify_flat("(1 - x1^2 - x2^2 - x3^2)/2", 3, 1.5, 17).unwrap();
    assert_eq!(neg["kind"], "hypersurface");
    assert_eq!(neg["S"], -1.0);
    let zero = classify_flat("(x1^2 + x2^2)/2", 2, 1.0, 17).unwrap();
    assert_eq!(zero["kind"], "isolated-points");
    let pos = classify_flat("(1 + x1^2 + x2^2 + x3^2)/2", 3, 1.5, 17).unwrap();
    assert_eq!(pos["kind"], "empty");
}

#[test]
fn collar_is_einstein_along_the_radius() {
    let v = collar_profile(0.5, 20).unwrap();
    let res = v["einstein_residual"].as_array().unwrap();
    assert_eq!(res.len(), 20);
    assert!(res.iter().all(|r| r.as_f64().unwrap() < 1e-7));
    assert!(collar_profile(-1.0, 5).is_err());
}

#[test]
fn errors_are_returned_as_json() {
    let s = circle_profile_js(0.5, 1.0, 0.0, 0.0, -1.0, 10);
    let v: serde_json::Value = serde_json::from_str(&s).unwrap();
    assert!(v["error"].is_string());
}
