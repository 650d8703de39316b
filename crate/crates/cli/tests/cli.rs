use std::path::Path;
use std::process::Command;

use serde_json::Value;

fn tractor(args: &[&str]) -> (i32, Value) {
    tractor_env(args, &[])
}

fn tractor_env(args: &[&str], env: &[(&str, &str)]) -> (i32, Value) {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_tractor"));
    cmd.args(args).env_remove("TRACTOR_TOL").env_remove("TRACTOR_GRID");
    for (k, v) in env {
        cmd.env(k, v);
    }
    let out = cmd.output().expect("binary runs");
    let text = String::from_utf8(out.stdout).unwrap();
    let cert = serde_json::from_str(&text).unwrap_or_else(|e| panic!("stdout is not JSON ({e}): {text}"));
    (out.status.code().unwrap(), cert)
}

fn schema_valid(cert: &Value) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/certificate.schema.json");
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(cert).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}");
}

#[test]
fn catalog_lists_at_least_eight_fixtures() {
    let (code, cert) = tractor(&["catalog", "--list"]);
    assert_eq!(code, 0);
    assert!(cert["result"]["fixtures"].as_array().unwrap().len() >= 8);
    schema_valid(&cert);
}

#[test]
fn verify_ae_on_a_chart_file() {
    let dir = tempfile::tempdir().unwrap();
    let chart = dir.path().join("flat3.chart");
    let chart = chart.to_str().unwrap();
    let (code, _) = tractor(&["catalog", "flat", "--param", "r=1.5", "--out", chart]);
    assert_eq!(code, 0);
    let (code, cert) = tractor(&["verify-ae", "--chart", chart, "--sigma", "(1 - x1^2 - x2^2 - x3^2)/2"]);
    assert_eq!(code, 0, "{cert}");
    assert_eq!(cert["result"]["S"], -1.0);
    assert_eq!(cert["result"]["classification"], "hypersurface");
    assert!(cert["chart_digest"].as_str().unwrap().len() == 64);
    schema_valid(&cert);
}

#[test]
fn reruns_reproduce_every_residual() {
    let args = ["holonomy", "--chart", "catalog:product_s2_h2", "--loops", "12", "--json"];
    let (c1, a) = tractor(&args);
    let (c2, b) = tractor(&args);
    assert_eq!((c1, c2), (0, 0));
    assert_eq!(a["result"]["matrices_digest"], b["result"]["matrices_digest"]);
    let (ra, rb) = (a["residuals"].as_object().unwrap(), b["residuals"].as_object().unwrap());
    assert_eq!(ra.keys().collect::<Vec<_>>(), rb.keys().collect::<Vec<_>>());
    for (k, v) in ra {
        assert!((v.as_f64().unwrap() - rb[k].as_f64().unwrap()).abs() <= 1e-12, "{k}");
    }
    schema_valid(&a);
}

#[test]
fn malformed_input_exits_2_with_a_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.chart");
    std::fs::write(&bad, "{ not json").unwrap();
    let (code, cert) = tractor(&["curvature", "--chart", bad.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert_eq!(cert["passed"], false);
    assert!(cert["error"].is_string());
    schema_valid(&cert);

    let (code, cert) = tractor(&["verify-ae", "--chart", "catalog:flat", "--sigma", "x1 +"]);
    assert_eq!(code, 2);
    schema_valid(&cert);
    let (code, _) = tractor(&["no-such-command"]);
    assert_eq!(code, 2);
}

#[test]
fn failed_verdict_exits_1() {
    let (code, cert) = tractor(&["verify-ae", "--chart", "catalog:flat", "--sigma", "1 + x1^2"]);
    assert_eq!(code, 1);
    assert_eq!(cert["passed"], false);
    let (code, cert) = tractor(&["killing", "--chart", "catalog:flat", "--field", "x1^2,x2,x3"]);
    assert_eq!(code, 1);
    schema_valid(&cert);
}

#[test]
fn tolerance_overrides_reach_the_certificate() {
    let (_, cert) = tractor(&["curvature", "--chart", "catalog:flat", "--tol", "1e-6"]);
    assert_eq!(cert["tolerances"]["tol"], 1e-6);
    assert!((cert["tolerances"]["rk_tol"].as_f64().unwrap() - 1e-8).abs() < 1e-20);
    let (_, cert) = tractor_env(&["curvature", "--chart", "catalog:flat"], &[("TRACTOR_GRID", "17")]);
    assert_eq!(cert["tolerances"]["grid"], 17);
    let (_, cert) = tractor_env(&["curvature", "--chart", "catalog:flat", "--grid", "9"], &[("TRACTOR_GRID", "17")]);
    assert_eq!(cert["tolerances"]["grid"], 9);
}

#[test]
fn built_charts_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let prod = dir.path().join("s2h2.chart");
    let (code, cert) = tractor(&[
        "build-product",
        "--chart",
        "catalog:sphere_stereo?d=2",
        "--chart",
        "catalog:hyperbolic_ball?d=2",
        "--out",
        prod.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{cert}");
    let (code, again) = tractor(&["curvature", "--chart", prod.to_str().unwrap(), "--point", "0.1,0.2,-0.1,0.3"]);
    assert_eq!(code, 0);
    assert_eq!(cert["chart_digest"], again["chart_digest"]);
    assert!(again["result"]["scalar"].as_f64().unwrap().abs() < 1e-12);

    let (code, cert) = tractor(&["build-collar", "--chart", "catalog:sphere_stereo?d=2", "--chart", "catalog:hyperbolic_ball?d=2"]);
    assert_eq!(code, 0, "{cert}");
    assert!(cert["residuals"]["einstein_minus_one"].as_f64().unwrap() < 1e-7);
}

#[test]
fn transport_killing_and_surface() {
    let (code, cert) = tractor(&[
        "transport",
        "--chart",
        "catalog:sphere_stereo",
        "--curve",
        "0.5*t,0.2*t^2,-0.3*t",
        "--tractor",
        "1;0,0.5,0;0.2",
    ]);
    assert_eq!(code, 0, "{cert}");
    assert!(cert["result"]["endpoint"]["mu"].as_array().unwrap().len() == 3);

    let (code, cert) = tractor(&["killing", "--chart", "catalog:flat", "--field", "x1,x2,x3", "--point", "0,0,0"]);
    assert_eq!(code, 0);
    assert_eq!(cert["result"]["points"][0]["witness"]["verdict"], "ESSENTIAL");

    let (code, cert) = tractor(&[
        "surface",
        "--chart",
        "catalog:flat?r=1.5",
        "--sigma",
        "1",
        "--ae",
        "(1 - x1^2 - x2^2 - x3^2)/2",
    ]);
    assert_eq!(code, 0, "{cert}");
    assert!((cert["result"]["mean"].as_f64().unwrap() + 1.0).abs() < 1e-7);
    schema_valid(&cert);
}

#[test]
fn selftest_runs_single_criteria() {
    let (code, cert) = tractor(&["selftest", "--criterion", "9"]);
    assert_eq!(code, 0, "{cert}");
    assert_eq!(cert["verdicts"]["criterion_09"], true);
    let (code, _) = tractor(&["selftest", "--criterion", "11"]);
    assert_eq!(code, 2);
}
