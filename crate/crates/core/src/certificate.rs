//! Machine-readable run certificates.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;

use crate::config::Config;
use crate::geometry::Chart;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");


#[derive(Debug, Clone, Serialize)]
pub struct Tolerances {
    pub tol: f64,
    pub loose_tol: f64,
    pub rk_tol: f64,
    pub grid: usize,
    pub max_steps: usize,
}

impl From<&Config> for Tolerances {
    fn from(c: &Config) -> Self {
        Tolerances { tol: c.tol, loose_tol: c.loose_tol, rk_tol: c.rk_tol, grid: c.grid, max_steps: c.max_steps }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Certificate {
    pub command: String,
    pub chart_digest: Option<String>,
    pub tolerances: Tolerances,
    /// Named residuals; a non-finite value is recorded as `null` and fails the run.
    pub residuals: BTreeMap<String, Option<f64>>,
    pub verdicts: BTreeMap<String, bool>,
    pub passed: bool,
    pub result: Value,
    pub error: Option<String>,
    pub wall_time_s: f64,
    pub tool_version: &'static str,
}

/// Accumulates a certificate while a command runs.
pub struct CertificateBuilder {
    cert: Certificate,
    started: Instant,
}

impl CertificateBuilder {
    pub fn new(command: impl Into<String>, cfg: &Config) -> Self {
        CertificateBuilder {
            cert: Certificate {
                command: command.into(),
                chart_digest: None,
                tolerances: cfg.into(),
                residuals: BTreeMap::new(),
                verdicts: BTreeMap::new(),
                passed: true,
                result: Value::Null,
                error: None,
                wall_time_s: 0.0,
                tool_version: TOOL_VERSION,
            },
            started: Instant::now(),
        }
    }

    pub fn chart(&mut self, chart: &Chart) -> &mut Self {
        self.cert.chart_digest = Some(chart.digest());
        self
    }

    pub fn residual(&mut self, name: impl Into<String>, v: f64) -> &mut Self {
        let name = name.into();
        if v.is_finite() {
            self.cert.residuals.insert(name, Some(v));
        } else {
            self.cert.verdicts.insert(format!("{name}_finite"), false);
            self.cert.passed = false;
            self.cert.residuals.insert(name, None);
        }
        self
    }

    pub fn verdict(&mut self, name: impl Into<String>, ok: bool) -> &mut Self {
        self.cert.verdicts.insert(name.into(), ok);
        self.cert.passed &= ok;
        self
    }

    pub fn result(&mut self, v: Value) -> &mut Self {
        self.cert.result = v;
        self
    }

    pub fn error(&mut self, msg: impl Into<String>) -> &mut Self {
        self.cert.error = Some(msg.into());
        self.cert.passed = false;
        self
    }

    pub fn passed(&self) -> bool {
        self.cert.passed
    }

    pub fn finish(mut self) -> Certificate {
        self.cert.wall_time_s = self.started.elapsed().as_secs_f64();
        self.cert
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_digest_is_recorded() {
        let a = Chart::conformally_flat("flat", vec![(-1.0, 1.0); 3], 1.0.into(), None).unwrap();
        let mut c = CertificateBuilder::new("test", &Config::default());
        c.chart(&a);
        assert_eq!(c.finish().chart_digest.unwrap().len(), 64);
    }

    #[test]
    fn non_finite_residuals_fail() {
        let mut c = CertificateBuilder::new("test", &Config::default());
        c.residual("ok", 1e-12).verdict("fine", true);
        assert!(c.passed());
        c.residual("bad", f64::NAN);
        let cert = c.finish();
        assert!(!cert.passed);
        assert_eq!(cert.residuals["bad"], None);
        let s = serde_json::to_string(&cert).unwrap();
        assert!(s.contains("\"bad\":null"));
    }
}
