//! Default tolerances and grid sizes, in one place.
//!
//! Every default can be overridden through environment variables with the
//! `TRACTOR_` prefix (`TRACTOR_TOL`, `TRACTOR_GRID`, `TRACTOR_RK_TOL`,
//! `TRACTOR_MAX_STEPS`) or, from the command line, `--tol` and `--grid`.

use serde::Serialize;

pub const DEFAULT_GRID: usize = 33;
pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_RK_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_STEPS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Config {
    /// Points per axis for zero-set and verification sweeps.
    pub grid: usize,
    /// Identity and residual tolerance.
    pub tol: f64,
    /// Tolerance for quantities one derivative or one integration away from
    /// exact expressions (parallelism, Einstein checks of rescaled charts).
    pub loose_tol: f64,
    /// Per-step absolute tolerance of the transport integrator.
    pub rk_tol: f64,
    pub max_steps: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            grid: DEFAULT_GRID,
            tol: DEFAULT_TOL,
            loose_tol: 10.0 * DEFAULT_TOL,
            rk_tol: DEFAULT_RK_TOL,
            max_steps: DEFAULT_MAX_STEPS,
        }
    }
}

impl Config {
    /// Defaults with environment overrides applied.
    pub fn from_env() -> Self {
        let mut c = Config::default();
        let var = |k: &str| std::env::var(format!("TRACTOR_{k}")).ok();
        if let Some(t) = var("TOL").and_then(|v| v.parse().ok()) {
            c = c.with_tol(t);
        }
        if let Some(g) = var("GRID").and_then(|v| v.parse().ok()) {
            c.grid = g;
        }
        if let Some(t) = var("RK_TOL").and_then(|v| v.parse().ok()) {
            c.rk_tol = t;
        }
        if let Some(n) = var("MAX_STEPS").and_then(|v| v.parse().ok()) {
            c.max_steps = n;
        }
        c
    }

    /// Sets the base tolerance, scaling every derived tolerance by the same factor.
    pub fn with_tol(mut self, tol: f64) -> Self {
        let f = tol / self.tol;
        self.tol = tol;
        self.loose_tol *= f;
        self.rk_tol *= f;
        self
    }

    pub fn with_grid(mut self, grid: usize) -> Self {
        self.grid = grid;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerance_override_is_uniform() {
        let c = Config::default().with_tol(1e-6);
        assert_eq!(c.tol, 1e-6);
        assert!((c.loose_tol - 1e-5).abs() < 1e-18);
        assert!((c.rk_tol - 1e-8).abs() < 1e-20);
    }
}
