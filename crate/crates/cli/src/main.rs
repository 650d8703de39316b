//! `tractor`: command-line front end. Every run prints a JSON certificate on
//! standard output and exits 0 when all verdicts pass, 1 when a verdict fails
//! and 2 on malformed input.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tractor::certificate::{Certificate, CertificateBuilder};
use tractor::{Config, Error};

#[derive(Parser)]
#[command(name = "tractor", version, about = "Conformal tractor calculus on coordinate charts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Clone)]
pub struct Common {
    /// Points per axis for sweeps (overrides TRACTOR_GRID).
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    /// Base tolerance; derived tolerances scale with it (overrides TRACTOR_TOL).
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Print the certificate on one line.
    #[arg(long, global = true)]
    pub json: bool,
    /// Write the produced chart file here (chart-producing commands) or a copy
    /// of the certificate (all others).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand)]
pub enum Command {
    /// Curvature stack at a point (default: the chart center).
    Curvature {
        #[arg(long)]
        chart: String,
        #[arg(long)]
        point: Option<String>,
    },
    /// Conformal rescaling e^{2ω}g.
    Rescale {
        #[arg(long)]
        chart: String,
        #[arg(long)]
        omega: String,
    },
    /// Parallel transport of a tractor along a curve t ↦ c(t), t ∈ [0, 1].
    Transport {
        #[arg(long)]
        chart: String,
        /// One expression in t per coordinate, comma separated.
        #[arg(long)]
        curve: String,
        /// Slots as "s;m1,...;r".
        #[arg(long)]
        tractor: String,
    },
    /// Verifies and classifies an almost-Einstein density.
    VerifyAe {
        #[arg(long)]
        chart: String,
        #[arg(long)]
        sigma: String,
    },
    /// Dimension and basis of the parallel tractors.
    ParallelSpace {
        #[arg(long)]
        chart: String,
    },
    /// Special Einstein product of two Einstein charts.
    BuildProduct {
        /// Positive factor first, then the negative one.
        #[arg(long, num_args = 1, required = true)]
        chart: Vec<String>,
    },
    /// Poincaré-Einstein collar over one or two Einstein charts.
    BuildCollar {
        #[arg(long, num_args = 1, required = true)]
        chart: Vec<String>,
        #[arg(long, default_value_t = 0.5)]
        mu: f64,
        #[arg(long)]
        r_max: Option<f64>,
    },
    /// Fixture charts.
    Catalog {
        #[arg(long)]
        list: bool,
        name: Option<String>,
        /// Fixture parameter as key=value; repeatable.
        #[arg(long = "param")]
        params: Vec<String>,
    },
    /// Conformal Killing check and tractor prolongation of a vector field.
    Killing {
        #[arg(long)]
        chart: String,
        /// Components, comma separated.
        #[arg(long)]
        field: String,
        /// Points at which to report the prolongation; repeatable.
        #[arg(long)]
        point: Vec<String>,
    },
    /// Generalized mean curvature of {σ₂ = 0} with respect to the structure σ.
    Surface {
        #[arg(long)]
        chart: String,
        #[arg(long)]
        sigma: String,
        /// Density σ₂ whose zero set is the surface.
        #[arg(long)]
        ae: String,
        #[arg(long, default_value_t = 50)]
        samples: usize,
    },
    /// Holonomy of a loop family and a splitting witness.
    Holonomy {
        #[arg(long)]
        chart: String,
        /// Use at most this many loops, evenly thinned.
        #[arg(long)]
        loops: Option<usize>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Runs the acceptance criteria.
    Selftest {
        /// Run a single criterion (1-10).
        #[arg(long)]
        criterion: Option<usize>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Curvature { .. } => "curvature",
            Command::Rescale { .. } => "rescale",
            Command::Transport { .. } => "transport",
            Command::VerifyAe { .. } => "verify-ae",
            Command::ParallelSpace { .. } => "parallel-space",
            Command::BuildProduct { .. } => "build-product",
            Command::BuildCollar { .. } => "build-collar",
            Command::Catalog { .. } => "catalog",
            Command::Killing { .. } => "killing",
            Command::Surface { .. } => "surface",
            Command::Holonomy { .. } => "holonomy",
            Command::Selftest { .. } => "selftest",
        }
    }
}

/// Errors caused by the input rather than by a failed check.
fn is_input_error(e: &Error) -> bool {
    matches!(
        e,
        Error::Field(_)
            | Error::InvalidChart(_)
            | Error::OutsideBox { .. }
            | Error::MissingMu { .. }
            | Error::ScaleMismatch { .. }
            | Error::UnknownFixture(_)
            | Error::Invalid(_)
            | Error::Json(_)
            | Error::Io(_)
    )
}

fn emit(cert: &Certificate, compact: bool) -> String {
    if compact {
        serde_json::to_string(cert)
    } else {
        serde_json::to_string_pretty(cert)
    }
    .expect("certificates serialize")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help, --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            let mut cert = CertificateBuilder::new(std::env::args().nth(1).unwrap_or_default(), &Config::from_env());
            cert.error(e.kind().to_string());
            println!("{}", emit(&cert.finish(), false));
            return ExitCode::from(2);
        }
    };
    let mut cfg = Config::from_env();
    if let Some(t) = cli.common.tol {
        if !(t.is_finite() && t > 0.0) {
            let mut cert = CertificateBuilder::new(cli.command.name(), &cfg);
            cert.error(format!("--tol must be positive, got {t}"));
            println!("{}", emit(&cert.finish(), cli.common.json));
            return ExitCode::from(2);
        }
        cfg = cfg.with_tol(t);
    }
    if let Some(g) = cli.common.grid {
        cfg = cfg.with_grid(g);
    }
    let mut cert = CertificateBuilder::new(cli.command.name(), &cfg);
    let outcome = commands::run(&cli.command, &cfg, &mut cert);
    let mut code = 0u8;
    let mut chart_out = None;
    match outcome {
        Ok(chart) => chart_out = chart,
        Err(e) => {
            code = if is_input_error(&e) { 2 } else { 1 };
            cert.error(e.to_string());
        }
    }
    if let (Some(path), Some(chart)) = (&cli.common.out, &chart_out) {
        if let Err(e) = std::fs::write(path, chart.to_json()) {
            cert.error(format!("cannot write {}: {e}", path.display()));
            code = 2;
        }
    }
    if code == 0 && !cert.passed() {
        code = 1;
    }
    let cert = cert.finish();
    let text = emit(&cert, cli.common.json);
    if let (Some(path), None) = (&cli.common.out, &chart_out) {
        if let Err(e) = std::fs::write(path, &text) {
            eprintln!("cannot write {}: {e}", path.display());
            code = 2;
        }
    }
    println!("{text}");
    ExitCode::from(code)
}
