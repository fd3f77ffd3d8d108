//! `trialmech` command-line front end.
//!
//! Reads a TOML run configuration, runs one task, writes JSON reports and
//! CSV tables to the output directory and prints the main report on stdout.
//!
//! Exit status: 0 success, 2 validation error, 3 numerical failure,
//! 4 warnings under `--strict`, 5 a `--check` verification (or the `check`
//! task) failed. Failures print a JSON error report with a `reason` code.

mod config;
mod format;
mod tasks;

use clap::{Parser, Subcommand};
use config::{ExtensionKind, RunConfig};
use serde_json::json;
use std::path::PathBuf;
use std::process::ExitCode;

/// Optimal trial mechanisms: solvers, verifiers and simulations.
#[derive(Debug, Parser)]
#[command(name = "trialmech", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory (overrides `[output] dir`; default `out`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Master seed for Monte Carlo runs.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Monte Carlo paths.
    #[arg(long, global = true, value_name = "N")]
    paths: Option<u64>,
    /// Treat warnings as failures (exit 4).
    #[arg(long, global = true)]
    strict: bool,
    /// Run the matching verifier and fail (exit 5) on violation.
    #[arg(long, global = true)]
    check: bool,
}

#[derive(Debug, Clone, Subcommand)]
enum Command {
    /// Optimal trial for one frontier weight.
    Solve {
        #[arg(long, allow_negative_numbers = true)]
        wl: Option<f64>,
    },
    /// The Myersonian free trial and the refinement-surviving segment.
    FreeTrial,
    /// Seller-payoff frontier on a weight grid.
    Frontier {
        /// Number of weights on [−1, (1−μ₀)/μ₀].
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Exhaustive IC/IR grid check of the optimal trial.
    Check {
        #[arg(long, allow_negative_numbers = true)]
        wl: Option<f64>,
    },
    /// Monte Carlo of the optimal trial with a best-response scan.
    Simulate {
        #[arg(long, allow_negative_numbers = true)]
        wl: Option<f64>,
    },
    /// Brute-force discrete oracles against the analytic trial.
    Oracle {
        #[arg(long, allow_negative_numbers = true)]
        wl: Option<f64>,
        /// Time bins of the relaxed oracle.
        #[arg(long)]
        k: Option<usize>,
        /// Value-grid size of the relaxed oracle.
        #[arg(long)]
        m: Option<usize>,
    },
    /// Dynamic tiered pricing for a screening set.
    Tiered {
        #[arg(long, allow_negative_numbers = true)]
        wl: Option<f64>,
    },
    /// Welfare of free trials versus freemium across priors.
    Welfare,
    /// Discounting, cancellable trials, bad news or mixed news.
    Extension {
        #[arg(long, value_enum)]
        kind: Option<ExtensionKind>,
        #[arg(long, allow_negative_numbers = true)]
        wl: Option<f64>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Solve { .. } => "solve",
            Command::FreeTrial => "free-trial",
            Command::Frontier { .. } => "frontier",
            Command::Check { .. } => "check",
            Command::Simulate { .. } => "simulate",
            Command::Oracle { .. } => "oracle",
            Command::Tiered { .. } => "tiered",
            Command::Welfare => "welfare",
            Command::Extension { .. } => "extension",
        }
    }
}

/// Exit statuses.
pub mod exit {
    pub const OK: u8 = 0;
    pub const VALIDATION: u8 = 2;
    pub const NUMERICAL: u8 = 3;
    pub const STRICT: u8 = 4;
    pub const CHECK_FAILED: u8 = 5;
}

/// A failure with its exit status and machine-readable reason.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub reason: String,
    pub message: String,
}

impl Failure {
    pub fn validation(reason: &str, message: impl Into<String>) -> Self {
        Self { code: exit::VALIDATION, reason: reason.into(), message: message.into() }
    }
}

impl From<trialmech::Error> for Failure {
    fn from(e: trialmech::Error) -> Self {
        let code = match e.class() {
            trialmech::ErrorClass::Validation => exit::VALIDATION,
            trialmech::ErrorClass::Numerical => exit::NUMERICAL,
        };
        Self { code, reason: e.reason().into(), message: e.to_string() }
    }
}

fn error_report(f: &Failure) -> String {
    let v = json!({ "error": { "reason": f.reason, "message": f.message, "exit_code": f.code } });
    serde_json::to_string_pretty(&v).unwrap()
}

fn load_config(path: Option<&PathBuf>, task: &str) -> Result<RunConfig, Failure> {
    let path = path.ok_or_else(|| Failure::validation("missing_config", "--config PATH is required"))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::validation("config_unreadable", format!("cannot read {}: {e}", path.display())))?;
    let cfg: RunConfig =
        toml::from_str(&text).map_err(|e| Failure::validation("invalid_config", e.to_string().trim().to_string()))?;
    if let Some(kind) = &cfg.task.kind {
        if kind != task && kind.replace('_', "-") != task {
            return Err(Failure::validation(
                "task_mismatch",
                format!("config task kind `{kind}` does not match subcommand `{task}`"),
            ));
        }
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<u8, Failure> {
    let cfg = load_config(cli.config.as_ref(), cli.command.name())?;
    let opts = tasks::Options {
        seed: cli.seed.or(cfg.task.seed).unwrap_or(1),
        paths: cli.paths.or(cfg.task.paths),
        strict: cli.strict,
        check: cli.check,
    };
    let ctx = tasks::Context::new(&cfg)?;
    let outcome = match &cli.command {
        Command::Solve { wl } => tasks::solve(&ctx, wl.or(cfg.task.wl).unwrap_or(0.0), &opts)?,
        Command::FreeTrial => tasks::free_trial(&ctx, &opts)?,
        Command::Frontier { grid } => tasks::frontier(&ctx, grid.or(cfg.task.grid), &opts)?,
        Command::Check { wl } => tasks::check(&ctx, wl.or(cfg.task.wl).unwrap_or(0.0), &opts)?,
        Command::Simulate { wl } => tasks::simulate(&ctx, wl.or(cfg.task.wl).unwrap_or(0.0), &opts)?,
        Command::Oracle { wl, k, m } => tasks::oracle(
            &ctx,
            wl.or(cfg.task.wl).unwrap_or(0.0),
            k.or(cfg.task.k).unwrap_or(6),
            m.or(cfg.task.m).unwrap_or(5),
            &opts,
        )?,
        Command::Tiered { wl } => tasks::tiered(&ctx, wl.or(cfg.task.wl).unwrap_or(0.0), &opts)?,
        Command::Welfare => tasks::welfare(&ctx, &opts)?,
        Command::Extension { kind, wl } => {
            let kind = kind.or(cfg.task.extension).ok_or_else(|| {
                Failure::validation("missing_extension", "choose an extension with --kind or [task] extension")
            })?;
            tasks::extension(&ctx, kind, wl.or(cfg.task.wl).unwrap_or(0.0), &opts)?
        }
    };
    let dir = cli.out.clone().or(cfg.output.dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    outcome.write(&dir)?;
    println!("{}", outcome.main_report());
    Ok(outcome.exit_code(&opts))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            print!("{e}");
            return ExitCode::from(exit::OK);
        }
        Err(e) => {
            let f = Failure::validation("usage", e.to_string().trim().to_string());
            println!("{}", error_report(&f));
            return ExitCode::from(f.code);
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            println!("{}", error_report(&f));
            ExitCode::from(f.code)
        }
    }
}
