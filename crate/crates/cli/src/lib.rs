//! `algctl`: command-line driver for geometric optimal control on Lie
//! algebroids.
//!
//! Exit codes: 0 success, 1 validation failure, 2 numerical failure,
//! 3 usage or I/O error.

pub mod commands;
pub mod config;
pub mod output;
pub mod report;

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use crate::commands::Failure;
use crate::config::{load_config, LoadError};
use crate::report::{report_path, RunReport, Status};

pub const DEFAULT_CERTIFY_TOL: f64 = 1e-8;
pub const LOG_ENV: &str = "ALGCTL_LOG";

#[derive(Debug, Parser)]
#[command(name = "algctl", version, about = "Geometric optimal control on Lie algebroids")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Problem configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Output file; a run report is written next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Tolerance overriding the command default.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Seed overriding the configured one.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Suppress the summary on stdout.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Certify the algebroid axioms at random base points.
    Validate(Common),
    /// Integrate the critical-trajectory equations.
    Solve(Common),
    /// Find the initial costate reaching the target.
    Shoot(Common),
    /// Sample a coadjoint orbit.
    Orbit(Common),
    /// Evaluate a Poisson bracket at a point.
    Bracket {
        #[command(flatten)]
        common: Common,
        /// First function of x and eta.
        #[arg(long)]
        f: String,
        /// Second function of x and eta.
        #[arg(long)]
        g: String,
        /// Point as comma-separated x1..xn, eta1..etar.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        at: Vec<f64>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Validate(_) => "validate",
            Command::Solve(_) => "solve",
            Command::Shoot(_) => "shoot",
            Command::Orbit(_) => "orbit",
            Command::Bracket { .. } => "bracket",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Validate(c) | Command::Solve(c) | Command::Shoot(c) | Command::Orbit(c) => c,
            Command::Bracket { common, .. } => common,
        }
    }
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or(LOG_ENV, "warn");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

/// Runs one invocation and returns its exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    init_logging();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => Status::UsageError.exit_code(),
            };
        }
    };
    let started = Instant::now();
    let common = cli.command.common().clone();
    let mut report = RunReport::new(cli.command.name());

    let result = match load_config(&common.config) {
        Ok(cfg) => {
            report.config_digest = Some(cfg.digest.clone());
            log::info!("loaded {} (sha256 {})", common.config.display(), cfg.digest);
            commands::execute(&cli.command, &cfg, &mut report)
        }
        Err(LoadError::Io(e)) => Err(Failure::new(
            Status::UsageError,
            format!("cannot read {}: {e}", common.config.display()),
        )),
        Err(LoadError::Invalid(errors)) => Err(Failure::new(
            Status::ValidationFailure,
            format!(
                "{}: {} configuration error(s)\n{}",
                common.config.display(),
                errors.len(),
                errors.iter().map(|e| format!("  {e}")).collect::<Vec<_>>().join("\n")
            ),
        )),
    };

    if let Err(f) = &result {
        report.status = f.status;
        report.error = Some(f.message.clone());
        report.last_good_time = f.last_good_time;
        eprintln!("error: {}", f.message);
        if let Some(t) = f.last_good_time {
            eprintln!("last good time: {t}");
        }
    }
    report.wall_time_seconds = started.elapsed().as_secs_f64();

    if let Some(out) = &common.out {
        let path = report_path(out);
        if let Err(e) = std::fs::write(&path, report.to_json()) {
            eprintln!("error: cannot write {}: {e}", path.display());
            return Status::UsageError.exit_code();
        }
    }
    report.status.exit_code()
}
