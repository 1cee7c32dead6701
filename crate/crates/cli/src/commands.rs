use std::path::Path;

use algctl_core::algebra::NamedAlgebra;
use algctl_core::algebroid::certify;
use algctl_core::coadjoint::{sample_orbit, MatrixGroupContext};
use algctl_core::optctl::{critical_trajectory, integrate_hamiltonian, shoot, OptError, TrajectoryRecord};
use algctl_core::poisson::{poisson_bracket, PhasePoint};
use algctl_core::ScalarField;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{Dynamics, IntegrateSection, ProblemConfig};
use crate::output::{orbit_csv, trajectory_csv};
use crate::report::{axiom_report_json, axiom_report_text, RunReport, Status};
use crate::{Command, Common, DEFAULT_CERTIFY_TOL};

/// Base points drawn by `validate`.
pub const CERTIFY_SAMPLES: usize = 50;
/// Base points are uniform in `[-CERTIFY_BOX, CERTIFY_BOX]^n`.
pub const CERTIFY_BOX: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub status: Status,
    pub message: String,
    pub last_good_time: Option<f64>,
}

impl Failure {
    pub fn new(status: Status, message: impl Into<String>) -> Self {
        Failure {
            status,
            message: message.into(),
            last_good_time: None,
        }
    }

    fn validation(message: impl Into<String>) -> Self {
        Self::new(Status::ValidationFailure, message)
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        Self::new(Status::UsageError, format!("cannot write {}: {e}", path.display()))
    }
}

impl From<OptError> for Failure {
    fn from(e: OptError) -> Self {
        let status = match e {
            OptError::Problem(_) | OptError::Dimension(_) | OptError::Field(_) => Status::ValidationFailure,
            _ => Status::NumericalFailure,
        };
        Failure {
            status,
            last_good_time: e.last_good_time(),
            message: e.to_string(),
        }
    }
}

type CmdResult = Result<(), Failure>;

pub fn execute(command: &Command, cfg: &ProblemConfig, report: &mut RunReport) -> CmdResult {
    match command {
        Command::Validate(c) => validate(cfg, c, report),
        Command::Solve(c) => solve(cfg, c, report),
        Command::Shoot(c) => shoot_cmd(cfg, c, report),
        Command::Orbit(c) => orbit(cfg, c, report),
        Command::Bracket { common, f, g, at } => bracket(cfg, common, f, g, at, report),
    }
}

/// Writes `text` to `--out` when given, to stdout otherwise.
fn emit(common: &Common, text: &str, report: &mut RunReport) -> CmdResult {
    match &common.out {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| Failure::io(path, e))?;
            report.outputs.push(path.clone());
            Ok(())
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn summary(common: &Common, line: String) {
    if !common.quiet && common.out.is_some() {
        println!("{line}");
    }
}

fn validate(cfg: &ProblemConfig, common: &Common, report: &mut RunReport) -> CmdResult {
    let model = &cfg.algebroid.model;
    let tol = common.tol.unwrap_or(DEFAULT_CERTIFY_TOL);
    let mut rng = ChaCha8Rng::seed_from_u64(common.seed.unwrap_or(0));
    let samples: Vec<Vec<f64>> = (0..CERTIFY_SAMPLES)
        .map(|_| (0..model.base_dim()).map(|_| rng.random_range(-CERTIFY_BOX..=CERTIFY_BOX)).collect())
        .collect();
    let axioms = certify(model, &samples, tol);
    let json = axiom_report_json(&axioms);
    report.diagnostic("certification", json.clone());
    if let Some(path) = &common.out {
        let text = serde_json::to_string_pretty(&json).expect("report serializes");
        std::fs::write(path, text).map_err(|e| Failure::io(path, e))?;
        report.outputs.push(path.clone());
    }
    if !common.quiet {
        print!("{}", axiom_report_text(&axioms));
    }
    if axioms.pass {
        Ok(())
    } else {
        let mut msg = format!("certification failed at tolerance {tol:e}");
        if let Some((a, b, g, n)) = axioms.jacobi_worst.filter(|_| axioms.jacobi_residual >= tol) {
            msg += &format!(
                "; jacobi residual {:e} at (alpha, beta, gamma, nu) = ({}, {}, {}, {})",
                axioms.jacobi_residual,
                a + 1,
                b + 1,
                g + 1,
                n + 1
            );
        }
        Err(Failure::validation(msg))
    }
}

fn require_integrate(cfg: &ProblemConfig, command: &str) -> Result<IntegrateSection, Failure> {
    cfg.integrate
        .clone()
        .ok_or_else(|| Failure::validation(format!("{command} needs an [integrate] section")))
}

fn trajectory_diagnostics(rec: &TrajectoryRecord, report: &mut RunReport) {
    report.diagnostic("samples", rec.len());
    report.diagnostic("max_stationarity_residual", rec.max_stationarity());
    report.diagnostic("energy_drift", rec.energy_drift());
    report.diagnostic("casimir_drift", rec.casimir_drift());
    report.diagnostic("final_x", rec.final_x().to_vec());
    report.diagnostic("final_eta", rec.final_eta().to_vec());
}

fn solve(cfg: &ProblemConfig, common: &Common, report: &mut RunReport) -> CmdResult {
    let int = require_integrate(cfg, "solve")?;
    let rec = match &cfg.dynamics {
        Dynamics::Control { .. } => {
            let pb = cfg.control_problem().ok_or_else(|| Failure::validation("invalid control problem"))?;
            critical_trajectory(&pb, int.steps, int.method)?
        }
        Dynamics::Hamiltonian(_) => {
            let h: ScalarField = cfg.hamiltonian().ok_or_else(|| Failure::validation("invalid hamiltonian"))?;
            let model = &cfg.algebroid.model;
            integrate_hamiltonian(model, &h, &int.x0, &int.eta0, (int.t0, int.t1), int.steps, int.method)?
        }
    };
    trajectory_diagnostics(&rec, report);
    emit(common, &trajectory_csv(&rec), report)?;
    summary(
        common,
        format!(
            "{} samples, energy drift {:e}, casimir drift {:e}, max stationarity {:e}",
            rec.len(),
            rec.energy_drift(),
            rec.casimir_drift(),
            rec.max_stationarity()
        ),
    );
    Ok(())
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(",")
}

fn shoot_cmd(cfg: &ProblemConfig, common: &Common, report: &mut RunReport) -> CmdResult {
    let int = require_integrate(cfg, "shoot")?;
    let section = cfg
        .shoot
        .as_ref()
        .ok_or_else(|| Failure::validation("shoot needs a [shoot] section"))?;
    let mut pb = cfg
        .control_problem()
        .ok_or_else(|| Failure::validation("shoot needs a [control] section"))?;
    let tol = common.tol.unwrap_or(section.tol);
    let outcome = shoot(&pb, &int.eta0, tol, int.steps, int.method)?;
    for (k, e) in outcome.history.iter().enumerate() {
        log::info!("shoot iteration {k}: endpoint error {e:e}");
    }
    report.diagnostic("eta0_star", outcome.eta0.clone());
    report.diagnostic("iterations", outcome.iterations);
    report.diagnostic("endpoint_error", outcome.endpoint_error);
    report.diagnostic("history", outcome.history.clone());
    println!("eta0_star = {}", join(&outcome.eta0));
    pb.eta0 = Some(outcome.eta0.clone());
    let rec = critical_trajectory(&pb, int.steps, int.method)?;
    trajectory_diagnostics(&rec, report);
    if common.out.is_some() {
        emit(common, &trajectory_csv(&rec), report)?;
    }
    summary(
        common,
        format!("{} iterations, endpoint error {:e}", outcome.iterations, outcome.endpoint_error),
    );
    Ok(())
}

fn orbit(cfg: &ProblemConfig, common: &Common, report: &mut RunReport) -> CmdResult {
    let section = cfg
        .orbit
        .as_ref()
        .ok_or_else(|| Failure::validation("orbit needs an [orbit] section"))?;
    let algebra = cfg.algebroid.algebra.ok_or_else(|| {
        Failure::validation(format!(
            "orbit needs a named algebra, the {} model has none",
            cfg.algebroid.kind
        ))
    })?;
    let ctx = MatrixGroupContext::new(algebra).map_err(|e| Failure::validation(e.to_string()))?;
    let seed = common.seed.unwrap_or(section.seed);
    let sample = sample_orbit(&ctx, &section.xi, section.samples, seed, section.spread)
        .map_err(|e| Failure::new(Status::NumericalFailure, e.to_string()))?;
    report.diagnostic("samples", sample.points.len());
    report.diagnostic("seed", seed);
    if algebra == NamedAlgebra::So3 {
        let norm = |v: &[f64]| v.iter().map(|c| c * c).sum::<f64>().sqrt();
        let r = norm(&section.xi);
        let dev = sample.points.iter().map(|p| (norm(p) - r).abs()).fold(0.0, f64::max);
        report.diagnostic("norm_deviation", dev);
    }
    emit(common, &orbit_csv(&sample.points, ctx.dim()), report)?;
    summary(common, format!("{} orbit points of {algebra}", sample.points.len()));
    Ok(())
}

fn bracket(cfg: &ProblemConfig, common: &Common, f: &str, g: &str, at: &[f64], report: &mut RunReport) -> CmdResult {
    let model = &cfg.algebroid.model;
    let layout = model.layout();
    let field = |name: &str, src: &str| {
        ScalarField::parse(src, layout).map_err(|e| Failure::validation(format!("--{name} \"{src}\": {e}")))
    };
    let (ff, gf) = (field("f", f)?, field("g", g)?);
    let (n, r) = (model.base_dim(), model.rank());
    if at.len() != n + r {
        return Err(Failure::validation(format!(
            "--at has {} values, the model needs {} (n = {n}, r = {r})",
            at.len(),
            n + r
        )));
    }
    let p = PhasePoint::new(at[..n].to_vec(), at[n..].to_vec());
    let value = poisson_bracket(model, &ff, &gf, &p).map_err(|e| Failure::new(Status::NumericalFailure, e.to_string()))?;
    if !value.is_finite() {
        return Err(Failure::new(Status::NumericalFailure, format!("bracket is not finite: {value}")));
    }
    report.diagnostic("value", value);
    println!("{value:.16e}");
    if let Some(path) = &common.out {
        std::fs::write(path, format!("{value:.16e}\n")).map_err(|e| Failure::io(path, e))?;
        report.outputs.push(path.clone());
    }
    Ok(())
}
