use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use algctl_core::AxiomReport;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    ValidationFailure,
    NumericalFailure,
    UsageError,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::ValidationFailure => 1,
            Status::NumericalFailure => 2,
            Status::UsageError => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub config_digest: Option<String>,
    pub wall_time_seconds: f64,
    pub outputs: Vec<PathBuf>,
    pub status: Status,
    pub error: Option<String>,
    pub last_good_time: Option<f64>,
    pub diagnostics: BTreeMap<String, Value>,
}

impl RunReport {
    pub fn new(command: &str) -> Self {
        RunReport {
            command: command.to_string(),
            config_digest: None,
            wall_time_seconds: 0.0,
            outputs: Vec::new(),
            status: Status::Ok,
            error: None,
            last_good_time: None,
            diagnostics: BTreeMap::new(),
        }
    }

    pub fn diagnostic(&mut self, key: &str, value: impl Into<Value>) {
        self.diagnostics.insert(key.to_string(), value.into());
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Location of the run report that accompanies an output file.
pub fn report_path(out: &Path) -> PathBuf {
    out.with_extension("report.json")
}

/// Finite floats as JSON numbers, everything else as strings.
fn number(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        json!(v.to_string())
    }
}

pub fn axiom_report_json(report: &AxiomReport) -> Value {
    json!({
        "pass": report.pass,
        "tolerance": number(report.tolerance),
        "samples": report.samples.len(),
        "antisymmetry_residual": number(report.antisymmetry_residual),
        "anchor_residual": number(report.anchor_residual),
        "anchor_worst": report.anchor_worst.map(|(a, b, i)| [a + 1, b + 1, i + 1]),
        "jacobi_residual": number(report.jacobi_residual),
        "jacobi_worst": report.jacobi_worst.map(|(a, b, g, n)| [a + 1, b + 1, g + 1, n + 1]),
        "point_errors": report.point_errors.iter().map(|(k, e)| json!({"sample": k, "error": e})).collect::<Vec<_>>(),
        "orbit_rank": report.orbit_rank.map(|(r, k)| json!({"rank": r, "spanning_vectors": k})),
    })
}

/// Plain-text rendering with 1-based indices.
pub fn axiom_report_text(report: &AxiomReport) -> String {
    let mut s = format!(
        "certification: {}\n  samples: {}\n  tolerance: {:e}\n  antisymmetry residual: {:e}\n  anchor residual: {:e}\n",
        if report.pass { "PASS" } else { "FAIL" },
        report.samples.len(),
        report.tolerance,
        report.antisymmetry_residual,
        report.anchor_residual,
    );
    if let Some((a, b, i)) = report.anchor_worst.filter(|_| report.anchor_residual > 0.0) {
        s += &format!("  worst anchor (alpha, beta, i): ({}, {}, {})\n", a + 1, b + 1, i + 1);
    }
    s += &format!("  jacobi residual: {:e}\n", report.jacobi_residual);
    if let Some((a, b, g, n)) = report.jacobi_worst.filter(|_| report.jacobi_residual > 0.0) {
        s += &format!("  worst jacobi (alpha, beta, gamma, nu): ({}, {}, {}, {})\n", a + 1, b + 1, g + 1, n + 1);
    }
    if let Some((r, k)) = report.orbit_rank {
        s += &format!("  orbit spanning set: rank {r} of {k}\n");
    }
    for (k, e) in &report.point_errors {
        s += &format!("  sample {k}: {e}\n");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_path_keeps_stem() {
        assert_eq!(report_path(Path::new("out/traj.csv")), PathBuf::from("out/traj.report.json"));
        assert_eq!(report_path(Path::new("orbit")), PathBuf::from("orbit.report.json"));
    }

    #[test]
    fn json_round_trip() {
        let mut r = RunReport::new("solve");
        r.diagnostic("energy_drift", 1e-12);
        r.status = Status::NumericalFailure;
        let back: RunReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
        assert_eq!(Status::NumericalFailure.exit_code(), 2);
    }
}
