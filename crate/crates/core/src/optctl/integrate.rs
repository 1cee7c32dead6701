use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use super::{control_gradient, inf_norm, solve_at_state, ControlProblem, OptError, STAGE_TOLERANCE};
use crate::algebroid::AlgebroidModel;
use crate::exprlang::ScalarField;
use crate::poisson::{vector_field_at_state, PoissonError};

/// Fixed-step explicit scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    #[default]
    Rk4,
    Midpoint,
}

impl FromStr for Method {
    type Err = OptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rk4" => Ok(Method::Rk4),
            "midpoint" => Ok(Method::Midpoint),
            other => Err(OptError::Problem(format!(
                "unknown method `{other}` (expected rk4 or midpoint)"
            ))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Rk4 => "rk4",
            Method::Midpoint => "midpoint",
        })
    }
}

fn axpy(y: &[f64], a: f64, k: &[f64]) -> Vec<f64> {
    y.iter().zip(k).map(|(y, k)| y + a * k).collect()
}

/// One step of `method` for `ẏ = rhs(t, y)`.
pub(crate) fn step<F>(method: Method, t: f64, y: &[f64], h: f64, rhs: &mut F) -> Result<Vec<f64>, OptError>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>, OptError>,
{
    match method {
        Method::Rk4 => {
            let k1 = rhs(t, y)?;
            let k2 = rhs(t + 0.5 * h, &axpy(y, 0.5 * h, &k1))?;
            let k3 = rhs(t + 0.5 * h, &axpy(y, 0.5 * h, &k2))?;
            let k4 = rhs(t + h, &axpy(y, h, &k3))?;
            Ok((0..y.len())
                .map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
                .collect())
        }
        Method::Midpoint => {
            let k1 = rhs(t, y)?;
            let k2 = rhs(t + 0.5 * h, &axpy(y, 0.5 * h, &k1))?;
            Ok(axpy(y, h, &k2))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrajectoryError {
    #[error("times are not strictly increasing at sample {0}")]
    NonMonotone(usize),
    #[error("non-finite value in sample {0}")]
    NonFinite(usize),
    #[error("stationarity residual {residual:e} at sample {sample} exceeds {tolerance:e}")]
    Stationarity {
        sample: usize,
        residual: f64,
        tolerance: f64,
    },
    #[error("row {0} has inconsistent length")]
    Shape(usize),
}

/// Samples `(t, x, η, u)` of an integrated trajectory with per-sample
/// diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub base_dim: usize,
    pub rank: usize,
    pub control_dim: usize,
    pub times: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub eta: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
    pub hamiltonian: Vec<f64>,
    /// `‖∂H/∂u‖∞` at each sample (zero without controls).
    pub stationarity: Vec<f64>,
    /// Registered Casimirs of the model at each sample.
    pub casimirs: Vec<Vec<f64>>,
}

impl TrajectoryRecord {
    fn new(base_dim: usize, rank: usize, control_dim: usize) -> Self {
        TrajectoryRecord {
            base_dim,
            rank,
            control_dim,
            times: Vec::new(),
            x: Vec::new(),
            eta: Vec::new(),
            u: Vec::new(),
            hamiltonian: Vec::new(),
            stationarity: Vec::new(),
            casimirs: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn casimir_count(&self) -> usize {
        self.casimirs.first().map_or(0, Vec::len)
    }

    pub fn final_x(&self) -> &[f64] {
        self.x.last().map_or(&[], Vec::as_slice)
    }

    pub fn final_eta(&self) -> &[f64] {
        self.eta.last().map_or(&[], Vec::as_slice)
    }

    pub fn max_stationarity(&self) -> f64 {
        self.stationarity.iter().fold(0.0f64, |m, v| m.max(*v))
    }

    /// `max_k |H(t_k) − H(t_0)|`.
    pub fn energy_drift(&self) -> f64 {
        let h0 = self.hamiltonian.first().copied().unwrap_or(0.0);
        self.hamiltonian.iter().fold(0.0f64, |m, h| m.max((h - h0).abs()))
    }

    /// Largest drift over all registered Casimirs.
    pub fn casimir_drift(&self) -> f64 {
        let Some(first) = self.casimirs.first() else {
            return 0.0;
        };
        self.casimirs
            .iter()
            .flat_map(|row| row.iter().zip(first).map(|(c, c0)| (c - c0).abs()))
            .fold(0.0f64, f64::max)
    }

    /// Strictly increasing finite times, finite rows of matching lengths and
    /// stationarity below `tolerance` everywhere.
    pub fn check_invariants(&self, tolerance: f64) -> Result<(), TrajectoryError> {
        let k = self.casimir_count();
        for i in 0..self.len() {
            if self.x[i].len() != self.base_dim
                || self.eta[i].len() != self.rank
                || self.u[i].len() != self.control_dim
                || self.casimirs[i].len() != k
            {
                return Err(TrajectoryError::Shape(i));
            }
            let finite = self.times[i].is_finite()
                && self.hamiltonian[i].is_finite()
                && self.stationarity[i].is_finite()
                && self.x[i].iter().chain(&self.eta[i]).chain(&self.u[i]).chain(&self.casimirs[i]).all(|v| v.is_finite());
            if !finite {
                return Err(TrajectoryError::NonFinite(i));
            }
            if i > 0 && !(self.times[i] > self.times[i - 1]) {
                return Err(TrajectoryError::NonMonotone(i));
            }
            if !(self.stationarity[i] < tolerance) {
                return Err(TrajectoryError::Stationarity {
                    sample: i,
                    residual: self.stationarity[i],
                    tolerance,
                });
            }
        }
        Ok(())
    }

    fn push(&mut self, t: f64, x: &[f64], eta: &[f64], u: &[f64], h: f64, stat: f64, casimirs: Vec<f64>) {
        self.times.push(t);
        self.x.push(x.to_vec());
        self.eta.push(eta.to_vec());
        self.u.push(u.to_vec());
        self.hamiltonian.push(h);
        self.stationarity.push(stat);
        self.casimirs.push(casimirs);
    }
}

fn casimir_values(model: &AlgebroidModel, x: &[f64], eta: &[f64]) -> Result<Vec<f64>, OptError> {
    let layout = model.layout();
    let mut s = layout.state();
    s[layout.x_range()].copy_from_slice(x);
    s[layout.eta_range()].copy_from_slice(eta);
    model
        .casimirs()
        .iter()
        .map(|c| c.value(&s).map_err(OptError::from))
        .collect()
}

fn time_grid(t0: f64, t1: f64, steps: usize) -> Result<f64, OptError> {
    if steps == 0 {
        return Err(OptError::Problem("steps must be at least 1".into()));
    }
    if !(t1 > t0) || !t0.is_finite() || !t1.is_finite() {
        return Err(OptError::Problem(format!("horizon must satisfy t1 > t0, got [{t0}, {t1}]")));
    }
    Ok((t1 - t0) / steps as f64)
}

/// Drives `steps` fixed steps, calling `sample` at every accepted point.
fn run<F, S>(
    method: Method,
    t0: f64,
    h: f64,
    steps: usize,
    y0: Vec<f64>,
    mut rhs: F,
    mut sample: S,
) -> Result<(), OptError>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>, OptError>,
    S: FnMut(f64, &[f64]) -> Result<(), OptError>,
{
    let mut y = y0;
    sample(t0, &y)?;
    let mut t_good = t0;
    for k in 0..steps {
        let t = t0 + k as f64 * h;
        let next = step(method, t, &y, h, &mut rhs).map_err(|e| wrap(e, t_good))?;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(OptError::NonFinite { t_last_good: t_good });
        }
        y = next;
        let t_next = t0 + (k + 1) as f64 * h;
        sample(t_next, &y).map_err(|e| wrap(e, t_good))?;
        t_good = t_next;
    }
    Ok(())
}

fn wrap(e: OptError, t_last_good: f64) -> OptError {
    match e {
        OptError::Integration { .. } | OptError::NonFinite { .. } => e,
        other => OptError::Integration {
            t_last_good,
            source: Box::new(other),
        },
    }
}

/// Integrates the critical-trajectory system of `problem` from
/// `(x0, eta0)` over its horizon with `steps` fixed steps.
///
/// Controls are eliminated at every stage by Newton on `∂H/∂u = 0`
/// (tolerance [`STAGE_TOLERANCE`]), warm-started from the previous stage.
/// The record has `steps + 1` samples.
pub fn critical_trajectory(problem: &ControlProblem, steps: usize, method: Method) -> Result<TrajectoryRecord, OptError> {
    problem.validate()?;
    let eta0 = problem
        .eta0
        .clone()
        .ok_or_else(|| OptError::Problem("critical trajectory needs an initial costate eta0".into()))?;
    let h = time_grid(problem.t0, problem.t1, steps)?;
    let model = problem.model();
    let layout = problem.layout();
    let (n, r, m) = (layout.base_dim, layout.rank, layout.control_dim);
    let hamiltonian = problem.hamiltonian();

    let mut state = layout.state();
    state[layout.u_range()].copy_from_slice(problem.u0.as_deref().unwrap_or(&vec![0.0; m]));
    let state = std::cell::RefCell::new(state);

    let load = |state: &mut [f64], t: f64, y: &[f64]| {
        state[layout.x_range()].copy_from_slice(&y[..n]);
        state[layout.eta_range()].copy_from_slice(&y[n..]);
        state[layout.t_index()] = t;
    };

    let rhs = |t: f64, y: &[f64]| -> Result<Vec<f64>, OptError> {
        let mut s = state.borrow_mut();
        load(&mut s, t, y);
        solve_at_state(problem, &mut s, STAGE_TOLERANCE)?;
        let (xdot, etadot) = vector_field_at_state(model, hamiltonian, &s)?;
        let mut out = xdot;
        out.extend(etadot);
        Ok(out)
    };

    let mut record = TrajectoryRecord::new(n, r, m);
    let sample = |t: f64, y: &[f64]| -> Result<(), OptError> {
        let mut s = state.borrow_mut();
        load(&mut s, t, y);
        solve_at_state(problem, &mut s, STAGE_TOLERANCE)?;
        let stat = inf_norm(&control_gradient(problem, &s)?);
        let hv = hamiltonian.value(&s)?;
        let cas = casimir_values(model, &y[..n], &y[n..])?;
        record.push(t, &y[..n], &y[n..], &s[layout.u_range()], hv, stat, cas);
        Ok(())
    };

    let mut y0 = problem.x0.clone();
    y0.extend(eta0);
    run(method, problem.t0, h, steps, y0, rhs, sample)?;
    Ok(record)
}

/// Integrates the Hamiltonian vector field of `h` (a function of `x`, `η`
/// and possibly `t`) on the dual of `model`.
pub fn integrate_hamiltonian(
    model: &AlgebroidModel,
    h: &ScalarField,
    x0: &[f64],
    eta0: &[f64],
    horizon: (f64, f64),
    steps: usize,
    method: Method,
) -> Result<TrajectoryRecord, OptError> {
    let layout = h.layout();
    let (n, r) = (model.base_dim(), model.rank());
    if layout.base_dim != n || layout.rank != r || layout.control_dim != 0 {
        return Err(PoissonError::VariableMismatch {
            field: h.tree().render(),
            detail: format!("expected a function of x1..x{n}, eta1..eta{r} and t"),
        }
        .into());
    }
    if x0.len() != n || eta0.len() != r {
        return Err(OptError::Dimension(format!(
            "initial point has (n, r) = ({}, {}), model has ({n}, {r})",
            x0.len(),
            eta0.len()
        )));
    }
    let step_size = time_grid(horizon.0, horizon.1, steps)?;
    let load = |t: f64, y: &[f64]| {
        let mut s = layout.state();
        s[layout.x_range()].copy_from_slice(&y[..n]);
        s[layout.eta_range()].copy_from_slice(&y[n..]);
        s[layout.t_index()] = t;
        s
    };
    let rhs = |t: f64, y: &[f64]| -> Result<Vec<f64>, OptError> {
        let (xdot, etadot) = vector_field_at_state(model, h, &load(t, y))?;
        let mut out = xdot;
        out.extend(etadot);
        Ok(out)
    };
    let mut record = TrajectoryRecord::new(n, r, 0);
    let sample = |t: f64, y: &[f64]| -> Result<(), OptError> {
        let hv = h.value(&load(t, y))?;
        let cas = casimir_values(model, &y[..n], &y[n..])?;
        record.push(t, &y[..n], &y[n..], &[], hv, 0.0, cas);
        Ok(())
    };
    let mut y0 = x0.to_vec();
    y0.extend_from_slice(eta0);
    run(method, horizon.0, step_size, steps, y0, rhs, sample)?;
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::NamedAlgebra;
    use crate::exprlang::parse;

    fn exprs(src: &[&str]) -> Vec<crate::exprlang::ExpressionTree> {
        src.iter().map(|s| parse(s).unwrap()).collect()
    }

    #[test]
    fn linear_solution_is_exact() {
        let pb = ControlProblem::new(AlgebroidModel::tangent(1), 1, exprs(&["u1"]), parse("0.5*u1^2").unwrap())
            .unwrap()
            .with_initial(vec![0.0], vec![1.0]);
        let rec = critical_trajectory(&pb, 10, Method::Rk4).unwrap();
        assert_eq!(rec.len(), 11);
        for k in 0..rec.len() {
            let t = rec.times[k];
            assert!((rec.x[k][0] - t).abs() < 1e-14);
            assert!((rec.eta[k][0] - 1.0).abs() < 1e-14);
            assert!((rec.u[k][0] - 1.0).abs() < 1e-12);
        }
        rec.check_invariants(1e-10).unwrap();
    }

    #[test]
    fn so3_isotropic_cost_freezes_costate() {
        let pb = ControlProblem::new(
            AlgebroidModel::named_lie_algebra(NamedAlgebra::So3),
            3,
            exprs(&["u1", "u2", "u3"]),
            parse("0.5*(u1^2+u2^2+u3^2)").unwrap(),
        )
        .unwrap()
        .with_initial(vec![], vec![0.3, -0.7, 1.1]);
        let rec = critical_trajectory(&pb, 50, Method::Midpoint).unwrap();
        for row in &rec.eta {
            for (a, b) in row.iter().zip([0.3, -0.7, 1.1]) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn missing_costate_and_zero_steps() {
        let pb = ControlProblem::new(AlgebroidModel::tangent(1), 1, exprs(&["u1"]), parse("0.5*u1^2").unwrap()).unwrap();
        assert!(matches!(critical_trajectory(&pb, 5, Method::Rk4), Err(OptError::Problem(_))));
        let pb = pb.with_initial(vec![0.0], vec![1.0]);
        assert!(critical_trajectory(&pb, 0, Method::Rk4).is_err());
    }

    #[test]
    fn stage_failure_reports_last_good_time() {
        // x(t) = t, and the dormant log term leaves its domain at x = 0.55.
        let pb = ControlProblem::new(
            AlgebroidModel::tangent(1),
            1,
            exprs(&["u1"]),
            parse("0.5*u1^2 + 0*log(0.55 - x1)").unwrap(),
        )
        .unwrap()
        .with_initial(vec![0.0], vec![1.0]);
        let err = critical_trajectory(&pb, 10, Method::Rk4).unwrap_err();
        assert_eq!(err.last_good_time(), Some(0.5), "{err}");
    }

    #[test]
    fn lie_poisson_reduction_is_bitwise() {
        let model = AlgebroidModel::named_lie_algebra(NamedAlgebra::Heisenberg3);
        let pb = ControlProblem::new(model.clone(), 2, exprs(&["u1", "u2", "0"]), parse("0.5*(u1^2 + u2^2)").unwrap())
            .unwrap()
            .with_initial(vec![], vec![1.0, 0.0, 2.0]);
        let steps = 200;
        let rec = critical_trajectory(&pb, steps, Method::Rk4).unwrap();

        let layout = pb.layout();
        let state = std::cell::RefCell::new(layout.state());
        let eliminate = |t: f64, eta: &[f64]| -> Result<Vec<f64>, OptError> {
            let mut s = state.borrow_mut();
            s[layout.eta_range()].copy_from_slice(eta);
            s[layout.t_index()] = t;
            solve_at_state(&pb, &mut s, STAGE_TOLERANCE)?;
            Ok(s.clone())
        };
        let mut rhs = |t: f64, eta: &[f64]| -> Result<Vec<f64>, OptError> {
            let s = eliminate(t, eta)?;
            Ok(crate::poisson::vector_field_at_state(&model, pb.hamiltonian(), &s)?.1)
        };
        let h = 1.0 / steps as f64;
        let mut eta = vec![1.0, 0.0, 2.0];
        eliminate(0.0, &eta).unwrap();
        for k in 0..steps {
            eta = step(Method::Rk4, k as f64 * h, &eta, h, &mut rhs).unwrap();
            eliminate((k + 1) as f64 * h, &eta).unwrap();
            let bits: Vec<u64> = eta.iter().map(|v| v.to_bits()).collect();
            let rec_bits: Vec<u64> = rec.eta[k + 1].iter().map(|v| v.to_bits()).collect();
            assert_eq!(bits, rec_bits, "step {k}");
        }
    }

    #[test]
    fn method_names() {
        assert_eq!("rk4".parse::<Method>().unwrap(), Method::Rk4);
        assert_eq!(Method::Midpoint.to_string(), "midpoint");
        assert!("euler".parse::<Method>().is_err());
    }

    #[test]
    fn invariant_checker_flags_problems() {
        let mut rec = TrajectoryRecord::new(0, 1, 0);
        rec.push(0.0, &[], &[1.0], &[], 0.0, 0.0, vec![]);
        rec.push(0.0, &[], &[1.0], &[], 0.0, 0.0, vec![]);
        assert_eq!(rec.check_invariants(1e-10), Err(TrajectoryError::NonMonotone(1)));
        rec.times[1] = 1.0;
        rec.stationarity[1] = 1.0;
        assert!(matches!(rec.check_invariants(1e-10), Err(TrajectoryError::Stationarity { sample: 1, .. })));
    }
}
