use nalgebra::{DMatrix, DVector};

use super::{critical_trajectory, ControlProblem, Method, OptError};

pub const MAX_SHOOT_ITERATIONS: usize = 30;
/// Central-difference step for the endpoint sensitivity.
pub const SHOOT_FD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ShootOutcome {
    pub eta0: Vec<f64>,
    pub iterations: usize,
    /// `‖x(t1) − target‖∞` at `eta0`.
    pub endpoint_error: f64,
    /// Endpoint error after each Newton iteration (entry 0 is the guess).
    pub history: Vec<f64>,
}

fn endpoint_residual(
    problem: &ControlProblem,
    eta0: &[f64],
    target: &[f64],
    steps: usize,
    method: Method,
) -> Result<Vec<f64>, OptError> {
    let mut pb = problem.clone();
    pb.eta0 = Some(eta0.to_vec());
    let rec = critical_trajectory(&pb, steps, method)?;
    Ok(rec.final_x().iter().zip(target).map(|(x, t)| x - t).collect())
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Finds an initial costate steering `x(t1)` to `problem.target`.
///
/// Newton on the endpoint residual with a central-difference sensitivity
/// matrix; non-square systems take the minimum-norm least-squares step.
pub fn shoot(
    problem: &ControlProblem,
    eta0_guess: &[f64],
    tol: f64,
    steps: usize,
    method: Method,
) -> Result<ShootOutcome, OptError> {
    problem.validate()?;
    let target = problem
        .target
        .clone()
        .ok_or_else(|| OptError::Problem("shooting needs a target".into()))?;
    let (n, r) = (problem.model().base_dim(), problem.model().rank());
    if n == 0 {
        return Err(OptError::Problem("shooting needs a base of positive dimension".into()));
    }
    if eta0_guess.len() != r {
        return Err(OptError::Dimension(format!(
            "eta0 guess has length {}, rank is {r}",
            eta0_guess.len()
        )));
    }
    let mut eta0 = eta0_guess.to_vec();
    let mut res = endpoint_residual(problem, &eta0, &target, steps, method)?;
    let mut err = inf_norm(&res);
    let mut history = vec![err];
    for iteration in 0..MAX_SHOOT_ITERATIONS {
        if err < tol {
            return Ok(ShootOutcome {
                eta0,
                iterations: iteration,
                endpoint_error: err,
                history,
            });
        }
        let mut jac = DMatrix::zeros(n, r);
        for j in 0..r {
            let h = SHOOT_FD_STEP * eta0[j].abs().max(1.0);
            let mut plus = eta0.clone();
            plus[j] += h;
            let mut minus = eta0.clone();
            minus[j] -= h;
            let rp = endpoint_residual(problem, &plus, &target, steps, method)?;
            let rm = endpoint_residual(problem, &minus, &target, steps, method)?;
            for i in 0..n {
                jac[(i, j)] = (rp[i] - rm[i]) / (2.0 * h);
            }
        }
        let svd = jac.svd(true, true);
        let smax = svd.singular_values.max();
        if !(smax > 0.0) || svd.rank(1e-12 * smax) < n.min(r) {
            return Err(OptError::SingularSensitivity);
        }
        let rhs = DVector::from_iterator(n, res.iter().map(|v| -v));
        let delta = svd
            .solve(&rhs, 1e-12 * smax)
            .map_err(|_| OptError::SingularSensitivity)?;

        let mut lambda = 1.0;
        loop {
            let trial: Vec<f64> = eta0.iter().zip(delta.iter()).map(|(e, d)| e + lambda * d).collect();
            let trial_res = endpoint_residual(problem, &trial, &target, steps, method);
            match trial_res {
                Ok(tr) if inf_norm(&tr) <= err || lambda < 1e-3 => {
                    eta0 = trial;
                    err = inf_norm(&tr);
                    res = tr;
                    break;
                }
                Err(e) if lambda < 1e-3 => return Err(e),
                _ => lambda *= 0.5,
            }
        }
        history.push(err);
    }
    if err < tol {
        return Ok(ShootOutcome {
            eta0,
            iterations: MAX_SHOOT_ITERATIONS,
            endpoint_error: err,
            history,
        });
    }
    Err(OptError::ShootingNoConvergence {
        iterations: MAX_SHOOT_ITERATIONS,
        residual: err,
    })
}
