//! Pontryagin optimal control on a Lie algebroid.
//!
//! A control system is a section `f(x, u)` of `A` along the control space
//! and the cost is `L(x, u)`. With the normal multiplier the Pontryagin
//! Hamiltonian is `H(x, η, u) = η_α f^α(x, u) − L(x, u)` and critical
//! trajectories solve
//!
//! ```text
//! ẋⁱ  = ρⁱ_α ∂H/∂η_α
//! η̇_α = −(ρⁱ_α ∂H/∂xⁱ + η_γ C^γ_{αβ} ∂H/∂η_β)
//! 0   = ∂H/∂u
//! ```
//!
//! The algebraic constraint is eliminated at every integrator stage by
//! [`stationarity_solve`].

mod integrate;
mod shoot;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::algebroid::{AlgebroidError, AlgebroidModel};
use crate::exprlang::{EvalError, ExpressionTree, FieldError, ScalarField, VarLayout};
use crate::poisson::{PhasePoint, PoissonError};

pub use integrate::{critical_trajectory, integrate_hamiltonian, Method, TrajectoryRecord, TrajectoryError};
pub use shoot::{shoot, ShootOutcome, MAX_SHOOT_ITERATIONS, SHOOT_FD_STEP};

/// Newton iteration cap for [`stationarity_solve`].
pub const MAX_NEWTON_ITERATIONS: usize = 50;
/// Step of the central differences of `∂H/∂u` forming the Newton Jacobian.
pub const JACOBIAN_FD_STEP: f64 = 1e-6;
/// Hessians with a larger condition estimate are treated as singular.
pub const MAX_HESSIAN_CONDITION: f64 = 1e12;
/// Stationarity tolerance used at every stage of [`critical_trajectory`].
pub const STAGE_TOLERANCE: f64 = 1e-11;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptError {
    #[error("invalid control problem: {0}")]
    Problem(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("singular control Hessian (condition estimate {condition:e}) at u = {u:?}")]
    SingularHessian { condition: f64, u: Vec<f64> },
    #[error("stationarity Newton did not converge in {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("integration failed after t = {t_last_good}: {source}")]
    Integration {
        t_last_good: f64,
        #[source]
        source: Box<OptError>,
    },
    #[error("state became non-finite after t = {t_last_good}")]
    NonFinite { t_last_good: f64 },
    #[error("shooting did not converge in {iterations} iterations (endpoint error {residual:e})")]
    ShootingNoConvergence { iterations: usize, residual: f64 },
    #[error("singular shooting sensitivity matrix")]
    SingularSensitivity,
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Poisson(#[from] PoissonError),
    #[error(transparent)]
    Algebroid(#[from] AlgebroidError),
}

impl OptError {
    /// Time of the last accepted sample, for integration failures.
    pub fn last_good_time(&self) -> Option<f64> {
        match self {
            OptError::Integration { t_last_good, .. } | OptError::NonFinite { t_last_good } => Some(*t_last_good),
            _ => None,
        }
    }
}

/// An optimal control problem on an algebroid.
#[derive(Debug, Clone)]
pub struct ControlProblem {
    model: AlgebroidModel,
    control_dim: usize,
    layout: VarLayout,
    f: Vec<ScalarField>,
    cost: ScalarField,
    hamiltonian: ScalarField,
    pub t0: f64,
    pub t1: f64,
    pub x0: Vec<f64>,
    pub eta0: Option<Vec<f64>>,
    /// Initial Newton guess for the controls (zeros when absent).
    pub u0: Option<Vec<f64>>,
    pub target: Option<Vec<f64>>,
}

impl ControlProblem {
    /// `f` holds one expression per fiber direction, `f` and `cost` may
    /// use `x1..xn` and `u1..um`.
    pub fn new(
        model: AlgebroidModel,
        control_dim: usize,
        f: Vec<ExpressionTree>,
        cost: ExpressionTree,
    ) -> Result<Self, OptError> {
        let r = model.rank();
        if f.len() != r {
            return Err(OptError::Dimension(format!(
                "control system has {} components, algebroid rank is {r}",
                f.len()
            )));
        }
        let layout = VarLayout::new(model.base_dim(), r, control_dim);
        let check = |what: &str, tree: &ExpressionTree| -> Result<ScalarField, OptError> {
            let field = ScalarField::new(tree.clone(), layout)?;
            if field.depends_on_range(layout.eta_range()) || field.depends_on_range(layout.t_index()..layout.len()) {
                return Err(OptError::Problem(format!(
                    "{what} = `{tree}` may only depend on x and u variables"
                )));
            }
            Ok(field)
        };
        let f_fields = f
            .iter()
            .enumerate()
            .map(|(a, tree)| check(&format!("f{}", a + 1), tree))
            .collect::<Result<Vec<_>, _>>()?;
        let cost_field = check("L", &cost)?;

        // H = Σ eta_α (f^α) − (L)
        let mut h: Option<ExpressionTree> = None;
        for (a, tree) in f.into_iter().enumerate() {
            let term = ExpressionTree::variable(&format!("eta{}", a + 1)) * tree;
            h = Some(match h {
                None => term,
                Some(acc) => acc + term,
            });
        }
        let h = h.unwrap_or_else(|| ExpressionTree::constant(0.0)) - cost;
        let hamiltonian = ScalarField::new(h, layout)?;
        let n = model.base_dim();
        Ok(ControlProblem {
            model,
            control_dim,
            layout,
            f: f_fields,
            cost: cost_field,
            hamiltonian,
            t0: 0.0,
            t1: 1.0,
            x0: vec![0.0; n],
            eta0: None,
            u0: None,
            target: None,
        })
    }

    pub fn with_horizon(mut self, t0: f64, t1: f64) -> Self {
        self.t0 = t0;
        self.t1 = t1;
        self
    }

    pub fn with_initial(mut self, x0: Vec<f64>, eta0: Vec<f64>) -> Self {
        self.x0 = x0;
        self.eta0 = Some(eta0);
        self
    }

    pub fn with_target(mut self, target: Vec<f64>) -> Self {
        self.target = Some(target);
        self
    }

    pub fn model(&self) -> &AlgebroidModel {
        &self.model
    }

    pub fn control_dim(&self) -> usize {
        self.control_dim
    }

    /// State layout `(x, η, u, t)`.
    pub fn layout(&self) -> VarLayout {
        self.layout
    }

    pub fn control_system(&self) -> &[ScalarField] {
        &self.f
    }

    pub fn cost(&self) -> &ScalarField {
        &self.cost
    }

    /// `H = ⟨η, f⟩ − L` as a field on the state layout.
    pub fn hamiltonian(&self) -> &ScalarField {
        &self.hamiltonian
    }

    /// Checks horizon and initial data dimensions.
    pub fn validate(&self) -> Result<(), OptError> {
        if !(self.t1 > self.t0) {
            return Err(OptError::Problem(format!(
                "horizon must satisfy t1 > t0, got [{}, {}]",
                self.t0, self.t1
            )));
        }
        if self.x0.len() != self.model.base_dim() {
            return Err(OptError::Dimension(format!(
                "x0 has length {}, base dimension is {}",
                self.x0.len(),
                self.model.base_dim()
            )));
        }
        if let Some(eta0) = &self.eta0 {
            if eta0.len() != self.model.rank() {
                return Err(OptError::Dimension(format!(
                    "eta0 has length {}, rank is {}",
                    eta0.len(),
                    self.model.rank()
                )));
            }
        }
        if let Some(u0) = &self.u0 {
            if u0.len() != self.control_dim {
                return Err(OptError::Dimension(format!(
                    "u0 has length {}, control dimension is {}",
                    u0.len(),
                    self.control_dim
                )));
            }
        }
        if let Some(target) = &self.target {
            if target.len() != self.model.base_dim() {
                return Err(OptError::Dimension(format!(
                    "target has length {}, base dimension is {}",
                    target.len(),
                    self.model.base_dim()
                )));
            }
        }
        Ok(())
    }

    pub(crate) fn state(&self, x: &[f64], eta: &[f64], u: &[f64]) -> Vec<f64> {
        let mut s = self.layout.state();
        s[self.layout.x_range()].copy_from_slice(x);
        s[self.layout.eta_range()].copy_from_slice(eta);
        s[self.layout.u_range()].copy_from_slice(u);
        s
    }

    fn check_point(&self, p: &PhasePoint, u: &[f64]) -> Result<(), OptError> {
        if p.x.len() != self.model.base_dim() || p.eta.len() != self.model.rank() || u.len() != self.control_dim {
            return Err(OptError::Dimension(format!(
                "expected (n, r, m) = ({}, {}, {}), got ({}, {}, {})",
                self.model.base_dim(),
                self.model.rank(),
                self.control_dim,
                p.x.len(),
                p.eta.len(),
                u.len()
            )));
        }
        Ok(())
    }
}

/// `H(x, η, u) = Σ η_α f^α(x, u) − L(x, u)`.
pub fn pontryagin_hamiltonian(problem: &ControlProblem, p: &PhasePoint, u: &[f64]) -> Result<f64, OptError> {
    problem.check_point(p, u)?;
    Ok(problem.hamiltonian.value(&problem.state(&p.x, &p.eta, u))?)
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// `∂H/∂u` at a full state vector.
fn control_gradient(problem: &ControlProblem, state: &[f64]) -> Result<Vec<f64>, OptError> {
    Ok(problem.hamiltonian.gradient(state, problem.layout.u_range())?)
}

/// Solves `∂H/∂u (x, η, u) = 0` for `u` by damped Newton from `u_guess`.
///
/// The Jacobian is formed by central differences of the exact gradient;
/// a residual increase halves the step. Fails on a singular Hessian or
/// after [`MAX_NEWTON_ITERATIONS`] iterations.
pub fn stationarity_solve(
    problem: &ControlProblem,
    p: &PhasePoint,
    u_guess: &[f64],
    tol: f64,
) -> Result<Vec<f64>, OptError> {
    problem.check_point(p, u_guess)?;
    let mut state = problem.state(&p.x, &p.eta, u_guess);
    solve_at_state(problem, &mut state, tol)?;
    Ok(state[problem.layout.u_range()].to_vec())
}

/// Newton on the control slots of `state`, in place.
pub(crate) fn solve_at_state(problem: &ControlProblem, state: &mut [f64], tol: f64) -> Result<f64, OptError> {
    let layout = problem.layout;
    let m = problem.control_dim;
    if m == 0 {
        return Ok(0.0);
    }
    let u_range = layout.u_range();
    let mut g = control_gradient(problem, state)?;
    let mut residual = inf_norm(&g);
    for _ in 0..MAX_NEWTON_ITERATIONS {
        let mut jac = DMatrix::zeros(m, m);
        for j in 0..m {
            let idx = u_range.start + j;
            let u_j = state[idx];
            let h = JACOBIAN_FD_STEP * u_j.abs().max(1.0);
            state[idx] = u_j + h;
            let gp = control_gradient(problem, state)?;
            state[idx] = u_j - h;
            let gm = control_gradient(problem, state)?;
            state[idx] = u_j;
            for i in 0..m {
                jac[(i, j)] = (gp[i] - gm[i]) / (2.0 * h);
            }
        }
        let sv = jac.singular_values();
        let smax = sv.max();
        let smin = sv.min();
        let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        if !(condition <= MAX_HESSIAN_CONDITION) {
            return Err(OptError::SingularHessian {
                condition,
                u: state[u_range.clone()].to_vec(),
            });
        }
        if residual < tol {
            return Ok(residual);
        }
        let rhs = DVector::from_iterator(m, g.iter().map(|v| -v));
        let delta = jac
            .lu()
            .solve(&rhs)
            .ok_or_else(|| OptError::SingularHessian {
                condition,
                u: state[u_range.clone()].to_vec(),
            })?;
        let start: Vec<f64> = state[u_range.clone()].to_vec();
        let mut lambda = 1.0;
        loop {
            for j in 0..m {
                state[u_range.start + j] = start[j] + lambda * delta[j];
            }
            let g_new = control_gradient(problem, state)?;
            let r_new = inf_norm(&g_new);
            if r_new <= residual || lambda < 1e-6 {
                g = g_new;
                residual = r_new;
                break;
            }
            lambda *= 0.5;
        }
    }
    if residual < tol {
        return Ok(residual);
    }
    Err(OptError::NoConvergence {
        iterations: MAX_NEWTON_ITERATIONS,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::NamedAlgebra;
    use crate::exprlang::parse;

    fn exprs(src: &[&str]) -> Vec<ExpressionTree> {
        src.iter().map(|s| parse(s).unwrap()).collect()
    }

    fn rigid_body(inertia: [f64; 3]) -> ControlProblem {
        let cost = format!(
            "0.5*({}*u1^2 + {}*u2^2 + {}*u3^2)",
            inertia[0], inertia[1], inertia[2]
        );
        ControlProblem::new(
            AlgebroidModel::named_lie_algebra(NamedAlgebra::So3),
            3,
            exprs(&["u1", "u2", "u3"]),
            parse(&cost).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn hamiltonian_spot_values() {
        let pb = ControlProblem::new(
            AlgebroidModel::tangent(2),
            2,
            exprs(&["u1", "u2"]),
            parse("0.5*(u1^2+u2^2)").unwrap(),
        )
        .unwrap();
        let p = PhasePoint::new(vec![0.0, 0.0], vec![1.0, 1.0]);
        assert_eq!(pontryagin_hamiltonian(&pb, &p, &[1.0, 1.0]).unwrap(), 1.0);
        let p0 = PhasePoint::new(vec![0.0, 0.0], vec![0.0, 0.0]);
        assert_eq!(pontryagin_hamiltonian(&pb, &p0, &[3.0, -1.0]).unwrap(), -5.0);
    }

    #[test]
    fn bilinear_hamiltonian_matches_matrix_product() {
        // f(x, u) = G(x) u with G = [[x1, 1], [2, -x1]], L = 0
        let pb = ControlProblem::new(
            AlgebroidModel::tangent(2),
            2,
            exprs(&["x1*u1 + u2", "2*u1 - x1*u2"]),
            parse("0").unwrap(),
        )
        .unwrap();
        let x1 = 0.7;
        let g = [[x1, 1.0], [2.0, -x1]];
        let eta = [1.5, -0.25];
        let u = [0.3, 2.0];
        let mut expect = 0.0;
        for a in 0..2 {
            for c in 0..2 {
                expect += eta[a] * g[a][c] * u[c];
            }
        }
        let got = pontryagin_hamiltonian(&pb, &PhasePoint::new(vec![x1, 0.0], eta.to_vec()), &u).unwrap();
        assert!((got - expect).abs() < 1e-15);
    }

    #[test]
    fn stationarity_closed_form() {
        let pb = rigid_body([1.0, 2.0, 3.0]);
        let eta = [0.4, -1.0, 2.5];
        let u = stationarity_solve(&pb, &PhasePoint::new(vec![], eta.to_vec()), &[0.0; 3], 1e-12).unwrap();
        for (k, inertia) in [1.0, 2.0, 3.0].iter().enumerate() {
            assert!((u[k] - eta[k] / inertia).abs() < 1e-12);
        }
        let u = stationarity_solve(&pb, &PhasePoint::new(vec![], vec![0.0; 3]), &[0.3, 0.3, 0.3], 1e-12).unwrap();
        assert!(inf_norm(&u) < 1e-12);
    }

    #[test]
    fn stationarity_nonlinear_cost() {
        // L = cosh-like convex cost: u^4/4 + u^2/2 ⇒ η = u^3 + u
        let pb = ControlProblem::new(
            AlgebroidModel::tangent(1),
            1,
            exprs(&["u1"]),
            parse("u1^4/4 + u1^2/2").unwrap(),
        )
        .unwrap();
        let u = stationarity_solve(&pb, &PhasePoint::new(vec![0.0], vec![10.0]), &[0.0], 1e-12).unwrap();
        assert!((u[0].powi(3) + u[0] - 10.0).abs() < 1e-12);
        assert!((u[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_problem_is_rejected() {
        let pb = ControlProblem::new(AlgebroidModel::tangent(1), 1, exprs(&["u1"]), parse("x1^2").unwrap()).unwrap();
        let err = stationarity_solve(&pb, &PhasePoint::new(vec![0.0], vec![1.0]), &[0.0], 1e-12).unwrap_err();
        assert!(matches!(err, OptError::SingularHessian { .. }), "{err:?}");
    }

    #[test]
    fn problem_validation() {
        assert!(matches!(
            ControlProblem::new(AlgebroidModel::tangent(1), 1, exprs(&["u1", "u1"]), parse("0").unwrap()),
            Err(OptError::Dimension(_))
        ));
        assert!(matches!(
            ControlProblem::new(AlgebroidModel::tangent(1), 1, exprs(&["eta1"]), parse("0").unwrap()),
            Err(OptError::Problem(_))
        ));
        assert!(matches!(
            ControlProblem::new(AlgebroidModel::tangent(1), 1, exprs(&["u2"]), parse("0").unwrap()),
            Err(OptError::Field(_))
        ));
        let pb = ControlProblem::new(AlgebroidModel::tangent(1), 1, exprs(&["u1"]), parse("u1^2").unwrap())
            .unwrap()
            .with_horizon(1.0, 1.0);
        assert!(pb.validate().is_err());
    }
}
