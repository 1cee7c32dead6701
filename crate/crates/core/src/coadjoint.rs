//! Matrix-group realization of the trivial groupoid `M × G × M`: coadjoint
//! orbits, right-invariant control systems and their reduction, and the
//! comparison between critical trajectories on the full algebroid
//! `TM ⊕ (M × 𝔤)` and on `𝔤` alone.
//!
//! Conventions: `Ad_g X = g X g⁻¹` and `Ad*_g ξ = ξ ∘ Ad_{g⁻¹}`, so that
//! `Ad*_{gh} = Ad*_g ∘ Ad*_h`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::algebra::{NamedAlgebra, StructureConstants};
use crate::algebroid::AlgebroidModel;
use crate::exprlang::{ExpressionTree, FieldError, ScalarField};
use crate::optctl::{critical_trajectory, integrate_hamiltonian, ControlProblem, Method, OptError, TrajectoryRecord};

/// Commutator closure tolerance of a matrix basis.
pub const CLOSURE_TOLERANCE: f64 = 1e-12;
/// Largest accepted residual when expanding a matrix in the basis.
pub const EXTRACTION_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoadjointError {
    #[error("matrix basis does not close under commutators (residual {0:e})")]
    NotClosed(f64),
    #[error("matrix is not in the span of the algebra basis (residual {0:e})")]
    NotInSpan(f64),
    #[error("group element is not invertible")]
    Singular,
    #[error("matrix exponential overflowed")]
    Overflow,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Opt(#[from] OptError),
}

/// `e^A` by scaling and squaring; fails when the result is not finite.
pub fn matrix_exp(a: &DMatrix<f64>) -> Result<DMatrix<f64>, CoadjointError> {
    if !a.is_square() {
        return Err(CoadjointError::Dimension(format!(
            "matrix exponential of a {}x{} matrix",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|v| !v.is_finite()) || a.amax() > 700.0 * a.nrows().max(1) as f64 {
        return Err(CoadjointError::Overflow);
    }
    let e = a.exp();
    if e.iter().all(|v| v.is_finite()) {
        Ok(e)
    } else {
        Err(CoadjointError::Overflow)
    }
}

/// A matrix Lie group given by a basis of its Lie algebra.
#[derive(Debug, Clone)]
pub struct MatrixGroupContext {
    algebra: NamedAlgebra,
    basis: Vec<DMatrix<f64>>,
    constants: StructureConstants,
    // d² × k, column α = vec(E_α)
    basis_columns: DMatrix<f64>,
    gram: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl MatrixGroupContext {
    pub fn new(algebra: NamedAlgebra) -> Result<Self, CoadjointError> {
        let basis = algebra.matrix_basis();
        let constants = algebra.structure_constants();
        let k = basis.len();
        let d = basis[0].nrows();
        let mut worst = 0.0f64;
        for a in 0..k {
            for b in 0..k {
                let mut diff = &basis[a] * &basis[b] - &basis[b] * &basis[a];
                for (g, e) in basis.iter().enumerate() {
                    diff -= e * constants.get(g, a, b);
                }
                worst = worst.max(diff.amax());
            }
        }
        if worst >= CLOSURE_TOLERANCE {
            return Err(CoadjointError::NotClosed(worst));
        }
        let basis_columns = DMatrix::from_fn(d * d, k, |i, a| basis[a].as_slice()[i]);
        let gram = (basis_columns.transpose() * &basis_columns).lu();
        if !gram.is_invertible() {
            return Err(CoadjointError::NotInSpan(f64::INFINITY));
        }
        Ok(MatrixGroupContext {
            algebra,
            basis,
            constants,
            basis_columns,
            gram,
        })
    }

    pub fn algebra(&self) -> NamedAlgebra {
        self.algebra
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn matrix_dim(&self) -> usize {
        self.basis[0].nrows()
    }

    pub fn basis(&self) -> &[DMatrix<f64>] {
        &self.basis
    }

    pub fn constants(&self) -> &StructureConstants {
        &self.constants
    }

    /// `Σ c_α E_α`.
    pub fn algebra_element(&self, coefficients: &[f64]) -> DMatrix<f64> {
        let d = self.matrix_dim();
        let mut m = DMatrix::zeros(d, d);
        for (c, e) in coefficients.iter().zip(&self.basis) {
            m += e * *c;
        }
        m
    }

    /// Least-squares coefficients of `m` in the basis, gated on the residual.
    pub fn coefficients(&self, m: &DMatrix<f64>) -> Result<Vec<f64>, CoadjointError> {
        let v = DMatrix::from_column_slice(m.len(), 1, m.as_slice());
        let c = self
            .gram
            .solve(&(self.basis_columns.transpose() * &v))
            .ok_or(CoadjointError::NotInSpan(f64::INFINITY))?;
        let residual = (&self.basis_columns * &c - &v).amax();
        if residual > EXTRACTION_TOLERANCE * m.amax().max(1.0) {
            return Err(CoadjointError::NotInSpan(residual));
        }
        Ok(c.iter().copied().collect())
    }

    /// `exp(Σ c_α E_α)` with `c_α` uniform in `[−spread, spread]`.
    pub fn sample_element<R: Rng>(&self, rng: &mut R, spread: f64) -> Result<DMatrix<f64>, CoadjointError> {
        let c: Vec<f64> = (0..self.dim()).map(|_| rng.random_range(-spread..=spread)).collect();
        matrix_exp(&self.algebra_element(&c))
    }

    /// Coefficients of `Ad_g X = g X g⁻¹` for `X = Σ x_α E_α`.
    pub fn adjoint(&self, g: &DMatrix<f64>, x: &[f64]) -> Result<Vec<f64>, CoadjointError> {
        let g_inv = g.clone().try_inverse().ok_or(CoadjointError::Singular)?;
        self.coefficients(&(g * self.algebra_element(x) * g_inv))
    }
}

/// `Ad*_g ξ`: `λ_β = ⟨ξ, Ad_{g⁻¹} E_β⟩` with `Ad_{g⁻¹} E_β = g⁻¹ E_β g`.
pub fn coadjoint_point(ctx: &MatrixGroupContext, g: &DMatrix<f64>, xi: &[f64]) -> Result<Vec<f64>, CoadjointError> {
    if xi.len() != ctx.dim() {
        return Err(CoadjointError::Dimension(format!(
            "xi has length {}, algebra dimension is {}",
            xi.len(),
            ctx.dim()
        )));
    }
    let g_inv = g.clone().try_inverse().ok_or(CoadjointError::Singular)?;
    ctx.basis
        .iter()
        .map(|e| {
            let coeffs = ctx.coefficients(&(&g_inv * e * g))?;
            Ok(xi.iter().zip(&coeffs).map(|(a, b)| a * b).sum())
        })
        .collect()
}

/// Points of `O(ξ) = {Ad*_g ξ}` with the group elements that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct CoadjointOrbitSample {
    pub xi: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub group_elements: Vec<DMatrix<f64>>,
}

/// Samples `samples` orbit points from group elements `exp(Σ c_α E_α)`,
/// `c_α ∈ [−spread, spread]`, drawn from a ChaCha8 stream seeded by `seed`.
pub fn sample_orbit(
    ctx: &MatrixGroupContext,
    xi: &[f64],
    samples: usize,
    seed: u64,
    spread: f64,
) -> Result<CoadjointOrbitSample, CoadjointError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(samples);
    let mut group_elements = Vec::with_capacity(samples);
    for _ in 0..samples {
        let g = ctx.sample_element(&mut rng, spread)?;
        points.push(coadjoint_point(ctx, &g, xi)?);
        group_elements.push(g);
    }
    Ok(CoadjointOrbitSample {
        xi: xi.to_vec(),
        points,
        group_elements,
    })
}

/// Linear map `u ↦ V(u) = Σ_a u_a Σ_α K_{αa} E_α` from controls to the
/// Lie algebra; `coefficients` is `K` (`dim 𝔤 × m`).
#[derive(Debug, Clone, PartialEq)]
pub struct ControlToAlgebra {
    pub coefficients: DMatrix<f64>,
}

impl ControlToAlgebra {
    pub fn new(coefficients: DMatrix<f64>) -> Self {
        ControlToAlgebra { coefficients }
    }

    /// `V(u) = Σ u_a E_a` (one control per basis element).
    pub fn identity(dim: usize) -> Self {
        Self::new(DMatrix::identity(dim, dim))
    }

    pub fn control_dim(&self) -> usize {
        self.coefficients.ncols()
    }

    pub fn algebra_coefficients(&self, u: &[f64]) -> Vec<f64> {
        (0..self.coefficients.nrows())
            .map(|a| (0..u.len()).map(|c| self.coefficients[(a, c)] * u[c]).sum())
            .collect()
    }

    pub fn matrix(&self, ctx: &MatrixGroupContext, u: &[f64]) -> DMatrix<f64> {
        ctx.algebra_element(&self.algebra_coefficients(u))
    }

    /// The right-invariant field `F(h, u) = V(u) h`.
    pub fn invariant_field(&self, ctx: &MatrixGroupContext, h: &DMatrix<f64>, u: &[f64]) -> DMatrix<f64> {
        self.matrix(ctx, u) * h
    }
}

/// `max ‖F(h, u) g − F(h g, u)‖∞` over sampled `g`, `h` (group elements with
/// spread 1) and `u ∈ [−1, 1]^m`; zero iff `dR_g F(h, u) = F(R_g h, u)` on
/// the samples.
pub fn verify_right_invariance<F>(
    ctx: &MatrixGroupContext,
    control_dim: usize,
    field: F,
    samples: usize,
    seed: u64,
) -> Result<f64, CoadjointError>
where
    F: Fn(&DMatrix<f64>, &[f64]) -> DMatrix<f64>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let g = ctx.sample_element(&mut rng, 1.0)?;
        let h = ctx.sample_element(&mut rng, 1.0)?;
        let u: Vec<f64> = (0..control_dim).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let lhs = field(&h, &u) * &g;
        let rhs = field(&(&h * &g), &u);
        worst = worst.max((lhs - rhs).amax());
    }
    Ok(worst)
}

/// Control section on `TM ⊕ (M × 𝔤)` obtained from a right-invariant
/// system: zero base part and `𝔤` part `f(u) = K u`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedControlSection {
    pub base_dim: usize,
    /// `dim 𝔤 × m` coefficients of `F(1, e_a)` in the basis.
    pub coefficients: DMatrix<f64>,
}

impl ReducedControlSection {
    pub fn control_dim(&self) -> usize {
        self.coefficients.ncols()
    }

    /// Fiber components `f^α(u)` in the trivial-algebroid basis.
    pub fn evaluate(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.base_dim];
        out.extend((0..self.coefficients.nrows()).map(|a| (0..u.len()).map(|c| self.coefficients[(a, c)] * u[c]).sum::<f64>()));
        out
    }

    /// Component expressions in `u1..um` for a [`ControlProblem`].
    pub fn expressions(&self) -> Vec<ExpressionTree> {
        let mut out: Vec<ExpressionTree> = (0..self.base_dim).map(|_| ExpressionTree::constant(0.0)).collect();
        for a in 0..self.coefficients.nrows() {
            let mut acc: Option<ExpressionTree> = None;
            for c in 0..self.coefficients.ncols() {
                let k = self.coefficients[(a, c)];
                if k == 0.0 {
                    continue;
                }
                let term = ExpressionTree::constant(k) * ExpressionTree::variable(&format!("u{}", c + 1));
                acc = Some(match acc {
                    None => term,
                    Some(t) => t + term,
                });
            }
            out.push(acc.unwrap_or_else(|| ExpressionTree::constant(0.0)));
        }
        out
    }

    /// Right-invariant system with these reduced values.
    pub fn lift(&self) -> ControlToAlgebra {
        ControlToAlgebra::new(self.coefficients.clone())
    }
}

/// `f(x, u) = F(1_x, u)`: evaluates the invariant field at the identity
/// and expands it in the algebra basis.
pub fn reduce_system(
    ctx: &MatrixGroupContext,
    v_map: &ControlToAlgebra,
    base_dim: usize,
) -> Result<ReducedControlSection, CoadjointError> {
    if v_map.coefficients.nrows() != ctx.dim() {
        return Err(CoadjointError::Dimension(format!(
            "control map has {} rows, algebra dimension is {}",
            v_map.coefficients.nrows(),
            ctx.dim()
        )));
    }
    let m = v_map.control_dim();
    let identity = DMatrix::identity(ctx.matrix_dim(), ctx.matrix_dim());
    let mut coefficients = DMatrix::zeros(ctx.dim(), m);
    for c in 0..m {
        let mut u = vec![0.0; m];
        u[c] = 1.0;
        let value = v_map.invariant_field(ctx, &identity, &u);
        for (a, k) in ctx.coefficients(&value)?.into_iter().enumerate() {
            coefficients[(a, c)] = k;
        }
    }
    Ok(ReducedControlSection {
        base_dim,
        coefficients,
    })
}

/// Dynamics on `𝔤*` shared by both sides of [`full_vs_reduced`].
#[derive(Debug, Clone)]
pub enum ReducedDynamics {
    /// `h(eta1..etak)`.
    Hamiltonian(ExpressionTree),
    /// `f^α(u)` (`k` components) and cost `L(u)`.
    Control {
        control_dim: usize,
        f: Vec<ExpressionTree>,
        cost: ExpressionTree,
    },
}

/// A problem on `M × 𝔤*` whose Hamiltonian does not depend on `x`.
#[derive(Debug, Clone)]
pub struct ReductionExperiment {
    pub algebra: NamedAlgebra,
    pub base_dim: usize,
    pub dynamics: ReducedDynamics,
    /// Base components of the section (constants, or functions of `u` in
    /// the control case); zeros when empty. They drive `x` and leave the
    /// `𝔤*` equations untouched.
    pub base_part: Vec<ExpressionTree>,
    pub x0: Vec<f64>,
    /// Initial base momenta `η_1..η_n` of the full model (zeros when empty).
    pub base_eta0: Vec<f64>,
    pub eta0: Vec<f64>,
    pub horizon: (f64, f64),
    pub steps: usize,
    pub method: Method,
}

#[derive(Debug, Clone)]
pub struct ReductionReport {
    /// `max_k ‖η_𝔤,full(t_k) − η_reduced(t_k)‖∞`.
    pub discrepancy: f64,
    /// Largest deviation of the centered difference of `x(t)` from
    /// `ρⁱ_α ∂H/∂η_α` at interior samples.
    pub base_velocity_residual: f64,
    pub full: TrajectoryRecord,
    pub reduced: TrajectoryRecord,
}

fn shift_eta(tree: &ExpressionTree, offset: usize) -> ExpressionTree {
    tree.rename_variables(|name| match name.strip_prefix("eta").and_then(|k| k.parse::<usize>().ok()) {
        Some(k) => format!("eta{}", k + offset),
        None => name.to_string(),
    })
}

/// Integrates the critical-trajectory equations of an `x`-independent
/// problem twice: on `TM ⊕ (M × 𝔤)` and on `𝔤` over a point, with the same
/// scheme and steps, and compares the `𝔤*` components.
pub fn full_vs_reduced(exp: &ReductionExperiment) -> Result<ReductionReport, CoadjointError> {
    let n = exp.base_dim;
    let k = exp.algebra.dim();
    if exp.eta0.len() != k {
        return Err(CoadjointError::Dimension(format!("eta0 must have length {k}")));
    }
    let x0 = if exp.x0.is_empty() { vec![0.0; n] } else { exp.x0.clone() };
    let base_eta0 = if exp.base_eta0.is_empty() { vec![0.0; n] } else { exp.base_eta0.clone() };
    let base_part: Vec<ExpressionTree> = if exp.base_part.is_empty() {
        (0..n).map(|_| ExpressionTree::constant(0.0)).collect()
    } else {
        exp.base_part.clone()
    };
    if x0.len() != n || base_eta0.len() != n || base_part.len() != n {
        return Err(CoadjointError::Dimension(format!(
            "x0, base_eta0 and base_part must have length {n}"
        )));
    }
    let full_model = AlgebroidModel::trivial(n, exp.algebra);
    let reduced_model = AlgebroidModel::named_lie_algebra(exp.algebra);
    let mut full_eta0 = base_eta0;
    full_eta0.extend_from_slice(&exp.eta0);
    let (t0, t1) = exp.horizon;

    let (full, reduced, full_h) = match &exp.dynamics {
        ReducedDynamics::Hamiltonian(h) => {
            let mut lifted = shift_eta(h, n);
            for (i, b) in base_part.iter().enumerate() {
                if !b.free_variables().is_empty() {
                    return Err(CoadjointError::Dimension(
                        "base part of a Hamiltonian experiment must be constant".into(),
                    ));
                }
                lifted = ExpressionTree::variable(&format!("eta{}", i + 1)) * b.clone() + lifted;
            }
            let full_h = ScalarField::new(lifted, full_model.layout())?;
            let reduced_h = ScalarField::new(h.clone(), reduced_model.layout())?;
            let full = integrate_hamiltonian(&full_model, &full_h, &x0, &full_eta0, (t0, t1), exp.steps, exp.method)?;
            let reduced = integrate_hamiltonian(&reduced_model, &reduced_h, &[], &exp.eta0, (t0, t1), exp.steps, exp.method)?;
            (full, reduced, full_h)
        }
        ReducedDynamics::Control { control_dim, f, cost } => {
            let mut full_f = base_part.clone();
            full_f.extend(f.iter().cloned());
            let full_pb = ControlProblem::new(full_model.clone(), *control_dim, full_f, cost.clone())?
                .with_horizon(t0, t1)
                .with_initial(x0.clone(), full_eta0.clone());
            let reduced_pb = ControlProblem::new(reduced_model.clone(), *control_dim, f.clone(), cost.clone())?
                .with_horizon(t0, t1)
                .with_initial(vec![], exp.eta0.clone());
            let full = critical_trajectory(&full_pb, exp.steps, exp.method)?;
            let reduced = critical_trajectory(&reduced_pb, exp.steps, exp.method)?;
            let full_h = full_pb.hamiltonian().clone();
            (full, reduced, full_h)
        }
    };

    let discrepancy = full
        .eta
        .iter()
        .zip(&reduced.eta)
        .flat_map(|(a, b)| a[n..].iter().zip(b).map(|(p, q)| (p - q).abs()))
        .fold(0.0f64, f64::max);

    let layout = full_h.layout();
    let anchor = full_model.eval_anchor(&x0).map_err(OptError::from)?;
    let mut base_velocity_residual = 0.0f64;
    for s in 1..full.len().saturating_sub(1) {
        let dt = full.times[s + 1] - full.times[s - 1];
        let mut state = layout.state();
        state[layout.x_range()].copy_from_slice(&full.x[s]);
        state[layout.eta_range()].copy_from_slice(&full.eta[s]);
        state[layout.u_range()].copy_from_slice(&full.u[s]);
        let dh = full_h.gradient(&state, layout.eta_range()).map_err(OptError::from)?;
        for i in 0..n {
            let predicted: f64 = (0..full_model.rank()).map(|a| anchor[(i, a)] * dh[a]).sum();
            let observed = (full.x[s + 1][i] - full.x[s - 1][i]) / dt;
            base_velocity_residual = base_velocity_residual.max((predicted - observed).abs());
        }
    }

    Ok(ReductionReport {
        discrepancy,
        base_velocity_residual,
        full,
        reduced,
    })
}
