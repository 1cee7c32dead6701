//! Linear Poisson structure on the dual bundle `A*` and the symplectic
//! geometry of the prolongation `𝒯A*`.
//!
//! Sign convention: the bracket is the bivector
//! `Π = ρⁱ_α ∂_{xⁱ} ∧ ∂_{η_α} − ½ C^γ_{αβ} η_γ ∂_{η_α} ∧ ∂_{η_β}`, i.e.
//!
//! ```text
//! {F, G} = ρⁱ_α (∂F/∂xⁱ ∂G/∂η_α − ∂G/∂xⁱ ∂F/∂η_α) − C^γ_{αβ} η_γ ∂F/∂η_α ∂G/∂η_β
//! ```
//!
//! and Hamiltonian vector fields satisfy `dφ/dt = {φ, H}`. With this choice
//! `{η_α, η_β} = −C^γ_{αβ} η_γ`. The alternative convention in which
//! linear functions bracket like sections (`{ê_α, ê_β} = +[e_α, e_β]^`)
//! flips the sign of the `C` term only.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::algebra::StructureConstants;
use crate::algebroid::{AlgebroidError, AlgebroidModel};
use crate::exprlang::{EvalError, ScalarField, VarLayout};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PoissonError {
    #[error("field `{field}` does not match the model: {detail}")]
    VariableMismatch { field: String, detail: String },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("prolongation vectors are attached to different base points")]
    BasePointMismatch,
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Algebroid(#[from] AlgebroidError),
}

/// A point `(x, η)` of the dual bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub x: Vec<f64>,
    pub eta: Vec<f64>,
}

impl PhasePoint {
    pub fn new(x: Vec<f64>, eta: Vec<f64>) -> Self {
        PhasePoint { x, eta }
    }

    fn check(&self, model: &AlgebroidModel) -> Result<(), PoissonError> {
        if self.x.len() != model.base_dim() || self.eta.len() != model.rank() {
            return Err(PoissonError::Dimension(format!(
                "point has (n, r) = ({}, {}), model has ({}, {})",
                self.x.len(),
                self.eta.len(),
                model.base_dim(),
                model.rank()
            )));
        }
        Ok(())
    }
}

/// Element `z^α 𝒳_α + v_α 𝒱_α` of the prolongation at a point.
///
/// The tangent part over the base is `ρⁱ_α z^α ∂/∂xⁱ`, so the defining
/// compatibility of `𝒯A*` holds for every choice of coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ProlongationVector {
    pub point: PhasePoint,
    pub z: Vec<f64>,
    pub v: Vec<f64>,
}

impl ProlongationVector {
    pub fn new(point: PhasePoint, z: Vec<f64>, v: Vec<f64>) -> Self {
        ProlongationVector { point, z, v }
    }

    /// Induced base velocity `ρⁱ_α(x) z^α`.
    pub fn base_velocity(&self, model: &AlgebroidModel) -> Result<Vec<f64>, PoissonError> {
        let rho = model.eval_anchor(&self.point.x)?;
        Ok(mat_vec(&rho, &self.z))
    }

    fn check(&self, model: &AlgebroidModel) -> Result<(), PoissonError> {
        self.point.check(model)?;
        if self.z.len() != model.rank() || self.v.len() != model.rank() {
            return Err(PoissonError::Dimension(format!(
                "prolongation coefficients must have length {}",
                model.rank()
            )));
        }
        Ok(())
    }
}

fn mat_vec(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|a| m[(i, a)] * v[a]).sum())
        .collect()
}

/// Checks that `field` lives on `(x, η)` of `model` and builds its state.
fn phase_state(
    model: &AlgebroidModel,
    field: &ScalarField,
    p: &PhasePoint,
) -> Result<Vec<f64>, PoissonError> {
    let layout = field.layout();
    if layout.base_dim != model.base_dim() || layout.rank != model.rank() {
        return Err(PoissonError::VariableMismatch {
            field: field.tree().render(),
            detail: format!(
                "field layout has (n, r) = ({}, {}), model has ({}, {})",
                layout.base_dim,
                layout.rank,
                model.base_dim(),
                model.rank()
            ),
        });
    }
    if field.depends_on_range(layout.u_range()) || field.depends_on_range(layout.t_index()..layout.len()) {
        return Err(PoissonError::VariableMismatch {
            field: field.tree().render(),
            detail: "only x and eta variables are allowed".into(),
        });
    }
    Ok(state_of(layout, p))
}

fn state_of(layout: VarLayout, p: &PhasePoint) -> Vec<f64> {
    let mut s = layout.state();
    s[layout.x_range()].copy_from_slice(&p.x);
    s[layout.eta_range()].copy_from_slice(&p.eta);
    s
}

/// The bracket formula on differentials `(dF/dx, dF/dη)`, `(dG/dx, dG/dη)`.
pub fn bracket_from_differentials(
    rho: &DMatrix<f64>,
    c: &StructureConstants,
    eta: &[f64],
    df: (&[f64], &[f64]),
    dg: (&[f64], &[f64]),
) -> f64 {
    let (n, r) = (rho.nrows(), rho.ncols());
    let mut acc = 0.0;
    for i in 0..n {
        for a in 0..r {
            let rho_ia = rho[(i, a)];
            if rho_ia != 0.0 {
                acc += rho_ia * (df.0[i] * dg.1[a] - dg.0[i] * df.1[a]);
            }
        }
    }
    for g in 0..r {
        if eta[g] == 0.0 {
            continue;
        }
        for a in 0..r {
            for b in 0..r {
                acc -= c.get(g, a, b) * eta[g] * df.1[a] * dg.1[b];
            }
        }
    }
    acc
}

/// `{F, G}(p)` for the linear Poisson structure of `model`.
pub fn poisson_bracket(
    model: &AlgebroidModel,
    f: &ScalarField,
    g: &ScalarField,
    p: &PhasePoint,
) -> Result<f64, PoissonError> {
    p.check(model)?;
    let sf = phase_state(model, f, p)?;
    let sg = phase_state(model, g, p)?;
    let layout = f.layout();
    let df = (f.gradient(&sf, layout.x_range())?, f.gradient(&sf, layout.eta_range())?);
    let dg = (g.gradient(&sg, layout.x_range())?, g.gradient(&sg, layout.eta_range())?);
    let rho = model.eval_anchor(&p.x)?;
    let c = model.eval_structure(&p.x)?;
    Ok(bracket_from_differentials(&rho, &c, &p.eta, (&df.0, &df.1), (&dg.0, &dg.1)))
}

/// Kirillov–Kostant bracket on `𝔤*`: `{f, h}(λ) = −⟨λ, [∇f, ∇h]⟩`.
///
/// Computed from the Lie bracket of the gradients, independently of
/// [`poisson_bracket`]; the sign matches it on a Lie algebra model.
pub fn kirillov_kostant(
    algebra: &StructureConstants,
    f: &ScalarField,
    h: &ScalarField,
    lambda: &[f64],
) -> Result<f64, PoissonError> {
    let r = algebra.dim();
    if lambda.len() != r {
        return Err(PoissonError::Dimension(format!(
            "lambda has length {}, algebra dimension is {r}",
            lambda.len()
        )));
    }
    let grad = |field: &ScalarField| -> Result<Vec<f64>, PoissonError> {
        let layout = field.layout();
        if layout.rank != r || field.depends_on_range(0..layout.base_dim) || field.depends_on_range(layout.eta_range().end..layout.len()) {
            return Err(PoissonError::VariableMismatch {
                field: field.tree().render(),
                detail: format!("expected a function of eta1..eta{r} only"),
            });
        }
        let mut s = layout.state();
        s[layout.eta_range()].copy_from_slice(lambda);
        Ok(field.gradient(&s, layout.eta_range())?)
    };
    let bracket = algebra.bracket(&grad(f)?, &grad(h)?);
    Ok(-lambda.iter().zip(&bracket).map(|(l, b)| l * b).sum::<f64>())
}

/// Hamiltonian vector field components at a full state vector laid out as
/// `H.layout()`; extra variables (controls, time) are held fixed.
///
/// `ẋⁱ = ρⁱ_α ∂H/∂η_α`, `η̇_α = −(ρⁱ_α ∂H/∂xⁱ + C^γ_{αβ} η_γ ∂H/∂η_β)`.
pub fn vector_field_at_state(
    model: &AlgebroidModel,
    h: &ScalarField,
    state: &[f64],
) -> Result<(Vec<f64>, Vec<f64>), PoissonError> {
    let layout = h.layout();
    let x = &state[layout.x_range()];
    let eta = &state[layout.eta_range()];
    let dh_dx = h.gradient(state, layout.x_range())?;
    let dh_deta = h.gradient(state, layout.eta_range())?;
    let rho = model.eval_anchor(x)?;
    let c = model.eval_structure(x)?;
    Ok(vector_field_from_differential(&rho, &c, eta, &dh_dx, &dh_deta))
}

pub(crate) fn vector_field_from_differential(
    rho: &DMatrix<f64>,
    c: &StructureConstants,
    eta: &[f64],
    dh_dx: &[f64],
    dh_deta: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let (n, r) = (rho.nrows(), rho.ncols());
    let xdot = mat_vec(rho, dh_deta);
    let mut etadot = vec![0.0; r];
    for (a, out) in etadot.iter_mut().enumerate() {
        let mut acc = 0.0;
        for i in 0..n {
            acc += rho[(i, a)] * dh_dx[i];
        }
        for g in 0..r {
            if eta[g] == 0.0 {
                continue;
            }
            for b in 0..r {
                acc += c.get(g, a, b) * eta[g] * dh_deta[b];
            }
        }
        *out = -acc;
    }
    (xdot, etadot)
}

/// `(ẋ, η̇)` of the Hamiltonian vector field of `h` at `p`.
pub fn hamiltonian_vector_field(
    model: &AlgebroidModel,
    h: &ScalarField,
    p: &PhasePoint,
) -> Result<(Vec<f64>, Vec<f64>), PoissonError> {
    p.check(model)?;
    let state = phase_state(model, h, p)?;
    vector_field_at_state(model, h, &state)
}

/// `⟨θ, Z⟩ = η_α z^α`.
pub fn canonical_one_form(model: &AlgebroidModel, z: &ProlongationVector) -> Result<f64, PoissonError> {
    z.check(model)?;
    Ok(z.point.eta.iter().zip(&z.z).map(|(e, z)| e * z).sum())
}

/// `ω(Z1, Z2)` for `ω = 𝒳^α ∧ 𝒱^α + ½ C^γ_{αβ} η_γ 𝒳^α ∧ 𝒳^β`.
pub fn symplectic_pairing(
    model: &AlgebroidModel,
    z1: &ProlongationVector,
    z2: &ProlongationVector,
) -> Result<f64, PoissonError> {
    z1.check(model)?;
    z2.check(model)?;
    if z1.point != z2.point {
        return Err(PoissonError::BasePointMismatch);
    }
    let r = model.rank();
    let c = model.eval_structure(&z1.point.x)?;
    let eta = &z1.point.eta;
    let mut acc = 0.0;
    for a in 0..r {
        acc += z1.z[a] * z2.v[a] - z2.z[a] * z1.v[a];
    }
    for g in 0..r {
        for a in 0..r {
            for b in 0..r {
                acc += c.get(g, a, b) * eta[g] * z1.z[a] * z2.z[b];
            }
        }
    }
    Ok(acc)
}

/// The section `f_H` with `i_{f_H} ω = dH`, as prolongation coefficients:
/// `z^α = ∂H/∂η_α`, `v_α = −(ρⁱ_α ∂H/∂xⁱ + C^γ_{αβ} η_γ ∂H/∂η_β)`.
pub fn hamiltonian_section(
    model: &AlgebroidModel,
    h: &ScalarField,
    p: &PhasePoint,
) -> Result<ProlongationVector, PoissonError> {
    p.check(model)?;
    let state = phase_state(model, h, p)?;
    let layout = h.layout();
    let z = h.gradient(&state, layout.eta_range())?;
    let (_, v) = vector_field_at_state(model, h, &state)?;
    Ok(ProlongationVector::new(p.clone(), z, v))
}

/// `dH(Z) = ρⁱ_α ∂H/∂xⁱ z^α + ∂H/∂η_α v^α`.
pub fn differential_pairing(
    model: &AlgebroidModel,
    h: &ScalarField,
    z: &ProlongationVector,
) -> Result<f64, PoissonError> {
    z.check(model)?;
    let state = phase_state(model, h, &z.point)?;
    let layout = h.layout();
    let dx = h.gradient(&state, layout.x_range())?;
    let deta = h.gradient(&state, layout.eta_range())?;
    let rho = model.eval_anchor(&z.point.x)?;
    let mut acc = 0.0;
    for a in 0..model.rank() {
        let mut coeff = 0.0;
        for i in 0..model.base_dim() {
            coeff += rho[(i, a)] * dx[i];
        }
        acc += coeff * z.z[a] + deta[a] * z.v[a];
    }
    Ok(acc)
}

/// `max_Z |ω(f_H, Z) − dH(Z)|` over the probes.
pub fn verify_hamiltonian_section(
    model: &AlgebroidModel,
    h: &ScalarField,
    p: &PhasePoint,
    probes: &[ProlongationVector],
) -> Result<f64, PoissonError> {
    let section = hamiltonian_section(model, h, p)?;
    let mut worst = 0.0f64;
    for z in probes {
        if z.point != *p {
            return Err(PoissonError::BasePointMismatch);
        }
        let lhs = symplectic_pairing(model, &section, z)?;
        let rhs = differential_pairing(model, h, z)?;
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::NamedAlgebra;

    fn field(model: &AlgebroidModel, src: &str) -> ScalarField {
        ScalarField::parse(src, model.layout()).unwrap()
    }

    #[test]
    fn canonical_bracket_on_tangent() {
        let m = AlgebroidModel::tangent(1);
        let p = PhasePoint::new(vec![0.4], vec![-2.0]);
        assert_eq!(poisson_bracket(&m, &field(&m, "x1"), &field(&m, "eta1"), &p).unwrap(), 1.0);
    }

    #[test]
    fn so3_linear_bracket_sign() {
        let m = AlgebroidModel::named_lie_algebra(NamedAlgebra::So3);
        let (a, b, c) = (0.3, -1.2, 2.5);
        let p = PhasePoint::new(vec![], vec![a, b, c]);
        let v = poisson_bracket(&m, &field(&m, "eta1"), &field(&m, "eta2"), &p).unwrap();
        assert_eq!(v, -c);
        let kk = kirillov_kostant(
            m.constant_structure().unwrap(),
            &field(&m, "eta1"),
            &field(&m, "eta2"),
            &p.eta,
        )
        .unwrap();
        assert_eq!(kk, -c);
    }

    #[test]
    fn self_bracket_vanishes() {
        let m = AlgebroidModel::trivial(1, NamedAlgebra::Se2);
        let f = field(&m, "x1*eta2 + sin(eta3)*eta4");
        let p = PhasePoint::new(vec![0.7], vec![1.0, -0.5, 2.0, 0.25]);
        assert_eq!(poisson_bracket(&m, &f, &f, &p).unwrap(), 0.0);
    }

    #[test]
    fn bracket_rejects_control_dependence() {
        let m = AlgebroidModel::tangent(1);
        let f = ScalarField::parse("eta1*u1", VarLayout::new(1, 1, 1)).unwrap();
        let g = ScalarField::parse("x1", VarLayout::new(1, 1, 1)).unwrap();
        let p = PhasePoint::new(vec![0.0], vec![1.0]);
        assert!(matches!(
            poisson_bracket(&m, &f, &g, &p),
            Err(PoissonError::VariableMismatch { .. })
        ));
        let f = ScalarField::parse("eta1", VarLayout::new(2, 2, 0)).unwrap();
        assert!(matches!(
            poisson_bracket(&m, &f, &f, &p),
            Err(PoissonError::VariableMismatch { .. })
        ));
    }

    #[test]
    fn rigid_body_field() {
        let m = AlgebroidModel::named_lie_algebra(NamedAlgebra::So3);
        let h = field(&m, "0.5*(eta1^2/1 + eta2^2/2 + eta3^2/3)");
        let (xdot, etadot) = hamiltonian_vector_field(&m, &h, &PhasePoint::new(vec![], vec![1.0, 1.0, 1.0])).unwrap();
        assert!(xdot.is_empty());
        // η × ∇H with ∇H = (1, 1/2, 1/3)
        let expect = [1.0 / 3.0 - 0.5, 1.0 - 1.0 / 3.0, 0.5 - 1.0];
        for (got, want) in etadot.iter().zip(expect) {
            assert!((got - want).abs() < 1e-15, "{got} vs {want}");
        }
    }

    #[test]
    fn canonical_equations_on_tangent() {
        let m = AlgebroidModel::tangent(1);
        let h = field(&m, "0.5*eta1^2 + cos(x1)");
        let (xdot, etadot) = hamiltonian_vector_field(&m, &h, &PhasePoint::new(vec![0.5], vec![3.0])).unwrap();
        assert_eq!(xdot, vec![3.0]);
        assert_eq!(etadot, vec![0.5f64.sin()]);
        let zero = field(&m, "4");
        let (xdot, etadot) = hamiltonian_vector_field(&m, &zero, &PhasePoint::new(vec![0.5], vec![3.0])).unwrap();
        assert_eq!((xdot, etadot), (vec![0.0], vec![0.0]));
    }

    #[test]
    fn one_form_examples() {
        let m = AlgebroidModel::tangent(2);
        let at = |eta: [f64; 2]| PhasePoint::new(vec![0.0, 0.0], eta.to_vec());
        let z = |p: PhasePoint, z: [f64; 2]| ProlongationVector::new(p, z.to_vec(), vec![0.0; 2]);
        assert_eq!(canonical_one_form(&m, &z(at([2.0, 3.0]), [0.0, 0.0])).unwrap(), 0.0);
        assert_eq!(canonical_one_form(&m, &z(at([1.0, 0.0]), [0.0, 1.0])).unwrap(), 0.0);
        assert_eq!(canonical_one_form(&m, &z(at([2.0, 3.0]), [1.0, 1.0])).unwrap(), 5.0);
    }

    #[test]
    fn symplectic_examples() {
        let m = AlgebroidModel::tangent(2);
        let p = PhasePoint::new(vec![0.0, 0.0], vec![0.3, 0.1]);
        let z1 = ProlongationVector::new(p.clone(), vec![1.0, 0.0], vec![0.0, 0.0]);
        let z2 = ProlongationVector::new(p.clone(), vec![0.0, 0.0], vec![1.0, 0.0]);
        assert_eq!(symplectic_pairing(&m, &z1, &z2).unwrap(), 1.0);
        assert_eq!(symplectic_pairing(&m, &z2, &z1).unwrap(), -1.0);
        assert_eq!(symplectic_pairing(&m, &z1, &z1).unwrap(), 0.0);

        let m = AlgebroidModel::named_lie_algebra(NamedAlgebra::So3);
        let p = PhasePoint::new(vec![], vec![0.0, 0.0, 1.0]);
        let e1 = ProlongationVector::new(p.clone(), vec![1.0, 0.0, 0.0], vec![0.0; 3]);
        let e2 = ProlongationVector::new(p.clone(), vec![0.0, 1.0, 0.0], vec![0.0; 3]);
        assert_eq!(symplectic_pairing(&m, &e1, &e2).unwrap(), 1.0);

        let other = ProlongationVector::new(PhasePoint::new(vec![], vec![1.0, 0.0, 0.0]), vec![0.0; 3], vec![0.0; 3]);
        assert_eq!(symplectic_pairing(&m, &e1, &other), Err(PoissonError::BasePointMismatch));
    }

    #[test]
    fn constant_hamiltonian_section_is_zero() {
        let m = AlgebroidModel::trivial(1, NamedAlgebra::So3);
        let h = field(&m, "2.5");
        let p = PhasePoint::new(vec![0.1], vec![1.0, 2.0, 3.0, 4.0]);
        let probe = ProlongationVector::new(p.clone(), vec![1.0, -1.0, 0.5, 2.0], vec![0.3, 0.0, -1.0, 1.0]);
        assert_eq!(verify_hamiltonian_section(&m, &h, &p, &[probe]).unwrap(), 0.0);
    }

    #[test]
    fn prolongation_base_velocity_uses_anchor() {
        let m = AlgebroidModel::trivial(2, NamedAlgebra::So3);
        let p = PhasePoint::new(vec![0.0, 0.0], vec![0.0; 5]);
        let z = ProlongationVector::new(p, vec![1.0, 2.0, 3.0, 4.0, 5.0], vec![0.0; 5]);
        assert_eq!(z.base_velocity(&m).unwrap(), vec![1.0, 2.0]);
    }
}
