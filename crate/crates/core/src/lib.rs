//! Geometric optimal control on Lie algebroids.
//!
//! * [`exprlang`]: expressions with forward-mode derivatives.
//! * [`algebroid`]: algebroids by structure functions, catalog and axiom checks.
//! * [`poisson`]: linear Poisson bracket on the dual, Hamiltonian vector
//!   fields and the prolongation symplectic form.
//! * [`optctl`]: Pontryagin Hamiltonian, critical trajectories, shooting.
//! * [`coadjoint`]: matrix-group realization, coadjoint orbits and the
//!   full-versus-reduced comparison on the trivial groupoid.

pub mod algebra;
pub mod algebroid;
pub mod coadjoint;
pub mod exprlang;
pub mod optctl;
pub mod poisson;

pub use algebra::{NamedAlgebra, StructureConstants};
pub use algebroid::{AlgebroidModel, AxiomReport};
pub use exprlang::{ExpressionTree, ScalarField, VarLayout};
