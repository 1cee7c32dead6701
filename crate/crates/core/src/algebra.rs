//! Finite-dimensional Lie algebras given by structure constants, and the
//! named algebras used by the catalog together with faithful matrix bases.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AlgebraError {
    #[error("unknown algebra `{0}` (expected so3, heisenberg3, se2 or abelian_<r>)")]
    UnknownAlgebra(String),
    #[error("index ({gamma}, {alpha}, {beta}) out of range for dimension {dim}")]
    IndexOutOfRange {
        gamma: usize,
        alpha: usize,
        beta: usize,
        dim: usize,
    },
    #[error("diagonal entry C^{gamma}_({alpha},{alpha}) must vanish, got {value}")]
    NonZeroDiagonal {
        gamma: usize,
        alpha: usize,
        value: f64,
    },
}

/// Constants `C^γ_{αβ}` of a bracket `[e_α, e_β] = C^γ_{αβ} e_γ` (0-based).
///
/// Only entries with `α < β` are stored, reads antisymmetrize, so
/// `get(g, a, b) == -get(g, b, a)` holds exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureConstants {
    dim: usize,
    data: Vec<f64>,
}

impl StructureConstants {
    pub fn zero(dim: usize) -> Self {
        StructureConstants {
            dim,
            data: vec![0.0; dim * dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn offset(&self, gamma: usize, alpha: usize, beta: usize) -> usize {
        (gamma * self.dim + alpha) * self.dim + beta
    }

    /// Sets `C^γ_{αβ} = value` (and implicitly `C^γ_{βα} = -value`).
    pub fn set(&mut self, gamma: usize, alpha: usize, beta: usize, value: f64) -> Result<(), AlgebraError> {
        let dim = self.dim;
        if gamma >= dim || alpha >= dim || beta >= dim {
            return Err(AlgebraError::IndexOutOfRange {
                gamma,
                alpha,
                beta,
                dim,
            });
        }
        if alpha == beta {
            if value != 0.0 {
                return Err(AlgebraError::NonZeroDiagonal { gamma, alpha, value });
            }
            return Ok(());
        }
        let (a, b, v) = if alpha < beta {
            (alpha, beta, value)
        } else {
            (beta, alpha, -value)
        };
        let k = self.offset(gamma, a, b);
        self.data[k] = v;
        Ok(())
    }

    #[inline]
    pub fn get(&self, gamma: usize, alpha: usize, beta: usize) -> f64 {
        use std::cmp::Ordering;
        match alpha.cmp(&beta) {
            Ordering::Less => self.data[self.offset(gamma, alpha, beta)],
            Ordering::Greater => -self.data[self.offset(gamma, beta, alpha)],
            Ordering::Equal => 0.0,
        }
    }

    /// Builds constants from `(γ, α, β, value)` entries.
    pub fn from_entries(
        dim: usize,
        entries: impl IntoIterator<Item = (usize, usize, usize, f64)>,
    ) -> Result<Self, AlgebraError> {
        let mut c = Self::zero(dim);
        for (g, a, b, v) in entries {
            c.set(g, a, b, v)?;
        }
        Ok(c)
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    /// Coefficients of `[x, y]`.
    pub fn bracket(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut out = vec![0.0; d];
        for (g, slot) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for a in 0..d {
                if x[a] == 0.0 {
                    continue;
                }
                for b in 0..d {
                    acc += self.get(g, a, b) * x[a] * y[b];
                }
            }
            *slot = acc;
        }
        out
    }

    /// `ad*_{e_α} ξ`, defined by `⟨ad*_X ξ, Y⟩ = ⟨ξ, [Y, X]⟩`.
    pub fn ad_star_basis(&self, alpha: usize, xi: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|beta| (0..self.dim).map(|g| xi[g] * self.get(g, beta, alpha)).sum())
            .collect()
    }

    /// Copy embedded at index `offset` of a larger zero tensor.
    pub fn embedded(&self, total_dim: usize, offset: usize) -> Self {
        let mut out = Self::zero(total_dim);
        for g in 0..self.dim {
            for a in 0..self.dim {
                for b in a + 1..self.dim {
                    let v = self.get(g, a, b);
                    if v != 0.0 {
                        let k = out.offset(g + offset, a + offset, b + offset);
                        out.data[k] = v;
                    }
                }
            }
        }
        out
    }
}

/// Algebras with a built-in matrix realization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NamedAlgebra {
    /// Rotations; `[e1, e2] = e3` cyclically.
    So3,
    /// `[e1, e2] = e3`, `e3` central.
    Heisenberg3,
    /// Planar rigid motions with basis (rotation, x-translation, y-translation).
    Se2,
    Abelian(usize),
}

impl NamedAlgebra {
    pub fn dim(self) -> usize {
        match self {
            NamedAlgebra::So3 | NamedAlgebra::Heisenberg3 | NamedAlgebra::Se2 => 3,
            NamedAlgebra::Abelian(r) => r,
        }
    }

    pub fn structure_constants(self) -> StructureConstants {
        let entries: Vec<(usize, usize, usize, f64)> = match self {
            NamedAlgebra::So3 => vec![(2, 0, 1, 1.0), (0, 1, 2, 1.0), (1, 2, 0, 1.0)],
            NamedAlgebra::Heisenberg3 => vec![(2, 0, 1, 1.0)],
            // [J, P1] = P2, [J, P2] = -P1, [P1, P2] = 0
            NamedAlgebra::Se2 => vec![(2, 0, 1, 1.0), (1, 0, 2, -1.0)],
            NamedAlgebra::Abelian(_) => vec![],
        };
        StructureConstants::from_entries(self.dim(), entries).expect("catalog constants are valid")
    }

    /// Matrices `E_α` with `[E_α, E_β] = C^γ_{αβ} E_γ`.
    pub fn matrix_basis(self) -> Vec<DMatrix<f64>> {
        let unit = |d: usize, i: usize, j: usize| {
            let mut m = DMatrix::zeros(d, d);
            m[(i, j)] = 1.0;
            m
        };
        match self {
            NamedAlgebra::So3 => {
                let hat = |w: [f64; 3]| {
                    DMatrix::from_row_slice(3, 3, &[0.0, -w[2], w[1], w[2], 0.0, -w[0], -w[1], w[0], 0.0])
                };
                vec![hat([1.0, 0.0, 0.0]), hat([0.0, 1.0, 0.0]), hat([0.0, 0.0, 1.0])]
            }
            NamedAlgebra::Heisenberg3 => vec![unit(3, 0, 1), unit(3, 1, 2), unit(3, 0, 2)],
            NamedAlgebra::Se2 => {
                let j = DMatrix::from_row_slice(3, 3, &[0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
                vec![j, unit(3, 0, 2), unit(3, 1, 2)]
            }
            NamedAlgebra::Abelian(r) => (0..r).map(|i| unit(r, i, i)).collect(),
        }
    }

    /// Polynomial Casimirs of the linear bracket, in `eta1..etaK`.
    pub fn casimirs(self) -> Vec<String> {
        match self {
            NamedAlgebra::So3 => vec!["eta1^2+eta2^2+eta3^2".into()],
            NamedAlgebra::Heisenberg3 => vec!["eta3".into()],
            NamedAlgebra::Se2 => vec!["eta2^2+eta3^2".into()],
            NamedAlgebra::Abelian(r) => (1..=r).map(|i| format!("eta{i}")).collect(),
        }
    }
}

impl fmt::Display for NamedAlgebra {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NamedAlgebra::So3 => f.write_str("so3"),
            NamedAlgebra::Heisenberg3 => f.write_str("heisenberg3"),
            NamedAlgebra::Se2 => f.write_str("se2"),
            NamedAlgebra::Abelian(r) => write!(f, "abelian_{r}"),
        }
    }
}

impl FromStr for NamedAlgebra {
    type Err = AlgebraError;

    /// Accepts `so3`, `heisenberg3`, `se2` and `abelian_<r>` (r ≥ 1).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "so3" => Ok(NamedAlgebra::So3),
            "heisenberg3" => Ok(NamedAlgebra::Heisenberg3),
            "se2" => Ok(NamedAlgebra::Se2),
            _ => s
                .strip_prefix("abelian_")
                .and_then(|r| r.parse::<usize>().ok())
                .filter(|&r| r >= 1)
                .map(NamedAlgebra::Abelian)
                .ok_or_else(|| AlgebraError::UnknownAlgebra(s.to_string())),
        }
    }
}
