use std::ops::Range;

use thiserror::Error;

use super::eval::eval_dual;
use super::{parse, EvalError, ExpressionTree, ParseError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("variable `{name}` is not one of the layout variables ({layout})")]
    UnknownVariable { name: String, layout: String },
}

/// Reserved variable names for a problem with `n` base coordinates,
/// rank `r` and `m` controls: `x1..xn`, `eta1..etar`, `u1..um`, `t`.
///
/// A state vector is laid out in the same order, with `t` last.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarLayout {
    pub base_dim: usize,
    pub rank: usize,
    pub control_dim: usize,
}

impl VarLayout {
    pub fn new(base_dim: usize, rank: usize, control_dim: usize) -> Self {
        VarLayout {
            base_dim,
            rank,
            control_dim,
        }
    }

    pub fn len(&self) -> usize {
        self.base_dim + self.rank + self.control_dim + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn x_range(&self) -> Range<usize> {
        0..self.base_dim
    }

    pub fn eta_range(&self) -> Range<usize> {
        self.base_dim..self.base_dim + self.rank
    }

    pub fn u_range(&self) -> Range<usize> {
        let start = self.base_dim + self.rank;
        start..start + self.control_dim
    }

    pub fn t_index(&self) -> usize {
        self.base_dim + self.rank + self.control_dim
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        if name == "t" {
            return Some(self.t_index());
        }
        let (prefix, limit, offset) = if let Some(rest) = name.strip_prefix("eta") {
            (rest, self.rank, self.base_dim)
        } else if let Some(rest) = name.strip_prefix('x') {
            (rest, self.base_dim, 0)
        } else if let Some(rest) = name.strip_prefix('u') {
            (rest, self.control_dim, self.base_dim + self.rank)
        } else {
            return None;
        };
        if prefix.starts_with('0') {
            return None;
        }
        let k: usize = prefix.parse().ok()?;
        (1..=limit).contains(&k).then_some(offset + k - 1)
    }

    pub fn name_of(&self, index: usize) -> String {
        if index < self.base_dim {
            format!("x{}", index + 1)
        } else if index < self.base_dim + self.rank {
            format!("eta{}", index - self.base_dim + 1)
        } else if index < self.t_index() {
            format!("u{}", index - self.base_dim - self.rank + 1)
        } else {
            "t".to_string()
        }
    }

    fn describe(&self) -> String {
        let mut parts = Vec::new();
        if self.base_dim > 0 {
            parts.push(format!("x1..x{}", self.base_dim));
        }
        if self.rank > 0 {
            parts.push(format!("eta1..eta{}", self.rank));
        }
        if self.control_dim > 0 {
            parts.push(format!("u1..u{}", self.control_dim));
        }
        parts.push("t".into());
        parts.join(", ")
    }

    /// Fresh zeroed state vector.
    pub fn state(&self) -> Vec<f64> {
        vec![0.0; self.len()]
    }
}

/// A differentiable scalar function of `(x, eta, u, t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    tree: ExpressionTree,
    layout: VarLayout,
    // tree slot -> state index
    slots: Vec<usize>,
}

impl ScalarField {
    pub fn new(tree: ExpressionTree, layout: VarLayout) -> Result<Self, FieldError> {
        let slots = tree
            .free_variables()
            .iter()
            .map(|name| {
                layout
                    .index_of(name)
                    .ok_or_else(|| FieldError::UnknownVariable {
                        name: name.clone(),
                        layout: layout.describe(),
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ScalarField {
            tree,
            layout,
            slots,
        })
    }

    pub fn parse(source: &str, layout: VarLayout) -> Result<Self, FieldError> {
        Self::new(parse(source)?, layout)
    }

    pub fn constant(value: f64, layout: VarLayout) -> Self {
        ScalarField {
            tree: ExpressionTree::constant(value),
            layout,
            slots: Vec::new(),
        }
    }

    pub fn tree(&self) -> &ExpressionTree {
        &self.tree
    }

    pub fn layout(&self) -> VarLayout {
        self.layout
    }

    /// Same expression re-homed on another layout.
    pub fn with_layout(&self, layout: VarLayout) -> Result<Self, FieldError> {
        Self::new(self.tree.clone(), layout)
    }

    /// True if any state index in `range` occurs in the expression.
    pub fn depends_on_range(&self, range: Range<usize>) -> bool {
        self.slots.iter().any(|s| range.contains(s))
    }

    fn gather(&self, state: &[f64]) -> Vec<f64> {
        debug_assert_eq!(state.len(), self.layout.len());
        self.slots.iter().map(|&s| state[s]).collect()
    }

    pub fn value(&self, state: &[f64]) -> Result<f64, EvalError> {
        let vals = self.gather(state);
        Ok(eval_dual(&self.tree, self.tree.root(), &vals, None)?.re)
    }

    /// Partial derivative along state index `index`; zero when the
    /// expression does not mention that variable.
    pub fn partial(&self, state: &[f64], index: usize) -> Result<f64, EvalError> {
        let vals = self.gather(state);
        self.partial_with(&vals, index)
    }

    fn partial_with(&self, vals: &[f64], index: usize) -> Result<f64, EvalError> {
        match self.slots.iter().position(|&s| s == index) {
            Some(slot) => Ok(eval_dual(&self.tree, self.tree.root(), vals, Some(slot))?.du),
            None => Ok(0.0),
        }
    }

    /// Partials along each state index of `range`.
    pub fn gradient(&self, state: &[f64], range: Range<usize>) -> Result<Vec<f64>, EvalError> {
        let vals = self.gather(state);
        range.map(|i| self.partial_with(&vals, i)).collect()
    }
}
