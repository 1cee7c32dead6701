use std::collections::HashMap;

use thiserror::Error;

use super::{BinaryOp, ExpressionTree, Node, UnaryOp};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("domain error in `{subexpression}`: {reason}")]
    Domain {
        reason: &'static str,
        subexpression: String,
    },
}

/// Variable name to value map. Lookups of unbound names fail.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Binding {
    values: HashMap<String, f64>,
}

impl Binding {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<I, S>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        Binding {
            values: pairs.into_iter().map(|(k, v)| (k.into(), v)).collect(),
        }
    }

    pub fn set(&mut self, name: impl Into<String>, value: f64) {
        self.values.insert(name.into(), value);
    }

    pub fn get(&self, name: &str) -> Result<f64, EvalError> {
        self.values
            .get(name)
            .copied()
            .ok_or_else(|| EvalError::Unbound(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.values.contains_key(name)
    }
}

/// Value plus one directional derivative.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Dual {
    pub re: f64,
    pub du: f64,
}

fn domain(tree: &ExpressionTree, node: &Node, reason: &'static str) -> EvalError {
    EvalError::Domain {
        reason,
        subexpression: tree.render_subtree(node),
    }
}

fn is_integer(v: f64) -> bool {
    v.fract() == 0.0
}

/// Evaluates `node` with slot values `vals`, differentiating along slot
/// `seed` when given.
pub(crate) fn eval_dual(
    tree: &ExpressionTree,
    node: &Node,
    vals: &[f64],
    seed: Option<usize>,
) -> Result<Dual, EvalError> {
    let out = match node {
        Node::Const(c) => Dual { re: *c, du: 0.0 },
        Node::Var(i) => Dual {
            re: vals[*i],
            du: if seed == Some(*i) { 1.0 } else { 0.0 },
        },
        Node::Unary(op, arg) => {
            let a = eval_dual(tree, arg, vals, seed)?;
            match op {
                UnaryOp::Neg => Dual { re: -a.re, du: -a.du },
                UnaryOp::Sin => Dual {
                    re: a.re.sin(),
                    du: a.re.cos() * a.du,
                },
                UnaryOp::Cos => Dual {
                    re: a.re.cos(),
                    du: -a.re.sin() * a.du,
                },
                UnaryOp::Tan => {
                    let t = a.re.tan();
                    Dual {
                        re: t,
                        du: (1.0 + t * t) * a.du,
                    }
                }
                UnaryOp::Exp => {
                    let e = a.re.exp();
                    Dual { re: e, du: e * a.du }
                }
                UnaryOp::Log => {
                    if a.re <= 0.0 {
                        return Err(domain(tree, node, "logarithm of a non-positive number"));
                    }
                    Dual {
                        re: a.re.ln(),
                        du: a.du / a.re,
                    }
                }
                UnaryOp::Sqrt => {
                    if a.re < 0.0 {
                        return Err(domain(tree, node, "square root of a negative number"));
                    }
                    let s = a.re.sqrt();
                    let du = if a.du == 0.0 { 0.0 } else { 0.5 * a.du / s };
                    Dual { re: s, du }
                }
                UnaryOp::Abs => {
                    let sign = if a.re > 0.0 {
                        1.0
                    } else if a.re < 0.0 {
                        -1.0
                    } else {
                        0.0
                    };
                    Dual {
                        re: a.re.abs(),
                        du: sign * a.du,
                    }
                }
            }
        }
        Node::Binary(op, lhs, rhs) => {
            let a = eval_dual(tree, lhs, vals, seed)?;
            let b = eval_dual(tree, rhs, vals, seed)?;
            match op {
                BinaryOp::Add => Dual {
                    re: a.re + b.re,
                    du: a.du + b.du,
                },
                BinaryOp::Sub => Dual {
                    re: a.re - b.re,
                    du: a.du - b.du,
                },
                BinaryOp::Mul => Dual {
                    re: a.re * b.re,
                    du: a.du * b.re + a.re * b.du,
                },
                BinaryOp::Div => {
                    if b.re == 0.0 {
                        return Err(domain(tree, node, "division by zero"));
                    }
                    Dual {
                        re: a.re / b.re,
                        du: (a.du * b.re - a.re * b.du) / (b.re * b.re),
                    }
                }
                BinaryOp::Pow => pow_dual(tree, node, a, b)?,
            }
        }
    };
    if !out.re.is_finite() {
        return Err(domain(tree, node, "non-finite result"));
    }
    if !out.du.is_finite() {
        return Err(domain(tree, node, "non-finite derivative"));
    }
    Ok(out)
}

fn pow_dual(tree: &ExpressionTree, node: &Node, a: Dual, b: Dual) -> Result<Dual, EvalError> {
    if a.re < 0.0 && !is_integer(b.re) {
        return Err(domain(tree, node, "negative base with non-integer exponent"));
    }
    if a.re == 0.0 && b.re < 0.0 {
        return Err(domain(tree, node, "division by zero"));
    }
    let re = a.re.powf(b.re);
    let mut du = 0.0;
    if a.du != 0.0 {
        du += b.re * a.re.powf(b.re - 1.0) * a.du;
    }
    if b.du != 0.0 {
        if a.re <= 0.0 {
            return Err(domain(tree, node, "variable exponent needs a positive base"));
        }
        du += re * a.re.ln() * b.du;
    }
    Ok(Dual { re, du })
}

fn gather(tree: &ExpressionTree, env: &Binding) -> Result<Vec<f64>, EvalError> {
    tree.free_variables().iter().map(|v| env.get(v)).collect()
}

/// Evaluates `tree` under `env`.
pub fn evaluate(tree: &ExpressionTree, env: &Binding) -> Result<f64, EvalError> {
    let vals = gather(tree, env)?;
    Ok(eval_dual(tree, tree.root(), &vals, None)?.re)
}

fn derivative_with(
    tree: &ExpressionTree,
    vals: &[f64],
    var: &str,
    env: &Binding,
) -> Result<f64, EvalError> {
    match tree.free_variables().iter().position(|v| v == var) {
        Some(slot) => Ok(eval_dual(tree, tree.root(), vals, Some(slot))?.du),
        None => {
            env.get(var)?;
            eval_dual(tree, tree.root(), vals, None)?;
            Ok(0.0)
        }
    }
}

/// Exact forward-mode partial derivative `∂tree/∂var` at `env`.
pub fn derivative(tree: &ExpressionTree, var: &str, env: &Binding) -> Result<f64, EvalError> {
    let vals = gather(tree, env)?;
    derivative_with(tree, &vals, var, env)
}

/// Partial derivatives with respect to each name in `vars`, in order.
pub fn gradient(tree: &ExpressionTree, vars: &[&str], env: &Binding) -> Result<Vec<f64>, EvalError> {
    let vals = gather(tree, env)?;
    vars.iter()
        .map(|v| derivative_with(tree, &vals, v, env))
        .collect()
}
