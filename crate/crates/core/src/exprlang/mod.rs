//! A small expression language for structure functions, Hamiltonians,
//! control systems and costs.
//!
//! Expressions are parsed into an [`ExpressionTree`] whose variables are
//! resolved to tree-local slots. Values and exact first derivatives are
//! obtained by forward-mode (dual number) evaluation, see [`evaluate`],
//! [`derivative`] and [`gradient`].
//!
//! ```
//! use algctl_core::exprlang::{parse, evaluate, derivative, Binding};
//!
//! let tree = parse("sin(x1)*x2").unwrap();
//! let env = Binding::from_pairs([("x1", 0.0), ("x2", 3.0)]);
//! assert_eq!(evaluate(&tree, &env).unwrap(), 0.0);
//! assert_eq!(derivative(&tree, "x1", &env).unwrap(), 3.0);
//! ```

mod eval;
mod field;
mod parse;

use std::fmt;

pub use eval::{derivative, evaluate, gradient, Binding, EvalError};
pub use field::{FieldError, ScalarField, VarLayout};
pub use parse::{parse, ParseError};

/// Names that may appear in call position and never as variables.
pub const FUNCTION_NAMES: [&str; 7] = ["sin", "cos", "tan", "exp", "log", "sqrt", "abs"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl UnaryOp {
    pub fn from_function_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => UnaryOp::Sin,
            "cos" => UnaryOp::Cos,
            "tan" => UnaryOp::Tan,
            "exp" => UnaryOp::Exp,
            "log" => UnaryOp::Log,
            "sqrt" => UnaryOp::Sqrt,
            "abs" => UnaryOp::Abs,
            _ => return None,
        })
    }

    /// Function name, `None` for negation.
    pub fn function_name(self) -> Option<&'static str> {
        Some(match self {
            UnaryOp::Neg => return None,
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Tan => "tan",
            UnaryOp::Exp => "exp",
            UnaryOp::Log => "log",
            UnaryOp::Sqrt => "sqrt",
            UnaryOp::Abs => "abs",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    pub fn symbol(self) -> char {
        match self {
            BinaryOp::Add => '+',
            BinaryOp::Sub => '-',
            BinaryOp::Mul => '*',
            BinaryOp::Div => '/',
            BinaryOp::Pow => '^',
        }
    }
}

/// Expression node. Variables refer to a slot of the owning tree's
/// variable list.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    Var(usize),
    Unary(UnaryOp, Box<Node>),
    Binary(BinaryOp, Box<Node>, Box<Node>),
}

/// A parsed expression together with its free variables.
///
/// Every `Node::Var(i)` indexes into `vars`, and every entry of `vars` is
/// referenced by at least one node.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpressionTree {
    root: Node,
    vars: Vec<String>,
}

impl ExpressionTree {
    pub fn constant(value: f64) -> Self {
        ExpressionTree {
            root: Node::Const(value),
            vars: Vec::new(),
        }
    }

    /// A bare variable. Panics if `name` is not a valid identifier or is a
    /// reserved function name.
    pub fn variable(name: &str) -> Self {
        assert!(
            is_identifier(name) && !FUNCTION_NAMES.contains(&name),
            "invalid variable name {name:?}"
        );
        ExpressionTree {
            root: Node::Var(0),
            vars: vec![name.to_string()],
        }
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    /// Free variables in order of first appearance.
    pub fn free_variables(&self) -> &[String] {
        &self.vars
    }

    pub fn depends_on(&self, name: &str) -> bool {
        self.vars.iter().any(|v| v == name)
    }

    pub fn unary(op: UnaryOp, arg: ExpressionTree) -> Self {
        ExpressionTree {
            root: Node::Unary(op, Box::new(arg.root)),
            vars: arg.vars,
        }
    }

    pub fn binary(op: BinaryOp, lhs: ExpressionTree, rhs: ExpressionTree) -> Self {
        let mut vars = lhs.vars;
        let mut rhs_root = rhs.root;
        let remap: Vec<usize> = rhs
            .vars
            .into_iter()
            .map(|name| match vars.iter().position(|v| *v == name) {
                Some(i) => i,
                None => {
                    vars.push(name);
                    vars.len() - 1
                }
            })
            .collect();
        remap_slots(&mut rhs_root, &remap);
        ExpressionTree {
            root: Node::Binary(op, Box::new(lhs.root), Box::new(rhs_root)),
            vars,
        }
    }

    /// Renames variables through `f`. Names that collide after renaming
    /// are merged into one variable.
    pub fn rename_variables<F>(&self, mut f: F) -> Self
    where
        F: FnMut(&str) -> String,
    {
        let mut vars: Vec<String> = Vec::with_capacity(self.vars.len());
        let remap: Vec<usize> = self
            .vars
            .iter()
            .map(|old| {
                let new = f(old);
                match vars.iter().position(|v| *v == new) {
                    Some(i) => i,
                    None => {
                        vars.push(new);
                        vars.len() - 1
                    }
                }
            })
            .collect();
        let mut root = self.root.clone();
        remap_slots(&mut root, &remap);
        ExpressionTree { root, vars }
    }

    /// Fully parenthesized rendering that re-parses to the same tree.
    pub fn render(&self) -> String {
        let mut out = String::new();
        render_node(&self.root, &self.vars, &mut out);
        out
    }

    pub(crate) fn from_parts(root: Node, vars: Vec<String>) -> Self {
        ExpressionTree { root, vars }
    }

    pub(crate) fn render_subtree(&self, node: &Node) -> String {
        let mut out = String::new();
        render_node(node, &self.vars, &mut out);
        out
    }
}

impl fmt::Display for ExpressionTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl std::ops::Add for ExpressionTree {
    type Output = ExpressionTree;
    fn add(self, rhs: ExpressionTree) -> ExpressionTree {
        ExpressionTree::binary(BinaryOp::Add, self, rhs)
    }
}

impl std::ops::Sub for ExpressionTree {
    type Output = ExpressionTree;
    fn sub(self, rhs: ExpressionTree) -> ExpressionTree {
        ExpressionTree::binary(BinaryOp::Sub, self, rhs)
    }
}

impl std::ops::Mul for ExpressionTree {
    type Output = ExpressionTree;
    fn mul(self, rhs: ExpressionTree) -> ExpressionTree {
        ExpressionTree::binary(BinaryOp::Mul, self, rhs)
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn remap_slots(node: &mut Node, remap: &[usize]) {
    match node {
        Node::Const(_) => {}
        Node::Var(i) => *i = remap[*i],
        Node::Unary(_, a) => remap_slots(a, remap),
        Node::Binary(_, a, b) => {
            remap_slots(a, remap);
            remap_slots(b, remap);
        }
    }
}

fn render_node(node: &Node, vars: &[String], out: &mut String) {
    match node {
        // Rust's shortest round-trip formatting; parser never yields
        // negative or non-finite constants.
        Node::Const(c) => {
            if c.is_sign_negative() {
                out.push_str("(-");
                out.push_str(&format_number(-c));
                out.push(')');
            } else {
                out.push_str(&format_number(*c));
            }
        }
        Node::Var(i) => out.push_str(&vars[*i]),
        Node::Unary(UnaryOp::Neg, a) => {
            out.push_str("(-");
            render_node(a, vars, out);
            out.push(')');
        }
        Node::Unary(op, a) => {
            out.push_str(op.function_name().unwrap_or_default());
            out.push('(');
            render_node(a, vars, out);
            out.push(')');
        }
        Node::Binary(op, a, b) => {
            out.push('(');
            render_node(a, vars, out);
            out.push(op.symbol());
            render_node(b, vars, out);
            out.push(')');
        }
    }
}

fn format_number(c: f64) -> String {
    if c.is_finite() {
        // `{:e}` keeps huge and tiny magnitudes short and is round-trip exact.
        let plain = format!("{c}");
        if plain.len() > 24 {
            format!("{c:e}")
        } else {
            plain
        }
    } else {
        // Only reachable through programmatic construction.
        format!("{c}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_merges_variables() {
        let t = parse("x1*eta1").unwrap() + parse("eta1+u1").unwrap();
        assert_eq!(t.free_variables(), &["x1", "eta1", "u1"]);
        let env = Binding::from_pairs([("x1", 2.0), ("eta1", 3.0), ("u1", 1.0)]);
        assert_eq!(evaluate(&t, &env).unwrap(), 10.0);
    }

    #[test]
    fn rename_merges_collisions() {
        let t = parse("a+b").unwrap().rename_variables(|_| "z".into());
        assert_eq!(t.free_variables(), &["z"]);
        assert_eq!(evaluate(&t, &Binding::from_pairs([("z", 2.0)])).unwrap(), 4.0);
    }

    #[test]
    fn render_is_reparsable() {
        for src in ["-x1^2", "2^3^2", "a-(b-c)", "sin(x)/-y", "1e300*x", "2.5e-3"] {
            let t = parse(src).unwrap();
            assert_eq!(parse(&t.render()).unwrap(), t, "{src}");
        }
    }
}
