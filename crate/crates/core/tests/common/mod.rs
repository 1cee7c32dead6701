#![allow(dead_code)]

use algctl_core::algebra::NamedAlgebra;
use algctl_core::algebroid::AlgebroidModel;
use algctl_core::exprlang::{parse, BinaryOp, ExpressionTree, UnaryOp};
use algctl_core::poisson::PhasePoint;
use algctl_core::ScalarField;
use rand::Rng;

/// Random tree of depth at most `depth` over `vars`. Constants are
/// non-negative so the tree is one the parser can produce.
pub fn random_tree<R: Rng>(rng: &mut R, depth: usize, vars: &[String]) -> ExpressionTree {
    if depth == 0 || rng.random_bool(0.25) {
        return if rng.random_bool(0.6) {
            ExpressionTree::variable(&vars[rng.random_range(0..vars.len())])
        } else {
            let c: f64 = rng.random_range(0.1..2.0);
            ExpressionTree::constant((c * 100.0).round() / 100.0)
        };
    }
    match rng.random_range(0..12) {
        0 => ExpressionTree::unary(UnaryOp::Neg, random_tree(rng, depth - 1, vars)),
        1 => ExpressionTree::unary(UnaryOp::Sin, random_tree(rng, depth - 1, vars)),
        2 => ExpressionTree::unary(UnaryOp::Cos, random_tree(rng, depth - 1, vars)),
        3 => ExpressionTree::unary(UnaryOp::Exp, random_tree(rng, depth - 1, vars)),
        4 => ExpressionTree::unary(UnaryOp::Log, random_tree(rng, depth - 1, vars)),
        5 => ExpressionTree::unary(UnaryOp::Sqrt, random_tree(rng, depth - 1, vars)),
        6 => {
            let e = ExpressionTree::constant(rng.random_range(2..4) as f64);
            ExpressionTree::binary(BinaryOp::Pow, random_tree(rng, depth - 1, vars), e)
        }
        op => {
            let op = [BinaryOp::Add, BinaryOp::Sub, BinaryOp::Mul, BinaryOp::Div, BinaryOp::Add][op - 7];
            ExpressionTree::binary(op, random_tree(rng, depth - 1, vars), random_tree(rng, depth - 1, vars))
        }
    }
}

pub fn names(prefix: &str, count: usize) -> Vec<String> {
    (1..=count).map(|i| format!("{prefix}{i}")).collect()
}

pub fn phase_names(model: &AlgebroidModel) -> Vec<String> {
    let mut v = names("x", model.base_dim());
    v.extend(names("eta", model.rank()));
    v
}

pub fn random_vec<R: Rng>(rng: &mut R, len: usize, scale: f64) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-scale..scale)).collect()
}

pub fn random_point<R: Rng>(rng: &mut R, model: &AlgebroidModel) -> PhasePoint {
    PhasePoint::new(random_vec(rng, model.base_dim(), 1.0), random_vec(rng, model.rank(), 1.0))
}

/// Random field on the phase space of `model` whose value and first
/// derivatives at `p` are finite and bounded by `bound`.
pub fn random_phase_field<R: Rng>(
    rng: &mut R,
    model: &AlgebroidModel,
    depth: usize,
    p: &PhasePoint,
    bound: f64,
) -> ScalarField {
    let vars = phase_names(model);
    let layout = model.layout();
    loop {
        let tree = random_tree(rng, depth, &vars);
        let f = ScalarField::new(tree, layout).unwrap();
        let mut s = layout.state();
        s[layout.x_range()].copy_from_slice(&p.x);
        s[layout.eta_range()].copy_from_slice(&p.eta);
        let ok = match (f.value(&s), f.gradient(&s, 0..layout.eta_range().end)) {
            (Ok(v), Ok(g)) => v.abs() <= bound && g.iter().all(|d| d.abs() <= bound),
            _ => false,
        };
        if ok {
            return f;
        }
    }
}

/// Polynomial Hamiltonian of degree ≤ 3 in `(x, η)` with random
/// coefficients; always finite.
pub fn random_polynomial<R: Rng>(rng: &mut R, model: &AlgebroidModel) -> ScalarField {
    let vars = phase_names(model);
    let mut src = format!("{}", rng.random_range(-1.0..1.0));
    for _ in 0..6 {
        let c: f64 = rng.random_range(-1.0..1.0);
        let deg = rng.random_range(1..=3);
        let mono: Vec<&str> = (0..deg).map(|_| vars[rng.random_range(0..vars.len())].as_str()).collect();
        src.push_str(&format!(" + ({c})*{}", mono.join("*")));
    }
    ScalarField::new(parse(&src).unwrap(), model.layout()).unwrap()
}

/// Catalog models with phase space of positive dimension, plus one
/// model with `x`-dependent anchor and structure functions.
pub fn catalog_models() -> Vec<(String, AlgebroidModel)> {
    let mut out: Vec<(String, AlgebroidModel)> = vec![];
    for a in [NamedAlgebra::So3, NamedAlgebra::Heisenberg3, NamedAlgebra::Se2, NamedAlgebra::Abelian(2)] {
        out.push((format!("{a}"), AlgebroidModel::named_lie_algebra(a)));
    }
    for n in 1..=3 {
        out.push((format!("tangent_{n}"), AlgebroidModel::tangent(n)));
    }
    out.push(("trivial_1_so3".into(), AlgebroidModel::trivial(1, NamedAlgebra::So3)));
    out.push(("trivial_2_heisenberg3".into(), AlgebroidModel::trivial(2, NamedAlgebra::Heisenberg3)));
    out.push((
        "action_line".into(),
        AlgebroidModel::custom(
            1,
            2,
            vec![vec![parse("1").unwrap(), parse("x1").unwrap()]],
            vec![((0, 0, 1), parse("1").unwrap())],
        )
        .unwrap(),
    ));
    out
}
