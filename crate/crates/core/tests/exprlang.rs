mod common;

use algctl_core::exprlang::{derivative, evaluate, parse, Binding, BinaryOp, ExpressionTree, UnaryOp};
use common::{names, random_tree};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn binding(vars: &[String], vals: &[f64]) -> Binding {
    Binding::from_pairs(vars.iter().cloned().zip(vals.iter().copied()))
}

fn central_difference(tree: &ExpressionTree, vars: &[String], vals: &[f64], k: usize, h: f64) -> Option<f64> {
    let mut plus = vals.to_vec();
    plus[k] += h;
    let mut minus = vals.to_vec();
    minus[k] -= h;
    let fp = evaluate(tree, &binding(vars, &plus)).ok()?;
    let fm = evaluate(tree, &binding(vars, &minus)).ok()?;
    Some((fp - fm) / (2.0 * h))
}

#[test]
fn forward_mode_matches_central_differences() {
    let vars = names("x", 3);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut accepted = 0;
    let mut worst = 0.0f64;
    while accepted < 100 {
        let tree = random_tree(&mut rng, 6, &vars);
        let vals: Vec<f64> = (0..3).map(|_| rng.random_range(-1.5..1.5)).collect();
        let env = binding(&vars, &vals);
        let Ok(value) = evaluate(&tree, &env) else { continue };
        if value.abs() > 1e4 {
            continue;
        }
        let mut rows = Vec::new();
        for (k, v) in vars.iter().enumerate() {
            let (Ok(ad), Some(fd)) = (derivative(&tree, v, &env), central_difference(&tree, &vars, &vals, k, 1e-6)) else {
                rows.clear();
                break;
            };
            rows.push((ad, fd));
        }
        if rows.len() != vars.len() || rows.iter().any(|(ad, _)| ad.abs() > 1e4) {
            continue;
        }
        for (ad, fd) in rows {
            let rel = (ad - fd).abs() / ad.abs().max(1.0);
            assert!(rel < 1e-6, "{tree} at {vals:?}: ad {ad} fd {fd}");
            worst = worst.max(rel);
        }
        accepted += 1;
    }
    assert!(worst < 1e-6);
}

fn tree_strategy() -> impl Strategy<Value = ExpressionTree> {
    any::<u64>().prop_map(|seed| random_tree(&mut ChaCha8Rng::seed_from_u64(seed), 6, &names("x", 3)))
}

proptest! {
    #[test]
    fn render_round_trips(tree in tree_strategy()) {
        let rendered = tree.render();
        let back = parse(&rendered).unwrap();
        prop_assert_eq!(&back, &tree);
        prop_assert_eq!(back.render(), rendered);
    }

    #[test]
    fn derivative_is_linear(
        seeds in (any::<u64>(), any::<u64>()),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
        vals in proptest::collection::vec(-1.0f64..1.0, 3),
    ) {
        let vars = names("x", 3);
        let f = random_tree(&mut ChaCha8Rng::seed_from_u64(seeds.0), 4, &vars);
        let g = random_tree(&mut ChaCha8Rng::seed_from_u64(seeds.1), 4, &vars);
        let env = binding(&vars, &vals);
        let combo = ExpressionTree::constant(a.abs()) * f.clone() + ExpressionTree::constant(b.abs()) * g.clone();
        if let (Ok(df), Ok(dg), Ok(dc)) = (derivative(&f, "x1", &env), derivative(&g, "x1", &env), derivative(&combo, "x1", &env)) {
            let expected = a.abs() * df + b.abs() * dg;
            prop_assert!((dc - expected).abs() <= 1e-12 * expected.abs().max(1.0));
        }
    }

    #[test]
    fn chain_rule_through_functions(seed in any::<u64>(), vals in proptest::collection::vec(-1.0f64..1.0, 3)) {
        let vars = names("x", 3);
        let f = random_tree(&mut ChaCha8Rng::seed_from_u64(seed), 4, &vars);
        let env = binding(&vars, &vals);
        if let (Ok(v), Ok(df)) = (evaluate(&f, &env), derivative(&f, "x2", &env)) {
            let composed = ExpressionTree::unary(UnaryOp::Sin, f.clone());
            let d = derivative(&composed, "x2", &env).unwrap();
            prop_assert!((d - v.cos() * df).abs() <= 1e-12 * df.abs().max(1.0));
            let squared = ExpressionTree::binary(BinaryOp::Pow, f.clone(), ExpressionTree::constant(2.0));
            if let Ok(d) = derivative(&squared, "x2", &env) {
                prop_assert!((d - 2.0 * v * df).abs() <= 1e-12 * (v * df).abs().max(1.0));
            }
        }
    }

    #[test]
    fn gradient_entries_match_derivatives(seed in any::<u64>(), vals in proptest::collection::vec(-1.0f64..1.0, 3)) {
        let vars = names("x", 3);
        let f = random_tree(&mut ChaCha8Rng::seed_from_u64(seed), 5, &vars);
        let env = binding(&vars, &vals);
        let refs: Vec<&str> = vars.iter().map(String::as_str).collect();
        if let Ok(g) = algctl_core::exprlang::gradient(&f, &refs, &env) {
            for (k, v) in refs.iter().enumerate() {
                prop_assert_eq!(g[k].to_bits(), derivative(&f, v, &env).unwrap().to_bits());
            }
        }
    }
}

#[test]
fn spot_derivatives_by_hand() {
    let env = Binding::from_pairs([("x1", 0.5), ("x2", 2.0)]);
    let t = parse("x1^3*x2 - exp(x1*x2)/x2").unwrap();
    let d1 = derivative(&t, "x1", &env).unwrap();
    assert!((d1 - (3.0 * 0.25 * 2.0 - 1f64.exp())).abs() < 1e-14);
    let d2 = derivative(&t, "x2", &env).unwrap();
    let expected = 0.125 - (0.5 * 1f64.exp() * 2.0 - 1f64.exp()) / 4.0;
    assert!((d2 - expected).abs() < 1e-14);
}
