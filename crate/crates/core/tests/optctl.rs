use algctl_core::algebra::NamedAlgebra;
use algctl_core::algebroid::AlgebroidModel;
use algctl_core::exprlang::{parse, ExpressionTree};
use algctl_core::optctl::{
    critical_trajectory, integrate_hamiltonian, pontryagin_hamiltonian, shoot, stationarity_solve, ControlProblem,
    Method, OptError,
};
use algctl_core::poisson::PhasePoint;
use algctl_core::ScalarField;

fn exprs(src: &[&str]) -> Vec<ExpressionTree> {
    src.iter().map(|s| parse(s).unwrap()).collect()
}

fn problem(model: AlgebroidModel, m: usize, f: &[&str], cost: &str) -> ControlProblem {
    ControlProblem::new(model, m, exprs(f), parse(cost).unwrap()).unwrap()
}

fn heisenberg(c: f64) -> ControlProblem {
    problem(
        AlgebroidModel::named_lie_algebra(NamedAlgebra::Heisenberg3),
        2,
        &["u1", "u2", "0"],
        "0.5*(u1^2 + u2^2)",
    )
    .with_initial(vec![], vec![1.0, 0.0, c])
}

fn heisenberg_error(c: f64, steps: usize, method: Method) -> f64 {
    let rec = critical_trajectory(&heisenberg(c), steps, method).unwrap();
    rec.times
        .iter()
        .zip(&rec.eta)
        .map(|(t, e)| {
            let exact = [(c * t).cos(), (c * t).sin(), c];
            e.iter().zip(exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

#[test]
fn pontryagin_hamiltonian_by_substitution() {
    let pb = problem(AlgebroidModel::tangent(2), 2, &["u1", "u2"], "0.5*(u1^2+u2^2)");
    let p = PhasePoint::new(vec![0.3, -0.4], vec![1.0, 1.0]);
    assert_eq!(pontryagin_hamiltonian(&pb, &p, &[1.0, 1.0]).unwrap(), 1.0);
    let p0 = PhasePoint::new(vec![0.3, -0.4], vec![0.0, 0.0]);
    assert_eq!(pontryagin_hamiltonian(&pb, &p0, &[0.5, 2.0]).unwrap(), -(0.125 + 2.0));

    // L = 0: H = ηᵀ G(x) u with G(x) = [[1, x1], [x2, 2]].
    let pb = problem(AlgebroidModel::tangent(2), 2, &["u1 + x1*u2", "x2*u1 + 2*u2"], "0");
    let (x, eta, u) = ([0.7, -1.3], [0.2, 0.9], [1.5, -0.25]);
    let g = [[1.0, x[0]], [x[1], 2.0]];
    let mut oracle = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            oracle += eta[a] * g[a][b] * u[b];
        }
    }
    let v = pontryagin_hamiltonian(&pb, &PhasePoint::new(x.to_vec(), eta.to_vec()), &u).unwrap();
    assert!((v - oracle).abs() < 1e-15);
}

#[test]
fn stationarity_closed_forms() {
    let pb = problem(
        AlgebroidModel::named_lie_algebra(NamedAlgebra::So3),
        3,
        &["u1", "u2", "u3"],
        "0.5*(1*u1^2 + 2*u2^2 + 3*u3^2)",
    );
    let eta = [0.4, -1.2, 2.7];
    let u = stationarity_solve(&pb, &PhasePoint::new(vec![], eta.to_vec()), &[0.0; 3], 1e-12).unwrap();
    for (a, i) in [1.0, 2.0, 3.0].iter().enumerate() {
        assert!((u[a] - eta[a] / i).abs() < 1e-12);
    }
    let u = stationarity_solve(&pb, &PhasePoint::new(vec![], vec![0.0; 3]), &[0.3, 0.1, -0.2], 1e-12).unwrap();
    assert!(u.iter().all(|v| v.abs() < 1e-12));

    let degenerate = problem(AlgebroidModel::tangent(1), 1, &["u1"], "x1^2");
    let err = stationarity_solve(&degenerate, &PhasePoint::new(vec![0.5], vec![1.0]), &[0.0], 1e-12).unwrap_err();
    assert!(matches!(err, OptError::SingularHessian { .. }), "{err}");
}

#[test]
fn heisenberg_rotation_solution() {
    let err = heisenberg_error(2.0, 1000, Method::Rk4);
    assert!(err < 1e-9, "{err:e}");
    let rec = critical_trajectory(&heisenberg(2.0), 1000, Method::Rk4).unwrap();
    assert!(rec.max_stationarity() < 1e-10);
    rec.check_invariants(1e-10).unwrap();
}

#[test]
fn rk4_step_halving_ratio() {
    let coarse = heisenberg_error(2.0, 10, Method::Rk4);
    let fine = heisenberg_error(2.0, 20, Method::Rk4);
    let ratio = coarse / fine;
    assert!((ratio - 16.0).abs() <= 0.2 * 16.0, "ratio {ratio}");
    let ratio = heisenberg_error(2.0, 10, Method::Midpoint) / heisenberg_error(2.0, 20, Method::Midpoint);
    assert!((ratio - 4.0).abs() <= 0.2 * 4.0, "midpoint ratio {ratio}");
}

#[test]
fn so3_isotropic_costate_is_constant() {
    let pb = problem(
        AlgebroidModel::named_lie_algebra(NamedAlgebra::So3),
        3,
        &["u1", "u2", "u3"],
        "0.5*(u1^2+u2^2+u3^2)",
    )
    .with_initial(vec![], vec![1.0, 0.1, -0.5]);
    let rec = critical_trajectory(&pb, 1000, Method::Rk4).unwrap();
    for row in &rec.eta {
        for (a, b) in row.iter().zip([1.0, 0.1, -0.5]) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn tangent_linear_solution() {
    let pb = problem(AlgebroidModel::tangent(1), 1, &["u1"], "0.5*u1^2").with_initial(vec![0.0], vec![1.0]);
    let rec = critical_trajectory(&pb, 100, Method::Rk4).unwrap();
    for k in 0..rec.len() {
        assert!((rec.x[k][0] - rec.times[k]).abs() < 1e-13);
        assert!((rec.eta[k][0] - 1.0).abs() < 1e-15);
        assert!((rec.u[k][0] - 1.0).abs() < 1e-11);
    }
}

#[test]
fn shooting_examples() {
    let one_d = |x0: f64, target: f64| {
        problem(AlgebroidModel::tangent(1), 1, &["u1"], "0.5*u1^2")
            .with_initial(vec![x0], vec![0.0])
            .with_target(vec![target])
    };
    let out = shoot(&one_d(0.0, 1.0), &[0.0], 1e-12, 50, Method::Rk4).unwrap();
    assert!((out.eta0[0] - 1.0).abs() < 1e-10);
    assert!(out.endpoint_error < 1e-12);
    let out = shoot(&one_d(0.4, 0.4), &[0.8], 1e-12, 50, Method::Rk4).unwrap();
    assert!(out.eta0[0].abs() < 1e-10);

    let two_d = problem(AlgebroidModel::tangent(2), 2, &["u1", "u2"], "0.5*(u1^2+u2^2)")
        .with_initial(vec![0.0, 0.4], vec![0.0, 0.0])
        .with_target(vec![1.0, 0.4]);
    let out = shoot(&two_d, &[0.3, 0.3], 1e-12, 50, Method::Rk4).unwrap();
    assert!((out.eta0[0] - 1.0).abs() < 1e-10 && out.eta0[1].abs() < 1e-10, "{:?}", out.eta0);
}

fn catalog_problems() -> Vec<(&'static str, ControlProblem)> {
    vec![
        (
            "so3 rigid body",
            problem(
                AlgebroidModel::named_lie_algebra(NamedAlgebra::So3),
                3,
                &["u1", "u2", "u3"],
                "0.5*(1*u1^2 + 2*u2^2 + 3*u3^2)",
            )
            .with_initial(vec![], vec![1.0, 0.1, 0.0]),
        ),
        ("heisenberg3", heisenberg(2.0)),
        (
            "se2",
            problem(
                AlgebroidModel::named_lie_algebra(NamedAlgebra::Se2),
                3,
                &["u1", "u2", "u3"],
                "0.5*(u1^2 + 2*u2^2 + 3*u3^2)",
            )
            .with_initial(vec![], vec![0.5, 1.0, -0.3]),
        ),
        (
            "abelian",
            problem(
                AlgebroidModel::named_lie_algebra(NamedAlgebra::Abelian(2)),
                2,
                &["u1", "u2"],
                "0.5*(u1^2 + u2^2)",
            )
            .with_initial(vec![], vec![0.5, -1.0]),
        ),
        (
            "tangent oscillator",
            problem(AlgebroidModel::tangent(2), 2, &["u1", "u2"], "0.5*(u1^2 + u2^2) - 0.5*(x1^2 + 2*x2^2)")
                .with_initial(vec![1.0, 0.0], vec![0.0, 0.5]),
        ),
        (
            "trivial so3",
            problem(
                AlgebroidModel::trivial(1, NamedAlgebra::So3),
                4,
                &["u1", "u2", "u3", "u4"],
                "0.5*(u1^2 + u2^2 + 2*u3^2 + 3*u4^2)",
            )
            .with_initial(vec![0.0], vec![0.2, 1.0, 0.1, 0.0]),
        ),
    ]
}

#[test]
fn energy_and_casimirs_are_conserved() {
    for (name, pb) in catalog_problems() {
        let pb = pb.with_horizon(0.0, 10.0);
        let rec = critical_trajectory(&pb, 10_000, Method::Rk4).unwrap();
        assert!(rec.energy_drift() < 1e-8, "{name}: energy drift {:e}", rec.energy_drift());
        assert!(rec.casimir_drift() < 1e-8, "{name}: casimir drift {:e}", rec.casimir_drift());
        assert!(rec.max_stationarity() < 1e-10, "{name}");
        rec.check_invariants(1e-10).unwrap();
    }
}

#[test]
fn reduces_to_lie_poisson_flow() {
    let model = AlgebroidModel::named_lie_algebra(NamedAlgebra::So3);
    let pb = problem(model.clone(), 3, &["u1", "u2", "u3"], "0.5*(1*u1^2 + 2*u2^2 + 3*u3^2)")
        .with_initial(vec![], vec![1.0, 0.1, 0.0]);
    let rec = critical_trajectory(&pb, 1000, Method::Rk4).unwrap();
    let h = ScalarField::parse("0.5*(eta1^2/1 + eta2^2/2 + eta3^2/3)", model.layout()).unwrap();
    let lp = integrate_hamiltonian(&model, &h, &[], &[1.0, 0.1, 0.0], (0.0, 1.0), 1000, Method::Rk4).unwrap();
    let worst = rec
        .eta
        .iter()
        .zip(&lp.eta)
        .flat_map(|(a, b)| a.iter().zip(b).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max);
    assert!(worst < 1e-12, "{worst:e}");
}
