use std::time::Instant;

use tribvp_core::constants::{assemble_shell, LambdaChoice};
use tribvp_core::operator::Operator;
use tribvp_core::problem::BvpProblem;
use tribvp_core::solver::{solve_pair_with, sweep_lambda, Discretization, Outcome, SolveOptions};
use tribvp_core::verify::ShellPosition;

fn run(prob: &BvpProblem) {
    let opts = SolveOptions::default();
    let start = Instant::now();
    let disc = Discretization::new(prob, &opts).unwrap();
    let shell = assemble_shell(
        prob,
        1.0,
        LambdaChoice::Auto,
        &disc.rule,
        opts.j_final_inv_tol,
    )
    .unwrap();
    let pair = solve_pair_with(prob, &shell, &disc, &opts).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    for c in [&pair.small, &pair.large] {
        eprintln!(
            "{}: norm {:.6e} star {:.6e} res {:.2e} ode {:.2e} bc {:.1e} {:.1e} {:.1e} min {:.3e} cone {:.2e} passed {}",
            prob.label(),
            c.norm_inf,
            c.norm_star,
            c.residual_integral,
            c.residual_ode,
            c.bc_x0,
            c.bc_xp_eta,
            c.bc_xpp_1,
            c.min_interior,
            c.cone_defect,
            c.passed
        );
        eprintln!(
            "  diffs {:?}",
            c.j_history.iter().map(|s| s.diff).collect::<Vec<_>>()
        );
    }
    eprintln!(
        "lambda {:.6e} r' {:.3e} R {:.3e} elapsed {elapsed:.2}s warnings {:?}",
        shell.lambda, shell.r_prime, shell.r_large, pair.warnings
    );
    assert!(pair.small.passed && pair.large.passed);
    assert!(pair.distinct && pair.separated && pair.certified);
    assert!(pair.small.norm_inf < 1.0 && 1.0 < pair.large.norm_inf);
    assert_eq!(pair.small.shell_position, Some(ShellPosition::BelowR));
    assert_eq!(pair.large.shell_position, Some(ShellPosition::AboveR));
    assert!(pair.small.continuation_settled() && pair.large.continuation_settled());
    assert!(elapsed < 30.0);

    // fixed points survive re-verification with a freshly built operator
    let fresh = Discretization::new(prob, &opts).unwrap();
    let op = Operator::new(prob, &fresh.rule, &fresh.kmat, shell.lambda);
    let j = *shell.j_schedule.last().unwrap();
    for c in [&pair.small, &pair.large] {
        let (_, res) = op.residual(&c.values_star, j).unwrap();
        assert!(res <= opts.tol_fixed_point * (1.0 + c.norm_star), "{res}");
        for (x, &t) in c.values_star.iter().zip(&c.nodes) {
            assert!(*x >= prob.kernel().q(t) * c.norm_star - 1e-6 * c.norm_star);
        }
    }
}

#[test]
fn example31_two_solutions() {
    run(&BvpProblem::preset("example31").unwrap());
}

#[test]
fn example32_two_solutions() {
    run(&BvpProblem::preset("example32").unwrap());
}

#[test]
fn mesh_doubling_is_stable() {
    for name in ["example31", "example32"] {
        let prob = BvpProblem::preset(name).unwrap();
        let norms = |mesh_n: usize| {
            let opts = SolveOptions {
                quad: SolveOptions::default().quad.with_mesh_n(mesh_n).unwrap(),
                ..SolveOptions::default()
            };
            let disc = Discretization::new(&prob, &opts).unwrap();
            let shell = assemble_shell(
                &prob,
                1.0,
                LambdaChoice::Auto,
                &disc.rule,
                opts.j_final_inv_tol,
            )
            .unwrap();
            let pair = solve_pair_with(&prob, &shell, &disc, &opts).unwrap();
            (pair.small.norm_inf, pair.large.norm_inf)
        };
        let (s1, l1) = norms(512);
        let (s2, l2) = norms(1024);
        eprintln!("{name}: {s1:.10e} {s2:.10e} {l1:.10e} {l2:.10e}");
        assert!((s1 - s2).abs() < 1e-4 * s2, "{name} small: {s1} vs {s2}");
        assert!((l1 - l2).abs() < 1e-4 * l2, "{name} large: {l1} vs {l2}");
    }
}

#[test]
fn sweep_below_lambda_bar() {
    let prob = BvpProblem::preset("example32").unwrap();
    let opts = SolveOptions::default();
    let disc = Discretization::new(&prob, &opts).unwrap();
    let shell = assemble_shell(
        &prob,
        1.0,
        LambdaChoice::Auto,
        &disc.rule,
        opts.j_final_inv_tol,
    )
    .unwrap();
    let lb = shell.lambda_bar;
    let lambdas = [lb / 8.0, lb / 4.0, lb / 2.0, 2.0 * lb];
    let rows = sweep_lambda(&prob, &lambdas, 1.0, &opts).unwrap();
    assert_eq!(rows.len(), 4);
    for (row, &l) in rows.iter().zip(&lambdas) {
        assert_eq!(row.lambda, l);
    }
    for row in &rows[..3] {
        assert_eq!(row.outcome, Outcome::TwoSolutions, "{row:?}");
        assert!(row.norm_small.unwrap() < 1.0 && row.norm_large.unwrap() > 1.0);
    }
    assert_ne!(rows[3].outcome, Outcome::TwoSolutions);
    // order of evaluation does not matter
    let reversed: Vec<f64> = lambdas.iter().rev().copied().collect();
    let back = sweep_lambda(&prob, &reversed, 1.0, &opts).unwrap();
    for (a, b) in rows.iter().zip(back.iter().rev()) {
        assert_eq!(a, b);
    }
}

#[test]
fn example31_branch_starts() {
    use tribvp_core::solver::{picard, solve_large};
    let prob = BvpProblem::preset("example31").unwrap();
    let opts = SolveOptions::default();
    let disc = Discretization::new(&prob, &opts).unwrap();
    let shell = assemble_shell(
        &prob,
        1.0,
        LambdaChoice::Auto,
        &disc.rule,
        opts.j_final_inv_tol,
    )
    .unwrap();
    let op = Operator::new(&prob, &disc.rule, &disc.kmat, shell.lambda);
    let j0 = shell.j_schedule[0];
    let ray = |c: f64| -> Vec<f64> {
        disc.rule
            .nodes()
            .iter()
            .map(|&t| c * prob.kernel().q(t))
            .collect()
    };

    let small = picard(&op, &ray(shell.r_prime), j0, &opts).unwrap();
    assert!(small.converged);
    let n = tribvp_core::operator::norm_inf(&small.values);
    assert!(n < shell.r, "{n}");

    // Newton straight from R q overshoots for this problem; the ray seed lands
    let large = solve_large(&op, &shell, &opts).unwrap();
    let n = tribvp_core::operator::norm_inf(&large.values);
    assert!(n > shell.r && n < shell.r_large, "{n}");
}
