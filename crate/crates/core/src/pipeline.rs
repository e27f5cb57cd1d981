//! End-to-end runs shared by the command line and the Python bindings.

use crate::config::{OutputSection, RunConfig};
use crate::constants::{assemble_shell, compute_theorem_a, LambdaChoice, ShellReport};
use crate::error::{Error, Result};
use crate::problem::BvpProblem;
use crate::report::{
    timestamp_now, to_json, write_solution_csv, write_sweep_csv, write_text, ConstantsReport,
    ProblemChecks, SolveReport, SolveStatus, SweepReport,
};
use crate::solver::{solve_pair_with, sweep_lambda, Discretization};

pub fn problem_checks(prob: &BvpProblem) -> ProblemChecks {
    ProblemChecks {
        h1: prob.validate_h1_default(),
        h2: prob.validate_h2(),
        aux: prob.check_aux(),
    }
}

/// Input errors pass through; anything else means the shell cannot be built.
fn shell_or_reason(
    cfg: &RunConfig,
    disc: &Discretization,
    lambda: LambdaChoice,
) -> Result<std::result::Result<ShellReport, String>> {
    match assemble_shell(
        &cfg.problem,
        cfg.r,
        lambda,
        &disc.rule,
        cfg.options.j_final_inv_tol,
    ) {
        Ok(shell) => Ok(Ok(shell)),
        Err(e) if e.exit_code() == 2 => Err(e),
        Err(e) => Ok(Err(e.to_string())),
    }
}

fn stamp(output: &OutputSection) -> Option<String> {
    output.timestamp.then(timestamp_now)
}

/// Constants report and its exit code (0, or 3 when no shell exists).
pub fn run_constants(cfg: &RunConfig) -> Result<(ConstantsReport, i32)> {
    let disc = Discretization::new(&cfg.problem, &cfg.options)?;
    let shell = shell_or_reason(cfg, &disc, cfg.lambda)?;
    let bound = compute_theorem_a(&cfg.problem);
    let code = if shell.is_ok() { 0 } else { 3 };
    let (shell, error) = match shell {
        Ok(s) => (Some(s), None),
        Err(e) => (None, Some(e)),
    };
    let report = ConstantsReport {
        problem: cfg.problem.spec().clone(),
        r: cfg.r,
        checks: problem_checks(&cfg.problem),
        theorem_a_bound: bound,
        theorem_a_status: if bound.is_some() {
            "applicable"
        } else {
            "inapplicable"
        },
        shell,
        error,
        timestamp: stamp(&cfg.output),
    };
    Ok((report, code))
}

pub fn run_solve(cfg: &RunConfig) -> Result<SolveReport> {
    let opts = &cfg.options;
    let disc = Discretization::new(&cfg.problem, opts)?;
    let mut report = SolveReport {
        problem: cfg.problem.spec().clone(),
        r: cfg.r,
        lambda: None,
        mesh_n: opts.mesh_n(),
        options: *opts,
        shell: None,
        small: None,
        large: None,
        distinct: false,
        separated: false,
        certified: false,
        status: SolveStatus::InfeasibleShell,
        error: None,
        warnings: Vec::new(),
        timestamp: stamp(&cfg.output),
    };
    let shell = match shell_or_reason(cfg, &disc, cfg.lambda)? {
        Ok(s) => s,
        Err(reason) => {
            report.error = Some(reason);
            return Ok(report);
        }
    };
    report.lambda = Some(shell.lambda);
    match solve_pair_with(&cfg.problem, &shell, &disc, opts) {
        Ok(pair) => {
            report.status = if pair.certified {
                SolveStatus::TwoSolutions
            } else {
                SolveStatus::Uncertified
            };
            report.distinct = pair.distinct;
            report.separated = pair.separated;
            report.certified = pair.certified;
            report.warnings = pair.warnings;
            report.small = Some(pair.small);
            report.large = Some(pair.large);
        }
        Err(e) if e.exit_code() == 2 => return Err(e),
        Err(e) => {
            report.status = match e {
                Error::SameFixedPoint { .. } => SolveStatus::SameFixedPoint,
                _ => SolveStatus::NotFound,
            };
            report.error = Some(e.to_string());
        }
    }
    report.shell = Some(shell);
    Ok(report)
}

/// `lambda_bar` of the configured problem, from a shell with automatic lambda.
pub fn lambda_bar(cfg: &RunConfig) -> Result<f64> {
    let disc = Discretization::new(&cfg.problem, &cfg.options)?;
    match shell_or_reason(cfg, &disc, LambdaChoice::Auto)? {
        Ok(s) => Ok(s.lambda_bar),
        Err(reason) => Err(Error::EmptyWindow(reason)),
    }
}

pub fn run_sweep(cfg: &RunConfig, lambdas: &[f64], lambda_bar: Option<f64>) -> Result<SweepReport> {
    let rows = sweep_lambda(&cfg.problem, lambdas, cfg.r, &cfg.options)?;
    Ok(SweepReport {
        problem: cfg.problem.spec().clone(),
        r: cfg.r,
        lambda_bar,
        rows,
        timestamp: stamp(&cfg.output),
    })
}

pub fn emit_constants(report: &ConstantsReport, output: &OutputSection) -> Result<String> {
    let json = to_json(report)?;
    if let Some(path) = &output.json {
        write_text(path, &json)?;
    }
    Ok(json)
}

pub fn emit_solve(report: &SolveReport, output: &OutputSection) -> Result<String> {
    let json = to_json(report)?;
    if let Some(path) = &output.json {
        write_text(path, &json)?;
    }
    if let (Some(path), Some(s), Some(l)) = (&output.csv, &report.small, &report.large) {
        write_solution_csv(path, &s.nodes, &s.values, &l.values)?;
    }
    Ok(json)
}

pub fn emit_sweep(report: &SweepReport, output: &OutputSection) -> Result<String> {
    let json = to_json(report)?;
    if let Some(path) = &output.json {
        write_text(path, &json)?;
    }
    if let Some(path) = &output.csv {
        write_sweep_csv(path, &report.rows)?;
    }
    Ok(json)
}
