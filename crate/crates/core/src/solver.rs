//! Fixed-point search in the two cone shells, continuation in the
//! regularization index `j`, and parameter sweeps.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::{assemble_shell, LambdaChoice, ShellReport};
use crate::error::{Error, Result};
use crate::operator::{norm_inf, KernelMatrix, Operator};
use crate::problem::BvpProblem;
use crate::quadrature::QuadratureRule;
use crate::verify::{certify, check_separation, JStep, ShellPosition, SolutionCertificate};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadOptions {
    /// Panels on each side of `eta`.
    pub panels: usize,
    pub grading: f64,
    pub points_per_panel: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            panels: 64,
            grading: 4.0,
            points_per_panel: 4,
        }
    }
}

impl QuadOptions {
    pub fn mesh_n(&self) -> usize {
        2 * self.panels * self.points_per_panel
    }

    pub fn rule(&self, eta: f64) -> Result<QuadratureRule> {
        QuadratureRule::build(eta, self.panels, self.grading, self.points_per_panel)
    }

    /// Same layout with the panel count chosen to give `mesh_n` nodes.
    pub fn with_mesh_n(self, mesh_n: usize) -> Result<Self> {
        let per = 2 * self.points_per_panel;
        if mesh_n == 0 || !mesh_n.is_multiple_of(per) {
            return Err(Error::InvalidArgument(format!(
                "mesh_n = {mesh_n} must be a positive multiple of 2 * points_per_panel = {per}"
            )));
        }
        Ok(Self {
            panels: mesh_n / per,
            ..self
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolveOptions {
    pub tol_fixed_point: f64,
    pub max_picard: usize,
    pub max_newton: usize,
    /// Step shrink factor of the Newton line search.
    pub damping: f64,
    pub j_final_inv_tol: f64,
    pub fine_factor: usize,
    pub quad: QuadOptions,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol_fixed_point: 1e-10,
            max_picard: 200,
            max_newton: 50,
            damping: 0.5,
            j_final_inv_tol: 1e-8,
            fine_factor: 2,
            quad: QuadOptions::default(),
        }
    }
}

impl SolveOptions {
    pub fn mesh_n(&self) -> usize {
        self.quad.mesh_n()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = self.tol_fixed_point > 0.0
            && self.max_picard > 0
            && self.max_newton > 0
            && self.j_final_inv_tol > 0.0
            && self.damping > 0.0
            && self.damping <= 1.0;
        if !positive {
            return Err(Error::InvalidArgument(
                "solver options must be positive, with damping in (0, 1]".into(),
            ));
        }
        if self.fine_factor < 2 {
            return Err(Error::InvalidArgument("fine_factor must be >= 2".into()));
        }
        Ok(())
    }
}

/// Result of one iterative solve at fixed `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct IterOutcome {
    pub values: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
}

fn tolerance_met(res: f64, x: &[f64], tol: f64) -> bool {
    res <= tol * (1.0 + norm_inf(x))
}

/// Relaxed Picard iteration `x <- x + omega (A x - x)`, halving `omega`
/// whenever the residual grows or the correction flips direction. Returns
/// the best iterate seen.
pub fn picard(op: &Operator, x0: &[f64], j: u64, opts: &SolveOptions) -> Result<IterOutcome> {
    let mut x = x0.to_vec();
    let (mut f, mut res) = op.residual(&x, j)?;
    let mut omega = 1.0;
    let mut best = (x.clone(), res);
    for it in 0..opts.max_picard {
        if tolerance_met(res, &x, opts.tol_fixed_point) {
            return Ok(IterOutcome {
                values: x,
                converged: true,
                iterations: it,
                residual: res,
            });
        }
        let xn: Vec<f64> = x.iter().zip(&f).map(|(a, d)| a - omega * d).collect();
        match op.residual(&xn, j) {
            Ok((fn_, rn)) => {
                // growth, or successive corrections pointing opposite ways
                let turn: f64 = f.iter().zip(&fn_).map(|(a, b)| a * b).sum();
                if rn > res || turn < 0.0 {
                    omega *= 0.5;
                }
                x = xn;
                f = fn_;
                res = rn;
                if res < best.1 {
                    best = (x.clone(), res);
                }
            }
            Err(_) => omega *= 0.5,
        }
    }
    let converged = tolerance_met(res, &x, opts.tol_fixed_point);
    let (values, residual) = if converged { (x, res) } else { best };
    Ok(IterOutcome {
        values,
        converged,
        iterations: opts.max_picard,
        residual,
    })
}

/// Damped Newton on `F(x) = x - A(x)` with backtracking on `|F|_inf` and
/// clipping at zero after each step.
pub fn newton(op: &Operator, x0: &[f64], j: u64, opts: &SolveOptions) -> Result<IterOutcome> {
    let n = x0.len();
    let mut x: Vec<f64> = x0.iter().map(|v| v.max(0.0)).collect();
    let (mut f, mut res) = op.residual(&x, j)?;
    for it in 0..opts.max_newton {
        if tolerance_met(res, &x, opts.tol_fixed_point) {
            return Ok(IterOutcome {
                values: x,
                converged: true,
                iterations: it,
                residual: res,
            });
        }
        let jac = DMatrix::<f64>::identity(n, n) - op.jacobian(&x, j)?;
        let rhs = nalgebra::DVector::from_iterator(n, f.iter().map(|v| -v));
        let dx = jac
            .lu()
            .solve(&rhs)
            .filter(|d| d.iter().all(|v| v.is_finite()))
            .ok_or(Error::SingularSystem { iteration: it })?;

        let mut step = 1.0;
        let mut fallback = None;
        let mut accepted = None;
        while step >= 1e-4 {
            let xn: Vec<f64> = x
                .iter()
                .zip(dx.iter())
                .map(|(a, d)| (a + step * d).max(0.0))
                .collect();
            if let Ok((fn_, rn)) = op.residual(&xn, j) {
                if rn < res {
                    accepted = Some((xn, fn_, rn));
                    break;
                }
                fallback = Some((xn, fn_, rn));
            }
            step *= opts.damping;
        }
        match accepted.or(fallback) {
            Some((xn, fn_, rn)) => {
                x = xn;
                f = fn_;
                res = rn;
            }
            None => break,
        }
    }
    Ok(IterOutcome {
        converged: tolerance_met(res, &x, opts.tol_fixed_point),
        values: x,
        iterations: opts.max_newton,
        residual: res,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Continuation {
    pub values: Vec<f64>,
    pub steps: Vec<JStep>,
}

/// Re-solves along `schedule` with Newton, each solve warm-started from the
/// previous one. `x` should be a fixed point at `schedule[0]`.
pub fn continue_in_j(
    op: &Operator,
    x: &[f64],
    schedule: &[u64],
    opts: &SolveOptions,
) -> Result<Continuation> {
    let Some((&j0, rest)) = schedule.split_first() else {
        return Err(Error::InvalidArgument("empty j schedule".into()));
    };
    let start = newton(op, x, j0, opts)?;
    if !start.converged {
        return Err(Error::Divergence {
            j: j0,
            message: format!(
                "start state is not a fixed point (residual {:.3e})",
                start.residual
            ),
        });
    }
    let mut prev = start.values;
    let mut steps = vec![JStep {
        j: j0,
        diff: 0.0,
        newton_iterations: start.iterations,
    }];
    for &j in rest {
        let mut out = newton(op, &prev, j, opts)?;
        if !out.converged {
            let gentle = SolveOptions {
                damping: opts.damping * 0.5,
                ..*opts
            };
            out = newton(op, &prev, j, &gentle)?;
        }
        if !out.converged {
            return Err(Error::Divergence {
                j,
                message: format!("Newton stalled at residual {:.3e}", out.residual),
            });
        }
        let diff = norm_inf(
            &prev
                .iter()
                .zip(&out.values)
                .map(|(a, b)| a - b)
                .collect::<Vec<_>>(),
        );
        steps.push(JStep {
            j,
            diff,
            newton_iterations: out.iterations,
        });
        prev = out.values;
    }
    Ok(Continuation {
        values: prev,
        steps,
    })
}

/// Small-shell branch: Picard from `((r' + r)/2) q`, Newton polish,
/// continuation in `j`.
pub fn solve_small(
    op: &Operator,
    shell: &ShellReport,
    opts: &SolveOptions,
) -> Result<Continuation> {
    let kernel = op.problem().kernel();
    let j0 = shell.j_schedule[0];
    let c = 0.5 * (shell.r_prime + shell.r);
    let x0: Vec<f64> = op.rule().nodes().iter().map(|&t| c * kernel.q(t)).collect();
    let pic = picard(op, &x0, j0, opts)?;
    let polished = newton(op, &pic.values, j0, opts)?;
    if !polished.converged {
        return Err(Error::NotFound(format!(
            "small solution: Newton stalled at residual {:.3e}",
            polished.residual
        )));
    }
    continue_in_j(op, &polished.values, &shell.j_schedule, opts)
}

/// Large-shell branch: locate the crossing `max A(c v) = c` on the ray
/// `c v`, `v = q / |q|`, `c in (r, R)`, by geometric bisection and start
/// Newton there (or from `R v` when the ray gives no bracket).
pub fn solve_large(
    op: &Operator,
    shell: &ShellReport,
    opts: &SolveOptions,
) -> Result<Continuation> {
    let kernel = op.problem().kernel();
    let j0 = shell.j_schedule[0];
    let qn = kernel.q(kernel.eta());
    let v: Vec<f64> = op
        .rule()
        .nodes()
        .iter()
        .map(|&t| kernel.q(t) / qn)
        .collect();
    let ray = |c: f64| -> Vec<f64> { v.iter().map(|&a| c * a).collect() };
    let gap = |c: f64| match op.apply(&ray(c), j0) {
        Ok(y) if y.iter().all(|a| a.is_finite()) => norm_inf(&y) - c,
        _ => 1.0,
    };
    let (mut lo, mut hi) = (shell.r, shell.r_large);
    let seed = if gap(lo) < 0.0 && gap(hi) > 0.0 {
        for _ in 0..200 {
            if hi / lo < 1.0 + 1e-6 {
                break;
            }
            let mid = (lo * hi).sqrt();
            if gap(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lo
    } else {
        shell.r_large
    };
    let out = newton(op, &ray(seed), j0, opts)?;
    if !out.converged {
        return Err(Error::NotFound(format!(
            "large solution: Newton from the ray point c = {seed:.6e} stalled at residual {:.3e}",
            out.residual
        )));
    }
    continue_in_j(op, &out.values, &shell.j_schedule, opts)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolutionPair {
    pub small: SolutionCertificate,
    pub large: SolutionCertificate,
    pub distinct: bool,
    pub separated: bool,
    pub certified: bool,
    pub warnings: Vec<String>,
}

/// Shared discretization for one problem: the rule and corrected kernel.
pub struct Discretization {
    pub rule: QuadratureRule,
    pub kmat: KernelMatrix,
}

impl Discretization {
    pub fn new(prob: &BvpProblem, opts: &SolveOptions) -> Result<Self> {
        let rule = opts.quad.rule(prob.eta())?;
        let kmat = KernelMatrix::corrected(&rule, prob.kernel());
        Ok(Self { rule, kmat })
    }
}

fn certify_branch(
    prob: &BvpProblem,
    shell: &ShellReport,
    disc: &Discretization,
    branch: &Continuation,
    opts: &SolveOptions,
) -> Result<SolutionCertificate> {
    let mut cert = certify(
        prob,
        shell.lambda,
        &disc.rule,
        &branch.values,
        opts.fine_factor,
    )?;
    cert.j_history = branch.steps.clone();
    cert.shell_position = Some(if cert.norm_inf < shell.r {
        ShellPosition::BelowR
    } else {
        ShellPosition::AboveR
    });
    Ok(cert)
}

fn distinct(a: &[f64], b: &[f64]) -> bool {
    let d = norm_inf(&a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>());
    d > 1e-6 * (1.0 + norm_inf(b))
}

/// Both positive solutions for the shell's `lambda`, certified.
pub fn solve_pair(
    prob: &BvpProblem,
    shell: &ShellReport,
    opts: &SolveOptions,
) -> Result<SolutionPair> {
    let disc = Discretization::new(prob, opts)?;
    solve_pair_with(prob, shell, &disc, opts)
}

pub fn solve_pair_with(
    prob: &BvpProblem,
    shell: &ShellReport,
    disc: &Discretization,
    opts: &SolveOptions,
) -> Result<SolutionPair> {
    opts.validate()?;
    let op = Operator::new(prob, &disc.rule, &disc.kmat, shell.lambda);
    let small = solve_small(&op, shell, opts)?;
    let large = solve_large(&op, shell, opts)?;
    if !distinct(&small.values, &large.values) {
        let j = *shell.j_schedule.last().unwrap_or(&1);
        let res = |x: &[f64]| op.residual(x, j).map(|r| r.1).unwrap_or(f64::NAN);
        return Err(Error::SameFixedPoint {
            norm_small: norm_inf(&small.values),
            norm_large: norm_inf(&large.values),
            residual_small: res(&small.values),
            residual_large: res(&large.values),
        });
    }
    let small_cert = certify_branch(prob, shell, disc, &small, opts)?;
    let large_cert = certify_branch(prob, shell, disc, &large, opts)?;
    let mut warnings = Vec::new();
    if !(shell.r_prime < small_cert.norm_star && small_cert.norm_star < shell.r) {
        warnings.push(format!(
            "small solution norm {:.6e} is outside the shell (r' = {:.6e}, r = {:.6e})",
            small_cert.norm_star, shell.r_prime, shell.r
        ));
    }
    if !(shell.r < large_cert.norm_star && large_cert.norm_star < shell.r_large) {
        warnings.push(format!(
            "large solution norm {:.6e} is outside the shell (r = {:.6e}, R = {:.6e})",
            large_cert.norm_star, shell.r, shell.r_large
        ));
    }
    let separated = check_separation(small_cert.norm_inf, large_cert.norm_inf, shell.r, true);
    Ok(SolutionPair {
        certified: small_cert.passed && large_cert.passed && separated,
        small: small_cert,
        large: large_cert,
        distinct: true,
        separated,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    TwoSolutions,
    OneSolution,
    None,
    InfeasibleShell,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::TwoSolutions => "two_solutions",
            Outcome::OneSolution => "one_solution",
            Outcome::None => "none",
            Outcome::InfeasibleShell => "infeasible_shell",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub outcome: Outcome,
    pub norm_small: Option<f64>,
    pub norm_large: Option<f64>,
    pub detail: Option<String>,
}

fn sweep_one(
    prob: &BvpProblem,
    lambda: f64,
    r: f64,
    disc: &Discretization,
    opts: &SolveOptions,
) -> SweepRow {
    let row = |outcome, small: Option<f64>, large: Option<f64>, detail: Option<String>| SweepRow {
        lambda,
        outcome,
        norm_small: small,
        norm_large: large,
        detail,
    };
    let shell = match assemble_shell(
        prob,
        r,
        LambdaChoice::Fixed(lambda),
        &disc.rule,
        opts.j_final_inv_tol,
    ) {
        Ok(s) => s,
        Err(e) => return row(Outcome::InfeasibleShell, None, None, Some(e.to_string())),
    };
    let op = Operator::new(prob, &disc.rule, &disc.kmat, lambda);
    let cert = |branch: Result<Continuation>| -> std::result::Result<(Vec<f64>, SolutionCertificate), String> {
        let b = branch.map_err(|e| e.to_string())?;
        let c = certify_branch(prob, &shell, disc, &b, opts).map_err(|e| e.to_string())?;
        if c.passed {
            Ok((b.values, c))
        } else {
            Err(format!("certificate failed (residual {:.3e})", c.residual_integral))
        }
    };
    let small = cert(solve_small(&op, &shell, opts));
    let large = cert(solve_large(&op, &shell, opts));
    match (small, large) {
        (Ok((xs, cs)), Ok((xl, cl))) => {
            if distinct(&xs, &xl) && check_separation(cs.norm_inf, cl.norm_inf, r, true) {
                row(
                    Outcome::TwoSolutions,
                    Some(cs.norm_inf),
                    Some(cl.norm_inf),
                    None,
                )
            } else {
                row(
                    Outcome::OneSolution,
                    Some(cs.norm_inf),
                    Some(cl.norm_inf),
                    Some("branches coincide or are not separated by r".into()),
                )
            }
        }
        (Ok((_, cs)), Err(e)) => row(
            Outcome::OneSolution,
            Some(cs.norm_inf),
            None,
            Some(format!("large: {e}")),
        ),
        (Err(e), Ok((_, cl))) => row(
            Outcome::OneSolution,
            None,
            Some(cl.norm_inf),
            Some(format!("small: {e}")),
        ),
        (Err(a), Err(b)) => row(
            Outcome::None,
            None,
            None,
            Some(format!("small: {a}; large: {b}")),
        ),
    }
}

/// Thread cap from `TRIBVP_THREADS`, if set to a positive integer.
pub fn thread_cap() -> Option<usize> {
    std::env::var("TRIBVP_THREADS")
        .ok()?
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
}

/// Shell assembly plus both branch solves for every `lambda`; outcomes are
/// in-band and rows come back in input order.
pub fn sweep_lambda(
    prob: &BvpProblem,
    lambdas: &[f64],
    r: f64,
    opts: &SolveOptions,
) -> Result<Vec<SweepRow>> {
    opts.validate()?;
    if lambdas.is_empty() {
        return Ok(Vec::new());
    }
    let disc = Discretization::new(prob, opts)?;
    let run = || -> Vec<SweepRow> {
        lambdas
            .par_iter()
            .map(|&l| sweep_one(prob, l, r, &disc, opts))
            .collect()
    };
    match thread_cap() {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(run))
        }
        None => Ok(run()),
    }
}
