//! Certification of candidate solutions against the boundary value problem
//! itself, on a freshly built finer rule.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::operator::norm_inf;
use crate::problem::BvpProblem;
use crate::quadrature::QuadratureRule;

pub const TOL_RESIDUAL: f64 = 1e-7;
pub const TOL_BOUNDARY: f64 = 1e-6;
pub const TOL_CONE: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ShellPosition {
    BelowR,
    AboveR,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    pub residual_relative: f64,
    pub boundary: f64,
    pub cone_relative: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            residual_relative: TOL_RESIDUAL,
            boundary: TOL_BOUNDARY,
            cone_relative: TOL_CONE,
        }
    }
}

/// One step of the `j -> infinity` continuation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JStep {
    pub j: u64,
    pub diff: f64,
    pub newton_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolutionCertificate {
    pub lambda: f64,
    pub nodes: Vec<f64>,
    /// De-shifted solution `x = x* - phi`.
    pub values: Vec<f64>,
    pub values_star: Vec<f64>,
    pub norm_inf: f64,
    pub norm_star: f64,
    pub residual_integral: f64,
    pub residual_ode: f64,
    pub bc_x0: f64,
    pub bc_xp_eta: f64,
    pub bc_xpp_1: f64,
    pub min_interior: f64,
    pub cone_defect: f64,
    pub fine_nodes: usize,
    pub tolerances: Tolerances,
    pub passed: bool,
    pub shell_position: Option<ShellPosition>,
    pub j_history: Vec<JStep>,
}

impl SolutionCertificate {
    pub fn residual_ok(&self) -> bool {
        self.residual_integral <= self.tolerances.residual_relative * (1.0 + self.norm_inf)
    }

    pub fn boundary_ok(&self) -> bool {
        [self.bc_x0, self.bc_xp_eta, self.bc_xpp_1]
            .iter()
            .all(|v| v.abs() <= self.tolerances.boundary)
    }

    pub fn cone_ok(&self) -> bool {
        self.cone_defect <= self.tolerances.cone_relative * self.norm_inf
    }

    /// Last three recorded continuation differences are non-increasing.
    pub fn continuation_settled(&self) -> bool {
        let d: Vec<f64> = self.j_history.iter().map(|s| s.diff).collect();
        d.len() >= 3 && d[d.len() - 3..].windows(2).all(|w| w[1] <= w[0])
    }
}

/// Certifies a candidate `x*` (samples at `rule`'s nodes) as a solution of
/// `x*''' = lambda (f(t, x* - phi) + M)` with the three boundary conditions.
pub fn certify(
    prob: &BvpProblem,
    lambda: f64,
    rule: &QuadratureRule,
    candidate_star: &[f64],
    fine_factor: usize,
) -> Result<SolutionCertificate> {
    if fine_factor < 2 {
        return Err(Error::InvalidArgument(format!(
            "fine_factor must be >= 2, got {fine_factor}"
        )));
    }
    if candidate_star.len() != rule.len() {
        return Err(Error::InvalidArgument(format!(
            "candidate has {} samples, rule has {} nodes",
            candidate_star.len(),
            rule.len()
        )));
    }
    let kernel = prob.kernel();
    let m = prob.m();
    let phi = |t: f64| lambda * m * kernel.psi_star(t);

    let fine = rule.refined(fine_factor)?;
    let fs = fine.nodes();
    let fw = fine.weights();
    let x_star_fine: Vec<f64> = fs
        .iter()
        .map(|&t| rule.interpolate(candidate_star, t))
        .collect();
    let mut forcing = Vec::with_capacity(fs.len());
    for (k, (&s, &xs)) in fs.iter().zip(&x_star_fine).enumerate() {
        let v = prob.f(s, xs - phi(s)) + m;
        if !v.is_finite() {
            return Err(Error::NonFinite {
                context: "f + M at fine node".into(),
                index: k,
                location: s,
            });
        }
        forcing.push(v);
    }
    let weighted: Vec<f64> = forcing.iter().zip(fw).map(|(f, w)| f * w).collect();

    let residual_integral = fs
        .iter()
        .zip(&x_star_fine)
        .map(|(&t, &xs)| {
            let integral: f64 = fs
                .iter()
                .zip(&weighted)
                .map(|(&s, &wf)| kernel.value(t, s) * wf)
                .sum();
            (xs - lambda * integral).abs()
        })
        .fold(0.0, f64::max);

    // x*''(t) = -lambda int_t^1 (f + M) ds at fine panel boundaries, where the
    // tail sum is an exact union of panels.
    let npp = fine.points_per_panel();
    let mut tail = vec![0.0; fine.panels().len() + 1];
    for p in (0..fine.panels().len()).rev() {
        let chunk: f64 = weighted[p * npp..(p + 1) * npp].iter().sum();
        tail[p] = tail[p + 1] + chunk;
    }
    let mut ode_err = 0.0f64;
    let mut ode_scale = 0.0f64;
    for (p, panel) in fine.panels().iter().enumerate() {
        let t = panel.s0;
        if !(0.1..=0.9).contains(&t) {
            continue;
        }
        let from_integral = -lambda * tail[p];
        let from_values = second_derivative(rule, candidate_star, t);
        ode_err = ode_err.max((from_values - from_integral).abs());
        ode_scale = ode_scale.max(from_integral.abs());
    }
    let residual_ode = ode_err / (1.0 + ode_scale);

    // derivative kernels: Gt(eta, .) and Gtt(1, .) vanish identically
    let bc_xp_eta = lambda
        * fs.iter()
            .zip(&weighted)
            .map(|(&s, &wf)| kernel.dt_value(kernel.eta(), s) * wf)
            .sum::<f64>();
    let bc_xpp_1 = lambda
        * fs.iter()
            .zip(&weighted)
            .map(|(&s, &wf)| kernel.dtt_value(1.0, s) * wf)
            .sum::<f64>();

    let nodes = rule.nodes().to_vec();
    let values: Vec<f64> = nodes
        .iter()
        .zip(candidate_star)
        .map(|(&t, &xs)| xs - phi(t))
        .collect();
    let bc_x0 = rule.interpolate(&values, 0.0);
    let norm = norm_inf(&values);
    let norm_star = norm_inf(candidate_star);
    let min_interior = values.iter().copied().fold(f64::INFINITY, f64::min);
    let cone_defect = nodes
        .iter()
        .zip(candidate_star)
        .map(|(&t, &xs)| (kernel.q(t) * norm_star - xs).max(0.0))
        .fold(0.0, f64::max);

    let mut cert = SolutionCertificate {
        lambda,
        nodes,
        values,
        values_star: candidate_star.to_vec(),
        norm_inf: norm,
        norm_star,
        residual_integral,
        residual_ode,
        bc_x0,
        bc_xp_eta,
        bc_xpp_1,
        min_interior,
        cone_defect,
        fine_nodes: fs.len(),
        tolerances: Tolerances::default(),
        passed: false,
        shell_position: None,
        j_history: Vec::new(),
    };
    cert.passed =
        cert.residual_ok() && cert.boundary_ok() && cert.min_interior > 0.0 && cert.cone_ok();
    Ok(cert)
}

/// Certifies a de-shifted solution `x` given at `rule`'s nodes.
pub fn certify_deshifted(
    prob: &BvpProblem,
    lambda: f64,
    rule: &QuadratureRule,
    values: &[f64],
    fine_factor: usize,
) -> Result<SolutionCertificate> {
    let kernel = prob.kernel();
    let star: Vec<f64> = rule
        .nodes()
        .iter()
        .zip(values)
        .map(|(&t, &x)| x + lambda * prob.m() * kernel.psi_star(t))
        .collect();
    certify(prob, lambda, rule, &star, fine_factor)
}

/// Second derivative of the panel interpolant at `t`, averaged over the two
/// panels sharing `t` when it sits on a boundary.
fn second_derivative(rule: &QuadratureRule, values: &[f64], t: f64) -> f64 {
    let p = rule.locate(t);
    let d = panel_second_derivative(rule, values, p, t);
    let next = p + 1;
    if next < rule.panels().len() && (rule.panels()[p].s1 - t).abs() <= 1e-14 {
        0.5 * (d + panel_second_derivative(rule, values, next, t))
    } else {
        d
    }
}

fn panel_second_derivative(rule: &QuadratureRule, values: &[f64], panel: usize, t: f64) -> f64 {
    let range = rule.panel_nodes(panel);
    let xs = &rule.nodes()[range.clone()];
    let ys = &values[range];
    let n = xs.len();
    let mut acc = 0.0;
    for m in 0..n {
        let denom: f64 = (0..n).filter(|&c| c != m).map(|c| xs[m] - xs[c]).product();
        let mut num = 0.0;
        for a in 0..n {
            for b in 0..n {
                if a == m || b == m || a == b {
                    continue;
                }
                num += (0..n)
                    .filter(|&c| c != m && c != a && c != b)
                    .map(|c| t - xs[c])
                    .product::<f64>();
            }
        }
        acc += ys[m] * num / denom;
    }
    acc
}

/// `|x_small| < r < |x_large|` with the pair distinct.
pub fn check_separation(norm_small: f64, norm_large: f64, r: f64, distinct: bool) -> bool {
    distinct && norm_small < r && r < norm_large
}
