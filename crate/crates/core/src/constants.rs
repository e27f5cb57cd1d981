//! Shell constants: the admissible parameter bound and the radii
//! `r' < r < R` that bracket the small and large positive solutions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{linspace, BvpProblem};
use crate::quadrature::{adaptive_integrate, QuadratureRule};

/// How the parameter is picked when assembling a shell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaChoice {
    Auto,
    Fixed(f64),
}

impl Serialize for LambdaChoice {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            LambdaChoice::Auto => s.serialize_str("auto"),
            LambdaChoice::Fixed(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for LambdaChoice {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(LambdaChoice::Fixed(v)),
            Raw::Text(s) if s == "auto" => Ok(LambdaChoice::Auto),
            Raw::Text(s) => Err(serde::de::Error::custom(format!(
                "lambda must be a number or \"auto\", got \"{s}\""
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Maximum {
    pub value: f64,
    pub argmax: f64,
}

/// Minima over `t in [alpha, beta]` of the window kernel integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindowIntegrals {
    /// `min_t integral_alpha^beta G(t, s) ds`
    pub min_kernel: f64,
    /// `min_t q(t) integral_alpha^beta G(t, s) ds`
    pub min_q_kernel: f64,
    /// `min_t q(t)` on the window (attained at an end, `q` being concave)
    pub min_q: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeltaReport {
    pub delta: f64,
    #[serde(rename = "L_prime")]
    pub l_prime: f64,
    pub l: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShellReport {
    pub r: f64,
    pub a: f64,
    pub b: f64,
    pub c_r: f64,
    pub c_argmax: f64,
    pub lambda_r: f64,
    #[serde(rename = "L")]
    pub l_large: f64,
    #[serde(rename = "R")]
    pub r_large: f64,
    pub delta: f64,
    #[serde(rename = "L_prime")]
    pub l_prime: f64,
    pub l: f64,
    pub lambda_bar: f64,
    pub r_prime: f64,
    pub j_schedule: Vec<u64>,
    #[serde(rename = "theorem_A_bound")]
    pub theorem_a_bound: Option<f64>,
    #[serde(rename = "theorem_A")]
    pub theorem_a_status: &'static str,
    pub lambda: f64,
    pub lambda_mode: &'static str,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub growth_threshold: f64,
    pub window: WindowIntegrals,
}

/// `a = 1/2 int_0^eta s^2 g + eta^2/2 int_eta^1 g`.
pub fn compute_a(prob: &BvpProblem, rule: &QuadratureRule) -> Result<f64> {
    let eta = prob.eta();
    if (rule.eta() - eta).abs() > 1e-15 {
        return Err(Error::InvalidArgument(format!(
            "rule breakpoint {} does not match eta = {eta}",
            rule.eta()
        )));
    }
    rule.integrate(|s| {
        let g = prob.g(s);
        if s < eta {
            0.5 * s * s * g
        } else {
            0.5 * eta * eta * g
        }
    })
}

/// `b = 2 int_0^z p + 2 r p(z) (1 - eta)` with `z = r (2 eta - 1) / 2`.
pub fn compute_b(prob: &BvpProblem, r: f64) -> Result<f64> {
    let eta = prob.eta();
    let z = r * (2.0 * eta - 1.0) / 2.0;
    let pz = prob.p(z);
    let integral = adaptive_integrate(|s| prob.p(s), 0.0, z, 1e-14 * (1.0 + z));
    let b = 2.0 * integral + 2.0 * r * pz * (1.0 - eta);
    if !b.is_finite() {
        return Err(Error::NonFinite {
            context: "p in b".into(),
            index: 0,
            location: z,
        });
    }
    Ok(b)
}

/// `c(r) = max h p` over `[1e-9, r + 1]`: dense grid, then golden section
/// around the best cell.
pub fn compute_c(prob: &BvpProblem, r: f64) -> Result<Maximum> {
    let hp = |x: f64| prob.h(x) * prob.p(x);
    let grid = linspace(1e-9, r + 1.0, 4001);
    let mut best = 0;
    let mut vals = Vec::with_capacity(grid.len());
    for (i, &x) in grid.iter().enumerate() {
        let v = hp(x);
        if !v.is_finite() {
            return Err(Error::NonFinite {
                context: "h*p".into(),
                index: i,
                location: x,
            });
        }
        if v > vals.get(best).copied().unwrap_or(f64::NEG_INFINITY) {
            best = i;
        }
        vals.push(v);
    }
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(grid.len() - 1)];
    let (x, v) = golden_max(hp, lo, hi);
    Ok(if v > vals[best] {
        Maximum {
            value: v,
            argmax: x,
        }
    } else {
        Maximum {
            value: vals[best],
            argmax: grid[best],
        }
    })
}

fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= 1e-13 * (1.0 + a.abs()) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc > fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// `lambda(r) = min{ r / (2 K M), b / (c(r) a) }`, the first term dropping
/// out when `M = 0`.
pub fn compute_lambda_r(prob: &BvpProblem, r: f64, a: f64, b: f64, c: f64) -> f64 {
    let k = prob.kernel().k();
    let first = if prob.m() > 0.0 {
        r / (2.0 * k * prob.m())
    } else {
        f64::INFINITY
    };
    first.min(b / (c * a))
}

/// Classical bound for bounded nonlinearities; `None` when `f` is singular
/// on the unit square.
pub fn compute_theorem_a(prob: &BvpProblem) -> Option<f64> {
    let sb = prob.semipositone_bound()?;
    let eta = prob.eta();
    let m = sb.m_a;
    let first = 6.0 / (sb.b * eta * eta * (3.0 - 2.0 * eta));
    let (second, third) = if m > 0.0 {
        let w = 1.0 - eta;
        (6.0 * (2.0 * eta - 1.0) / (m * (1.0 - 3.0 * w * w)), 1.0 / m)
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    let first = if first.is_nan() || first < 0.0 {
        f64::INFINITY
    } else {
        first
    };
    Some(first.min(second).min(third))
}

fn min_on_window<F: Fn(f64) -> f64>(f: F, alpha: f64, beta: f64) -> f64 {
    let grid = linspace(alpha, beta, 129);
    let vals: Vec<f64> = grid.iter().map(|&t| f(t)).collect();
    let (i, &coarse) = vals
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty grid");
    let lo = grid[i.saturating_sub(1)];
    let hi = grid[(i + 1).min(grid.len() - 1)];
    linspace(lo, hi, 129)
        .into_iter()
        .map(f)
        .fold(coarse, f64::min)
}

pub fn window_integrals(prob: &BvpProblem) -> WindowIntegrals {
    let kernel = prob.kernel();
    let (alpha, beta) = (prob.alpha(), prob.beta());
    WindowIntegrals {
        min_kernel: min_on_window(|t| kernel.integrate_s(t, alpha, beta), alpha, beta),
        min_q_kernel: min_on_window(
            |t| kernel.q(t) * kernel.integrate_s(t, alpha, beta),
            alpha,
            beta,
        ),
        min_q: kernel.q(alpha).min(kernel.q(beta)),
    }
}

/// Growth threshold `T = 2 / (lambda min_t q(t) int_alpha^beta G(t,s) ds)`.
pub fn growth_threshold(prob: &BvpProblem, lambda: f64) -> f64 {
    2.0 / (lambda * window_integrals(prob).min_q_kernel)
}

fn window_grid(prob: &BvpProblem) -> Vec<f64> {
    linspace(prob.alpha(), prob.beta(), 129)
}

/// Minimum over the window grid; NaN anywhere poisons the result.
fn min_f_on_window(prob: &BvpProblem, ts: &[f64], x: f64, scale: f64) -> f64 {
    ts.iter().fold(f64::INFINITY, |acc, &t| {
        let v = prob.f(t, x) / scale;
        if v.is_nan() || acc.is_nan() {
            f64::NAN
        } else {
            acc.min(v)
        }
    })
}

/// Smallest `L = 2^k r` (`k >= 1`, so `L > r`) with `f(t, x) / x >= T` on
/// the window at `x = L, 2L, 4L`.
pub fn estimate_l(prob: &BvpProblem, lambda: f64, r: f64) -> Result<f64> {
    if !(lambda > 0.0 && r > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "need lambda > 0 and r > 0 (got {lambda}, {r})"
        )));
    }
    let threshold = growth_threshold(prob, lambda);
    let ts = window_grid(prob);
    let ok = |x: f64| min_f_on_window(prob, &ts, x, x) >= threshold;
    for k in 1..=60 {
        let x = r * 2f64.powi(k);
        if ok(x) && ok(2.0 * x) && ok(4.0 * x) {
            return Ok(x);
        }
    }
    Err(Error::NotFound(format!(
        "f(t,x)/x never exceeds {threshold:.6e} on [alpha, beta] up to x = 2^60 r; superlinear growth looks violated"
    )))
}

/// `L' = 2 max(1, M K) / min_t int_alpha^beta G`, `delta = 2^-k` the first
/// ladder point with `min_t f(t, x) > L'` at `x = delta, delta/2, delta/4`,
/// and `l = L' min_t int_alpha^beta G`.
pub fn estimate_delta_l_prime(prob: &BvpProblem) -> Result<DeltaReport> {
    let min_kernel = window_integrals(prob).min_kernel;
    let mk = prob.m() * prob.kernel().k();
    let l_prime = 2.0 * mk.max(1.0) / min_kernel;
    let ts = window_grid(prob);
    let ok = |x: f64| min_f_on_window(prob, &ts, x, 1.0) > l_prime;
    for k in 0..=60 {
        let d = 2f64.powi(-k);
        if ok(d) && ok(d / 2.0) && ok(d / 4.0) {
            return Ok(DeltaReport {
                delta: d,
                l_prime,
                l: l_prime * min_kernel,
            });
        }
    }
    Err(Error::NotFound(format!(
        "f(t,x) never exceeds L' = {l_prime:.6e} on [alpha, beta] down to x = 2^-60; blow-up at x -> 0+ looks violated"
    )))
}

/// `[j0, 2 j0, 4 j0, ...]` ending at the first `j` with `1/j < inv_tol`.
pub fn j_schedule(j0: u64, inv_tol: f64) -> Vec<u64> {
    let mut out = vec![j0.max(1)];
    while 1.0 / (*out.last().unwrap() as f64) >= inv_tol && out.len() < 64 {
        out.push(out.last().unwrap() * 2);
    }
    out
}

/// Computes every shell constant and picks `lambda`, `r'` and `R`.
pub fn assemble_shell(
    prob: &BvpProblem,
    r: f64,
    choice: LambdaChoice,
    rule: &QuadratureRule,
    j_final_inv_tol: f64,
) -> Result<ShellReport> {
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::InvalidArgument(format!("r = {r} must be positive")));
    }
    let m = prob.m();
    let k = prob.kernel().k();
    let mk = m * k;
    let a = compute_a(prob, rule)?;
    let b = compute_b(prob, r)?;
    let c = compute_c(prob, r)?;
    let lambda_r = compute_lambda_r(prob, r, a, b, c.value);
    let dr = estimate_delta_l_prime(prob)?;
    let delta_over_m = if m > 0.0 { dr.delta / m } else { f64::INFINITY };
    let lambda_bar = delta_over_m.min(lambda_r);
    if !(lambda_bar.is_finite() && lambda_bar > 0.0) {
        return Err(Error::EmptyWindow(format!(
            "lambda-bar = {lambda_bar} is not a positive number; check a, b, c(r)"
        )));
    }

    let (lambda, lambda_mode) = match choice {
        LambdaChoice::Auto if m > 0.0 => ((0.5 * lambda_bar).min(dr.delta / (2.0 * mk)), "auto"),
        LambdaChoice::Auto => (0.5 * lambda_bar, "auto"),
        LambdaChoice::Fixed(v) => (v, "fixed"),
    };
    if !(lambda > 0.0 && lambda < lambda_bar) {
        return Err(Error::EmptyWindow(format!(
            "lambda = {lambda:.6e} is outside (0, lambda-bar = {lambda_bar:.6e}); decrease lambda or r"
        )));
    }

    let lo = lambda * mk;
    let hi = (lambda * dr.l).min(dr.delta).min(r);
    if lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Less) {
        return Err(Error::EmptyWindow(format!(
            "no r' with lambda*M*K = {lo:.6e} < r' < min(lambda*l, delta, r) = {hi:.6e}; decrease lambda or r"
        )));
    }
    let r_prime = if m > 0.0 { (lo * hi).sqrt() } else { 0.5 * hi };

    let window = window_integrals(prob);
    let l_large = estimate_l(prob, lambda, r)?;
    let r_large = 2.0 * (2.0 * l_large / window.min_q).max(r);
    let j0 = ((2.0 / (dr.delta - r_prime)).ceil() as u64).max(16);
    let theorem_a_bound = compute_theorem_a(prob);

    Ok(ShellReport {
        r,
        a,
        b,
        c_r: c.value,
        c_argmax: c.argmax,
        lambda_r,
        l_large,
        r_large,
        delta: dr.delta,
        l_prime: dr.l_prime,
        l: dr.l,
        lambda_bar,
        r_prime,
        j_schedule: j_schedule(j0, j_final_inv_tol),
        theorem_a_bound,
        theorem_a_status: if theorem_a_bound.is_some() {
            "applicable"
        } else {
            "inapplicable"
        },
        lambda,
        lambda_mode,
        k,
        m,
        growth_threshold: 2.0 / (lambda * window.min_q_kernel),
        window,
    })
}
