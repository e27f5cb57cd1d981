//! Problem data: the nonlinearity, its envelope `0 <= M + f <= g(t) h(x)`,
//! the auxiliary function `p`, and the window `[alpha, beta]` on which `f`
//! must blow up at `x -> 0+` and grow superlinearly at `x -> infinity`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{Expr, Var};
use crate::greens::GreenKernel;

pub const PRESETS: [&str; 3] = ["example31", "example32", "bounded_demo"];

/// Textual description of a problem, as it appears in config files and reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub label: String,
    pub eta: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub f: String,
    pub g: String,
    pub h: String,
    pub p: String,
    pub alpha: f64,
    pub beta: f64,
    /// True when `g`, `h`, `p`, `M` were worked out by hand for a preset
    /// rather than supplied by the user.
    #[serde(default)]
    pub envelope_derived: bool,
}

#[derive(Debug, Clone)]
pub struct BvpProblem {
    spec: ProblemSpec,
    kernel: GreenKernel,
    f: Expr,
    g: Expr,
    h: Expr,
    p: Expr,
}

impl Serialize for BvpProblem {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.spec.serialize(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct H1Report {
    pub ok: bool,
    /// Largest violation of either envelope inequality, scaled by `1 + |g h|`.
    pub worst_violation: f64,
    pub witness: Option<(f64, f64)>,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct H2Report {
    pub small_x_blowup: bool,
    pub superlinear: bool,
    /// `min_t f(t, 10^-k)` for `k = 1..=8`.
    pub small_x_samples: Vec<f64>,
    /// `min_t f(t, 10^k) / 10^k` for `k = 1..=8`.
    pub growth_samples: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AuxReport {
    pub p_nondecreasing: bool,
    pub p_positive: bool,
    pub hp_finite_near_zero: bool,
}

impl AuxReport {
    pub fn ok(&self) -> bool {
        self.p_nondecreasing && self.p_positive && self.hp_finite_near_zero
    }
}

/// Inputs to the classical bound for bounded nonlinearities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SemipositoneBound {
    #[serde(rename = "M_A")]
    pub m_a: f64,
    #[serde(rename = "B")]
    pub b: f64,
}

impl BvpProblem {
    pub fn new(spec: ProblemSpec) -> Result<Self> {
        let kernel = GreenKernel::new(spec.eta)?;
        if !(spec.m.is_finite() && spec.m >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "M = {} must be finite and >= 0",
                spec.m
            )));
        }
        if !(spec.alpha > 0.0 && spec.alpha < spec.beta && spec.beta < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "window [alpha, beta] = [{}, {}] must satisfy 0 < alpha < beta < 1",
                spec.alpha, spec.beta
            )));
        }
        let f = Expr::parse(&spec.f)?;
        let g = Expr::parse(&spec.g)?;
        let h = Expr::parse(&spec.h)?;
        let p = Expr::parse(&spec.p)?;
        f.check_vars("f", &[Var::T, Var::X])?;
        g.check_vars("g", &[Var::T])?;
        h.check_vars("h", &[Var::X])?;
        p.check_vars("p", &[Var::X])?;
        Ok(Self {
            spec,
            kernel,
            f,
            g,
            h,
            p,
        })
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "example31" => Self::new(ProblemSpec {
                label: "example31".into(),
                eta: 2.0 / 3.0,
                m: 1.0,
                f: "1/sqrt(t*(1-t))*(1/x + x^2) - sin(t)".into(),
                g: "1/sqrt(t*(1-t))".into(),
                h: "1/x + x^2 + 1".into(),
                p: "x".into(),
                alpha: 0.25,
                beta: 0.75,
                envelope_derived: true,
            }),
            "example32" => Self::example32(1.0, 1.0, 0.5),
            "bounded_demo" => Self::new(ProblemSpec {
                label: "bounded_demo".into(),
                eta: 2.0 / 3.0,
                m: 1.0,
                f: "x^2 - sin(t)".into(),
                g: "1".into(),
                h: "x^2 + 1".into(),
                p: "x".into(),
                alpha: 0.25,
                beta: 0.75,
                envelope_derived: true,
            }),
            other => Err(Error::UnknownPreset(other.to_string())),
        }
    }

    /// `f = t (a / x^exponent + b e^x)` with `eta = 3/4` and `M = 0`.
    pub fn example32(a: f64, b: f64, exponent: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && exponent > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "example32 needs a, b, exponent > 0 (got {a}, {b}, {exponent})"
            )));
        }
        Self::new(ProblemSpec {
            label: "example32".into(),
            eta: 0.75,
            m: 0.0,
            f: format!("t*({a:?}/x^{exponent:?} + {b:?}*exp(x))"),
            g: "t".into(),
            h: format!("{a:?}/x^{exponent:?} + {b:?}*exp(x)"),
            p: "x".into(),
            alpha: 0.25,
            beta: 0.75,
            envelope_derived: true,
        })
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }
    pub fn label(&self) -> &str {
        &self.spec.label
    }
    pub fn eta(&self) -> f64 {
        self.spec.eta
    }
    pub fn m(&self) -> f64 {
        self.spec.m
    }
    pub fn alpha(&self) -> f64 {
        self.spec.alpha
    }
    pub fn beta(&self) -> f64 {
        self.spec.beta
    }
    pub fn kernel(&self) -> &GreenKernel {
        &self.kernel
    }

    #[inline]
    pub fn f(&self, t: f64, x: f64) -> f64 {
        self.f.eval(t, x)
    }
    #[inline]
    pub fn g(&self, t: f64) -> f64 {
        self.g.eval(t, 0.0)
    }
    #[inline]
    pub fn h(&self, x: f64) -> f64 {
        self.h.eval(0.0, x)
    }
    #[inline]
    pub fn p(&self, x: f64) -> f64 {
        self.p.eval(0.0, x)
    }

    /// Checks `0 <= M + f(t,x) <= g(t) h(x)` pointwise on the given grids.
    pub fn validate_h1(&self, t_grid: &[f64], x_grid: &[f64]) -> H1Report {
        let m = self.m();
        let mut worst = 0.0f64;
        let mut witness = None;
        for &t in t_grid {
            let g = self.g(t);
            for &x in x_grid {
                let lhs = m + self.f(t, x);
                let env = g * self.h(x);
                let violation = envelope_violation(lhs, env);
                if violation > worst {
                    worst = violation;
                    witness = Some((t, x));
                }
            }
        }
        H1Report {
            ok: worst <= 1e-12,
            worst_violation: worst,
            witness,
            samples: t_grid.len() * x_grid.len(),
        }
    }

    pub fn validate_h1_default(&self) -> H1Report {
        self.validate_h1(&chebyshev_points(64), &log_points(1e-6, 1e3, 64))
    }

    /// Heuristic evidence for blow-up at `x -> 0+` and superlinear growth,
    /// uniformly for `t` in `[alpha, beta]`.
    pub fn validate_h2(&self) -> H2Report {
        let ts = linspace(self.alpha(), self.beta(), 33);
        let min_over_t = |x: f64, scale: f64| {
            ts.iter()
                .map(|&t| self.f(t, x) / scale)
                .fold(f64::INFINITY, |acc, v| {
                    if v.is_nan() || acc.is_nan() {
                        f64::NAN
                    } else {
                        acc.min(v)
                    }
                })
        };
        let small: Vec<f64> = (1..=8).map(|k| min_over_t(10f64.powi(-k), 1.0)).collect();
        let growth: Vec<f64> = (1..=8)
            .map(|k| {
                let x = 10f64.powi(k);
                min_over_t(x, x)
            })
            .collect();
        H2Report {
            small_x_blowup: grows_without_bound(&small),
            superlinear: grows_without_bound(&growth),
            small_x_samples: small,
            growth_samples: growth,
        }
    }

    /// Properties required of the auxiliary function: `p` nondecreasing and
    /// positive on `(0, infinity)`, and `h p` bounded as `x -> 0+`.
    pub fn check_aux(&self) -> AuxReport {
        let xs = log_points(1e-12, 1e3, 256);
        let ps: Vec<f64> = xs.iter().map(|&x| self.p(x)).collect();
        AuxReport {
            p_nondecreasing: ps.windows(2).all(|w| w[1] >= w[0] - 1e-12),
            p_positive: ps.iter().all(|&v| v > 0.0 && !v.is_nan()),
            hp_finite_near_zero: self.hp_bounded_near_zero(),
        }
    }

    /// `h p` at `1e-12` is finite and no more than twice its largest value on
    /// `[1e-6, 1]`, i.e. it does not keep growing as `x -> 0+`.
    fn hp_bounded_near_zero(&self) -> bool {
        let hp = |x: f64| self.h(x) * self.p(x);
        let reference = log_points(1e-6, 1.0, 64)
            .into_iter()
            .map(hp)
            .fold(0.0f64, |a, v| {
                if v.is_nan() {
                    f64::INFINITY
                } else {
                    a.max(v.abs())
                }
            });
        let tiny = hp(1e-12);
        tiny.is_finite() && reference.is_finite() && tiny.abs() <= 1.0 + 2.0 * reference
    }

    /// `B = max f + M` over the closed unit square, or `None` when `f` is
    /// singular (non-finite) somewhere on a 101 x 101 sample.
    pub fn semipositone_bound(&self) -> Option<SemipositoneBound> {
        let grid = linspace(0.0, 1.0, 101);
        let mut best = f64::NEG_INFINITY;
        for &t in &grid {
            for &x in &grid {
                let v = self.f(t, x);
                if !v.is_finite() {
                    return None;
                }
                best = best.max(v);
            }
        }
        Some(SemipositoneBound {
            m_a: self.m(),
            b: best + self.m(),
        })
    }
}

fn envelope_violation(lhs: f64, env: f64) -> f64 {
    if lhs.is_nan() || env.is_nan() {
        return f64::INFINITY;
    }
    if lhs == f64::INFINITY {
        // both sides overflowed together: the bound still holds
        return if env == f64::INFINITY {
            0.0
        } else {
            f64::INFINITY
        };
    }
    if lhs == f64::NEG_INFINITY {
        return f64::INFINITY;
    }
    let scale = 1.0 + env.abs();
    let below = (-lhs).max(0.0);
    let above = if env.is_finite() {
        (lhs - env).max(0.0)
    } else {
        0.0
    };
    below.max(above) / if scale.is_finite() { scale } else { 1.0 }
}

/// Last four samples strictly increasing (or pinned at `+inf`) and the final
/// one at least a hundred times the first.
fn grows_without_bound(samples: &[f64]) -> bool {
    if samples.iter().any(|v| v.is_nan()) || samples.len() < 4 {
        return false;
    }
    let tail = &samples[samples.len() - 4..];
    let increasing = tail
        .windows(2)
        .all(|w| w[1] > w[0] || w[1] == f64::INFINITY);
    let last = *samples.last().unwrap_or(&f64::NAN);
    increasing && last > 100.0 * samples[0].abs().max(1.0)
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n)
            .map(|i| {
                if i + 1 == n {
                    b
                } else {
                    a + (b - a) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

/// Chebyshev-Gauss points mapped to `(0, 1)`; both endpoints excluded.
pub fn chebyshev_points(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 * (1.0 - (std::f64::consts::PI * (i as f64 + 0.5) / n as f64).cos()))
        .collect()
}

pub fn log_points(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.log10(), hi.log10());
    linspace(a, b, n)
        .into_iter()
        .map(|e| 10f64.powf(e))
        .collect()
}
