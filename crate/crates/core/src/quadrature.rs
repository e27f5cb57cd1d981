//! Open graded composite rules on `(0, 1)` for integrands with integrable
//! endpoint singularities, plus small fixed-order helpers.
//!
//! The rule is built from `panels` uniform panels per side in a parameter
//! `u in [0, 1]`, mapped by `s = eta u^p` on `[0, eta]` and
//! `s = 1 - (1 - eta)(1 - u)^p` on `[eta, 1]`. Gauss-Legendre points are
//! placed in `u` and the weights carry `ds/du`, so a singularity like
//! `s^(-1/2)` turns into the bounded `u^(p/2 - 1)` before it is sampled.
//! Endpoints are never evaluated and `eta` is always a panel boundary.

use serde::Serialize;

use crate::error::{Error, Result};

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre needs at least one point");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // three-term recurrence for P_n(x) and P_n'(x)
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = nf * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        if n == 1 {
            dp = 1.0;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Composite Gauss-Legendre over `[a, b]` with extra breakpoints; breaks
/// outside `(a, b)` are ignored. Exact for piecewise polynomials of degree
/// `< 2 * points` whose kinks are among the breaks.
pub fn integrate_piecewise<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    points: usize,
) -> f64 {
    if b <= a {
        return 0.0;
    }
    let mut cuts: Vec<f64> = std::iter::once(a)
        .chain(breaks.iter().copied().filter(|&x| x > a && x < b))
        .chain(std::iter::once(b))
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let (x, w) = gauss_legendre(points);
    cuts.windows(2)
        .map(|seg| {
            let (lo, hi) = (seg[0], seg[1]);
            let half = 0.5 * (hi - lo);
            let mid = 0.5 * (hi + lo);
            x.iter()
                .zip(&w)
                .map(|(&xi, &wi)| wi * f(mid + half * xi))
                .sum::<f64>()
                * half
        })
        .sum()
}

const KRONROD_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const KRONROD_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728,
];
const GAUSS7_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let fc = f(mid);
    let mut kron = fc * KRONROD_WEIGHTS[7];
    let mut gauss = fc * GAUSS7_WEIGHTS[3];
    for i in 0..7 {
        let dx = half * KRONROD_NODES[i];
        let pair = f(mid - dx) + f(mid + dx);
        kron += KRONROD_WEIGHTS[i] * pair;
        if i % 2 == 1 {
            gauss += GAUSS7_WEIGHTS[i / 2] * pair;
        }
    }
    (kron * half, ((kron - gauss) * half).abs())
}

/// Adaptive 7/15-point Gauss-Kronrod with recursive bisection.
pub fn adaptive_integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    fn recurse<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let (value, err) = gk15(f, a, b);
        if err <= tol || depth == 0 || !value.is_finite() {
            return value;
        }
        let m = 0.5 * (a + b);
        recurse(f, a, m, 0.5 * tol, depth - 1) + recurse(f, m, b, 0.5 * tol, depth - 1)
    }
    if b <= a {
        return 0.0;
    }
    recurse(&f, a, b, tol, 40)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Panel {
    /// 0 for the side graded toward `s = 0`, 1 for the side graded toward `s = 1`.
    pub side: u8,
    pub u0: f64,
    pub u1: f64,
    pub s0: f64,
    pub s1: f64,
}

/// Open graded composite rule on `(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    eta: f64,
    panels_per_side: usize,
    grading: f64,
    points_per_panel: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    params: Vec<f64>,
    panels: Vec<Panel>,
}

impl QuadratureRule {
    pub fn build(
        eta: f64,
        panels_per_side: usize,
        grading: f64,
        points_per_panel: usize,
    ) -> Result<Self> {
        if !(eta > 0.0 && eta < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "breakpoint eta = {eta} must lie in (0, 1)"
            )));
        }
        if panels_per_side < 4 {
            return Err(Error::InvalidArgument(format!(
                "need at least 4 panels per side, got {panels_per_side}"
            )));
        }
        if points_per_panel < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 points per panel, got {points_per_panel}"
            )));
        }
        if !(grading.is_finite() && grading >= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "grading exponent {grading} must be >= 1"
            )));
        }

        let (gx, gw) = gauss_legendre(points_per_panel);
        let n = 2 * panels_per_side * points_per_panel;
        let mut rule = Self {
            eta,
            panels_per_side,
            grading,
            points_per_panel,
            nodes: Vec::with_capacity(n),
            weights: Vec::with_capacity(n),
            params: Vec::with_capacity(n),
            panels: Vec::with_capacity(2 * panels_per_side),
        };
        let du = 1.0 / panels_per_side as f64;
        for side in 0..2u8 {
            for k in 0..panels_per_side {
                let u0 = k as f64 * du;
                let u1 = if k + 1 == panels_per_side {
                    1.0
                } else {
                    (k + 1) as f64 * du
                };
                let (s0, _) = rule.map(side, u0);
                let (s1, _) = rule.map(side, u1);
                rule.panels.push(Panel {
                    side,
                    u0,
                    u1,
                    s0,
                    s1,
                });
                for (&xi, &wi) in gx.iter().zip(&gw) {
                    let u = u0 + 0.5 * (xi + 1.0) * (u1 - u0);
                    let (s, ds) = rule.map(side, u);
                    rule.nodes.push(s);
                    rule.weights.push(0.5 * wi * (u1 - u0) * ds);
                    rule.params.push(u);
                }
            }
        }
        Ok(rule)
    }

    /// `(s, ds/du)` for parameter `u` on the given side.
    #[inline]
    pub fn map(&self, side: u8, u: f64) -> (f64, f64) {
        let p = self.grading;
        if side == 0 {
            (self.eta * u.powf(p), self.eta * p * u.powf(p - 1.0))
        } else {
            let v = 1.0 - u;
            (
                1.0 - (1.0 - self.eta) * v.powf(p),
                (1.0 - self.eta) * p * v.powf(p - 1.0),
            )
        }
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }
    pub fn panels_per_side(&self) -> usize {
        self.panels_per_side
    }
    pub fn grading(&self) -> f64 {
        self.grading
    }
    pub fn points_per_panel(&self) -> usize {
        self.points_per_panel
    }
    pub fn len(&self) -> usize {
        self.nodes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    /// Parameter `u` of each node within its side.
    pub fn params(&self) -> &[f64] {
        &self.params
    }
    pub fn panels(&self) -> &[Panel] {
        &self.panels
    }

    /// Panel boundaries in `s`, including `0`, `eta` and `1`.
    pub fn breakpoints(&self) -> Vec<f64> {
        std::iter::once(0.0)
            .chain(self.panels.iter().map(|p| p.s1))
            .collect()
    }

    pub fn panel_of_node(&self, node: usize) -> usize {
        node / self.points_per_panel
    }

    pub fn panel_nodes(&self, panel: usize) -> std::ops::Range<usize> {
        panel * self.points_per_panel..(panel + 1) * self.points_per_panel
    }

    /// Index of the panel containing `t` (clamped to the first/last panel).
    pub fn locate(&self, t: f64) -> usize {
        let idx = self.panels.partition_point(|p| p.s1 < t);
        idx.min(self.panels.len() - 1)
    }

    /// Same layout with `factor` times as many panels per side.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        Self::build(
            self.eta,
            self.panels_per_side * factor,
            self.grading,
            self.points_per_panel,
        )
    }

    /// `sum_k w_k f(s_k)`; fails on the first non-finite sample.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> Result<f64> {
        let mut acc = 0.0;
        for (k, (&s, &w)) in self.nodes.iter().zip(&self.weights).enumerate() {
            let v = f(s);
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    context: "integrand".into(),
                    index: k,
                    location: s,
                });
            }
            acc += w * v;
        }
        Ok(acc)
    }

    /// Panel-wise Lagrange interpolation (in `s`) of nodal `values` at `t`.
    /// Reproduces polynomials of degree `< points_per_panel` exactly.
    pub fn interpolate(&self, values: &[f64], t: f64) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        let range = self.panel_nodes(self.locate(t));
        let xs = &self.nodes[range.clone()];
        let ys = &values[range];
        let mut acc = 0.0;
        for (m, (&xm, &ym)) in xs.iter().zip(ys).enumerate() {
            let mut basis = 1.0;
            for (n, &xn) in xs.iter().enumerate() {
                if n != m {
                    basis *= (t - xn) / (xm - xn);
                }
            }
            acc += basis * ym;
        }
        acc
    }
}

/// Outcome of the integrability probe for the weight `g`.
#[derive(Debug, Clone, Serialize)]
pub struct IntegrabilityReport {
    pub converged: bool,
    pub estimate: f64,
    pub history: Vec<f64>,
}

/// `integral_0^eta s g(s) ds + integral_eta^1 g(s) ds` on one rule; non-finite
/// samples propagate into the sum.
pub fn h1_combination<G: Fn(f64) -> f64>(rule: &QuadratureRule, g: G) -> f64 {
    let eta = rule.eta();
    rule.nodes()
        .iter()
        .zip(rule.weights())
        .map(|(&s, &w)| w * if s < eta { s * g(s) } else { g(s) })
        .sum()
}

/// Evaluates the integrability combination on each rule in turn (coarse to
/// fine). Converged when the last two estimates agree to relative `1e-6`,
/// with an absolute floor of `1e-12`. Never fails: divergence shows up as
/// `converged == false`.
pub fn check_h1_integrability<G: Fn(f64) -> f64>(
    rules: &[QuadratureRule],
    g: G,
) -> IntegrabilityReport {
    let history: Vec<f64> = rules.iter().map(|r| h1_combination(r, &g)).collect();
    let estimate = history.last().copied().unwrap_or(f64::NAN);
    let converged = match history.as_slice() {
        [.., prev, last] if prev.is_finite() && last.is_finite() => {
            (last - prev).abs() <= (1e-6 * last.abs()).max(1e-12)
        }
        _ => false,
    };
    IntegrabilityReport {
        converged,
        estimate,
        history,
    }
}

/// `levels` rules starting at `base` panels per side, doubling each time.
pub fn dyadic_ladder(
    eta: f64,
    base: usize,
    levels: usize,
    grading: f64,
    points: usize,
) -> Result<Vec<QuadratureRule>> {
    (0..levels)
        .map(|l| QuadratureRule::build(eta, base << l, grading, points))
        .collect()
}
