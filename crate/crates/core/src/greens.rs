//! Green's function of `x''' = 0`, `x(0) = x'(eta) = x''(1) = 0` and the
//! quantities derived from it (envelope `J`, cone weight `q`, `Psi*`, `K`).
//!
//! Every closed form here is evaluated directly; numerical maximisation and
//! quadrature only appear in [`check_properties`], where they act as oracles.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::integrate_piecewise;

/// The kernel `G(t, s)` for a fixed three-point parameter `eta` in `(1/2, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreenKernel {
    eta: f64,
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} = {v} is outside [0, 1]")))
    }
}

impl GreenKernel {
    pub fn new(eta: f64) -> Result<Self> {
        if eta.is_finite() && eta > 0.5 && eta < 1.0 {
            Ok(Self { eta })
        } else {
            Err(Error::Domain(format!("eta = {eta} must lie in (1/2, 1)")))
        }
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// `G(t, s)` without domain checks. Case boundaries dispatch to the
    /// first matching case; adjacent cases agree there.
    #[inline]
    pub fn value(&self, t: f64, s: f64) -> f64 {
        let eta = self.eta;
        if s <= eta {
            if t <= s {
                t * s - 0.5 * t * t
            } else {
                0.5 * s * s
            }
        } else if t <= s {
            eta * t - 0.5 * t * t
        } else {
            0.5 * s * s - t * s + eta * t
        }
    }

    /// `dG/dt`. Continuous across `t = s`.
    #[inline]
    pub fn dt_value(&self, t: f64, s: f64) -> f64 {
        let eta = self.eta;
        match (s <= eta, t <= s) {
            (true, true) => s - t,
            (true, false) => 0.0,
            (false, true) => eta - t,
            (false, false) => eta - s,
        }
    }

    /// `d2G/dt2`: `-1` for `t < s`, `0` for `t > s`. At `t = s` the left
    /// limit `-1` is returned.
    #[inline]
    pub fn dtt_value(&self, t: f64, s: f64) -> f64 {
        if t <= s {
            -1.0
        } else {
            0.0
        }
    }

    pub fn eval_g(&self, t: f64, s: f64) -> Result<f64> {
        check_unit("t", t)?;
        check_unit("s", s)?;
        Ok(self.value(t, s))
    }

    pub fn eval_gt(&self, t: f64, s: f64) -> Result<f64> {
        check_unit("t", t)?;
        check_unit("s", s)?;
        Ok(self.dt_value(t, s))
    }

    pub fn eval_gtt(&self, t: f64, s: f64) -> Result<f64> {
        check_unit("t", t)?;
        check_unit("s", s)?;
        Ok(self.dtt_value(t, s))
    }

    /// `J(s) = max_t G(t, s)`.
    #[inline]
    pub fn j(&self, s: f64) -> f64 {
        if s <= self.eta {
            0.5 * s * s
        } else {
            0.5 * self.eta * self.eta
        }
    }

    /// Cone weight `q(t)`, with `G(t, s) >= q(t) J(s)`.
    #[inline]
    pub fn q(&self, t: f64) -> f64 {
        if t <= self.eta {
            self.eta * t
        } else {
            2.0 * self.eta * t - t * t
        }
    }

    /// `Psi*(t) = integral of G(t, s) over s in [0, 1]`.
    #[inline]
    pub fn psi_star(&self, t: f64) -> f64 {
        let eta = self.eta;
        (t * t * t - 3.0 * t * t + (6.0 * eta - 3.0 * eta * eta) * t) / 6.0
    }

    #[inline]
    pub fn psi_star_d1(&self, t: f64) -> f64 {
        let eta = self.eta;
        (3.0 * t * t - 6.0 * t + 6.0 * eta - 3.0 * eta * eta) / 6.0
    }

    #[inline]
    pub fn psi_star_d2(&self, t: f64) -> f64 {
        t - 1.0
    }

    /// `max Psi* = Psi*(eta) = (3 eta^2 - 2 eta^3) / 6`.
    pub fn psi_star_norm(&self) -> f64 {
        let eta = self.eta;
        (3.0 * eta * eta - 2.0 * eta * eta * eta) / 6.0
    }

    pub fn b0(&self) -> f64 {
        let eta = self.eta;
        (6.0 * eta - 3.0 * eta * eta - 2.0) / (6.0 * (2.0 * eta - 1.0))
    }

    /// `K = max(1, B0)`, so that `Psi*(t) <= K q(t)`.
    pub fn k(&self) -> f64 {
        self.b0().max(1.0)
    }

    /// `(K, B0)`.
    pub fn constants_k_b0(&self) -> (f64, f64) {
        (self.k(), self.b0())
    }

    pub fn eval_j(&self, s: f64) -> Result<f64> {
        check_unit("s", s)?;
        Ok(self.j(s))
    }

    pub fn eval_q(&self, t: f64) -> Result<f64> {
        check_unit("t", t)?;
        Ok(self.q(t))
    }

    pub fn eval_psi_star(&self, t: f64) -> Result<f64> {
        check_unit("t", t)?;
        Ok(self.psi_star(t))
    }

    /// `integral over s in [a, b] of G(t, s)`, exact up to round-off (the
    /// integrand is piecewise quadratic with breaks at `t` and `eta`).
    pub fn integrate_s(&self, t: f64, a: f64, b: f64) -> f64 {
        integrate_piecewise(|s| self.value(t, s), a, b, &[t, self.eta], 3)
    }
}

/// One line of the property suite.
#[derive(Debug, Clone, Serialize)]
pub struct CheckRow {
    pub name: &'static str,
    pub measured: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct GreenCheckReport {
    pub eta: f64,
    pub grid: usize,
    pub rows: Vec<CheckRow>,
}

impl GreenCheckReport {
    pub fn pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

fn row_le(name: &'static str, measured: f64, tolerance: f64) -> CheckRow {
    CheckRow {
        name,
        measured,
        tolerance,
        pass: measured <= tolerance,
    }
}

/// Runs every kernel property on a `grid x grid` uniform mesh of the unit
/// square. The `t` grid also contains `eta`, where `max_t G(t, s)` sits for
/// `s >= eta`.
pub fn check_properties(kernel: &GreenKernel, grid: usize) -> Result<GreenCheckReport> {
    if grid < 3 {
        return Err(Error::InvalidArgument(format!(
            "grid must have at least 3 points, got {grid}"
        )));
    }
    let eta = kernel.eta();
    let uniform: Vec<f64> = (0..grid).map(|i| i as f64 / (grid - 1) as f64).collect();
    let mut t_grid = uniform.clone();
    t_grid.push(eta);
    t_grid.sort_by(f64::total_cmp);
    let s_grid = &uniform;
    let k = kernel.k();

    let mut rows = Vec::new();

    // max over t of G matches J
    let mut max_dev = 0.0f64;
    let mut min_gap = f64::INFINITY;
    for &s in s_grid {
        let mut best = f64::NEG_INFINITY;
        for &t in &t_grid {
            let g = kernel.value(t, s);
            best = best.max(g);
            min_gap = min_gap.min(g - kernel.q(t) * kernel.j(s));
        }
        max_dev = max_dev.max((best - kernel.j(s)).abs());
    }
    rows.push(row_le("max_t G(t,s) = J(s)", max_dev, 1e-9));
    rows.push(row_le("G(t,s) >= q(t) J(s)", -min_gap, 1e-12));

    let mut quad_dev = 0.0f64;
    let mut dom_gap = f64::NEG_INFINITY;
    for &t in &t_grid {
        quad_dev = quad_dev.max((kernel.integrate_s(t, 0.0, 1.0) - kernel.psi_star(t)).abs());
        dom_gap = dom_gap.max(kernel.psi_star(t) - k * kernel.q(t));
    }
    rows.push(row_le("quadrature of G(t,.) = Psi*(t)", quad_dev, 1e-10));
    rows.push(row_le("Psi*(t) <= K q(t)", dom_gap, 1e-12));

    let norm_dev = t_grid
        .iter()
        .map(|&t| kernel.psi_star(t))
        .fold(f64::NEG_INFINITY, f64::max)
        - kernel.psi_star_norm();
    rows.push(row_le(
        "max Psi* = (3eta^2-2eta^3)/6",
        norm_dev.abs(),
        1e-14,
    ));

    let gt_eta = s_grid
        .iter()
        .map(|&s| kernel.dt_value(eta, s).abs())
        .fold(0.0, f64::max);
    rows.push(CheckRow {
        name: "Gt(eta,s) = 0",
        measured: gt_eta,
        tolerance: 0.0,
        pass: gt_eta == 0.0,
    });

    let eps = 1e-9;
    let jump_dev = s_grid[1..grid - 1]
        .iter()
        .map(|&s| {
            let jump = kernel.dtt_value(s + eps, s) - kernel.dtt_value(s - eps, s);
            (jump - 1.0).abs()
        })
        .fold(0.0, f64::max);
    rows.push(CheckRow {
        name: "Gtt(s+,s) - Gtt(s-,s) = 1",
        measured: jump_dev,
        tolerance: 0.0,
        pass: jump_dev == 0.0,
    });

    // adjacent cases agree on t = s and s = eta
    let case = [
        |t: f64, s: f64, _e: f64| t * s - 0.5 * t * t,
        |_t: f64, s: f64, _e: f64| 0.5 * s * s,
        |t: f64, _s: f64, e: f64| e * t - 0.5 * t * t,
        |t: f64, s: f64, e: f64| 0.5 * s * s - t * s + e * t,
    ];
    let mut seam = 0.0f64;
    for &x in &uniform {
        // diagonal t = s = x
        let (a, b) = if x <= eta { (0, 1) } else { (2, 3) };
        seam = seam.max((case[a](x, x, eta) - case[b](x, x, eta)).abs());
        // s = eta, t = x
        let (a, b) = if x <= eta { (0, 2) } else { (1, 3) };
        seam = seam.max((case[a](x, eta, eta) - case[b](x, eta, eta)).abs());
    }
    rows.push(row_le("case seams agree", seam, 1e-15));

    let mut concave = f64::NEG_INFINITY;
    for (i, &a) in uniform.iter().enumerate() {
        for &b in &uniform[i..] {
            let mid = kernel.q(0.5 * (a + b));
            concave = concave.max(0.5 * (kernel.q(a) + kernel.q(b)) - mid);
        }
    }
    rows.push(row_le("q concave", concave, 1e-12));

    rows.push(row_le(
        "reconstruction x'''=1+t",
        reconstruction_error(kernel, &t_grid),
        1e-8,
    ));

    Ok(GreenCheckReport { eta, grid, rows })
}

/// Maximum deviation of `x(t) = integral G(t,s)(1+s) ds` (and its boundary
/// values and third derivative) from the hand-integrated solution of
/// `x''' = 1 + t` with the three-point conditions.
fn reconstruction_error(kernel: &GreenKernel, t_grid: &[f64]) -> f64 {
    let eta = kernel.eta();
    let forcing = |s: f64| 1.0 + s;
    let c2 = -(eta * eta / 2.0 + eta * eta * eta / 6.0 - 1.5 * eta);
    let exact = |t: f64| t.powi(3) / 6.0 + t.powi(4) / 24.0 - 0.75 * t * t + c2 * t;
    let x =
        |t: f64| integrate_piecewise(|s| kernel.value(t, s) * forcing(s), 0.0, 1.0, &[t, eta], 4);
    let xpp = |t: f64| {
        integrate_piecewise(
            |s| kernel.dtt_value(t, s) * forcing(s),
            0.0,
            1.0,
            &[t, eta],
            4,
        )
    };

    let mut err = 0.0f64;
    for &t in t_grid {
        err = err.max((x(t) - exact(t)).abs());
    }
    err = err.max(x(0.0).abs());
    let xp_eta = integrate_piecewise(
        |s| kernel.dt_value(eta, s) * forcing(s),
        0.0,
        1.0,
        &[eta],
        4,
    );
    err = err.max(xp_eta.abs());
    err = err.max(xpp(1.0).abs());
    let h = 1e-4;
    for &t in t_grid.iter().filter(|&&t| t > 2.0 * h && t < 1.0 - 2.0 * h) {
        let third = (xpp(t + h) - xpp(t - h)) / (2.0 * h);
        err = err.max((third - forcing(t)).abs());
    }
    err
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Independent piecewise evaluator written from the four cases as a
    /// lookup on (region of s, order of t and s).
    fn brute_g(eta: f64, t: f64, s: f64) -> f64 {
        type Case = (bool, bool, fn(f64, f64, f64) -> f64);
        let cases: [Case; 4] = [
            (true, true, |_, t, s| t * s - t * t / 2.0),
            (true, false, |_, _, s| s * s / 2.0),
            (false, true, |e, t, _| e * t - t * t / 2.0),
            (false, false, |e, t, s| s * s / 2.0 - t * s + e * t),
        ];
        let left = s <= eta;
        let below = t <= s;
        let (_, _, f) = cases
            .iter()
            .find(|(l, b, _)| *l == left && *b == below)
            .unwrap();
        f(eta, t, s)
    }

    #[test]
    fn rejects_eta_outside_open_interval() {
        for eta in [0.5, 1.0, 0.2, f64::NAN] {
            assert!(GreenKernel::new(eta).is_err());
        }
    }

    #[test]
    fn g_vanishes_at_t_zero() {
        let k = GreenKernel::new(2.0 / 3.0).unwrap();
        assert_eq!(k.eval_g(0.0, 0.37).unwrap(), 0.0);
    }

    #[test]
    fn g_case_values() {
        let k = GreenKernel::new(2.0 / 3.0).unwrap();
        let v = k.eval_g(0.8, 0.5).unwrap();
        assert_abs_diff_eq!(v, brute_g(2.0 / 3.0, 0.8, 0.5), epsilon = 1e-15);
        assert_abs_diff_eq!(v, 0.125, epsilon = 1e-15);

        let v = k.eval_g(0.95, 0.9).unwrap();
        let oracle = brute_g(2.0 / 3.0, 0.95, 0.9);
        assert_abs_diff_eq!(v, oracle, epsilon = 1e-15);
        // 0.405 - 0.855 + 0.63333...
        assert_abs_diff_eq!(v, 0.405 - 0.855 + 0.95 * 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(v, 0.183_333_333_333_333_3, epsilon = 1e-12);
    }

    #[test]
    fn domain_errors() {
        let k = GreenKernel::new(0.75).unwrap();
        assert!(matches!(k.eval_g(1.1, 0.5), Err(Error::Domain(_))));
        assert!(matches!(k.eval_gt(0.5, -0.1), Err(Error::Domain(_))));
        assert!(matches!(k.eval_gtt(-1.0, 0.5), Err(Error::Domain(_))));
        assert!(k.eval_q(2.0).is_err());
        assert!(k.eval_j(1.5).is_err());
        assert!(k.eval_psi_star(-0.5).is_err());
    }

    #[test]
    fn derivative_kernels() {
        let k = GreenKernel::new(2.0 / 3.0).unwrap();
        for i in 0..=20 {
            let s = i as f64 / 20.0;
            assert_eq!(k.eval_gt(2.0 / 3.0, s).unwrap(), 0.0);
        }
        assert_eq!(k.eval_gtt(0.2, 0.5).unwrap(), -1.0);
        assert_eq!(k.eval_gtt(0.9, 0.5).unwrap(), 0.0);
        // left-limit convention on the diagonal
        assert_eq!(k.eval_gtt(0.5, 0.5).unwrap(), -1.0);
    }

    #[test]
    fn gt_matches_finite_differences() {
        let k = GreenKernel::new(0.7).unwrap();
        let h = 1e-6;
        for &(t, s) in &[(0.2, 0.5), (0.6, 0.3), (0.3, 0.9), (0.95, 0.8)] {
            let fd = (k.value(t + h, s) - k.value(t - h, s)) / (2.0 * h);
            assert_abs_diff_eq!(fd, k.dt_value(t, s), epsilon = 1e-8);
            let fd2 = (k.dt_value(t + h, s) - k.dt_value(t - h, s)) / (2.0 * h);
            assert_abs_diff_eq!(fd2, k.dtt_value(t, s), epsilon = 1e-8);
        }
    }

    #[test]
    fn derived_closed_forms() {
        let k = GreenKernel::new(2.0 / 3.0).unwrap();
        assert_abs_diff_eq!(k.eval_j(0.9).unwrap(), 2.0 / 9.0, epsilon = 1e-15);
        assert_abs_diff_eq!(k.psi_star_norm(), 10.0 / 81.0, epsilon = 1e-15);
        assert_eq!(k.eval_q(0.0).unwrap(), 0.0);
        // q continuous at eta
        let eta = k.eta();
        assert_abs_diff_eq!(eta * eta, 2.0 * eta * eta - eta * eta, epsilon = 1e-15);

        let k = GreenKernel::new(0.75).unwrap();
        let (kk, b0) = k.constants_k_b0();
        assert_eq!(kk, 1.0);
        assert_abs_diff_eq!(b0, 13.0 / 48.0, epsilon = 1e-15);
    }

    #[test]
    fn psi_star_norm_matches_grid_max_of_quadrature() {
        for eta in [0.55, 2.0 / 3.0, 0.9] {
            let k = GreenKernel::new(eta).unwrap();
            let mut best = f64::NEG_INFINITY;
            for i in 0..=2000 {
                let t = i as f64 / 2000.0;
                best = best.max(k.integrate_s(t, 0.0, 1.0));
            }
            best = best.max(k.integrate_s(eta, 0.0, 1.0));
            assert_abs_diff_eq!(best, k.psi_star_norm(), epsilon = 1e-12);
        }
    }

    #[test]
    fn property_suite_passes() {
        for eta in [0.55, 2.0 / 3.0, 0.75, 0.9] {
            let k = GreenKernel::new(eta).unwrap();
            let report = check_properties(&k, 201).unwrap();
            for row in &report.rows {
                assert!(row.pass, "eta={eta}: {row:?}");
            }
        }
    }

    #[test]
    fn suite_rejects_tiny_grid() {
        let k = GreenKernel::new(0.6).unwrap();
        assert!(check_properties(&k, 2).is_err());
    }
}
