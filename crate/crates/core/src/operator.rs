//! Discrete regularized Hammerstein operator
//! `(A x)(t) = lambda int_0^1 G(t,s) f*_j(s, x(s) - phi(s)) ds`
//! collocated at the quadrature nodes.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::greens::GreenKernel;
use crate::problem::BvpProblem;
use crate::quadrature::{gauss_legendre, QuadratureRule};

/// Truncated, regularized nonlinearity:
/// `f(t, u + 1/j) + M` for `u >= 0`, and `f(t, 1/j) + M` for `u < 0`.
#[inline]
pub fn f_star(prob: &BvpProblem, j: u64, t: f64, u: f64) -> f64 {
    let inv_j = 1.0 / j as f64;
    let x = if u >= 0.0 { u + inv_j } else { inv_j };
    prob.f(t, x) + prob.m()
}

/// Kernel collocation matrix `K[i][k]`, so that `int G(t_i, s) y(s) ds` is
/// approximated by `sum_k K[i][k] y(s_k)`.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    mat: DMatrix<f64>,
    corrected: bool,
}

impl KernelMatrix {
    /// Plain Nystrom weights `w_k G(t_i, s_k)`.
    pub fn plain(rule: &QuadratureRule, kernel: &GreenKernel) -> Self {
        let s = rule.nodes();
        let w = rule.weights();
        let n = s.len();
        let mat = DMatrix::from_fn(n, n, |i, k| w[k] * kernel.value(s[i], s[k]));
        Self {
            mat,
            corrected: false,
        }
    }

    /// Plain weights everywhere except on the panel holding `t_i`, where
    /// `G(t_i, .)` has a kink. There the row is replaced by exact product
    /// weights `int G(t_i, s(u)) l_m(u) s'(u) du` against the panel's
    /// Lagrange basis, integrated separately on each side of the kink.
    pub fn corrected(rule: &QuadratureRule, kernel: &GreenKernel) -> Self {
        let mut out = Self::plain(rule, kernel);
        let npp = rule.points_per_panel();
        let (gx, gw) = gauss_legendre(2 * npp);
        let params = rule.params();
        for (pi, panel) in rule.panels().iter().enumerate() {
            let range = rule.panel_nodes(pi);
            let un = &params[range.clone()];
            for (a, i) in range.clone().enumerate() {
                let ti = rule.nodes()[i];
                let mut row = vec![0.0; npp];
                for (lo, hi) in [(panel.u0, un[a]), (un[a], panel.u1)] {
                    let half = 0.5 * (hi - lo);
                    for (&xg, &wg) in gx.iter().zip(&gw) {
                        let u = lo + half * (xg + 1.0);
                        let (s, ds) = rule.map(panel.side, u);
                        let base = wg * half * ds * kernel.value(ti, s);
                        for (m, slot) in row.iter_mut().enumerate() {
                            *slot += base * lagrange(un, m, u);
                        }
                    }
                }
                for (m, k) in range.clone().enumerate() {
                    out.mat[(i, k)] = row[m];
                }
            }
        }
        out.corrected = true;
        out
    }

    pub fn len(&self) -> usize {
        self.mat.nrows()
    }
    pub fn is_empty(&self) -> bool {
        self.mat.nrows() == 0
    }
    pub fn is_corrected(&self) -> bool {
        self.corrected
    }
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }
    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.mat[(i, k)]
    }
}

fn lagrange(nodes: &[f64], m: usize, u: f64) -> f64 {
    nodes
        .iter()
        .enumerate()
        .filter(|&(n, _)| n != m)
        .map(|(_, &un)| (u - un) / (nodes[m] - un))
        .product()
}

/// `phi = lambda M Psi*` sampled at nodes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Shift {
    pub phi: Vec<f64>,
    pub norm: f64,
}

impl Shift {
    pub fn new(prob: &BvpProblem, lambda: f64, nodes: &[f64]) -> Self {
        let kernel = prob.kernel();
        let scale = lambda * prob.m();
        Self {
            phi: nodes.iter().map(|&t| scale * kernel.psi_star(t)).collect(),
            norm: scale * kernel.psi_star_norm(),
        }
    }
}

/// Nodal samples of a candidate fixed point.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteState {
    pub values: Vec<f64>,
    pub lambda: f64,
    pub j: u64,
}

impl DiscreteState {
    pub fn norm_inf(&self) -> f64 {
        norm_inf(&self.values)
    }

    /// `x_i >= q(t_i) |x| - tol |x|` at every node, and `x >= 0`.
    pub fn in_cone(&self, kernel: &GreenKernel, nodes: &[f64], tol: f64) -> bool {
        let n = self.norm_inf();
        self.values
            .iter()
            .zip(nodes)
            .all(|(&x, &t)| x >= 0.0 && x >= kernel.q(t) * n - tol * n)
    }
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(
        0.0f64,
        |a, &x| if x.is_nan() { f64::NAN } else { a.max(x.abs()) },
    )
}

/// The operator at fixed `lambda`, bound to one rule and kernel matrix.
pub struct Operator<'a> {
    problem: &'a BvpProblem,
    rule: &'a QuadratureRule,
    kmat: &'a KernelMatrix,
    shift: Shift,
    lambda: f64,
}

impl<'a> Operator<'a> {
    pub fn new(
        problem: &'a BvpProblem,
        rule: &'a QuadratureRule,
        kmat: &'a KernelMatrix,
        lambda: f64,
    ) -> Self {
        assert_eq!(
            rule.len(),
            kmat.len(),
            "kernel matrix and rule disagree in size"
        );
        Self {
            problem,
            rule,
            kmat,
            shift: Shift::new(problem, lambda, rule.nodes()),
            lambda,
        }
    }

    pub fn problem(&self) -> &BvpProblem {
        self.problem
    }
    pub fn rule(&self) -> &QuadratureRule {
        self.rule
    }
    pub fn shift(&self) -> &Shift {
        &self.shift
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn len(&self) -> usize {
        self.rule.len()
    }
    pub fn is_empty(&self) -> bool {
        self.rule.is_empty()
    }

    fn forcing(&self, x: &[f64], j: u64) -> Result<Vec<f64>> {
        let nodes = self.rule.nodes();
        x.iter()
            .zip(&self.shift.phi)
            .zip(nodes)
            .enumerate()
            .map(|(k, ((&xk, &pk), &s))| {
                let v = f_star(self.problem, j, s, xk - pk);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::NonFinite {
                        context: "f*".into(),
                        index: k,
                        location: s,
                    })
                }
            })
            .collect()
    }

    /// `out_i = lambda sum_k K[i][k] f*(s_k, x_k - phi_k)`.
    pub fn apply(&self, x: &[f64], j: u64) -> Result<Vec<f64>> {
        debug_assert_eq!(x.len(), self.len());
        if self.lambda == 0.0 {
            return Ok(vec![0.0; x.len()]);
        }
        let f = nalgebra::DVector::from_vec(self.forcing(x, j)?);
        let out = self.kmat.matrix() * f * self.lambda;
        Ok(out.as_slice().to_vec())
    }

    /// `F(x) = x - A(x)` and its sup norm.
    pub fn residual(&self, x: &[f64], j: u64) -> Result<(Vec<f64>, f64)> {
        let ax = self.apply(x, j)?;
        let f: Vec<f64> = x.iter().zip(&ax).map(|(a, b)| a - b).collect();
        let n = norm_inf(&f);
        Ok((f, n))
    }

    /// `J[i][k] = lambda K[i][k] d f*/du (s_k, u_k)` by central differences
    /// with step `1e-7 (1 + |u|)`; columns on the flat branch
    /// (`u < -step`) are exactly zero.
    pub fn jacobian(&self, x: &[f64], j: u64) -> Result<DMatrix<f64>> {
        let nodes = self.rule.nodes();
        let mut out = self.kmat.matrix() * self.lambda;
        for k in 0..x.len() {
            let u = x[k] - self.shift.phi[k];
            let h = 1e-7 * (1.0 + u.abs());
            let d = if u < -h {
                0.0
            } else {
                let s = nodes[k];
                (f_star(self.problem, j, s, u + h) - f_star(self.problem, j, s, u - h)) / (2.0 * h)
            };
            if !d.is_finite() {
                return Err(Error::NonFinite {
                    context: "df*/du".into(),
                    index: k,
                    location: nodes[k],
                });
            }
            out.column_mut(k).scale_mut(d);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::ProblemSpec;
    use proptest::prelude::*;

    fn custom(f: &str, m: f64) -> BvpProblem {
        BvpProblem::new(ProblemSpec {
            label: "custom".into(),
            eta: 2.0 / 3.0,
            m,
            f: f.into(),
            g: "1".into(),
            h: "1".into(),
            p: "x".into(),
            alpha: 0.25,
            beta: 0.75,
            envelope_derived: false,
        })
        .unwrap()
    }

    fn rule() -> QuadratureRule {
        QuadratureRule::build(2.0 / 3.0, 16, 4.0, 4).unwrap()
    }

    #[test]
    fn truncated_nonlinearity() {
        let p = BvpProblem::preset("example31").unwrap();
        let v = f_star(&p, 10, 0.5, 0.9);
        assert!((v - (5.0 - 0.5f64.sin())).abs() < 1e-13);
        assert!((v - 4.5206).abs() < 1e-4);
        let neg = f_star(&p, 10, 0.3, -0.5);
        assert_eq!(neg, f_star(&p, 10, 0.3, -7.0));
        assert_eq!(neg, p.f(0.3, 0.1) + 1.0);
        let q = BvpProblem::preset("example32").unwrap();
        assert_eq!(f_star(&q, 4, 0.5, 1.0), q.f(0.5, 1.25));
    }

    #[test]
    fn shift_values() {
        let p = BvpProblem::preset("example31").unwrap();
        let r = rule();
        let sh = Shift::new(&p, 0.3, r.nodes());
        assert!((sh.norm - 0.3 * 10.0 / 81.0).abs() < 1e-15);
        assert!(sh.phi.iter().all(|&v| v > 0.0 && v <= sh.norm + 1e-15));
    }

    #[test]
    fn constant_forcing_reproduces_psi_star() {
        let p = custom("2", 0.5);
        let r = rule();
        for kmat in [
            KernelMatrix::plain(&r, p.kernel()),
            KernelMatrix::corrected(&r, p.kernel()),
        ] {
            let op = Operator::new(&p, &r, &kmat, 0.7);
            let out = op.apply(&vec![1.0; r.len()], 5).unwrap();
            for (o, &t) in out.iter().zip(r.nodes()) {
                let expect = 0.7 * 2.5 * p.kernel().psi_star(t);
                let tol = if kmat.is_corrected() { 1e-12 } else { 1e-6 };
                assert!((o - expect).abs() < tol, "{o} vs {expect}");
            }
        }
    }

    #[test]
    fn corrected_rows_integrate_cubics_exactly() {
        let p = custom("x", 0.0);
        let r = rule();
        let k = KernelMatrix::corrected(&r, p.kernel());
        let y = |s: f64| 1.0 + s - 2.0 * s * s + s * s * s;
        let yv: Vec<f64> = r.nodes().iter().map(|&s| y(s)).collect();
        for (i, &t) in r.nodes().iter().enumerate().step_by(7) {
            let approx: f64 = (0..r.len()).map(|m| k.get(i, m) * yv[m]).sum();
            let exact = crate::quadrature::integrate_piecewise(
                |s| p.kernel().value(t, s) * y(s),
                0.0,
                1.0,
                &[t, 2.0 / 3.0],
                8,
            );
            assert!(
                (approx - exact).abs() < 1e-9,
                "t = {t}: {approx} vs {exact}"
            );
        }
    }

    #[test]
    fn flat_branch_ignores_state() {
        let p = BvpProblem::preset("example31").unwrap();
        let r = rule();
        let k = KernelMatrix::corrected(&r, p.kernel());
        let op = Operator::new(&p, &r, &k, 0.1);
        let a = op.apply(&vec![-1.0; r.len()], 20).unwrap();
        let b = op.apply(&vec![-3.0; r.len()], 20).unwrap();
        assert_eq!(a, b);
        let jac = op.jacobian(&vec![-1.0; r.len()], 20).unwrap();
        assert!(jac.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_lambda_gives_zero() {
        let p = BvpProblem::preset("example31").unwrap();
        let r = rule();
        let k = KernelMatrix::plain(&r, p.kernel());
        let op = Operator::new(&p, &r, &k, 0.0);
        assert!(op
            .apply(&vec![0.5; r.len()], 16)
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn non_finite_forcing_reports_node() {
        let p = custom("log(x - 0.5)", 0.0);
        let r = rule();
        let k = KernelMatrix::plain(&r, p.kernel());
        let op = Operator::new(&p, &r, &k, 1.0);
        let mut x = vec![1.0; r.len()];
        x[5] = 0.1;
        match op.apply(&x, 100).unwrap_err() {
            Error::NonFinite {
                index, location, ..
            } => {
                assert_eq!(index, 5);
                assert_eq!(location, r.nodes()[5]);
            }
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn linear_jacobian_is_scaled_kernel() {
        let p = custom("x", 0.0);
        let r = rule();
        let k = KernelMatrix::corrected(&r, p.kernel());
        let op = Operator::new(&p, &r, &k, 0.4);
        let x: Vec<f64> = r.nodes().iter().map(|&s| 1.0 + s).collect();
        let jac = op.jacobian(&x, 16).unwrap();
        let diff = (&jac - k.matrix() * 0.4).abs().max();
        assert!(diff < 1e-8 * k.matrix().abs().max(), "{diff}");
    }

    #[test]
    fn refinement_consistency() {
        let p = BvpProblem::preset("example31").unwrap();
        let coarse = QuadratureRule::build(p.eta(), 32, 4.0, 4).unwrap();
        let k = KernelMatrix::corrected(&coarse, p.kernel());
        let op = Operator::new(&p, &coarse, &k, 0.05);
        let xfun = |s: f64| 0.3 + p.kernel().q(s);
        let x: Vec<f64> = coarse.nodes().iter().map(|&s| xfun(s)).collect();
        let out = op.apply(&x, 64).unwrap();
        let fine = coarse.refined(2).unwrap();
        for (i, &t) in coarse.nodes().iter().enumerate().step_by(11) {
            let reference = 0.05
                * fine
                    .integrate(|s| {
                        let u = xfun(s) - 0.05 * p.kernel().psi_star(s);
                        p.kernel().value(t, s) * f_star(&p, 64, s, u)
                    })
                    .unwrap();
            assert!(((out[i] - reference) / reference).abs() < 1e-6);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn image_lies_in_cone(vals in proptest::collection::vec(0.0f64..5.0, 128)) {
            let p = BvpProblem::preset("example31").unwrap();
            let r = rule();
            for k in [KernelMatrix::plain(&r, p.kernel()), KernelMatrix::corrected(&r, p.kernel())] {
                let op = Operator::new(&p, &r, &k, 0.2);
                let out = op.apply(&vals, 32).unwrap();
                let state = DiscreteState { values: out, lambda: 0.2, j: 32 };
                prop_assert!(state.in_cone(p.kernel(), r.nodes(), 1e-9));
            }
        }

        #[test]
        fn directional_derivative(seed in proptest::collection::vec(-1.0f64..1.0, 128)) {
            let p = BvpProblem::preset("example31").unwrap();
            let r = rule();
            let k = KernelMatrix::corrected(&r, p.kernel());
            let op = Operator::new(&p, &r, &k, 0.2);
            let x: Vec<f64> = r.nodes().iter().map(|&s| 0.5 + p.kernel().q(s)).collect();
            let eps = 1e-6;
            let xp: Vec<f64> = x.iter().zip(&seed).map(|(a, v)| a + eps * v).collect();
            let (a0, a1) = (op.apply(&x, 32).unwrap(), op.apply(&xp, 32).unwrap());
            let jv = op.jacobian(&x, 32).unwrap() * nalgebra::DVector::from_vec(seed.clone());
            let err = a0.iter().zip(&a1).zip(jv.iter()).map(|((a, b), j)| ((b - a) / eps - j).abs()).fold(0.0, f64::max);
            prop_assert!(err <= 1e-5, "{}", err);
        }
    }
}
