//! Acceptance suite: one pass/fail line per criterion, then a single verdict.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use serde_json::Value;
use tribvp_core::constants::{
    assemble_shell, compute_a, compute_b, compute_theorem_a, LambdaChoice,
};
use tribvp_core::greens::{check_properties, GreenKernel};
use tribvp_core::problem::{BvpProblem, ProblemSpec};
use tribvp_core::quadrature::QuadratureRule;
use tribvp_core::verify::certify;

const BIN: &str = env!("CARGO_BIN_EXE_tribvp");

fn close(a: f64, b: f64, tol: f64, what: &str) {
    assert!((a - b).abs() <= tol, "{what}: {a:e} vs {b:e} (tol {tol:e})");
}

fn custom(eta: f64, m: f64, f: &str, g: &str, h: &str, p: &str) -> BvpProblem {
    BvpProblem::new(ProblemSpec {
        label: "custom".into(),
        eta,
        m,
        f: f.into(),
        g: g.into(),
        h: h.into(),
        p: p.into(),
        alpha: 0.25,
        beta: 0.75,
        envelope_derived: false,
    })
    .unwrap()
}

fn solve_cli(preset: &str, dir: &Path, tag: &str, extra: &[&str]) -> (i32, f64, String) {
    let json = dir.join(format!("{tag}.json"));
    let csv = dir.join(format!("{tag}.csv"));
    let start = Instant::now();
    let out = Command::new(BIN)
        .args(["solve", "--preset", preset, "--json"])
        .arg(&json)
        .arg("--csv")
        .arg(&csv)
        .args(extra)
        .output()
        .unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let text = std::fs::read_to_string(&json).unwrap_or_default();
    (out.status.code().unwrap_or(-1), elapsed, text)
}

fn check_pair(preset: &str, tag: &str, dir: &Path) -> String {
    let (code, elapsed, text) = solve_cli(preset, dir, tag, &[]);
    assert_eq!(code, 0, "solve exit code");
    assert!(elapsed < 30.0, "runtime {elapsed:.1} s");
    let v: Value = serde_json::from_str(&text).unwrap();
    let shell = &v["shell"];
    let lambda = v["lambda"].as_f64().unwrap();
    assert!(lambda > 0.0 && lambda < shell["lambda_bar"].as_f64().unwrap());
    let r = v["r"].as_f64().unwrap();
    assert_eq!(r, 1.0);
    let small = &v["small"];
    let large = &v["large"];
    let ns = small["norm_inf"].as_f64().unwrap();
    let nl = large["norm_inf"].as_f64().unwrap();
    assert!(ns < r && r < nl, "norms {ns} {nl}");
    assert_eq!(v["distinct"], true);
    assert_eq!(v["separated"], true);
    for c in [small, large] {
        let n = c["norm_inf"].as_f64().unwrap();
        assert_eq!(c["passed"], true);
        assert!(c["residual_integral"].as_f64().unwrap() <= 1e-7 * (1.0 + n));
        assert!(c["cone_defect"].as_f64().unwrap() <= 1e-5 * n);
        assert!(c["min_interior"].as_f64().unwrap() > 0.0);
        let diffs: Vec<f64> = c["j_history"]
            .as_array()
            .unwrap()
            .iter()
            .map(|s| s["diff"].as_f64().unwrap())
            .collect();
        assert!(diffs.len() >= 4);
        let tail = &diffs[diffs.len() - 3..];
        assert!(tail[1] <= tail[0] && tail[2] <= tail[1], "diffs {tail:?}");
    }
    let csv = std::fs::read_to_string(dir.join(format!("{tag}.csv"))).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,x_small,x_large"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), v["mesh_n"].as_u64().unwrap() as usize);
    assert_eq!(rows.len(), 512);
    assert!(rows
        .iter()
        .all(|r| r[0] > 0.0 && r[0] < 1.0 && r[1] > 0.0 && r[2] > 0.0));
    format!("{elapsed:.2} s, norms {ns:.4e} < 1 < {nl:.4e}")
}

fn criterion_1() -> String {
    let start = Instant::now();
    for eta in [0.55, 2.0 / 3.0, 0.75, 0.9] {
        let report = check_properties(&GreenKernel::new(eta).unwrap(), 201).unwrap();
        for row in &report.rows {
            assert!(
                row.pass,
                "eta {eta}: {} measured {:e}",
                row.name, row.measured
            );
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed < 5.0);
    format!("{elapsed:.3} s")
}

fn criterion_2() -> String {
    let k23 = GreenKernel::new(2.0 / 3.0).unwrap();
    let k34 = GreenKernel::new(0.75).unwrap();
    close(k23.psi_star_norm(), 10.0 / 81.0, 1e-14, "norm Psi* at 2/3");
    close(k34.psi_star_norm(), 9.0 / 64.0, 1e-14, "norm Psi* at 3/4");
    close(k23.b0(), 1.0 / 3.0, 1e-14, "B0 at 2/3");
    close(k34.b0(), 13.0 / 48.0, 1e-14, "B0 at 3/4");
    let eta = 2.0 / 3.0;
    let p = custom(eta, 0.0, "x^2", "1", "1", "x");
    let rule = QuadratureRule::build(eta, 64, 4.0, 4).unwrap();
    close(compute_a(&p, &rule).unwrap(), 10.0 / 81.0, 1e-10, "a");
    close(compute_b(&p, 1.0).unwrap(), 5.0 / 36.0, 1e-10, "b");
    "closed forms reproduced".into()
}

fn criterion_3() -> String {
    let demo = BvpProblem::preset("bounded_demo").unwrap();
    let bound = compute_theorem_a(&demo).unwrap();
    close(bound, 1.0, 1e-12, "bounded_demo bound");
    let ex = BvpProblem::preset("example31").unwrap();
    assert!(compute_theorem_a(&ex).is_none());
    let rule = QuadratureRule::build(ex.eta(), 64, 4.0, 4).unwrap();
    let shell = assemble_shell(&ex, 1.0, LambdaChoice::Auto, &rule, 1e-8).unwrap();
    assert_eq!(shell.theorem_a_status, "inapplicable");
    format!("bound {bound}")
}

fn criterion_4() -> String {
    let prob = custom(2.0 / 3.0, 0.0, "1", "1", "1", "x");
    let residual = |panels: usize| {
        let rule = QuadratureRule::build(prob.eta(), panels, 4.0, 4).unwrap();
        let star: Vec<f64> = rule
            .nodes()
            .iter()
            .map(|&t| prob.kernel().psi_star(t))
            .collect();
        let cert = certify(&prob, 1.0, &rule, &star, 2).unwrap();
        assert!(cert.passed);
        (rule.len(), cert.residual_integral)
    };
    let (n, r512) = residual(64);
    let (_, r1024) = residual(128);
    assert_eq!(n, 512);
    assert!(r512 <= 1e-9, "residual {r512:e}");
    assert!(r512 / r1024 >= 4.0, "ratio {}", r512 / r1024);
    format!("residual {r512:.2e}, ratio {:.1}", r512 / r1024)
}

fn criterion_7(dir: &Path) -> String {
    let cfg = tribvp_core::RunConfig::for_preset("example31").unwrap();
    let lb = tribvp_core::pipeline::lambda_bar(&cfg).unwrap();
    let lambda = format!("{:e}", 10.0 * lb);
    let (code, _, text) = solve_cli("example31", dir, "robust", &["--lambda", &lambda]);
    assert!(code == 3 || code == 4, "exit {code}");
    assert!(!text.is_empty());
    let v: Value = serde_json::from_str(&text).unwrap();
    assert_ne!(v["status"], "two_solutions");
    assert!(!text.contains("NaN"));

    let csv = dir.join("sweep.csv");
    let out = Command::new(BIN)
        .args([
            "sweep",
            "--preset",
            "example31",
            "--fractions",
            "0.5,10",
            "--csv",
        ])
        .arg(&csv)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let table = std::fs::read_to_string(&csv).unwrap();
    let last = table.lines().last().unwrap();
    assert!(!last.contains("two_solutions"), "{last}");
    for line in table.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.len(), 4);
        for c in [cols[0], cols[2], cols[3]] {
            assert!(
                c.is_empty() || c.parse::<f64>().unwrap().is_finite(),
                "{line}"
            );
        }
    }
    format!("solve exit {code}, sweep row `{last}`")
}

fn criterion_8(dir: &Path) -> String {
    let (a, _, first) = solve_cli("example31", dir, "det_a", &[]);
    let (b, _, second) = solve_cli("example31", dir, "det_b", &[]);
    assert_eq!((a, b), (0, 0));
    assert!(!first.is_empty());
    assert!(first == second, "JSON reports differ");
    let csv_a = std::fs::read(dir.join("det_a.csv")).unwrap();
    let csv_b = std::fs::read(dir.join("det_b.csv")).unwrap();
    assert_eq!(csv_a, csv_b);
    format!("{} identical bytes", first.len())
}

#[test]
fn acceptance() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    type Criterion<'a> = (&'static str, Box<dyn Fn() -> String + 'a>);
    let criteria: Vec<Criterion> = vec![
        ("1 Green's function suite", Box::new(criterion_1)),
        ("2 closed-form constants", Box::new(criterion_2)),
        ("3 bounded-nonlinearity bound", Box::new(criterion_3)),
        ("4 manufactured solution", Box::new(criterion_4)),
        (
            "5 example31 end to end",
            Box::new(|| check_pair("example31", "ex31", d)),
        ),
        (
            "6 example32 end to end",
            Box::new(|| check_pair("example32", "ex32", d)),
        ),
        ("7 robustness above lambda_bar", Box::new(|| criterion_7(d))),
        ("8 determinism", Box::new(|| criterion_8(d))),
    ];
    let mut failed = Vec::new();
    for (name, run) in &criteria {
        match catch_unwind(AssertUnwindSafe(run)) {
            Ok(detail) => println!("criterion {name}: PASS ({detail})"),
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                println!("criterion {name}: FAIL ({msg})");
                failed.push(*name);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
