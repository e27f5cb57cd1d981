//! Machine-readable output: JSON with 17 significant digits and plot-ready
//! CSV tables.

use std::io;
use std::path::Path;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::constants::ShellReport;
use crate::error::{Error, Result};
use crate::problem::{AuxReport, H1Report, H2Report, ProblemSpec};
use crate::solver::{Outcome, SolveOptions, SweepRow};
use crate::verify::SolutionCertificate;

/// `v` with 17 significant digits in the style of C's `%.17g`.
pub fn format_g17(v: f64) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    if v == 0.0 {
        return if v.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    let sci = format!("{v:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent in {:e} output");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..17).contains(&exp) {
        let fixed = format!("{:.*}", (16 - exp) as usize, v);
        trim_zeros(&fixed).to_string()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Pretty JSON formatter that writes floats with [`format_g17`].
struct G17Formatter<'a>(PrettyFormatter<'a>);

impl Formatter for G17Formatter<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        w.write_all(format_g17(v).as_bytes())
    }
    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        self.write_f64(w, f64::from(v))
    }
    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + io::Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Pretty-printed JSON; non-finite floats become `null`.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser =
        serde_json::Serializer::with_formatter(&mut buf, G17Formatter(PrettyFormatter::new()));
    value
        .serialize(&mut ser)
        .map_err(|e| Error::InvalidArgument(format!("JSON serialization: {e}")))?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)
        .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))
}

/// Seconds since the Unix epoch, for the optional `timestamp` field.
pub fn timestamp_now() -> String {
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    format!("unix:{secs}")
}

#[derive(Debug, Clone, Serialize)]
pub struct ProblemChecks {
    pub h1: H1Report,
    pub h2: H2Report,
    pub aux: AuxReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConstantsReport {
    pub problem: ProblemSpec,
    pub r: f64,
    pub checks: ProblemChecks,
    #[serde(rename = "theorem_A_bound")]
    pub theorem_a_bound: Option<f64>,
    #[serde(rename = "theorem_A")]
    pub theorem_a_status: &'static str,
    pub shell: Option<ShellReport>,
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    TwoSolutions,
    Uncertified,
    SameFixedPoint,
    NotFound,
    InfeasibleShell,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub problem: ProblemSpec,
    pub r: f64,
    pub lambda: Option<f64>,
    pub mesh_n: usize,
    pub options: SolveOptions,
    pub shell: Option<ShellReport>,
    pub small: Option<SolutionCertificate>,
    pub large: Option<SolutionCertificate>,
    pub distinct: bool,
    pub separated: bool,
    pub certified: bool,
    pub status: SolveStatus,
    pub error: Option<String>,
    pub warnings: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
}

impl SolveReport {
    pub fn exit_code(&self) -> i32 {
        match self.status {
            SolveStatus::TwoSolutions => 0,
            SolveStatus::InfeasibleShell => 3,
            _ => 4,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub problem: ProblemSpec,
    pub r: f64,
    pub lambda_bar: Option<f64>,
    pub rows: Vec<SweepRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
}

fn csv_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Config(format!("CSV {}: {e}", path.display()))
}

/// Columns `t,x_small,x_large` of de-shifted values at the nodes.
pub fn write_solution_csv(path: &Path, t: &[f64], small: &[f64], large: &[f64]) -> Result<()> {
    if small.len() != t.len() || large.len() != t.len() {
        return Err(Error::InvalidArgument(
            "solution columns differ in length".into(),
        ));
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["t", "x_small", "x_large"])
        .map_err(|e| csv_err(path, e))?;
    for i in 0..t.len() {
        w.write_record([format_g17(t[i]), format_g17(small[i]), format_g17(large[i])])
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| csv_err(path, e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionTable {
    pub t: Vec<f64>,
    pub small: Vec<f64>,
    pub large: Vec<f64>,
}

pub fn read_solution_csv(path: &Path) -> Result<SolutionTable> {
    let mut rd = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = rd.headers().map_err(|e| csv_err(path, e))?;
    if header != vec!["t", "x_small", "x_large"] {
        return Err(csv_err(path, format!("unexpected header {header:?}")));
    }
    let mut out = SolutionTable {
        t: Vec::new(),
        small: Vec::new(),
        large: Vec::new(),
    };
    for rec in rd.deserialize::<(f64, f64, f64)>() {
        let (t, a, b) = rec.map_err(|e| csv_err(path, e))?;
        out.t.push(t);
        out.small.push(a);
        out.large.push(b);
    }
    Ok(out)
}

/// Columns `lambda,outcome,norm_small,norm_large`; missing norms are empty.
pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["lambda", "outcome", "norm_small", "norm_large"])
        .map_err(|e| csv_err(path, e))?;
    let opt = |v: Option<f64>| v.map(format_g17).unwrap_or_default();
    for row in rows {
        w.write_record([
            format_g17(row.lambda),
            row.outcome.as_str().to_string(),
            opt(row.norm_small),
            opt(row.norm_large),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| csv_err(path, e))
}

/// `(lambda, outcome, norm_small, norm_large)`.
pub type SweepCsvRow = (f64, Outcome, Option<f64>, Option<f64>);

pub fn read_sweep_csv(path: &Path) -> Result<Vec<SweepCsvRow>> {
    let mut rd = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut out = Vec::new();
    for rec in rd.deserialize::<(f64, String, Option<f64>, Option<f64>)>() {
        let (l, o, a, b) = rec.map_err(|e| csv_err(path, e))?;
        let outcome = match o.as_str() {
            "two_solutions" => Outcome::TwoSolutions,
            "one_solution" => Outcome::OneSolution,
            "none" => Outcome::None,
            "infeasible_shell" => Outcome::InfeasibleShell,
            other => return Err(csv_err(path, format!("unknown outcome {other}"))),
        };
        out.push((l, outcome, a, b));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g17_matches_printf() {
        let cases = [
            (0.1, "0.10000000000000001"),
            (1.0, "1"),
            (-2.5, "-2.5"),
            (1e-5, "1.0000000000000001e-05"),
            (123456.0, "123456"),
            (1e17, "1e+17"),
            (1e16, "10000000000000000"),
            (10.0 / 81.0, "0.12345679012345678"),
            (0.0001, "0.0001"),
            (f64::MAX, "1.7976931348623157e+308"),
            (5e-324, "4.9406564584124654e-324"),
        ];
        for (v, want) in cases {
            assert_eq!(format_g17(v), want);
        }
    }

    #[test]
    fn g17_round_trips() {
        let mut x = 0.7234_f64;
        for _ in 0..2000 {
            x = (x * 3.999 * (1.0 - x)).abs();
            let v = x * 10f64.powi((x * 40.0) as i32 - 20);
            assert_eq!(format_g17(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn json_nulls_and_digits() {
        #[derive(Serialize)]
        struct S {
            a: f64,
            b: f64,
            c: Vec<f64>,
            n: u64,
        }
        let s = to_json(&S {
            a: f64::NAN,
            b: 0.1,
            c: vec![f64::INFINITY, 2.0],
            n: 7,
        })
        .unwrap();
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert!(v["a"].is_null() && v["c"][0].is_null());
        assert_eq!(v["c"][1].as_f64(), Some(2.0));
        assert!(s.contains("0.10000000000000001"));
        assert_eq!(v["n"].as_u64(), Some(7));
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sol.csv");
        let t = [0.1, 0.5, 0.9];
        let a = [1.0 / 3.0, 2e-9, 7.0];
        let b = [10.0, 20.0, 1e300];
        write_solution_csv(&path, &t, &a, &b).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("t,x_small,x_large\n"));
        let back = read_solution_csv(&path).unwrap();
        assert_eq!(back.t, t);
        assert_eq!(back.small, a);
        assert_eq!(back.large, b);

        let rows = vec![
            SweepRow {
                lambda: 0.25,
                outcome: Outcome::TwoSolutions,
                norm_small: Some(0.5),
                norm_large: Some(3.0),
                detail: None,
            },
            SweepRow {
                lambda: 4.0,
                outcome: Outcome::InfeasibleShell,
                norm_small: None,
                norm_large: None,
                detail: Some("window".into()),
            },
        ];
        let path = dir.path().join("sweep.csv");
        write_sweep_csv(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "lambda,outcome,norm_small,norm_large\n0.25,two_solutions,0.5,3\n4,infeasible_shell,,\n"
        );
        let back = read_sweep_csv(&path).unwrap();
        assert_eq!(back[0], (0.25, Outcome::TwoSolutions, Some(0.5), Some(3.0)));
        assert_eq!(back[1], (4.0, Outcome::InfeasibleShell, None, None));
    }
}
