//! TOML run configuration with sections `[problem]`, `[quad]`, `[solver]`
//! and `[output]`. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::constants::LambdaChoice;
use crate::error::{Error, Result};
use crate::problem::{BvpProblem, ProblemSpec};
use crate::solver::{QuadOptions, SolveOptions};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub preset: Option<String>,
    pub label: Option<String>,
    pub eta: Option<f64>,
    #[serde(rename = "M")]
    pub m: Option<f64>,
    pub f: Option<String>,
    pub g: Option<String>,
    pub h: Option<String>,
    pub p: Option<String>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    /// Parameters of the `example32` family.
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub exponent: Option<f64>,
    pub lambda: Option<LambdaChoice>,
    pub r: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub tol_fixed_point: Option<f64>,
    pub max_picard: Option<usize>,
    pub max_newton: Option<usize>,
    pub damping: Option<f64>,
    pub j_final_inv_tol: Option<f64>,
    pub mesh_n: Option<usize>,
    pub fine_factor: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub json: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    #[serde(default)]
    pub timestamp: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(default)]
    pub problem: ProblemSection,
    #[serde(default)]
    pub quad: Option<QuadOptions>,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// A validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub problem: BvpProblem,
    pub lambda: LambdaChoice,
    pub r: f64,
    pub options: SolveOptions,
    pub output: OutputSection,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Self::from_raw(raw)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Preset with default options, `lambda = auto` and `r = 1`.
    pub fn for_preset(name: &str) -> Result<Self> {
        Self::from_raw(RawConfig {
            problem: ProblemSection {
                preset: Some(name.to_string()),
                ..ProblemSection::default()
            },
            ..RawConfig::default()
        })
    }

    pub fn from_raw(raw: RawConfig) -> Result<Self> {
        let problem = build_problem(&raw.problem)?;
        let r = raw.problem.r.unwrap_or(1.0);
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::Config(format!("r must be positive, got {r}")));
        }
        let lambda = raw.problem.lambda.unwrap_or(LambdaChoice::Auto);
        if let LambdaChoice::Fixed(l) = lambda {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::Config(format!(
                    "lambda must be positive or \"auto\", got {l}"
                )));
            }
        }

        let d = SolveOptions::default();
        let s = &raw.solver;
        let mut quad = raw.quad.unwrap_or_default();
        if let Some(n) = s.mesh_n {
            let from_mesh = quad
                .with_mesh_n(n)
                .map_err(|e| Error::Config(e.to_string()))?;
            if raw.quad.is_some() && from_mesh.panels != quad.panels {
                return Err(Error::Config(format!(
                    "solver.mesh_n = {n} disagrees with quad.panels = {} (mesh_n = {})",
                    quad.panels,
                    quad.mesh_n()
                )));
            }
            quad = from_mesh;
        }
        let options = SolveOptions {
            tol_fixed_point: s.tol_fixed_point.unwrap_or(d.tol_fixed_point),
            max_picard: s.max_picard.unwrap_or(d.max_picard),
            max_newton: s.max_newton.unwrap_or(d.max_newton),
            damping: s.damping.unwrap_or(d.damping),
            j_final_inv_tol: s.j_final_inv_tol.unwrap_or(d.j_final_inv_tol),
            fine_factor: s.fine_factor.unwrap_or(d.fine_factor),
            quad,
        };
        options
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        options
            .quad
            .rule(problem.eta())
            .map_err(|e| Error::Config(e.to_string()))?;

        Ok(Self {
            problem,
            lambda,
            r,
            options,
            output: raw.output,
        })
    }
}

fn build_problem(sec: &ProblemSection) -> Result<BvpProblem> {
    let family = sec.a.is_some() || sec.b.is_some() || sec.exponent.is_some();
    let base = match sec.preset.as_deref() {
        Some("example32") => Some(BvpProblem::example32(
            sec.a.unwrap_or(1.0),
            sec.b.unwrap_or(1.0),
            sec.exponent.unwrap_or(0.5),
        )?),
        Some(_) if family => {
            return Err(Error::Config(
                "a, b and exponent only apply to preset example32".into(),
            ));
        }
        Some(name) => Some(BvpProblem::preset(name)?),
        None if family => {
            return Err(Error::Config(
                "a, b and exponent need preset = \"example32\"".into(),
            ));
        }
        None => None,
    };

    let spec = match base {
        Some(p) => {
            let mut spec = p.spec().clone();
            let overridden = sec.eta.is_some()
                || sec.m.is_some()
                || sec.f.is_some()
                || sec.g.is_some()
                || sec.h.is_some()
                || sec.p.is_some()
                || sec.alpha.is_some()
                || sec.beta.is_some();
            if overridden {
                spec.envelope_derived = false;
            }
            spec.label = sec.label.clone().unwrap_or(spec.label);
            spec.eta = sec.eta.unwrap_or(spec.eta);
            spec.m = sec.m.unwrap_or(spec.m);
            spec.f = sec.f.clone().unwrap_or(spec.f);
            spec.g = sec.g.clone().unwrap_or(spec.g);
            spec.h = sec.h.clone().unwrap_or(spec.h);
            spec.p = sec.p.clone().unwrap_or(spec.p);
            spec.alpha = sec.alpha.unwrap_or(spec.alpha);
            spec.beta = sec.beta.unwrap_or(spec.beta);
            spec
        }
        None => {
            let need =
                |name: &str| Error::Config(format!("problem.{name} is required without a preset"));
            ProblemSpec {
                label: sec.label.clone().unwrap_or_else(|| "custom".into()),
                eta: sec.eta.ok_or_else(|| need("eta"))?,
                m: sec.m.ok_or_else(|| need("M"))?,
                f: sec.f.clone().ok_or_else(|| need("f"))?,
                g: sec.g.clone().ok_or_else(|| need("g"))?,
                h: sec.h.clone().ok_or_else(|| need("h"))?,
                p: sec.p.clone().ok_or_else(|| need("p"))?,
                alpha: sec.alpha.ok_or_else(|| need("alpha"))?,
                beta: sec.beta.ok_or_else(|| need("beta"))?,
                envelope_derived: false,
            }
        }
    };
    BvpProblem::new(spec)
}
