//! Command-line front end.
//!
//! Exit codes: 0 success, 2 bad input, 3 infeasible shell, 4 solutions not
//! found or not certified.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tribvp_core::config::RunConfig;
use tribvp_core::constants::LambdaChoice;
use tribvp_core::greens::{check_properties, GreenKernel};
use tribvp_core::pipeline;
use tribvp_core::problem::{BvpProblem, PRESETS};
use tribvp_core::report::format_g17;
use tribvp_core::Error;

#[derive(Parser)]
#[command(
    name = "tribvp",
    version,
    about = "Positive solutions of a singular third-order three-point BVP"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the Green's function properties for each eta.
    GreenCheck {
        #[arg(long, num_args = 1.., required = true)]
        eta: Vec<f64>,
        /// Points per axis of the (t, s) grid.
        #[arg(long, default_value_t = 201)]
        grid: usize,
    },
    /// Print the admissible-lambda constants as JSON.
    Constants(RunArgs),
    /// Find and certify both positive solutions.
    Solve(RunArgs),
    /// Classify a list of lambdas.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Explicit lambda values.
        #[arg(long, value_delimiter = ',', conflicts_with = "fractions")]
        lambdas: Vec<f64>,
        /// Lambdas as multiples of lambda_bar.
        #[arg(long, value_delimiter = ',')]
        fractions: Vec<f64>,
    },
    /// List the built-in problems.
    Examples,
}

#[derive(Args)]
struct RunArgs {
    /// TOML config file.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Built-in problem, used when no config file is given.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// Override lambda (a number or "auto").
    #[arg(long)]
    lambda: Option<String>,
    /// Override the shell radius r.
    #[arg(long)]
    r: Option<f64>,
    /// Override the JSON report path.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Override the CSV path.
    #[arg(long)]
    csv: Option<PathBuf>,
}

impl RunArgs {
    fn load(&self) -> Result<RunConfig, Error> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => RunConfig::load(path)?,
            (None, Some(name)) => RunConfig::for_preset(name)?,
            (None, None) => {
                return Err(Error::Config("give --config FILE or --preset NAME".into()))
            }
        };
        if let Some(text) = &self.lambda {
            cfg.lambda = match text.as_str() {
                "auto" => LambdaChoice::Auto,
                v => match v.parse::<f64>() {
                    Ok(l) if l.is_finite() && l > 0.0 => LambdaChoice::Fixed(l),
                    _ => {
                        return Err(Error::Config(format!(
                            "--lambda must be positive or auto, got {v}"
                        )))
                    }
                },
            };
        }
        if let Some(r) = self.r {
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::Config(format!("--r must be positive, got {r}")));
            }
            cfg.r = r;
        }
        if self.json.is_some() {
            cfg.output.json = self.json.clone();
        }
        if self.csv.is_some() {
            cfg.output.csv = self.csv.clone();
        }
        Ok(cfg)
    }
}

fn green_check(etas: &[f64], grid: usize) -> Result<i32, Error> {
    let kernels = etas
        .iter()
        .map(|&e| GreenKernel::new(e))
        .collect::<Result<Vec<_>, _>>()?;
    let mut all = true;
    println!(
        "{:<8} {:<28} {:>12} {:>12}  result",
        "eta", "property", "measured", "tolerance"
    );
    for k in &kernels {
        let report = check_properties(k, grid)?;
        for row in &report.rows {
            println!(
                "{:<8.4} {:<28} {:>12.3e} {:>12.3e}  {}",
                report.eta,
                row.name,
                row.measured,
                row.tolerance,
                if row.pass { "pass" } else { "FAIL" }
            );
        }
        all &= report.pass();
    }
    println!(
        "{}",
        if all {
            "all properties hold"
        } else {
            "some properties failed"
        }
    );
    Ok(if all { 0 } else { 1 })
}

fn constants(args: &RunArgs) -> Result<i32, Error> {
    let cfg = args.load()?;
    let (report, code) = pipeline::run_constants(&cfg)?;
    let json = pipeline::emit_constants(&report, &cfg.output)?;
    print!("{json}");
    if let Some(e) = &report.error {
        eprintln!("no admissible shell: {e}");
    }
    Ok(code)
}

fn solve(args: &RunArgs) -> Result<i32, Error> {
    let cfg = args.load()?;
    let report = pipeline::run_solve(&cfg)?;
    let json = pipeline::emit_solve(&report, &cfg.output)?;
    if cfg.output.json.is_none() {
        print!("{json}");
    } else {
        if let Some(l) = report.lambda {
            println!("lambda = {}", format_g17(l));
        }
        for (name, cert) in [("small", &report.small), ("large", &report.large)] {
            if let Some(c) = cert {
                println!(
                    "{name}: norm = {:.6e}, residual = {:.2e}, certified = {}",
                    c.norm_inf, c.residual_integral, c.passed
                );
            }
        }
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(e) = &report.error {
        eprintln!("{e}");
    }
    if report.exit_code() == 4 && report.error.is_none() {
        eprintln!("solutions found but not certified");
    }
    Ok(report.exit_code())
}

fn sweep(args: &RunArgs, lambdas: &[f64], fractions: &[f64]) -> Result<i32, Error> {
    let cfg = args.load()?;
    let (lambdas, lambda_bar) = if fractions.is_empty() {
        (lambdas.to_vec(), None)
    } else {
        let lb = pipeline::lambda_bar(&cfg)?;
        (fractions.iter().map(|f| f * lb).collect(), Some(lb))
    };
    if lambdas.is_empty() {
        return Err(Error::Config("give --lambdas or --fractions".into()));
    }
    let report = pipeline::run_sweep(&cfg, &lambdas, lambda_bar)?;
    pipeline::emit_sweep(&report, &cfg.output)?;
    println!(
        "{:<24} {:<16} {:>14} {:>14}",
        "lambda", "outcome", "norm_small", "norm_large"
    );
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.6e}")).unwrap_or_else(|| "-".into());
    for row in &report.rows {
        println!(
            "{:<24} {:<16} {:>14} {:>14}",
            format_g17(row.lambda),
            row.outcome.as_str(),
            opt(row.norm_small),
            opt(row.norm_large)
        );
    }
    Ok(0)
}

fn examples() -> Result<i32, Error> {
    for name in PRESETS {
        let p = BvpProblem::preset(name)?;
        let s = p.spec();
        println!("{name}");
        println!(
            "  eta = {}, M = {}, window = [{}, {}]",
            s.eta, s.m, s.alpha, s.beta
        );
        println!("  f(t, x) = {}", s.f);
        println!("  g(t) = {}, h(x) = {}, p(x) = {}", s.g, s.h, s.p);
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::GreenCheck { eta, grid } => green_check(eta, *grid),
        Command::Constants(args) => constants(args),
        Command::Solve(args) => solve(args),
        Command::Sweep {
            run,
            lambdas,
            fractions,
        } => sweep(run, lambdas, fractions),
        Command::Examples => examples(),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
