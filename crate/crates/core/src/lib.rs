//! Two positive solutions of the third-order three-point singular
//! semipositone problem `x''' = lambda f(t, x)`, `x(0) = x'(eta) = x''(1) = 0`.

pub mod config;
pub mod constants;
pub mod error;
pub mod expr;
pub mod greens;
pub mod operator;
pub mod pipeline;
pub mod problem;
pub mod quadrature;
pub mod report;
pub mod solver;
pub mod verify;

pub use config::RunConfig;
pub use constants::{assemble_shell, LambdaChoice, ShellReport};
pub use error::{Error, Result};
pub use expr::Expr;
pub use greens::GreenKernel;
pub use problem::{BvpProblem, ProblemSpec};
pub use quadrature::QuadratureRule;
pub use solver::{solve_pair, sweep_lambda, SolutionPair, SolveOptions};
pub use verify::{certify, SolutionCertificate};
