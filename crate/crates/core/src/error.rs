use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value {context} at node {index} (s = {location})")]
    NonFinite {
        context: String,
        index: usize,
        location: f64,
    },

    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },

    #[error("unknown identifier `{name}` at position {position}")]
    UnknownIdentifier { name: String, position: usize },

    #[error("function `{name}` expects {expected} argument(s), got {got}")]
    Arity {
        name: String,
        expected: usize,
        got: usize,
    },

    #[error("expression for `{role}` may only use {allowed}, found `{found}`")]
    Category {
        role: String,
        allowed: String,
        found: String,
    },

    #[error("unknown preset `{0}` (available: example31, example32, bounded_demo)")]
    UnknownPreset(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("empty shell window: {0}")]
    EmptyWindow(String),

    #[error("singular linear system in Newton step (iteration {iteration})")]
    SingularSystem { iteration: usize },

    #[error("continuation diverged at j = {j}: {message}")]
    Divergence { j: u64, message: String },

    #[error(
        "both shells converged to the same fixed point (norms {norm_small:.6e} and {norm_large:.6e}, \
         residuals {residual_small:.3e} and {residual_large:.3e}); try a smaller lambda"
    )]
    SameFixedPoint {
        norm_small: f64,
        norm_large: f64,
        residual_small: f64,
        residual_large: f64,
    },

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    /// Process exit status: 2 for bad input, 3 for an infeasible shell,
    /// 4 when a solution could not be found or certified.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_)
            | Error::InvalidArgument(_)
            | Error::Syntax { .. }
            | Error::UnknownIdentifier { .. }
            | Error::Arity { .. }
            | Error::Category { .. }
            | Error::UnknownPreset(_)
            | Error::Config(_) => 2,
            Error::EmptyWindow(_) => 3,
            Error::NonFinite { .. }
            | Error::NotFound(_)
            | Error::SingularSystem { .. }
            | Error::Divergence { .. }
            | Error::SameFixedPoint { .. } => 4,
        }
    }
}
