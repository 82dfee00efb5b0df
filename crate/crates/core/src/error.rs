use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure classes. The CLI maps these onto process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad input: syntax, unknown names, violated well hypotheses, bad grids.
    Validation,
    /// A numerical procedure failed to converge or lost accuracy.
    Numerical,
}

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },

    #[error("domain error in `{expr}`: {reason}")]
    Domain { expr: String, reason: String },

    #[error("unknown potential `{0}`")]
    UnknownPotential(String),

    #[error("missing parameter `{0}`")]
    MissingParameter(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("multiple wells detected: {0}")]
    MultipleWells(String),

    #[error("degenerate turning point at x = {x} (|V'| = {slope:e})")]
    DegenerateTurningPoint { x: f64, slope: f64 },

    #[error("energy {energy} lies above a local barrier: the sublevel set is not a bounded interval")]
    BarrierExceeded { energy: f64 },

    #[error("energy window starts at {e_min}, not above the well bottom {v_min}")]
    WindowBelowMinimum { e_min: f64, v_min: f64 },

    #[error("operation requires a symbol of the form xi^2 + V(x)")]
    NotSchrodinger,

    #[error("bracketing failed: {0}")]
    Bracket(String),

    #[error("orbit at E = {energy} did not close within {limit} time units")]
    OrbitNotClosed { energy: f64, limit: f64 },

    #[error("energy drift {drift:e} along orbit at E = {energy}")]
    EnergyDrift { energy: f64, drift: f64 },

    #[error("orbit at E = {energy} has {count} focal points, expected 2")]
    FocalPoints { energy: f64, count: usize },

    #[error("focal frame degenerate: |alpha| = {0:e} below 1e-6")]
    AlphaTooSmall(f64),

    #[error("no quantization roots inside [{e_min}, {e_max}]")]
    NoRoots { e_min: f64, e_max: f64 },

    #[error(
        "Dirichlet box half-width {half_width} too small: decay exponent {decay} beyond the turning points must reach {required}"
    )]
    DomainMargin { half_width: f64, decay: f64, required: f64 },

    #[error("grid violates {0}")]
    Grid(String),

    #[error("cutoff violates {0}")]
    Cutoff(String),

    #[error("no convergence: {0}")]
    NoConvergence(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Bracket(_) | Error::OrbitNotClosed { .. } | Error::EnergyDrift { .. } | Error::NoConvergence(_) => {
                ErrorKind::Numerical
            }
            _ => ErrorKind::Validation,
        }
    }

    pub(crate) fn syntax(offset: usize, message: impl Into<String>) -> Self {
        Error::Syntax {
            offset,
            message: message.into(),
        }
    }

    pub(crate) fn no_convergence(message: impl Into<String>) -> Self {
        Error::NoConvergence(message.into())
    }
}
