use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("config: missing key `{0}`")]
    MissingKey(String),

    #[error("config: key `{key}`: {reason}")]
    BadValue { key: String, reason: String },

    #[error("config line {line}: {reason}")]
    Syntax { line: usize, reason: String },

    #[error("step size too large: dt = {dt} us, maximum allowed {max_dt} us")]
    StepSizeTooLarge { dt: f64, max_dt: f64 },

    #[error("jump probability per step {total:.3e} exceeds 0.1 (dt = {dt} us); try dt <= {suggested:.3e} us")]
    StepTooLarge { total: f64, dt: f64, suggested: f64 },

    #[error("adiabatic elimination is singular: delta_e + probe offset = 0 with gamma_e = 0")]
    SingularElimination,

    #[error("reflection coefficient is singular at delta = {delta} rad/us")]
    SingularResponse { delta: f64 },

    #[error("coherent-state truncation too small: tail mass {tail:.3e} above {threshold:.1e} at cutoff {cutoff}")]
    CutoffTooSmall { cutoff: usize, tail: f64, threshold: f64 },

    #[error("jump leaves a zero-norm state")]
    ImpossibleJump,

    #[error("geometry: {0}")]
    Geometry(String),

    #[error("Hilbert space dimension {dim} exceeds cap {cap}")]
    DimensionExceeded { dim: usize, cap: usize },

    #[error("trace drift {drift:.3e} at t = {t} us")]
    TraceError { drift: f64, t: f64 },

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// Process exit status for the CLI: 1 io, 3 configuration, 4 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) => 1,
            Error::InvalidInput(_)
            | Error::MissingKey(_)
            | Error::BadValue { .. }
            | Error::Syntax { .. }
            | Error::Geometry(_)
            | Error::DimensionExceeded { .. }
            | Error::CutoffTooSmall { .. } => 3,
            Error::StepSizeTooLarge { .. }
            | Error::StepTooLarge { .. }
            | Error::SingularElimination
            | Error::SingularResponse { .. }
            | Error::ImpossibleJump
            | Error::TraceError { .. } => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
