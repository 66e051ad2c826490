use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid lattice spec: {0}")]
    InvalidSpec(String),

    #[error("invalid component: {0}")]
    InvalidComponent(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid frequency {0} Hz: must be finite and positive")]
    InvalidFrequency(f64),

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("QR iteration did not converge after {sweeps} sweeps ({deflated} of {n} eigenvalues deflated)")]
    NoConvergence {
        sweeps: usize,
        deflated: usize,
        n: usize,
    },

    #[error("admittance matrix is singular at {freq_hz} Hz (condition estimate {condition:.3e}); the drive frequency sits on a circuit resonance")]
    Singular { freq_hz: f64, condition: f64 },

    #[error("netlist is not a chain: {0}")]
    NotAChain(String),

    #[error("calibration: {0}")]
    Calibration(String),

    #[error("zero vector has no localization measure")]
    ZeroVector,

    #[error("{0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
