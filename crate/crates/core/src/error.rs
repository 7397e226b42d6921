use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("division by zero: {0}")]
    Division(&'static str),

    #[error("unstable oscillator: modified damping {gamma_eff} rad/s is not positive (self-oscillation regime)")]
    Instability { gamma_eff: f64 },

    #[error("over-softened oscillator: 1 + Γ_S·sin(2φ)/Ω_S = {radicand} < 0 (effective frequency reaches zero at φ = {critical_phi:?} rad)")]
    OverSoftened {
        radicand: f64,
        critical_phi: Option<f64>,
    },

    #[error("force normalization diverges: {0}")]
    DivergentNormalization(&'static str),

    #[error("mass sign indeterminate: |polarization| = {polarization} is within the threshold {threshold}")]
    IndeterminateMass { polarization: f64, threshold: f64 },

    #[error("rank-deficient normal equations; unidentifiable parameters: {}", params.join(", "))]
    RankDeficient { params: Vec<String> },

    #[error("fit did not converge after {iterations} iterations (rss = {rss:e}, scaled gradient = {gradient:e})")]
    NonConvergence {
        iterations: usize,
        rss: f64,
        gradient: f64,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("frequency grid is not strictly increasing at line {line}")]
    NonMonotonic { line: u64 },

    #[error("empty spectrum")]
    Empty,

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_)
            | Error::Parse { .. }
            | Error::NonMonotonic { .. }
            | Error::Empty
            | Error::Config(_)
            | Error::Io(_) => 2,
            _ => 3,
        }
    }
}
