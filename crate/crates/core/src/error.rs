use thiserror::Error;

/// Errors raised by the math modules (schedules, equilibrium, bayesian).
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("rate {rate} outside schedule domain [0, {bound}]")]
    Domain { rate: f64, bound: f64 },

    #[error("volume {volume} infeasible (maximum {max})")]
    InfeasibleVolume { volume: f64, max: f64 },

    #[error("degenerate domain: {0}")]
    DegenerateDomain(String),

    #[error("negative spread: r_mm {r_mm} exceeds r_rm {r_rm}")]
    NegativeSpread { r_mm: f64, r_rm: f64 },

    #[error("infeasible funding commitment: {0}")]
    InfeasibleCommitment(String),

    #[error("infeasible target volume {target} for type {theta}")]
    InfeasibleTarget { target: f64, theta: f64 },

    #[error("root not bracketed on [{lo}, {hi}]")]
    NotBracketed { lo: f64, hi: f64 },

    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),
}

impl EngineError {
    pub fn config(msg: impl Into<String>) -> Self {
        EngineError::Config(vec![msg.into()])
    }
}

pub type Result<T, E = EngineError> = std::result::Result<T, E>;
