use thiserror::Error;

/// Errors raised by the simulator, planner, and I/O layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A rack chain or actuator hit its travel limit.
    #[error("saturation: {0}")]
    Saturation(String),

    /// Leveling needs more travel than a spine has.
    #[error("leveling saturated on spine {spine}: needs {required_mm:.1} mm")]
    LevelingSaturated { spine: usize, required_mm: f64 },

    /// Leveling did not converge in the allotted time.
    #[error("leveling did not converge after {iterations} control ticks")]
    LevelingTimeout { iterations: usize },

    /// Invalid environment, body, or scenario configuration.
    #[error("configuration error: {0}")]
    Configuration(String),

    /// A planner was invoked from a state it does not handle.
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// The integrator produced a non-finite quantity.
    #[error("simulation diverged at t={time_s:.4} s: {quantity} is not finite")]
    Diverged { time_s: f64, quantity: String },

    /// Scenario parse or validation failure.
    #[error("parse error: {0}")]
    Parse(String),

    /// Wire command decoding failure, carrying the offending field.
    #[error("decode error in `{field}`: {reason}")]
    Decode { field: String, reason: String },

    #[error("i/o error on {path}: {reason}")]
    Io { path: String, reason: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
