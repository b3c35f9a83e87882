use thiserror::Error;

/// Errors raised by the pricing engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation (e.g. `T < t`).
    #[error("domain error: {0}")]
    Domain(String),

    /// A value object violates one of its construction invariants.
    #[error("invalid input: {0}")]
    Invalid(String),

    /// The requested configuration has no pricing formula (e.g. a receiver
    /// hedged by buy-and-hold, or an expansion on misaligned schedules).
    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    /// Scenario file could not be read or interpreted.
    #[error("config error: {0}")]
    Config(String),

    /// Monte Carlo run could not produce a usable estimate.
    #[error("simulation error: {0}")]
    Simulation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
