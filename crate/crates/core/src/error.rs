use thiserror::Error;

use crate::params::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the requested formula.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid interval [{a}, {b}]")]
    InvalidInterval { a: f64, b: f64 },

    /// The requested target mean is not above the riskless terminal wealth,
    /// so the efficient strategy is the zero strategy.
    #[error("target mean {target} does not exceed riskless terminal wealth {riskless}: zero-strategy regime")]
    ZeroStrategyRegime { target: f64, riskless: f64 },

    #[error("invalid configuration: {}", format_violations(.0))]
    InvalidConfig(Vec<Violation>),

    #[error("config file: {0}")]
    ConfigFormat(String),

    #[error("invalid distribution: {0}")]
    Distribution(String),

    #[error("simulation: {0}")]
    Simulation(String),

    #[error("misuse: {0}")]
    Misuse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}
