use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("experimentation region is empty (cost at or above the Bayesian threshold)")]
    NoExperimentation,
    #[error("unsupported regime: {0}")]
    Unsupported(String),
    #[error("state {state} lies outside the region {region}")]
    Region { region: &'static str, state: f64 },
    #[error("no pre-emptive stopping state exists (ambiguity too small)")]
    NoPreemptiveStop,
    #[error("no bracketed root: {0}")]
    NoRoot(String),
    #[error("value segment falls below the stopping payoff; the mixed-stopping solution applies")]
    LargeDelta,
    #[error("no convergence: {0}")]
    NonConvergence(String),
}

pub type Result<T> = std::result::Result<T, Error>;
