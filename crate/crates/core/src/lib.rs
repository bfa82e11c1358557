//! Sequential information acquisition with a Poisson breakthrough signal
//! when the decision maker holds a set of priors and evaluates plans by
//! their worst case.
//!
//! The crate computes the Bayesian benchmark, the maxmin commitment plan and
//! the intrapersonal equilibrium with randomized stopping, then derives the
//! induced stopping-time distributions and checks them against independent
//! numerical oracles. Two extensions are included: attention split between
//! two news sources and a drift-diffusion signal.

pub mod bayesian;
pub mod commitment;
pub mod diffusion;
pub mod dynamics;
pub mod equilibrium;
pub mod error;
pub mod model;
pub mod numerics;
pub mod oracle;
pub mod par;
pub mod twosource;

pub use bayesian::{BayesBenchmark, Case};
pub use equilibrium::{EquilibriumSolution, PolicyPoint, ValueSegment};
pub use error::{Error, Result};
pub use model::{AmbiguityInterval, Cond, PayoffSpec, StoppingPayoffs};
pub use par::Exec;
