//! Bayesian VAR with stochastic volatility and a spike-and-slab prior on the
//! error precision matrix whose inclusion probabilities follow a stochastic
//! block model with a Gibbs-type prior on the blocks.

pub mod dgp;
pub mod diagnostics;
pub mod draws;
pub mod error;
pub mod forecast;
pub mod io;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod partition;
pub mod prior;
pub mod rng;
pub mod sampler;
pub mod sbm;

pub use error::{Error, Result};
