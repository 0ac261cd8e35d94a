//! Two-stage solver for large travelling-salesman instances.
//!
//! Stage one clusters the cities ([`decompose`]), solves each cluster with
//! a pointer network trained by actor-critic REINFORCE ([`ptrnet`],
//! [`train`]) or a classical sub-solver, and splices the sub-tours into one
//! elite tour ([`pipeline`]). Stage two seeds a genetic algorithm with that
//! tour ([`meta`]). PSO and immune-algorithm baselines and the benchmark
//! harness ([`bench`]) complete the comparison.

pub mod bench;
pub mod decompose;
pub mod error;
pub mod meta;
pub mod nn;
pub mod par;
pub mod pipeline;
pub mod ptrnet;
pub mod rng;
pub mod train;
pub mod tsp;

pub use error::{Error, Result};
pub use rng::RngStream;
pub use tsp::{City, DistanceMode, Tour, TspInstance};
