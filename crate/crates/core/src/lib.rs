//! A laboratory for discrete-time Markov chains on locally finite graphs.
//!
//! The crate is organised around four layers:
//!
//! * [`chain`] — the chain abstraction (states, single-step sampling, the
//!   graph metric) plus deterministic seeded trajectory generation.
//! * [`exact`] — dense computations on enumerated chains: kernel powers,
//!   stationary distributions, total variation and Wasserstein distances,
//!   distance-to-stationarity curves and mixing times.
//! * [`coupling`] — one-step couplings, contraction profiles, coalescence
//!   based total-variation bounds and restricted-set escape probabilities.
//! * [`bounds`] — closed-form concentration tail bounds and their comparison
//!   against Monte Carlo tails of Lipschitz observables.
//!
//! Concrete chains (mean-field Ising Glauber dynamics, the supermarket jump
//! chain with its fluid limit, and the linear-extension walk) live in
//! [`models`].

pub mod bounds;
pub mod chain;
pub mod coupling;
pub mod error;
pub mod exact;
pub mod models;
pub mod rng;
pub mod util;

pub use chain::{check_lipschitz, sample_trajectory, Chain, Observable, RowChain, StateSpace, Trajectory};
pub use error::{Error, Result};
pub use exact::{tv_distance, wasserstein, Dist, Kernel, Metric};
pub use rng::ReplicaRng;
