//! Dense exact computations on enumerated chains.

mod kernel;
mod transport;

pub use kernel::{Dist, Enumerated, Kernel, KernelChain, Metric, DEFAULT_STATIONARY_TOL};
pub use transport::{kr_witness, tv_distance, wasserstein, wasserstein_full, Transport};
