//! The chain abstraction shared by every model and estimator.
//!
//! A [`Chain`] is a discrete-time Markov chain on a locally finite graph:
//! `neighbors(x)` lists the states reachable in one step (self excluded),
//! `step` samples one transition, and `distance` is the shortest-path metric
//! of the adjacency graph. Symmetry (`y ∈ neighbors(x)` iff
//! `x ∈ neighbors(y)`) is assumed throughout and spot-checked in tests;
//! laziness (`P(x,x) > 0`) is allowed.

use crate::error::{Error, Result};
use crate::rng::ReplicaRng;
use std::fmt::Debug;
use std::hash::Hash;
use std::sync::OnceLock;

/// Default hard cap on per-trajectory step counts (resource guard).
const DEFAULT_STEP_CAP: u64 = 200_000_000;

/// The global per-trajectory step cap; `MIXLAB_CAP_STEPS` overrides it.
pub fn step_cap() -> u64 {
    static CAP: OnceLock<u64> = OnceLock::new();
    *CAP.get_or_init(|| {
        std::env::var("MIXLAB_CAP_STEPS")
            .ok()
            .and_then(|v| v.parse().ok())
            .unwrap_or(DEFAULT_STEP_CAP)
    })
}

/// A Markov chain with local transitions on a locally finite graph.
pub trait Chain: Sync {
    type State: Clone + Eq + Hash + Debug + Send + Sync;

    /// Sample one transition from `x`.
    fn step(&self, x: &Self::State, rng: &mut ReplicaRng) -> Self::State;

    /// States reachable in one step, excluding `x` itself. Finite by the
    /// local-finiteness assumption.
    fn neighbors(&self, x: &Self::State) -> Vec<Self::State>;

    /// Graph metric: length of the shortest adjacency path from `x` to `y`.
    fn distance(&self, x: &Self::State, y: &Self::State) -> u64;
}

/// A chain whose one-step law from any given state is exactly computable.
pub trait RowChain: Chain {
    /// The distribution of `X_1` given `X_0 = x`, as (state, probability)
    /// pairs with positive probability, including the lazy self entry.
    fn row(&self, x: &Self::State) -> Vec<(Self::State, f64)>;
}

/// A chain with an enumerable (finite) state space; required for the dense
/// computations in [`crate::exact`]. Connectivity is verified when a kernel
/// is built; sampled-mode chains are never checked.
pub trait StateSpace: RowChain {
    /// All states, in a fixed canonical order (dense ids are positions).
    fn states(&self) -> Vec<Self::State>;
}

/// A seeded realization of the chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory<S> {
    /// States at times `0..=t`.
    pub states: Vec<S>,
    pub seed: u64,
    pub replica_index: u64,
}

impl<S> Trajectory<S> {
    /// Number of transitions (length of `states` minus one).
    pub fn steps(&self) -> usize {
        self.states.len() - 1
    }
}

/// Sample a trajectory of `t` steps from `x0`, deterministic in
/// `(seed, replica_index)`.
pub fn sample_trajectory<C: Chain>(
    chain: &C,
    x0: &C::State,
    t: u64,
    seed: u64,
    replica_index: u64,
) -> Result<Trajectory<C::State>> {
    let cap = step_cap();
    if t > cap {
        return Err(Error::StepCapExceeded { requested: t, cap });
    }
    let mut rng = ReplicaRng::new(seed, replica_index);
    let mut states = Vec::with_capacity(t as usize + 1);
    states.push(x0.clone());
    let mut current = x0.clone();
    for _ in 0..t {
        current = chain.step(&current, &mut rng);
        states.push(current.clone());
    }
    Ok(Trajectory {
        states,
        seed,
        replica_index,
    })
}

/// A real observable on the state space with a declared Lipschitz constant
/// for the graph metric.
pub struct Observable<S> {
    pub name: String,
    pub lipschitz_constant: f64,
    eval: Box<dyn Fn(&S) -> f64 + Send + Sync>,
}

impl<S> Observable<S> {
    pub fn new(
        name: impl Into<String>,
        lipschitz_constant: f64,
        eval: impl Fn(&S) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            lipschitz_constant,
            eval: Box::new(eval),
        }
    }

    #[inline]
    pub fn eval(&self, x: &S) -> f64 {
        (self.eval)(x)
    }
}

impl<S> Debug for Observable<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Observable")
            .field("name", &self.name)
            .field("lipschitz_constant", &self.lipschitz_constant)
            .finish()
    }
}

/// One adjacent pair violating the declared Lipschitz constant.
#[derive(Debug, Clone)]
pub struct LipschitzViolation<S> {
    pub x: S,
    pub y: S,
    pub gap: f64,
}

/// Report of [`check_lipschitz`]; empty `violations` means success.
#[derive(Debug, Clone)]
pub struct LipschitzReport<S> {
    pub checked_pairs: usize,
    pub violations: Vec<LipschitzViolation<S>>,
}

impl<S> LipschitzReport<S> {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Spot-check the declared Lipschitz constant on adjacent pairs reached by a
/// random walk from `x0`. Checks `|f(x) - f(y)| ≤ L` for sampled neighbors
/// `y` of visited states `x`, up to `n_pairs` pairs in total.
pub fn check_lipschitz<C: Chain>(
    chain: &C,
    obs: &Observable<C::State>,
    x0: &C::State,
    n_pairs: usize,
    seed: u64,
) -> Result<LipschitzReport<C::State>> {
    if n_pairs == 0 {
        return Err(Error::InvalidArgument("n_pairs must be >= 1".into()));
    }
    let mut rng = ReplicaRng::with_label(seed, 0, 0x11b5);
    let mut current = x0.clone();
    let mut checked = 0usize;
    let mut violations = Vec::new();
    while checked < n_pairs {
        let nbrs = chain.neighbors(&current);
        if !nbrs.is_empty() {
            let y = &nbrs[rng.index(nbrs.len())];
            let gap = (obs.eval(&current) - obs.eval(y)).abs();
            // 1-ulp style slack so exact-constant observables pass.
            if gap > obs.lipschitz_constant * (1.0 + 1e-12) + 1e-12 {
                violations.push(LipschitzViolation {
                    x: current.clone(),
                    y: y.clone(),
                    gap,
                });
            }
            checked += 1;
        }
        current = chain.step(&current, &mut rng);
    }
    Ok(LipschitzReport {
        checked_pairs: checked,
        violations,
    })
}
