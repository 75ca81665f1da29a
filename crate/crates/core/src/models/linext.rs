//! Glauber dynamics on linear extensions of the partial order made of a
//! chain of `n−1` comparable elements plus a single incomparable element.
//!
//! A linear extension is determined by the slot `1..=n` of the free
//! element, and an adjacent-transposition move either shifts that slot by
//! one or does nothing, so the walk is a lazy symmetric walk on a path:
//! pick a uniform slot pair `(i, i+1)`; if the free element sits in `i` or
//! `i+1` it moves across, otherwise the state is unchanged. The stationary
//! distribution is uniform on `1..=n` with standard deviation
//! `√((n²−1)/12) ≈ n/√12`: position deviations are of order `n`, not `√n`.

use crate::chain::{Chain, Observable, RowChain, StateSpace};
use crate::error::{Error, Result};
use crate::rng::ReplicaRng;
use crate::util::sample_std;

#[derive(Debug, Clone)]
pub struct LinextChain {
    n: usize,
}

impl LinextChain {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!(
                "the poset needs at least 2 elements, got {n}"
            )));
        }
        Ok(LinextChain { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

impl Chain for LinextChain {
    /// Slot of the incomparable element, `1..=n`.
    type State = u32;

    fn step(&self, pos: &u32, rng: &mut ReplicaRng) -> u32 {
        let i = 1 + rng.index(self.n - 1) as u32;
        if *pos == i {
            i + 1
        } else if *pos == i + 1 {
            i
        } else {
            *pos
        }
    }

    fn neighbors(&self, pos: &u32) -> Vec<u32> {
        let mut v = Vec::with_capacity(2);
        if *pos > 1 {
            v.push(pos - 1);
        }
        if *pos < self.n as u32 {
            v.push(pos + 1);
        }
        v
    }

    fn distance(&self, x: &u32, y: &u32) -> u64 {
        u64::from(x.abs_diff(*y))
    }
}

impl RowChain for LinextChain {
    fn row(&self, pos: &u32) -> Vec<(u32, f64)> {
        let move_p = 1.0 / (self.n - 1) as f64;
        let mut entries = Vec::with_capacity(3);
        let mut stay = 1.0;
        if *pos > 1 {
            entries.push((pos - 1, move_p));
            stay -= move_p;
        }
        if *pos < self.n as u32 {
            entries.push((pos + 1, move_p));
            stay -= move_p;
        }
        if stay > 0.0 {
            entries.push((*pos, stay));
        }
        entries
    }
}

impl StateSpace for LinextChain {
    fn states(&self) -> Vec<u32> {
        (1..=self.n as u32).collect()
    }
}

/// The slot itself, 1-Lipschitz.
pub fn position_observable() -> Observable<u32> {
    Observable::new("position", 1.0, |pos: &u32| f64::from(*pos))
}

/// Stationary moments estimated from one long run.
#[derive(Debug, Clone)]
pub struct PositionMoments {
    pub mean: f64,
    pub stddev: f64,
    pub samples: usize,
}

/// Long-run estimate of the stationary position moments: burn in, then
/// record samples `spacing` steps apart.
pub fn stationary_position_moments(
    chain: &LinextChain,
    burn_in: u64,
    samples: usize,
    spacing: u64,
    seed: u64,
) -> PositionMoments {
    let mut rng = ReplicaRng::with_label(seed, 0, 0x11e7);
    let mut pos = (chain.n() as u32).div_ceil(2);
    for _ in 0..burn_in {
        pos = chain.step(&pos, &mut rng);
    }
    let mut values = Vec::with_capacity(samples);
    for _ in 0..samples {
        for _ in 0..spacing {
            pos = chain.step(&pos, &mut rng);
        }
        values.push(f64::from(pos));
    }
    PositionMoments {
        mean: values.iter().sum::<f64>() / values.len() as f64,
        stddev: sample_std(&values),
        samples: values.len(),
    }
}
