//! The supermarket jump chain: `n` single-server queues, arrivals joining
//! the shortest of `d` uniformly sampled queues (ties broken by the first
//! of the shortest in the sampled list), departures from a uniform queue.
//!
//! In the embedded discrete-time jump chain the next event is an arrival
//! with probability `λ/(1+λ)` and a potential departure otherwise;
//! departures from empty queues change nothing. Two states are adjacent iff
//! they differ by exactly one customer in one queue, so the graph metric is
//! the ℓ₁ distance. The state space is unbounded: no exact kernel exists,
//! and worst-case mixing quantities are undefined here by design.

use crate::chain::{Chain, Observable, RowChain};
use crate::coupling::{Coupling, RestrictedSet};
use crate::error::{Error, Result};
use crate::rng::ReplicaRng;
use crate::util::{replica_map, sample_std};

/// Upper limit on the number of arrival choices.
const MAX_D: usize = 16;

/// Jump-chain parameters.
#[derive(Debug, Clone)]
pub struct SupermarketChain {
    n: usize,
    lambda: f64,
    d: usize,
}

/// One sampled event, shared verbatim between coupled copies.
#[derive(Debug, Clone, Copy)]
pub enum Event {
    /// The ordered `d`-tuple of candidate queues.
    Arrival { choices: [u32; MAX_D], d: usize },
    /// The queue selected for a potential departure.
    Departure(u32),
}

impl SupermarketChain {
    pub fn new(n: usize, lambda: f64, d: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("need at least one queue".into()));
        }
        if !(0.0 < lambda && lambda < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "arrival rate must lie in (0,1), got {lambda}"
            )));
        }
        if d == 0 || d > MAX_D {
            return Err(Error::InvalidArgument(format!(
                "need 1 ≤ d ≤ {MAX_D} choices, got {d}"
            )));
        }
        Ok(SupermarketChain { n, lambda, d })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn empty_state(&self) -> Vec<u32> {
        vec![0; self.n]
    }

    pub fn sample_event(&self, rng: &mut ReplicaRng) -> Event {
        if rng.uniform() < self.lambda / (1.0 + self.lambda) {
            let mut choices = [0u32; MAX_D];
            for c in choices.iter_mut().take(self.d) {
                *c = rng.index(self.n) as u32;
            }
            Event::Arrival {
                choices,
                d: self.d,
            }
        } else {
            Event::Departure(rng.index(self.n) as u32)
        }
    }

    /// The queue an arrival joins: the first of the shortest in the list.
    pub fn arrival_target(lengths: &[u32], choices: &[u32]) -> usize {
        let mut best = choices[0] as usize;
        let mut best_len = lengths[best];
        for &c in &choices[1..] {
            let len = lengths[c as usize];
            if len < best_len {
                best = c as usize;
                best_len = len;
            }
        }
        best
    }

    /// Apply an event in place; returns `(queue, +1/−1)` when a length
    /// changed.
    pub fn apply_event(&self, lengths: &mut [u32], event: &Event) -> Option<(usize, i32)> {
        match event {
            Event::Arrival { choices, d } => {
                let j = Self::arrival_target(lengths, &choices[..*d]);
                lengths[j] += 1;
                Some((j, 1))
            }
            Event::Departure(q) => {
                let q = *q as usize;
                if lengths[q] > 0 {
                    lengths[q] -= 1;
                    Some((q, -1))
                } else {
                    None
                }
            }
        }
    }
}

impl Chain for SupermarketChain {
    type State = Vec<u32>;

    fn step(&self, x: &Vec<u32>, rng: &mut ReplicaRng) -> Vec<u32> {
        let event = self.sample_event(rng);
        let mut next = x.clone();
        self.apply_event(&mut next, &event);
        next
    }

    fn neighbors(&self, x: &Vec<u32>) -> Vec<Vec<u32>> {
        let mut out = Vec::with_capacity(2 * self.n);
        for j in 0..self.n {
            let mut up = x.clone();
            up[j] += 1;
            out.push(up);
            if x[j] > 0 {
                let mut down = x.clone();
                down[j] -= 1;
                out.push(down);
            }
        }
        out
    }

    fn distance(&self, x: &Vec<u32>, y: &Vec<u32>) -> u64 {
        x.iter()
            .zip(y)
            .map(|(a, b)| u64::from(a.abs_diff(*b)))
            .sum()
    }
}

impl RowChain for SupermarketChain {
    fn row(&self, x: &Vec<u32>) -> Vec<(Vec<u32>, f64)> {
        let n = self.n as f64;
        let arrival_p = self.lambda / (1.0 + self.lambda);
        let departure_p = 1.0 / (1.0 + self.lambda);
        let mut entries = Vec::with_capacity(2 * self.n + 1);

        // P(the first-listed minimum is queue j) from the counts of queues
        // strictly shorter-than-none / at-least as long.
        for j in 0..self.n {
            let lj = x[j];
            let taller = x.iter().filter(|&&l| l > lj).count() as f64;
            let at_least = x.iter().filter(|&&l| l >= lj).count() as f64;
            let mut win = 0.0;
            for k in 1..=self.d {
                win += (taller / n).powi(k as i32 - 1)
                    * (1.0 / n)
                    * (at_least / n).powi((self.d - k) as i32);
            }
            let mut up = x.clone();
            up[j] += 1;
            entries.push((up, arrival_p * win));
        }

        let mut empties = 0usize;
        for j in 0..self.n {
            if x[j] > 0 {
                let mut down = x.clone();
                down[j] -= 1;
                entries.push((down, departure_p / n));
            } else {
                empties += 1;
            }
        }
        if empties > 0 {
            entries.push((x.clone(), departure_p * empties as f64 / n));
        }
        entries
    }
}

/// `‖x‖₁`, the total number of customers; 1-Lipschitz for the ℓ₁ metric.
pub fn total_customers_observable() -> Observable<Vec<u32>> {
    Observable::new("total_customers", 1.0, |x: &Vec<u32>| {
        x.iter().map(|&l| f64::from(l)).sum()
    })
}

/// `ℓ(k, x)`, the number of queues of length at least `k`; 1-Lipschitz.
pub fn queues_at_least_observable(k: u32) -> Observable<Vec<u32>> {
    Observable::new(format!("queues_at_least_{k}"), 1.0, move |x: &Vec<u32>| {
        x.iter().filter(|&&l| l >= k).count() as f64
    })
}

/// `‖x‖∞`, the maximum queue length; 1-Lipschitz.
pub fn max_queue_observable() -> Observable<Vec<u32>> {
    Observable::new("max_queue", 1.0, |x: &Vec<u32>| {
        f64::from(x.iter().copied().max().unwrap_or(0))
    })
}

/// The good-state region `S₀ = {‖x‖₁ ≤ cn, ‖x‖∞ ≤ c·ln n}` with its interior
/// computed directly from the norms.
pub fn norm_restricted_set(n: usize, c: f64) -> RestrictedSet<Vec<u32>> {
    let l1_cap = c * n as f64;
    let linf_cap = c * (n as f64).ln();
    RestrictedSet::with_interior(
        move |x: &Vec<u32>| {
            let l1: u64 = x.iter().map(|&l| u64::from(l)).sum();
            let linf = x.iter().copied().max().unwrap_or(0);
            (l1 as f64) <= l1_cap && f64::from(linf) <= linf_cap
        },
        move |x: &Vec<u32>| {
            let l1: u64 = x.iter().map(|&l| u64::from(l)).sum();
            let linf = x.iter().copied().max().unwrap_or(0);
            (l1 as f64) <= l1_cap - 1.0 && f64::from(linf) <= linf_cap - 1.0
        },
    )
}

/// The monotone coupling: both copies see the same event type, the same
/// `d`-tuple, and the same departure queue; from adjacent states the ℓ₁
/// distance never increases under this coupling.
pub struct MonotoneCoupling;

impl Coupling<SupermarketChain> for MonotoneCoupling {
    fn joint_step(
        &self,
        chain: &SupermarketChain,
        x: &Vec<u32>,
        y: &Vec<u32>,
        rng: &mut ReplicaRng,
    ) -> (Vec<u32>, Vec<u32>) {
        let event = chain.sample_event(rng);
        let mut nx = x.clone();
        let mut ny = y.clone();
        chain.apply_event(&mut nx, &event);
        chain.apply_event(&mut ny, &event);
        (nx, ny)
    }
}

/// In-place long-run simulator keeping a count-per-level index so that
/// `ℓ(k)`, `‖x‖₁` and `‖x‖∞` are O(1) per step.
#[derive(Debug, Clone)]
pub struct Simulator {
    chain: SupermarketChain,
    lengths: Vec<u32>,
    /// `ell[k-1]` = number of queues with length ≥ k.
    ell: Vec<u64>,
    total: u64,
    max: u32,
}

impl Simulator {
    pub fn new(chain: SupermarketChain) -> Self {
        let lengths = chain.empty_state();
        Simulator {
            chain,
            lengths,
            ell: Vec::new(),
            total: 0,
            max: 0,
        }
    }

    pub fn lengths(&self) -> &[u32] {
        &self.lengths
    }

    /// Number of queues of length at least `k`.
    pub fn ell(&self, k: u32) -> u64 {
        if k == 0 {
            self.lengths.len() as u64
        } else {
            self.ell.get(k as usize - 1).copied().unwrap_or(0)
        }
    }

    pub fn total_customers(&self) -> u64 {
        self.total
    }

    pub fn max_queue(&self) -> u32 {
        self.max
    }

    pub fn step(&mut self, rng: &mut ReplicaRng) {
        let event = self.chain.sample_event(rng);
        if let Some((j, delta)) = self.chain.apply_event(&mut self.lengths, &event) {
            if delta == 1 {
                let new_len = self.lengths[j] as usize;
                if new_len > self.ell.len() {
                    self.ell.push(0);
                }
                self.ell[new_len - 1] += 1;
                self.total += 1;
                self.max = self.max.max(new_len as u32);
            } else {
                let old_len = self.lengths[j] as usize + 1;
                self.ell[old_len - 1] -= 1;
                self.total -= 1;
                if old_len as u32 == self.max && self.ell[old_len - 1] == 0 {
                    let mut m = self.max;
                    while m > 0 && self.ell(m) == 0 {
                        m -= 1;
                    }
                    self.max = m;
                }
            }
        }
    }

    pub fn run(&mut self, steps: u64, rng: &mut ReplicaRng) {
        for _ in 0..steps {
            self.step(rng);
        }
    }
}

/// Time-averaged tail fractions after burn-in.
#[derive(Debug, Clone)]
pub struct EquilibriumProfile {
    /// `mean ℓ(k)/n` for `k = 1..=k_max`.
    pub tail_fractions: Vec<f64>,
    pub burn_in: u64,
    pub steps: u64,
}

/// Burn in from empty for `burn_in` steps, then average `ℓ(k)/n` over the
/// next `steps` steps.
pub fn equilibrium_profile(
    chain: &SupermarketChain,
    burn_in: u64,
    steps: u64,
    k_max: u32,
    seed: u64,
) -> EquilibriumProfile {
    let mut rng = ReplicaRng::with_label(seed, 0, 0x5e11);
    let mut sim = Simulator::new(chain.clone());
    sim.run(burn_in, &mut rng);
    let mut sums = vec![0.0f64; k_max as usize];
    for _ in 0..steps {
        sim.step(&mut rng);
        for k in 1..=k_max {
            sums[k as usize - 1] += sim.ell(k) as f64;
        }
    }
    let denom = steps as f64 * chain.n() as f64;
    EquilibriumProfile {
        tail_fractions: sums.iter().map(|s| s / denom).collect(),
        burn_in,
        steps,
    }
}

/// Default burn-in `⌈C·n·ln n⌉` jump steps with `C = 20`.
pub fn default_burn_in(n: usize) -> u64 {
    (20.0 * n as f64 * (n as f64).ln()).ceil() as u64
}

/// Max-queue values from independent replicas, each burned in from empty.
pub fn max_queue_samples(
    chain: &SupermarketChain,
    burn_in: u64,
    samples: u64,
    seed: u64,
) -> Vec<u32> {
    replica_map(samples, |r| {
        let mut rng = ReplicaRng::with_label(seed, r, 0x3a3b);
        let mut sim = Simulator::new(chain.clone());
        sim.run(burn_in, &mut rng);
        sim.max_queue()
    })
}

/// Histogram of sampled max-queue values with the two-point summary.
#[derive(Debug, Clone)]
pub struct MaxQueueReport {
    /// (max value, count), sorted by value.
    pub histogram: Vec<(u32, u64)>,
    /// The two most frequent values, most frequent first.
    pub top_two: Vec<u32>,
    /// Whether the top two values are adjacent integers.
    pub top_two_adjacent: bool,
    /// Fraction of samples carried by the top two values.
    pub top_two_mass: f64,
    /// The asymptotic two-point predictor `m_d(n)` for reference.
    pub md_predictor: u32,
}

pub fn max_queue_report(chain: &SupermarketChain, values: &[u32]) -> Result<MaxQueueReport> {
    if values.is_empty() {
        return Err(Error::InsufficientSamples {
            got: 0,
            needed: 1,
            context: "max-queue histogram".into(),
        });
    }
    let mut counts: std::collections::BTreeMap<u32, u64> = std::collections::BTreeMap::new();
    for &v in values {
        *counts.entry(v).or_insert(0) += 1;
    }
    let histogram: Vec<(u32, u64)> = counts.into_iter().collect();
    let mut by_count = histogram.clone();
    by_count.sort_by_key(|&(v, c)| (std::cmp::Reverse(c), v));
    let top_two: Vec<u32> = by_count.iter().take(2).map(|&(v, _)| v).collect();
    let top_two_adjacent = top_two.len() == 2 && top_two[0].abs_diff(top_two[1]) == 1;
    let top_mass: u64 = by_count.iter().take(2).map(|&(_, c)| c).sum();
    Ok(MaxQueueReport {
        histogram,
        top_two,
        top_two_adjacent,
        top_two_mass: top_mass as f64 / values.len() as f64,
        md_predictor: md_predictor(chain.n(), chain.lambda(), chain.d() as u32)?,
    })
}

/// The two-point location predictor `m_d(n)`: with `i_d(n)` the least `i`
/// such that `λ^{(dⁱ−1)/(d−1)} < n^{−1/2}·(ln n)²`, this is `i_2(n)+1` for
/// `d = 2` and `i_d(n)` for `d ≥ 3`. Natural logarithm throughout.
pub fn md_predictor(n: usize, lambda: f64, d: u32) -> Result<u32> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!(
            "the two-point predictor needs d ≥ 2, got {d}"
        )));
    }
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "the two-point predictor needs n ≥ 2 queues, got {n}"
        )));
    }
    if !(0.0 < lambda && lambda < 1.0) {
        return Err(Error::InvalidArgument(format!("bad lambda {lambda}")));
    }
    let threshold = (n as f64).powf(-0.5) * (n as f64).ln().powi(2);
    let mut i = 1u32;
    while super::fluid::tail_fixed_point(lambda, d, i as usize) >= threshold && i < 64 {
        i += 1;
    }
    Ok(if d == 2 { i + 1 } else { i })
}

/// A coupled pair of states evolved in place under the monotone coupling,
/// with the ℓ₁ distance maintained incrementally.
pub struct CoupledPair {
    chain: SupermarketChain,
    x: Vec<u32>,
    y: Vec<u32>,
    dist: u64,
}

impl CoupledPair {
    pub fn new(chain: SupermarketChain, x: Vec<u32>, y: Vec<u32>) -> Self {
        let dist = chain.distance(&x, &y);
        CoupledPair { chain, x, y, dist }
    }

    pub fn dist(&self) -> u64 {
        self.dist
    }

    pub fn step(&mut self, rng: &mut ReplicaRng) {
        let event = self.chain.sample_event(rng);
        let cx = self.chain.apply_event(&mut self.x, &event);
        let cy = self.chain.apply_event(&mut self.y, &event);
        let mut touched = [usize::MAX; 2];
        if let Some((j, _)) = cx {
            touched[0] = j;
        }
        if let Some((j, _)) = cy {
            touched[1] = j;
        }
        if touched[1] == touched[0] {
            touched[1] = usize::MAX;
        }
        for &j in &touched {
            if j == usize::MAX {
                continue;
            }
            // Rebuild this coordinate's contribution from the applied deltas.
            let after = i64::from(self.x[j]) - i64::from(self.y[j]);
            let mut before = after;
            if let Some((jx, dx)) = cx {
                if jx == j {
                    before -= i64::from(dx);
                }
            }
            if let Some((jy, dy)) = cy {
                if jy == j {
                    before += i64::from(dy);
                }
            }
            self.dist = self.dist - before.unsigned_abs() + after.unsigned_abs();
        }
    }
}

/// Chaoticity report: the total variation distance between the empirical
/// joint law of two queue lengths (truncated at `k_max`) and the product of
/// the empirical marginals.
///
/// `null_tv` is the same statistic computed after cyclically shifting the
/// second coordinates, which destroys any dependence while keeping both
/// marginals: it measures the finite-sample noise floor the raw `tv`
/// plateaus at once the true dependence is smaller.
#[derive(Debug, Clone)]
pub struct ChaoticityReport {
    pub tv: f64,
    pub bootstrap_se: f64,
    /// The same estimator on dependence-destroyed samples (noise floor).
    pub null_tv: f64,
    pub samples: usize,
}

/// TV between the empirical joint law of sample pairs and the product of
/// empirical marginals, on the `(k_max+1)²` truncated grid.
pub fn chaoticity_from_samples(pairs: &[(u32, u32)], k_max: u32) -> Result<f64> {
    let bins = (k_max as usize + 1).pow(2);
    let needed = 10 * bins;
    if pairs.len() < needed {
        return Err(Error::InsufficientSamples {
            got: pairs.len(),
            needed,
            context: format!("chaoticity on a {bins}-cell grid"),
        });
    }
    let m = k_max as usize + 1;
    let nf = pairs.len() as f64;
    let mut joint = vec![0.0f64; m * m];
    let mut ma = vec![0.0f64; m];
    let mut mb = vec![0.0f64; m];
    for &(a, b) in pairs {
        let a = (a.min(k_max)) as usize;
        let b = (b.min(k_max)) as usize;
        joint[a * m + b] += 1.0;
        ma[a] += 1.0;
        mb[b] += 1.0;
    }
    let mut tv = 0.0;
    for a in 0..m {
        for b in 0..m {
            tv += (joint[a * m + b] / nf - ma[a] * mb[b] / (nf * nf)).abs();
        }
    }
    Ok(0.5 * tv)
}

/// Estimate equilibrium chaoticity for queues 1 and 2: burn in, then record
/// `samples` snapshots `spacing` steps apart and compare the joint law with
/// the product law, with a bootstrap standard error.
#[allow(clippy::too_many_arguments)]
pub fn chaoticity_estimate(
    chain: &SupermarketChain,
    burn_in: u64,
    samples: usize,
    spacing: u64,
    k_max: u32,
    bootstrap: usize,
    seed: u64,
) -> Result<ChaoticityReport> {
    if chain.n() < 2 {
        return Err(Error::InvalidArgument(
            "chaoticity needs at least two queues".into(),
        ));
    }
    let mut rng = ReplicaRng::with_label(seed, 0, 0xc4a0);
    let mut sim = Simulator::new(chain.clone());
    sim.run(burn_in, &mut rng);
    let mut pairs = Vec::with_capacity(samples);
    for _ in 0..samples {
        sim.run(spacing, &mut rng);
        pairs.push((sim.lengths()[0], sim.lengths()[1]));
    }
    let tv = chaoticity_from_samples(&pairs, k_max)?;
    let shifted: Vec<(u32, u32)> = (0..pairs.len())
        .map(|i| (pairs[i].0, pairs[(i + pairs.len() / 2) % pairs.len()].1))
        .collect();
    let null_tv = chaoticity_from_samples(&shifted, k_max)?;
    let mut boot_rng = ReplicaRng::with_label(seed, 1, 0xb001);
    let mut boot_tvs = Vec::with_capacity(bootstrap);
    for _ in 0..bootstrap {
        let resampled: Vec<(u32, u32)> = (0..pairs.len())
            .map(|_| pairs[boot_rng.index(pairs.len())])
            .collect();
        boot_tvs.push(chaoticity_from_samples(&resampled, k_max)?);
    }
    Ok(ChaoticityReport {
        tv,
        bootstrap_se: sample_std(&boot_tvs),
        null_tv,
        samples: pairs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::validate_marginals_chi_square;

    fn chain(n: usize, lambda: f64, d: usize) -> SupermarketChain {
        SupermarketChain::new(n, lambda, d).unwrap()
    }

    #[test]
    fn tie_breaks_to_first_listed_shortest() {
        // q = (0,0), tuple (2,1) in 1-based indexing: the arrival joins
        // queue 2, giving (0,1).
        let mut q = vec![0u32, 0];
        let event = Event::Arrival {
            choices: {
                let mut c = [0u32; MAX_D];
                c[0] = 1;
                c[1] = 0;
                c
            },
            d: 2,
        };
        chain(2, 0.7, 2).apply_event(&mut q, &event);
        assert_eq!(q, vec![0, 1]);
    }

    #[test]
    fn strict_minimum_wins() {
        // q = (3,1), tuple (1,2): queue 2 is the strict minimum.
        let mut q = vec![3u32, 1];
        let event = Event::Arrival {
            choices: {
                let mut c = [0u32; MAX_D];
                c[0] = 0;
                c[1] = 1;
                c
            },
            d: 2,
        };
        chain(2, 0.7, 2).apply_event(&mut q, &event);
        assert_eq!(q, vec![3, 2]);
    }

    #[test]
    fn empty_departure_is_ignored() {
        let mut q = vec![0u32, 0];
        let changed = chain(2, 0.7, 2).apply_event(&mut q, &Event::Departure(1));
        assert_eq!(q, vec![0, 0]);
        assert!(changed.is_none());
    }

    #[test]
    fn row_is_stochastic_and_local() {
        let c = chain(4, 0.7, 2);
        for state in [vec![0, 0, 0, 0], vec![2, 1, 0, 1], vec![3, 3, 3, 3]] {
            let row = c.row(&state);
            let sum: f64 = row.iter().map(|(_, p)| p).sum();
            assert!((sum - 1.0).abs() < 1e-12, "state {state:?} sums to {sum}");
            for (next, p) in &row {
                assert!(c.distance(&state, next) <= 1);
                assert!(*p >= 0.0);
            }
        }
    }

    #[test]
    fn sampled_steps_match_exact_row() {
        // The row uses the first-listed-minimum combinatorics; the sampler
        // simulates tuples directly. Chi-square ties the two together.
        let c = chain(3, 0.6, 2);
        struct Independent;
        impl Coupling<SupermarketChain> for Independent {
            fn joint_step(
                &self,
                chain: &SupermarketChain,
                x: &Vec<u32>,
                y: &Vec<u32>,
                rng: &mut ReplicaRng,
            ) -> (Vec<u32>, Vec<u32>) {
                (chain.step(x, rng), chain.step(y, rng))
            }
        }
        let x = vec![1u32, 0, 2];
        let y = vec![2u32, 2, 0];
        let (rx, ry) = validate_marginals_chi_square(&c, &Independent, &x, &y, 40_000, 5);
        assert!(rx.pass, "x stat {} critical {}", rx.statistic, rx.critical);
        assert!(ry.pass, "y stat {} critical {}", ry.statistic, ry.critical);
    }

    #[test]
    fn l1_changes_by_at_most_one_per_step() {
        let c = chain(5, 0.8, 3);
        let mut rng = ReplicaRng::new(9, 0);
        let mut x = c.empty_state();
        let mut prev: i64 = 0;
        for _ in 0..2000 {
            x = c.step(&x, &mut rng);
            let total: i64 = x.iter().map(|&l| i64::from(l)).sum();
            assert!((total - prev).abs() <= 1);
            prev = total;
        }
    }

    #[test]
    fn simulator_index_matches_recount() {
        let c = chain(6, 0.7, 2);
        let mut rng = ReplicaRng::new(4, 0);
        let mut sim = Simulator::new(c);
        sim.run(5000, &mut rng);
        let lengths = sim.lengths().to_vec();
        let recount_total: u64 = lengths.iter().map(|&l| u64::from(l)).sum();
        assert_eq!(sim.total_customers(), recount_total);
        assert_eq!(
            sim.max_queue(),
            lengths.iter().copied().max().unwrap(),
            "max index out of sync"
        );
        for k in 0..=sim.max_queue() + 2 {
            let recount = lengths.iter().filter(|&&l| l >= k).count() as u64;
            assert_eq!(sim.ell(k), recount, "ℓ({k}) out of sync");
        }
    }

    #[test]
    fn monotone_coupling_distance_never_increases() {
        let c = chain(8, 0.7, 2);
        let x0 = c.empty_state();
        let mut y0 = x0.clone();
        y0[3] = 1;
        let mut pair = CoupledPair::new(c.clone(), x0, y0);
        let mut rng = ReplicaRng::new(21, 0);
        let mut prev = pair.dist();
        assert_eq!(prev, 1);
        for _ in 0..20_000 {
            pair.step(&mut rng);
            assert!(pair.dist() <= prev, "distance increased");
            prev = pair.dist();
        }
    }

    #[test]
    fn coupled_pair_distance_matches_recount() {
        let c = chain(5, 0.6, 2);
        let x0 = vec![1u32, 0, 3, 0, 2];
        let y0 = vec![0u32, 2, 3, 1, 0];
        let mut pair = CoupledPair::new(c.clone(), x0, y0);
        let mut rng = ReplicaRng::new(2, 0);
        for _ in 0..4000 {
            pair.step(&mut rng);
            assert_eq!(pair.dist(), c.distance(&pair.x, &pair.y));
        }
    }

    #[test]
    fn md_predictor_hand_values() {
        // λ = 0.9, d = 2, n = 10⁴: threshold ≈ 0.8483, 0.9 ≥ thr,
        // 0.9³ = 0.729 < thr ⇒ i₂ = 2, m₂ = 3.
        assert_eq!(md_predictor(10_000, 0.9, 2).unwrap(), 3);
        // λ = 0.5: 0.5 < thr immediately ⇒ i₂ = 1, m₂ = 2.
        assert_eq!(md_predictor(10_000, 0.5, 2).unwrap(), 2);
        assert!(md_predictor(100, 0.9, 1).is_err());
    }

    #[test]
    fn md_predictor_monotone_on_grid() {
        let mut prev = 0;
        for n in [100usize, 300, 1000, 3000, 10_000, 30_000, 100_000] {
            let m = md_predictor(n, 0.9, 2).unwrap();
            assert!(m >= prev, "m_d({n}) = {m} dropped below {prev}");
            prev = m;
        }
    }

    #[test]
    fn chaoticity_of_constructed_product_is_zero() {
        // A cartesian-product sample has empirical joint exactly equal to
        // the product of its marginals.
        let marginal = [0u32, 0, 1, 1, 2, 3];
        let mut pairs = Vec::new();
        for &a in &marginal {
            for &b in &marginal {
                pairs.push((a, b));
            }
        }
        // Replicate whole grids to satisfy the sample-size floor.
        let pairs: Vec<(u32, u32)> = pairs.iter().cycle().take(36 * 6).copied().collect();
        let tv = chaoticity_from_samples(&pairs, 3).unwrap();
        assert!(tv < 1e-12, "tv = {tv}");
    }

    #[test]
    fn chaoticity_rejects_undersized_samples() {
        let pairs = vec![(0u32, 1u32); 30];
        assert!(matches!(
            chaoticity_from_samples(&pairs, 5).unwrap_err(),
            Error::InsufficientSamples { .. }
        ));
    }

    #[test]
    fn restricted_set_interior_via_norms() {
        let set = norm_restricted_set(100, 1.0);
        let c = chain(100, 0.7, 2);
        let zero = c.empty_state();
        assert!(set.contains(&zero));
        assert!(set.contains_interior(&c, &zero));
        // ln(100) ≈ 4.6: a queue at length 4 is in S₀ but not interior.
        let mut tall = c.empty_state();
        tall[0] = 4;
        assert!(set.contains(&tall));
        assert!(!set.contains_interior(&c, &tall));
    }
}
