//! Mean-field (Curie–Weiss) Ising model under single-site Glauber dynamics.
//!
//! Spins live on the complete graph with interaction `J = 1/n`. One step
//! picks a uniform vertex `v` and refreshes its spin to `+1` with
//! probability `e^{βM} / (e^{βM} + e^{−βM})` where `M = (Σ_{w≠v} σ(w))/n`.
//! Two configurations are adjacent iff they differ in exactly one
//! coordinate, so the graph metric is Hamming distance and the stationary
//! measure is the Gibbs measure `π(σ) ∝ exp(β m(σ)²/(2n))`, a function of
//! the magnetisation `m(σ) = Σ σ(i)` alone.
//!
//! That last fact makes the magnetisation itself a Markov chain (a
//! birth-death chain on `{−n, −n+2, …, n}`), which this module exploits for
//! exact Gibbs computations up to `n = 10⁴` and for the cut-off scan.

use crate::chain::{Chain, Observable, RowChain, StateSpace};
use crate::coupling::{Coupling, EnumerableCoupling};
use crate::error::{Error, Result};
use crate::exact::Dist;
use crate::rng::ReplicaRng;
use crate::util::{binomial_se, log_sum_exp, replica_map};

/// A spin configuration with its magnetisation cached.
#[derive(Debug, Clone)]
pub struct IsingState {
    spins: Vec<i8>,
    sum: i32,
}

impl IsingState {
    pub fn new(spins: Vec<i8>) -> Self {
        assert!(spins.iter().all(|&s| s == 1 || s == -1), "spins are ±1");
        let sum = spins.iter().map(|&s| i32::from(s)).sum();
        IsingState { spins, sum }
    }

    pub fn all_plus(n: usize) -> Self {
        IsingState {
            spins: vec![1; n],
            sum: n as i32,
        }
    }

    pub fn all_minus(n: usize) -> Self {
        IsingState {
            spins: vec![-1; n],
            sum: -(n as i32),
        }
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    /// Magnetisation `m(σ) = Σ σ(i)`.
    pub fn magnetization(&self) -> i64 {
        i64::from(self.sum)
    }

    /// The configuration with the spin at `v` flipped (an adjacent state).
    pub fn flipped(&self, v: usize) -> IsingState {
        let mut s = self.clone();
        s.sum -= 2 * i32::from(s.spins[v]);
        s.spins[v] = -s.spins[v];
        s
    }
}

impl PartialEq for IsingState {
    fn eq(&self, other: &Self) -> bool {
        self.spins == other.spins
    }
}
impl Eq for IsingState {}
impl std::hash::Hash for IsingState {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.spins.hash(state)
    }
}

/// Glauber dynamics for the Curie–Weiss model with `J = 1/n`.
#[derive(Debug, Clone)]
pub struct IsingChain {
    n: usize,
    beta: f64,
}

impl IsingChain {
    pub fn new(n: usize, beta: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!("need n ≥ 2 spins, got {n}")));
        }
        if beta < 0.0 || !beta.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "inverse temperature must be finite and non-negative, got {beta}"
            )));
        }
        Ok(IsingChain { n, beta })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Heat-bath probability that the refreshed spin at `v` is `+1`.
    pub fn plus_probability(&self, x: &IsingState, v: usize) -> f64 {
        let field = f64::from(x.sum - i32::from(x.spins[v])) / self.n as f64;
        sigmoid(2.0 * self.beta * field)
    }

    /// Apply the update at vertex `v` with heat-bath coin `u ∈ [0,1)`.
    pub fn update(&self, x: &IsingState, v: usize, u: f64) -> IsingState {
        let p = self.plus_probability(x, v);
        let new_spin: i8 = if u < p { 1 } else { -1 };
        if new_spin == x.spins[v] {
            x.clone()
        } else {
            x.flipped(v)
        }
    }
}

impl Chain for IsingChain {
    type State = IsingState;

    fn step(&self, x: &IsingState, rng: &mut ReplicaRng) -> IsingState {
        let v = rng.index(self.n);
        let u = rng.uniform();
        self.update(x, v, u)
    }

    fn neighbors(&self, x: &IsingState) -> Vec<IsingState> {
        (0..self.n).map(|v| x.flipped(v)).collect()
    }

    fn distance(&self, x: &IsingState, y: &IsingState) -> u64 {
        x.spins
            .iter()
            .zip(&y.spins)
            .filter(|(a, b)| a != b)
            .count() as u64
    }
}

impl RowChain for IsingChain {
    fn row(&self, x: &IsingState) -> Vec<(IsingState, f64)> {
        let n = self.n as f64;
        let mut entries = Vec::with_capacity(self.n + 1);
        let mut stay = 0.0;
        for v in 0..self.n {
            let p_plus = self.plus_probability(x, v);
            let p_flip = if x.spins[v] == 1 { 1.0 - p_plus } else { p_plus };
            entries.push((x.flipped(v), p_flip / n));
            stay += (1.0 - p_flip) / n;
        }
        entries.push((x.clone(), stay));
        entries
    }
}

impl StateSpace for IsingChain {
    fn states(&self) -> Vec<IsingState> {
        assert!(
            self.n <= 20,
            "full configuration enumeration is capped at n = 20 (2ⁿ states)"
        );
        (0u32..1 << self.n)
            .map(|code| {
                IsingState::new(
                    (0..self.n)
                        .map(|i| if code >> i & 1 == 1 { 1 } else { -1 })
                        .collect(),
                )
            })
            .collect()
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `m(σ)`, a 2-Lipschitz observable (one flip moves it by 2).
pub fn magnetization_observable() -> Observable<IsingState> {
    Observable::new("magnetization", 2.0, |x: &IsingState| {
        x.magnetization() as f64
    })
}

/// `m(σ)/2`, the canonical 1-Lipschitz observable.
pub fn half_magnetization_observable() -> Observable<IsingState> {
    Observable::new("half_magnetization", 1.0, |x: &IsingState| {
        x.magnetization() as f64 / 2.0
    })
}

/// The synchronous coupling: both copies update the same vertex with the
/// same heat-bath coin.
pub struct SynchronousCoupling;

impl Coupling<IsingChain> for SynchronousCoupling {
    fn joint_step(
        &self,
        chain: &IsingChain,
        x: &IsingState,
        y: &IsingState,
        rng: &mut ReplicaRng,
    ) -> (IsingState, IsingState) {
        let v = rng.index(chain.n);
        let u = rng.uniform();
        (chain.update(x, v, u), chain.update(y, v, u))
    }
}

impl EnumerableCoupling<IsingChain> for SynchronousCoupling {
    fn joint_row(
        &self,
        chain: &IsingChain,
        x: &IsingState,
        y: &IsingState,
    ) -> Vec<((IsingState, IsingState), f64)> {
        let n = chain.n as f64;
        let mut entries = Vec::new();
        for v in 0..chain.n {
            let px = chain.plus_probability(x, v);
            let py = chain.plus_probability(y, v);
            let lo = px.min(py);
            let hi = px.max(py);
            let set = |s: &IsingState, spin: i8| {
                if s.spins[v] == spin {
                    s.clone()
                } else {
                    s.flipped(v)
                }
            };
            // Shared coin u: both +1 on [0, lo), split on [lo, hi), both −1 after.
            entries.push(((set(x, 1), set(y, 1)), lo / n));
            if hi > lo {
                let (sx, sy) = if px > py {
                    (set(x, 1), set(y, -1))
                } else {
                    (set(x, -1), set(y, 1))
                };
                entries.push(((sx, sy), (hi - lo) / n));
            }
            entries.push(((set(x, -1), set(y, -1)), (1.0 - hi) / n));
        }
        entries
    }
}

/// Exact Gibbs distribution over all `2ⁿ` configurations, aligned with the
/// enumeration order of [`IsingChain::states`].
pub fn gibbs_exact(n: usize, beta: f64) -> Result<Dist> {
    if n > 20 {
        return Err(Error::InvalidArgument(format!(
            "full Gibbs enumeration is capped at n = 20, got {n}"
        )));
    }
    let chain = IsingChain::new(n, beta)?;
    let states = chain.states();
    let logw: Vec<f64> = states
        .iter()
        .map(|s| {
            let m = s.magnetization() as f64;
            beta * m * m / (2.0 * n as f64)
        })
        .collect();
    let logz = log_sum_exp(&logw);
    Ok(Dist::from_raw(logw.iter().map(|w| (w - logz).exp()).collect()))
}

/// The exact distribution of the magnetisation under the Gibbs measure,
/// using binomial multiplicities; feasible up to `n = 10⁴`.
#[derive(Debug, Clone)]
pub struct MagnetizationDist {
    /// Magnetisation values `−n, −n+2, …, n`.
    pub values: Vec<i64>,
    pub probs: Vec<f64>,
}

impl MagnetizationDist {
    pub fn prob_at_least(&self, threshold: f64) -> f64 {
        self.values
            .iter()
            .zip(&self.probs)
            .filter(|(&m, _)| m as f64 >= threshold)
            .map(|(_, &p)| p)
            .sum()
    }

    pub fn prob_at_most(&self, threshold: f64) -> f64 {
        self.values
            .iter()
            .zip(&self.probs)
            .filter(|(&m, _)| m as f64 <= threshold)
            .map(|(_, &p)| p)
            .sum()
    }

    pub fn mean(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.probs)
            .map(|(&m, &p)| m as f64 * p)
            .sum()
    }

    /// Inverse-CDF sample.
    pub fn sample(&self, rng: &mut ReplicaRng) -> i64 {
        let idx = rng.categorical(&self.probs);
        self.values[idx]
    }
}

pub fn gibbs_magnetization(n: usize, beta: f64) -> Result<MagnetizationDist> {
    if !(2..=100_000).contains(&n) {
        return Err(Error::InvalidArgument(format!(
            "magnetisation-class Gibbs supports 2 ≤ n ≤ 1e5, got {n}"
        )));
    }
    if beta < 0.0 || !beta.is_finite() {
        return Err(Error::InvalidArgument(format!("bad beta {beta}")));
    }
    // ln k! table; the energy depends only on m, the multiplicity is C(n,k).
    let mut ln_fact = vec![0.0f64; n + 1];
    for i in 1..=n {
        ln_fact[i] = ln_fact[i - 1] + (i as f64).ln();
    }
    let values: Vec<i64> = (0..=n).map(|k| 2 * k as i64 - n as i64).collect();
    let logw: Vec<f64> = (0..=n)
        .map(|k| {
            let m = 2.0 * k as f64 - n as f64;
            ln_fact[n] - ln_fact[k] - ln_fact[n - k] + beta * m * m / (2.0 * n as f64)
        })
        .collect();
    let logz = log_sum_exp(&logw);
    Ok(MagnetizationDist {
        values,
        probs: logw.iter().map(|w| (w - logz).exp()).collect(),
    })
}

/// Result of the bi-modality scan.
#[derive(Debug, Clone)]
pub struct BimodalityReport {
    /// Scanned thresholds `c` with the exact masses of `{m ≥ cn}` and
    /// `{m ≤ −cn}`.
    pub rows: Vec<(f64, f64, f64)>,
    /// Bimodal iff both masses are ≥ 1/4 at some scanned `c > 0`.
    pub bimodal: bool,
    /// The largest scanned `c` witnessing bi-modality, if any.
    pub witness_c: Option<f64>,
}

/// Scan `c ∈ {0.05, 0.10, …, 1.0}` and report the exact Gibbs masses of the
/// two magnetisation tails; the distribution is bimodal when both tails hold
/// at least 1/4 of the mass at some `c > 0` on the grid.
pub fn bimodality_check(n: usize, beta: f64) -> Result<BimodalityReport> {
    let dist = gibbs_magnetization(n, beta)?;
    let mut rows = Vec::new();
    let mut witness = None;
    for i in 1..=20 {
        let c = i as f64 * 0.05;
        let upper = dist.prob_at_least(c * n as f64);
        let lower = dist.prob_at_most(-c * n as f64);
        if upper >= 0.25 && lower >= 0.25 {
            witness = Some(c);
        }
        rows.push((c, upper, lower));
    }
    Ok(BimodalityReport {
        rows,
        bimodal: witness.is_some(),
        witness_c: witness,
    })
}

/// The magnetisation chain: the exact image of Glauber dynamics under
/// `σ ↦ m(σ)`, a birth-death chain on `{−n, −n+2, …, n}`.
#[derive(Debug, Clone)]
pub struct MagnetizationChain {
    n: usize,
    beta: f64,
}

impl MagnetizationChain {
    pub fn new(n: usize, beta: f64) -> Result<Self> {
        IsingChain::new(n, beta)?;
        Ok(MagnetizationChain { n, beta })
    }

    /// `(P(m → m−2), P(m → m), P(m → m+2))`.
    pub fn probs(&self, m: i64) -> (f64, f64, f64) {
        let n = self.n as f64;
        let k = (m + self.n as i64) as f64 / 2.0;
        let p_down = k / n * (1.0 - sigmoid(2.0 * self.beta * (m as f64 - 1.0) / n));
        let p_up = (n - k) / n * sigmoid(2.0 * self.beta * (m as f64 + 1.0) / n);
        (p_down, 1.0 - p_down - p_up, p_up)
    }

    fn move_with(&self, m: i64, u: f64) -> i64 {
        let (down, stay, _) = self.probs(m);
        if u < down {
            m - 2
        } else if u < down + stay {
            m
        } else {
            m + 2
        }
    }
}

impl Chain for MagnetizationChain {
    type State = i64;

    fn step(&self, m: &i64, rng: &mut ReplicaRng) -> i64 {
        self.move_with(*m, rng.uniform())
    }

    fn neighbors(&self, m: &i64) -> Vec<i64> {
        let n = self.n as i64;
        let mut v = Vec::with_capacity(2);
        if *m > -n {
            v.push(m - 2);
        }
        if *m < n {
            v.push(m + 2);
        }
        v
    }

    fn distance(&self, x: &i64, y: &i64) -> u64 {
        x.abs_diff(*y) / 2
    }
}

impl RowChain for MagnetizationChain {
    fn row(&self, m: &i64) -> Vec<(i64, f64)> {
        let (down, stay, up) = self.probs(*m);
        let mut entries = vec![(*m, stay)];
        if down > 0.0 {
            entries.push((m - 2, down));
        }
        if up > 0.0 {
            entries.push((m + 2, up));
        }
        entries
    }
}

impl StateSpace for MagnetizationChain {
    fn states(&self) -> Vec<i64> {
        (0..=self.n).map(|k| 2 * k as i64 - self.n as i64).collect()
    }
}

/// The cut-off location `t_n = n·ln n / (2(1−β))` for `β < 1`.
pub fn cutoff_time(n: usize, beta: f64) -> f64 {
    (n as f64) * (n as f64).ln() / (2.0 * (1.0 - beta))
}

/// One scanned point of the cut-off experiment.
#[derive(Debug, Clone)]
pub struct CutoffPoint {
    pub gamma: f64,
    pub t: u64,
    /// TV between the empirical magnetisation law at `t` (all-plus start)
    /// and the exact stationary magnetisation law: a mixing lower bound.
    pub tv_lower: f64,
    /// Exact TV between the magnetisation law at `t` and stationarity,
    /// computed by dense evolution of the birth-death chain.
    pub tv_magnetization_exact: f64,
    /// Fraction of coupled magnetisation chains (all-plus vs stationary
    /// start) not coalesced by `t`: a mixing upper bound.
    pub coalescence_upper: f64,
    pub coalescence_se: f64,
}

/// Scan mixing around the cut-off time: at `t = t_n + γ·n` for each `γ`,
/// report the magnetisation-statistic TV lower bound and a coalescence
/// upper bound.
///
/// Both sides ride on the magnetisation chain. From the all-plus start the
/// configuration law is exchangeable, so conditionally on `m(X_t)` it is
/// uniform on the level set, exactly as the Gibbs measure is conditionally
/// on `m`; distances to stationarity therefore reduce to the magnetisation
/// marginal, and two copies whose magnetisations have met can be realised
/// as equal configurations. The coupling contracts the gap with a shared
/// uniform reflected across the two copies, switching to a maximal
/// one-step coupling when the gap reaches one move.
pub fn cutoff_scan(
    n: usize,
    beta: f64,
    gammas: &[f64],
    replicas: u64,
    seed: u64,
) -> Result<Vec<CutoffPoint>> {
    if beta >= 1.0 {
        return Err(Error::InvalidArgument(format!(
            "cut-off scan requires β < 1 (got β = {beta}): at and above the critical \
             temperature there is no rapid mixing and no cut-off"
        )));
    }
    if replicas == 0 || gammas.is_empty() {
        return Err(Error::InvalidArgument(
            "need at least one gamma and one replica".into(),
        ));
    }
    let chain = MagnetizationChain::new(n, beta)?;
    let stationary = gibbs_magnetization(n, beta)?;
    let tn = cutoff_time(n, beta);
    let times: Vec<u64> = gammas
        .iter()
        .map(|g| (tn + g * n as f64).round().max(0.0) as u64)
        .collect();
    let t_max = *times.iter().max().expect("nonempty");
    let cap = crate::chain::step_cap();
    if t_max > cap {
        return Err(Error::StepCapExceeded {
            requested: t_max,
            cap,
        });
    }

    // Lower bound: empirical magnetisation histograms at each scanned time.
    let start = n as i64;
    let value_index = |m: i64| ((m + n as i64) / 2) as usize;
    let histograms: Vec<Vec<u64>> = {
        let per_replica = replica_map(replicas, |r| {
            let mut rng = ReplicaRng::with_label(seed, r, 0xcf10);
            let mut m = start;
            let mut at_times = vec![0i64; times.len()];
            for (ti, &t) in times.iter().enumerate() {
                if t == 0 {
                    at_times[ti] = m;
                }
            }
            for s in 1..=t_max {
                m = chain.step(&m, &mut rng);
                for (ti, &t) in times.iter().enumerate() {
                    if t == s {
                        at_times[ti] = m;
                    }
                }
            }
            at_times
        });
        let mut hists = vec![vec![0u64; n + 1]; times.len()];
        for row in &per_replica {
            for (ti, &m) in row.iter().enumerate() {
                hists[ti][value_index(m)] += 1;
            }
        }
        hists
    };

    // Upper bound: coalescence times of coupled pairs (all-plus, stationary).
    let merge_times: Vec<u64> = replica_map(replicas, |r| {
        let mut rng = ReplicaRng::with_label(seed, r, 0xcf20);
        let mut x = start;
        let mut y = stationary.sample(&mut rng);
        for s in 1..=t_max {
            if x == y {
                return s - 1;
            }
            let (nx, ny) = coupled_magnetization_step(&chain, x, y, &mut rng);
            x = nx;
            y = ny;
        }
        if x == y {
            t_max
        } else {
            u64::MAX
        }
    });

    // Exact magnetisation TV curve at the scanned times.
    let exact_tvs = magnetization_tv_exact(&chain, &stationary, &times);

    let mut points = Vec::with_capacity(gammas.len());
    for (ti, (&gamma, &t)) in gammas.iter().zip(&times).enumerate() {
        let tv_lower = 0.5
            * histograms[ti]
                .iter()
                .zip(&stationary.probs)
                .map(|(&c, &p)| (c as f64 / replicas as f64 - p).abs())
                .sum::<f64>();
        let unmerged = merge_times.iter().filter(|&&mt| mt > t).count();
        let frac = unmerged as f64 / replicas as f64;
        points.push(CutoffPoint {
            gamma,
            t,
            tv_lower,
            tv_magnetization_exact: exact_tvs[ti],
            coalescence_upper: frac,
            coalescence_se: binomial_se(frac, replicas),
        });
    }
    Ok(points)
}

/// One coupled step of two magnetisation chains. A reflected shared uniform
/// maximises co-movement toward each other; at gap 2 (one move apart) a
/// maximal coupling of the two one-step laws is used so the pair can land
/// on the same value. Marginals are exact in every branch.
fn coupled_magnetization_step(
    chain: &MagnetizationChain,
    x: i64,
    y: i64,
    rng: &mut ReplicaRng,
) -> (i64, i64) {
    debug_assert_ne!(x, y);
    if x.abs_diff(y) == 2 {
        return maximal_pair_step(chain, x, y, rng);
    }
    let u = rng.uniform();
    // Reflection: y consumes the mirrored uniform, so "x moves down" pairs
    // with "y moves up" as often as the marginals allow.
    let (nx, ny) = if x > y {
        (chain.move_with(x, u), chain.move_with(y, 1.0 - u))
    } else {
        (chain.move_with(x, 1.0 - u), chain.move_with(y, u))
    };
    (nx, ny)
}

fn maximal_pair_step(
    chain: &MagnetizationChain,
    x: i64,
    y: i64,
    rng: &mut ReplicaRng,
) -> (i64, i64) {
    let dist_of = |m: i64| -> [(i64, f64); 3] {
        let (d, s, u) = chain.probs(m);
        [(m - 2, d), (m, s), (m + 2, u)]
    };
    let px = dist_of(x);
    let py = dist_of(y);
    let prob_in = |dist: &[(i64, f64); 3], v: i64| {
        dist.iter()
            .find(|&&(m, _)| m == v)
            .map_or(0.0, |&(_, p)| p)
    };
    // Overlap masses over the union support.
    let mut union: Vec<i64> = px.iter().chain(py.iter()).map(|&(m, _)| m).collect();
    union.sort_unstable();
    union.dedup();
    let overlaps: Vec<(i64, f64)> = union
        .iter()
        .map(|&v| (v, prob_in(&px, v).min(prob_in(&py, v))))
        .collect();
    let total_overlap: f64 = overlaps.iter().map(|&(_, o)| o).sum();

    let u = rng.uniform();
    if u < total_overlap {
        // Coalesce on a common value.
        let mut acc = 0.0;
        for &(v, o) in &overlaps {
            acc += o;
            if u < acc {
                return (v, v);
            }
        }
        let v = overlaps.last().expect("nonempty").0;
        return (v, v);
    }
    // Independent draws from the residuals.
    let residual = |dist: &[(i64, f64); 3], rng: &mut ReplicaRng| -> i64 {
        let rest: Vec<(i64, f64)> = dist
            .iter()
            .map(|&(v, p)| (v, p - prob_in(&px, v).min(prob_in(&py, v))))
            .collect();
        let mass: f64 = rest.iter().map(|&(_, p)| p.max(0.0)).sum();
        let mut draw = rng.uniform() * mass;
        let mut fallback = rest[0].0;
        for &(v, p) in &rest {
            if p <= 0.0 {
                continue;
            }
            if draw < p {
                return v;
            }
            draw -= p;
            fallback = v;
        }
        fallback
    };
    (residual(&px, rng), residual(&py, rng))
}

/// Exact TV between the time-`t` magnetisation law from the all-plus start
/// and the stationary magnetisation law, at each requested time.
fn magnetization_tv_exact(
    chain: &MagnetizationChain,
    stationary: &MagnetizationDist,
    times: &[u64],
) -> Vec<f64> {
    let n = chain.n;
    let t_max = times.iter().copied().max().unwrap_or(0);
    let mut law = vec![0.0f64; n + 1];
    law[n] = 1.0; // all-plus: m = n is the last class.
    let tv = |law: &[f64]| -> f64 {
        0.5 * law
            .iter()
            .zip(&stationary.probs)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    };
    let mut out = vec![0.0; times.len()];
    for (ti, &t) in times.iter().enumerate() {
        if t == 0 {
            out[ti] = tv(&law);
        }
    }
    let mut next = vec![0.0f64; n + 1];
    for s in 1..=t_max {
        next.iter_mut().for_each(|v| *v = 0.0);
        for (k, &w) in law.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let m = 2 * k as i64 - n as i64;
            let (down, stay, up) = chain.probs(m);
            if down > 0.0 {
                next[k - 1] += w * down;
            }
            next[k] += w * stay;
            if up > 0.0 {
                next[k + 1] += w * up;
            }
        }
        std::mem::swap(&mut law, &mut next);
        for (ti, &t) in times.iter().enumerate() {
            if t == s {
                out[ti] = tv(&law);
            }
        }
    }
    out
}
