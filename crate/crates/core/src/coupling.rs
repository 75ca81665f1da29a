//! One-step couplings, contraction profiles, coalescence-based total
//! variation bounds, and restricted-set escape probabilities.
//!
//! A contraction profile is a sequence `α_1..α_T` bounding (or estimating)
//! the worst Wasserstein distance between the `i`-step laws of two adjacent
//! starts. Exact profiles are computed by transportation solves on an
//! enumerated kernel; Monte Carlo profiles iterate a user-supplied coupling
//! from sampled adjacent pairs and record confidence bands, because a
//! supremum over pairs is not reachable by sampling.

use crate::chain::{Chain, RowChain};
use crate::error::{Error, Result};
use crate::exact::{wasserstein, Dist, Kernel};
use crate::rng::ReplicaRng;
use crate::util::{binomial_se, csv_row, fmt_f64, replica_map, sample_std};
use std::collections::HashMap;

/// A coupling of two copies of the same chain.
///
/// Implementations must be marginally correct: each component of
/// `joint_step(x, y, ·)` is distributed as `Chain::step` from the matching
/// state. This is validated by [`validate_marginals_exact`] /
/// [`validate_marginals_chi_square`], not trusted.
pub trait Coupling<C: Chain>: Sync {
    fn joint_step(
        &self,
        chain: &C,
        x: &C::State,
        y: &C::State,
        rng: &mut ReplicaRng,
    ) -> (C::State, C::State);
}

/// Entries of an exactly-computed joint one-step law.
pub type JointRow<S> = Vec<((S, S), f64)>;

/// A coupling whose joint one-step law is exactly computable (used for
/// entrywise marginal validation on enumerated chains).
pub trait EnumerableCoupling<C: Chain>: Coupling<C> {
    /// The joint law of one coupled step from `(x, y)`.
    fn joint_row(&self, chain: &C, x: &C::State, y: &C::State) -> JointRow<C::State>;
}

/// Whether a profile certifies the whole space or only a restricted set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProfileScope {
    Global,
    RestrictedToS0,
}

/// How a profile was obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    /// Exact supremum over adjacent pairs, per step.
    Exact,
    /// Monte Carlo maximum over sampled pairs with per-pair confidence bands.
    MonteCarlo { replicas: u64, confidence_z: f64 },
    /// Supplied in closed form (e.g. a geometric profile `α^i`).
    ClosedForm,
}

impl Provenance {
    pub fn label(&self) -> String {
        match self {
            Provenance::Exact => "exact".into(),
            Provenance::MonteCarlo {
                replicas,
                confidence_z,
            } => format!("monte-carlo(replicas={replicas};z={confidence_z})"),
            Provenance::ClosedForm => "closed-form".into(),
        }
    }
}

/// A sequence `α_1..α_T` bounding one-to-`T`-step Wasserstein expansion of
/// adjacent starts.
#[derive(Debug, Clone)]
pub struct ContractionProfile {
    pub alphas: Vec<f64>,
    pub scope: ProfileScope,
    pub provenance: Provenance,
    /// Pointwise lower confidence values (equal to `alphas` for exact).
    pub lower_conf: Vec<f64>,
    /// Pointwise upper confidence values (equal to `alphas` for exact).
    pub upper_conf: Vec<f64>,
}

impl ContractionProfile {
    pub fn exact(alphas: Vec<f64>) -> Self {
        let lower = alphas.clone();
        let upper = alphas.clone();
        ContractionProfile {
            alphas,
            scope: ProfileScope::Global,
            provenance: Provenance::Exact,
            lower_conf: lower,
            upper_conf: upper,
        }
    }

    /// Geometric profile `α, α², …, α^t` in closed form.
    pub fn geometric(alpha: f64, t: usize) -> Self {
        let alphas: Vec<f64> = (1..=t as u32).map(|i| alpha.powi(i as i32)).collect();
        let lower = alphas.clone();
        let upper = alphas.clone();
        ContractionProfile {
            alphas,
            scope: ProfileScope::Global,
            provenance: Provenance::ClosedForm,
            lower_conf: lower,
            upper_conf: upper,
        }
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    /// `Σ_{i=1}^{t} α_i²`.
    pub fn sum_sq(&self, t: usize) -> f64 {
        self.alphas[..t].iter().map(|a| a * a).sum()
    }

    /// CSV table: `i,alpha_i,provenance,lower_conf,upper_conf`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,alpha_i,provenance,lower_conf,upper_conf\n");
        let label = self.provenance.label();
        for (i, &a) in self.alphas.iter().enumerate() {
            out.push_str(&csv_row(&[
                (i + 1).to_string(),
                fmt_f64(a),
                label.clone(),
                fmt_f64(self.lower_conf[i]),
                fmt_f64(self.upper_conf[i]),
            ]));
        }
        out
    }
}

type StatePredicate<S> = Box<dyn Fn(&S) -> bool + Send + Sync>;

/// A good-state region `S₀` with its interior `S₀⁰` (states of `S₀` whose
/// neighbors all lie in `S₀`).
pub struct RestrictedSet<S> {
    member: StatePredicate<S>,
    /// Direct interior test, when cheaper than enumerating neighbors.
    interior: Option<StatePredicate<S>>,
}

impl<S> RestrictedSet<S> {
    pub fn new(member: impl Fn(&S) -> bool + Send + Sync + 'static) -> Self {
        RestrictedSet {
            member: Box::new(member),
            interior: None,
        }
    }

    pub fn with_interior(
        member: impl Fn(&S) -> bool + Send + Sync + 'static,
        interior: impl Fn(&S) -> bool + Send + Sync + 'static,
    ) -> Self {
        RestrictedSet {
            member: Box::new(member),
            interior: Some(Box::new(interior)),
        }
    }

    /// Whole-space set (never escapes).
    pub fn whole_space() -> Self {
        RestrictedSet {
            member: Box::new(|_| true),
            interior: Some(Box::new(|_| true)),
        }
    }

    pub fn contains(&self, x: &S) -> bool {
        (self.member)(x)
    }

    /// Membership in the interior `S₀⁰`, consulting neighbors when no direct
    /// test was supplied.
    pub fn contains_interior<C>(&self, chain: &C, x: &S) -> bool
    where
        C: Chain<State = S>,
        S: Clone + Eq + std::hash::Hash + std::fmt::Debug + Send + Sync,
    {
        if let Some(f) = &self.interior {
            return f(x);
        }
        self.contains(x) && chain.neighbors(x).iter().all(|y| self.contains(y))
    }
}

/// Exact contraction profile on an enumerated kernel:
/// `α_i = max over adjacent (x,y) of dw(δ_x Pⁱ, δ_y Pⁱ)` for `i = 1..=t`.
pub fn contraction_profile_exact(kernel: &Kernel, t: usize) -> Result<ContractionProfile> {
    let n = kernel.n_states();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|x| ((x + 1)..n).map(move |y| (x, y)))
        .filter(|&(x, y)| kernel.metric().get(x, y) == 1)
        .collect();
    let mut rows: Vec<Dist> = (0..n).map(|x| Dist::delta(n, x)).collect();
    let mut alphas = Vec::with_capacity(t);
    for _ in 1..=t {
        rows = rows.iter().map(|r| kernel.apply_once(r)).collect();
        let alpha = pairs
            .iter()
            .map(|&(x, y)| wasserstein(&rows[x], &rows[y], kernel.metric()))
            .fold(0.0, f64::max);
        alphas.push(alpha);
    }
    Ok(ContractionProfile::exact(alphas))
}

/// Exact one-step contraction constant `α = max over adjacent pairs of
/// dw(δ_x P, δ_y P)`; the geometric profile `αⁱ` is then valid whenever
/// `α < 1`. The value is returned even when `α ≥ 1` (no contraction; any
/// bound built from it is vacuous).
pub fn geometric_alpha(kernel: &Kernel) -> Result<f64> {
    let profile = contraction_profile_exact(kernel, 1)?;
    Ok(profile.alphas[0])
}

/// How adjacent start pairs are produced for Monte Carlo profiles.
pub enum AdjacentPairs<'a, C: Chain> {
    /// An explicit worst-case pair list.
    Explicit(Vec<(C::State, C::State)>),
    /// Sample a start from the given distribution, then a uniform neighbor.
    Sampled {
        n_pairs: usize,
        sample_start: &'a (dyn Fn(&mut ReplicaRng) -> C::State + Sync),
    },
}

/// Monte Carlo contraction profile: for each sampled adjacent pair, estimate
/// `E d(X_i, Y_i)` by `replicas` coupled runs; `α̂_i` is the maximum over
/// pairs of the empirical means, with per-pair normal confidence bands at
/// `confidence_z` standard errors maximised alongside.
#[allow(clippy::too_many_arguments)]
pub fn contraction_profile_mc<C: Chain>(
    chain: &C,
    coupling: &impl Coupling<C>,
    pairs: AdjacentPairs<C>,
    t: usize,
    replicas: u64,
    confidence_z: f64,
    seed: u64,
    scope: ProfileScope,
) -> Result<ContractionProfile> {
    let pair_list: Vec<(C::State, C::State)> = match pairs {
        AdjacentPairs::Explicit(p) => p,
        AdjacentPairs::Sampled {
            n_pairs,
            sample_start,
        } => {
            let mut rng = ReplicaRng::with_label(seed, 0, 0x9a17);
            (0..n_pairs)
                .map(|_| {
                    let x = sample_start(&mut rng);
                    let nbrs = chain.neighbors(&x);
                    let y = nbrs[rng.index(nbrs.len())].clone();
                    (x, y)
                })
                .collect()
        }
    };
    if pair_list.is_empty() {
        return Err(Error::InvalidArgument("no adjacent pairs supplied".into()));
    }
    let cap = crate::chain::step_cap();
    if t as u64 > cap {
        return Err(Error::StepCapExceeded {
            requested: t as u64,
            cap,
        });
    }
    for (x, y) in &pair_list {
        let d = chain.distance(x, y);
        if d != 1 {
            return Err(Error::NonAdjacentPair { distance: d });
        }
    }

    let mut alphas = vec![0.0f64; t];
    let mut lower = vec![0.0f64; t];
    let mut upper = vec![0.0f64; t];
    for (pair_idx, (x0, y0)) in pair_list.iter().enumerate() {
        // distances[r][i] = d(X_{i+1}, Y_{i+1}) for replica r.
        let distances = replica_map(replicas, |r| {
            let mut rng = ReplicaRng::with_label(seed, r, 0x3000 + pair_idx as u64);
            let mut x = x0.clone();
            let mut y = y0.clone();
            let mut row = Vec::with_capacity(t);
            for _ in 0..t {
                let (nx, ny) = coupling.joint_step(chain, &x, &y, &mut rng);
                x = nx;
                y = ny;
                row.push(chain.distance(&x, &y) as f64);
            }
            row
        });
        for i in 0..t {
            let col: Vec<f64> = distances.iter().map(|row| row[i]).collect();
            let mean = col.iter().sum::<f64>() / replicas as f64;
            let se = sample_std(&col) / (replicas as f64).sqrt();
            alphas[i] = alphas[i].max(mean);
            lower[i] = lower[i].max(mean - confidence_z * se);
            upper[i] = upper[i].max(mean + confidence_z * se);
        }
    }
    Ok(ContractionProfile {
        alphas,
        scope,
        provenance: Provenance::MonteCarlo {
            replicas,
            confidence_z,
        },
        lower_conf: lower,
        upper_conf: upper,
    })
}

/// Result of a coalescence experiment.
#[derive(Debug, Clone)]
pub struct CoalescenceBound {
    /// Fraction of replicas not coalesced by time `t`: an estimate of an
    /// upper bound on `dtv(δ_{x0} Pᵗ, δ_{y0} Pᵗ)`.
    pub fraction_uncoalesced: f64,
    pub replicas: u64,
    pub standard_error: f64,
}

impl CoalescenceBound {
    /// Upper confidence value at `z` standard errors.
    pub fn upper(&self, z: f64) -> f64 {
        (self.fraction_uncoalesced + z * self.standard_error).min(1.0)
    }
}

/// Empirical coalescence bound: run `replicas` coupled pairs from
/// `(x0, y0)` for `t` steps and report the fraction with `X_t ≠ Y_t`.
/// Coalescence is exact state equality; couplings here keep equal states
/// equal, so detection short-circuits.
pub fn coalescence_tv_bound<C: Chain>(
    chain: &C,
    coupling: &impl Coupling<C>,
    x0: &C::State,
    y0: &C::State,
    t: u64,
    replicas: u64,
    seed: u64,
) -> CoalescenceBound {
    let hits = replica_map(replicas, |r| {
        let mut rng = ReplicaRng::with_label(seed, r, 0xc0a1);
        let mut x = x0.clone();
        let mut y = y0.clone();
        for _ in 0..t {
            if x == y {
                return 0u64;
            }
            let (nx, ny) = coupling.joint_step(chain, &x, &y, &mut rng);
            x = nx;
            y = ny;
        }
        u64::from(x != y)
    });
    let uncoalesced: u64 = hits.iter().sum();
    let fraction = uncoalesced as f64 / replicas as f64;
    CoalescenceBound {
        fraction_uncoalesced: fraction,
        replicas,
        standard_error: binomial_se(fraction, replicas),
    }
}

/// Result of an escape experiment.
#[derive(Debug, Clone)]
pub struct EscapeProbability {
    /// Empirical probability that the trajectory leaves `S₀⁰` by time `t`.
    pub fraction_escaped: f64,
    pub replicas: u64,
    pub standard_error: f64,
}

impl EscapeProbability {
    pub fn upper(&self, z: f64) -> f64 {
        (self.fraction_escaped + z * self.standard_error).min(1.0)
    }
}

/// Empirical probability that the chain started at `x0 ∈ S₀⁰` leaves the
/// interior `S₀⁰` by time `t`; this is the `δ` fed to the conditional
/// stationary bounds.
pub fn escape_probability<C: Chain>(
    chain: &C,
    set: &RestrictedSet<C::State>,
    x0: &C::State,
    t: u64,
    replicas: u64,
    seed: u64,
) -> Result<EscapeProbability> {
    if !set.contains_interior(chain, x0) {
        return Err(Error::OutsideRestrictedSet);
    }
    let cap = crate::chain::step_cap();
    if t > cap {
        return Err(Error::StepCapExceeded { requested: t, cap });
    }
    let escapes = replica_map(replicas, |r| {
        let mut rng = ReplicaRng::with_label(seed, r, 0xe5ca);
        let mut x = x0.clone();
        for _ in 0..t {
            x = chain.step(&x, &mut rng);
            if !set.contains_interior(chain, &x) {
                return 1u64;
            }
        }
        0u64
    });
    let escaped: u64 = escapes.iter().sum();
    let fraction = escaped as f64 / replicas as f64;
    Ok(EscapeProbability {
        fraction_escaped: fraction,
        replicas,
        standard_error: binomial_se(fraction, replicas),
    })
}

/// Entrywise check that both marginals of the coupling's exact joint law
/// equal the chain's one-step rows; returns the worst absolute error.
pub fn validate_marginals_exact<C: RowChain>(
    chain: &C,
    coupling: &impl EnumerableCoupling<C>,
    x: &C::State,
    y: &C::State,
) -> f64 {
    let joint = coupling.joint_row(chain, x, y);
    let mut mx: HashMap<C::State, f64> = HashMap::new();
    let mut my: HashMap<C::State, f64> = HashMap::new();
    for ((nx, ny), p) in joint {
        *mx.entry(nx).or_insert(0.0) += p;
        *my.entry(ny).or_insert(0.0) += p;
    }
    let mut worst: f64 = 0.0;
    for (state, p) in chain.row(x) {
        worst = worst.max((mx.remove(&state).unwrap_or(0.0) - p).abs());
    }
    worst = mx.values().fold(worst, |w, &p| w.max(p.abs()));
    for (state, p) in chain.row(y) {
        worst = worst.max((my.remove(&state).unwrap_or(0.0) - p).abs());
    }
    my.values().fold(worst, |w, &p| w.max(p.abs()))
}

/// Result of a sampled marginal test.
#[derive(Debug, Clone)]
pub struct ChiSquareReport {
    pub statistic: f64,
    pub dof: usize,
    /// Critical value at the 99.9% level (Wilson–Hilferty approximation).
    pub critical: f64,
    pub pass: bool,
}

/// Chi-square goodness-of-fit of a sampled coupling marginal against the
/// exact one-step row from `x` (first component) and `y` (second).
pub fn validate_marginals_chi_square<C: RowChain>(
    chain: &C,
    coupling: &impl Coupling<C>,
    x: &C::State,
    y: &C::State,
    samples: u64,
    seed: u64,
) -> (ChiSquareReport, ChiSquareReport) {
    let mut counts_x: HashMap<C::State, u64> = HashMap::new();
    let mut counts_y: HashMap<C::State, u64> = HashMap::new();
    let mut rng = ReplicaRng::with_label(seed, 0, 0xc215);
    for _ in 0..samples {
        let (nx, ny) = coupling.joint_step(chain, x, y, &mut rng);
        *counts_x.entry(nx).or_insert(0) += 1;
        *counts_y.entry(ny).or_insert(0) += 1;
    }
    (
        chi_square_against(&chain.row(x), &counts_x, samples),
        chi_square_against(&chain.row(y), &counts_y, samples),
    )
}

fn chi_square_against<S: Eq + std::hash::Hash>(
    row: &[(S, f64)],
    counts: &HashMap<S, u64>,
    samples: u64,
) -> ChiSquareReport {
    let mut stat = 0.0;
    let mut seen = 0u64;
    let mut cells = 0usize;
    for (state, p) in row {
        let expected = p * samples as f64;
        if expected <= 0.0 {
            continue;
        }
        let observed = counts.get(state).copied().unwrap_or(0);
        seen += observed;
        stat += (observed as f64 - expected).powi(2) / expected;
        cells += 1;
    }
    // Mass observed outside the exact support is an automatic failure.
    let outside = samples - seen;
    if outside > 0 {
        stat = f64::INFINITY;
    }
    let dof = cells.saturating_sub(1).max(1);
    let critical = chi_square_quantile_999(dof);
    ChiSquareReport {
        statistic: stat,
        dof,
        critical,
        pass: stat <= critical,
    }
}

/// Wilson–Hilferty approximation of the chi-square 0.999 quantile.
fn chi_square_quantile_999(dof: usize) -> f64 {
    let k = dof as f64;
    let z = 3.090_232_306_167_813; // Φ⁻¹(0.999)
    let a = 2.0 / (9.0 * k);
    k * (1.0 - a + z * a.sqrt()).powi(3)
}
