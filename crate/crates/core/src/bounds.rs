//! Concentration tail bounds and their empirical counterparts.
//!
//! Each bound is a map `u ↦ probability` capped at 1 and non-increasing in
//! `u`. Bounds are stated for 1-Lipschitz observables; a constant `L ≠ 1`
//! is handled by evaluating at `u / L`.
//!
//! The closed forms:
//!
//! * azuma-profile:      `2·exp(−u² / (2 Σ_{i≤t} α_i²))`
//! * stationary-profile: deviations `w = 2u`, `2·exp(−u² / (2 Σ_{i≥1} α_i²))`
//! * geometric:          `2·exp(−u² (1−α²) / (2α²))`, needs `0 < α < 1`
//! * bernstein:          `2·exp(−u² / (4v (1 + α̂u/(6v))))`
//! * mcdiarmid-ranges:   `2·exp(−2u² / Σ ran_i²)`
//! * restricted:         stationary-profile truncated at `t₀` plus `2δ`,
//!   valid for `u ≥ δ`; labelled conditional on the `(δ, t₀)` inputs.

use crate::chain::{Chain, Observable};
use crate::coupling::{ContractionProfile, RestrictedSet};
use crate::error::{Error, Result};
use crate::rng::ReplicaRng;
use crate::util::{binomial_se, csv_row, fmt_f64, replica_map, sample_std};
use serde::Serialize;

/// The closed-form family and its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum TailBoundKind {
    AzumaProfile { sum_sq: f64, t: usize },
    StationaryProfile { sum_sq: f64 },
    Geometric { alpha: f64 },
    Bernstein { v: f64, alpha_hat: f64 },
    McDiarmidRanges { sum_sq_ranges: f64 },
    Restricted { sum_sq: f64, t0: usize, delta: f64 },
}

impl TailBoundKind {
    pub fn label(&self) -> &'static str {
        match self {
            TailBoundKind::AzumaProfile { .. } => "azuma-profile",
            TailBoundKind::StationaryProfile { .. } => "stationary-profile",
            TailBoundKind::Geometric { .. } => "geometric",
            TailBoundKind::Bernstein { .. } => "bernstein",
            TailBoundKind::McDiarmidRanges { .. } => "mcdiarmid-ranges",
            TailBoundKind::Restricted { .. } => "restricted",
        }
    }
}

/// A tail bound `u ↦ P(|f − mean| ≥ u) ≤ eval(u)`.
#[derive(Debug, Clone)]
pub struct TailBound {
    pub kind: TailBoundKind,
    /// Declared Lipschitz constant of the observable the bound is read at.
    pub lipschitz: f64,
}

/// `min(1, 2·exp(−u²/(2s)))` with the deterministic `s = 0` limit.
fn gauss_form(u: f64, s: f64) -> f64 {
    if u <= 0.0 {
        return 1.0;
    }
    if s <= 0.0 {
        return 0.0;
    }
    (2.0 * (-u * u / (2.0 * s)).exp()).min(1.0)
}

impl TailBound {
    /// Evaluate the bound at raw deviation `u ≥ 0`.
    pub fn eval(&self, u: f64) -> f64 {
        let u = u / self.lipschitz;
        match self.kind {
            TailBoundKind::AzumaProfile { sum_sq, .. } => gauss_form(u, sum_sq),
            TailBoundKind::StationaryProfile { sum_sq } => gauss_form(u / 2.0, sum_sq),
            TailBoundKind::Geometric { alpha } => {
                let s = alpha * alpha / (1.0 - alpha * alpha);
                gauss_form(u, s)
            }
            TailBoundKind::Bernstein { v, alpha_hat } => {
                if u <= 0.0 {
                    return 1.0;
                }
                (2.0 * (-u * u / (4.0 * v * (1.0 + alpha_hat * u / (6.0 * v)))).exp()).min(1.0)
            }
            TailBoundKind::McDiarmidRanges { sum_sq_ranges } => {
                if u <= 0.0 {
                    return 1.0;
                }
                if sum_sq_ranges <= 0.0 {
                    return 0.0;
                }
                (2.0 * (-2.0 * u * u / sum_sq_ranges).exp()).min(1.0)
            }
            TailBoundKind::Restricted { sum_sq, delta, .. } => {
                let half = u / 2.0;
                if half < delta {
                    return 1.0;
                }
                (gauss_form(half, sum_sq) + 2.0 * delta).min(1.0)
            }
        }
    }

    /// Rescale for an `L`-Lipschitz observable (evaluates at `u / L`).
    pub fn with_lipschitz(mut self, l: f64) -> Self {
        self.lipschitz = l;
        self
    }

    pub fn curve(&self, u_grid: &[f64]) -> Vec<f64> {
        u_grid.iter().map(|&u| self.eval(u)).collect()
    }
}

/// Time-`t` bound from a contraction profile.
pub fn azuma_bound(profile: &ContractionProfile, t: usize) -> Result<TailBound> {
    if profile.len() < t {
        return Err(Error::InvalidArgument(format!(
            "profile of length {} cannot bound time t={t}",
            profile.len()
        )));
    }
    Ok(TailBound {
        kind: TailBoundKind::AzumaProfile {
            sum_sq: profile.sum_sq(t),
            t,
        },
        lipschitz: 1.0,
    })
}

/// Stationary bound from a square-summable profile: the infinite sum is the
/// finite part plus an explicit remainder for the unseen tail.
pub fn stationary_bound(profile: &ContractionProfile, tail_remainder: f64) -> Result<TailBound> {
    if !tail_remainder.is_finite() || tail_remainder < 0.0 {
        return Err(Error::VacuousBound(format!(
            "profile tail remainder {tail_remainder} is not a finite non-negative sum"
        )));
    }
    let sum_sq = profile.sum_sq(profile.len()) + tail_remainder;
    if !sum_sq.is_finite() {
        return Err(Error::VacuousBound("Σ α_i² diverges".into()));
    }
    Ok(TailBound {
        kind: TailBoundKind::StationaryProfile { sum_sq },
        lipschitz: 1.0,
    })
}

/// Stationary bound for a geometric profile `α_i = αⁱ`, where
/// `Σ α_i² = α²/(1−α²)` in closed form.
pub fn stationary_bound_geometric(alpha: f64) -> Result<TailBound> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::VacuousBound(format!(
            "geometric profile needs 0 ≤ α < 1, got {alpha}"
        )));
    }
    let sum_sq = alpha * alpha / (1.0 - alpha * alpha);
    Ok(TailBound {
        kind: TailBoundKind::StationaryProfile { sum_sq },
        lipschitz: 1.0,
    })
}

/// One-step-contraction bound, the same curve at any time `t` and in
/// equilibrium.
pub fn geometric_bound(alpha: f64) -> Result<TailBound> {
    if alpha <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "contraction constant must be positive, got {alpha}"
        )));
    }
    if alpha >= 1.0 {
        return Err(Error::VacuousBound(format!(
            "one-step contraction α = {alpha} ≥ 1: no contraction"
        )));
    }
    Ok(TailBound {
        kind: TailBoundKind::Geometric { alpha },
        lipschitz: 1.0,
    })
}

/// Variance/deviation (Bernstein-style) bound from the conditional-variance
/// proxy `v` and the maximum conditional deviation proxy `α̂`.
pub fn bernstein_bound(v: f64, alpha_hat: f64) -> Result<TailBound> {
    if v <= 0.0 || !v.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "variance proxy must be positive, got {v}"
        )));
    }
    if alpha_hat < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "deviation proxy must be non-negative, got {alpha_hat}"
        )));
    }
    Ok(TailBound {
        kind: TailBoundKind::Bernstein { v, alpha_hat },
        lipschitz: 1.0,
    })
}

/// Bounded-differences bound from per-step conditional ranges.
pub fn mcdiarmid_range_bound(ranges: &[f64]) -> Result<TailBound> {
    if ranges.is_empty() {
        return Err(Error::InvalidArgument("empty range sequence".into()));
    }
    if ranges.iter().any(|&r| r < 0.0 || !r.is_finite()) {
        return Err(Error::InvalidArgument(
            "conditional ranges must be finite and non-negative".into(),
        ));
    }
    Ok(TailBound {
        kind: TailBoundKind::McDiarmidRanges {
            sum_sq_ranges: ranges.iter().map(|r| r * r).sum(),
        },
        lipschitz: 1.0,
    })
}

/// Stationary bound conditional on `(δ, t₀)` inputs: the profile truncated
/// at `t₀` plus the escape mass `2δ`, valid for deviations `≥ δ`.
pub fn restricted_stationary_bound(
    profile: &ContractionProfile,
    t0: usize,
    delta: f64,
) -> Result<TailBound> {
    if profile.len() < t0 {
        return Err(Error::InvalidArgument(format!(
            "profile of length {} cannot be truncated at t0={t0}",
            profile.len()
        )));
    }
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::InvalidArgument(format!(
            "escape probability must lie in [0,1], got {delta}"
        )));
    }
    Ok(TailBound {
        kind: TailBoundKind::Restricted {
            sum_sq: profile.sum_sq(t0),
            t0,
            delta,
        },
        lipschitz: 1.0,
    })
}

/// Monte Carlo exceedance frequencies of a Lipschitz observable at time `t`.
#[derive(Debug, Clone)]
pub struct EmpiricalTail {
    pub u_grid: Vec<f64>,
    /// `P̂(|f(X_t) − center| ≥ u)` per grid point.
    pub exceed_freq: Vec<f64>,
    /// Frequencies of the intersection with staying in `S₀⁰` up to `t`
    /// (present only when a restricted set was supplied).
    pub exceed_freq_intersected: Option<Vec<f64>>,
    /// Fraction of replicas that left `S₀⁰` (when a set was supplied).
    pub escape_fraction: Option<f64>,
    pub replicas: u64,
    /// Empirical mean of `f(X_t)`, the centering surrogate for `E f(X_t)`.
    pub center: f64,
    /// Standard error of the centering surrogate.
    pub center_se: f64,
    pub t: u64,
}

impl EmpiricalTail {
    /// A copy whose raw frequencies are replaced by the intersected ones.
    pub fn intersected(&self) -> Option<EmpiricalTail> {
        self.exceed_freq_intersected.as_ref().map(|f| {
            let mut t = self.clone();
            t.exceed_freq = f.clone();
            t
        })
    }
}

/// Estimate the tail of `|f(X_t) − mean|` from `replicas` seeded runs.
///
/// With a restricted set, the report additionally carries the frequencies of
/// the intersection event (deviation and never leaving `S₀⁰`) and the escape
/// fraction; the start must lie in `S₀⁰`.
#[allow(clippy::too_many_arguments)]
pub fn empirical_tail<C: Chain>(
    chain: &C,
    obs: &Observable<C::State>,
    x0: &C::State,
    t: u64,
    u_grid: &[f64],
    replicas: u64,
    seed: u64,
    set: Option<&RestrictedSet<C::State>>,
) -> Result<EmpiricalTail> {
    if replicas < 100 {
        return Err(Error::InsufficientSamples {
            got: replicas as usize,
            needed: 100,
            context: "empirical tail estimation".into(),
        });
    }
    let cap = crate::chain::step_cap();
    if t > cap {
        return Err(Error::StepCapExceeded { requested: t, cap });
    }
    if u_grid.is_empty() || u_grid.windows(2).any(|w| w[0] >= w[1]) || u_grid[0] < 0.0 {
        return Err(Error::InvalidArgument(
            "u grid must be increasing and non-negative".into(),
        ));
    }
    if let Some(s) = set {
        if !s.contains_interior(chain, x0) {
            return Err(Error::OutsideRestrictedSet);
        }
    }

    // (f(X_t), stayed-in-interior) per replica.
    let outcomes: Vec<(f64, bool)> = replica_map(replicas, |r| {
        let mut rng = ReplicaRng::new(seed, r);
        let mut x = x0.clone();
        let mut stayed = true;
        for _ in 0..t {
            x = chain.step(&x, &mut rng);
            if stayed {
                if let Some(s) = set {
                    stayed = s.contains_interior(chain, &x);
                }
            }
        }
        (obs.eval(&x), stayed)
    });

    let values: Vec<f64> = outcomes.iter().map(|&(v, _)| v).collect();
    let center = values.iter().sum::<f64>() / replicas as f64;
    let center_se = sample_std(&values) / (replicas as f64).sqrt();

    let freq_at = |u: f64, restricted: bool| -> f64 {
        let count = outcomes
            .iter()
            .filter(|&&(v, stayed)| (v - center).abs() >= u && (!restricted || stayed))
            .count();
        count as f64 / replicas as f64
    };
    let exceed_freq: Vec<f64> = u_grid.iter().map(|&u| freq_at(u, false)).collect();
    let (exceed_freq_intersected, escape_fraction) = if set.is_some() {
        let escaped = outcomes.iter().filter(|&&(_, stayed)| !stayed).count();
        (
            Some(u_grid.iter().map(|&u| freq_at(u, true)).collect()),
            Some(escaped as f64 / replicas as f64),
        )
    } else {
        (None, None)
    };

    Ok(EmpiricalTail {
        u_grid: u_grid.to_vec(),
        exceed_freq,
        exceed_freq_intersected,
        escape_fraction,
        replicas,
        center,
        center_se,
        t,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Consistent,
    Inconsistent,
}

#[derive(Debug, Clone, Serialize)]
pub struct TailComparisonRow {
    pub u: f64,
    pub bound: f64,
    pub freq: f64,
    pub se: f64,
    pub margin: f64,
}

/// Pointwise comparison of an empirical tail against a bound. The verdict is
/// `Consistent` iff `freq ≤ bound + 3·SE` at every grid point; consistency
/// never claims tightness.
#[derive(Debug, Clone, Serialize)]
pub struct TailComparison {
    pub bound_kind: String,
    pub verdict: Verdict,
    pub worst_margin: f64,
    pub rows: Vec<TailComparisonRow>,
}

pub fn compare(tail: &EmpiricalTail, bound: &TailBound) -> TailComparison {
    let mut rows = Vec::with_capacity(tail.u_grid.len());
    let mut verdict = Verdict::Consistent;
    let mut worst_margin = f64::INFINITY;
    for (&u, &freq) in tail.u_grid.iter().zip(&tail.exceed_freq) {
        let b = bound.eval(u);
        let se = binomial_se(freq, tail.replicas);
        let margin = b - freq;
        worst_margin = worst_margin.min(margin);
        if freq > b + 3.0 * se {
            verdict = Verdict::Inconsistent;
        }
        rows.push(TailComparisonRow {
            u,
            bound: b,
            freq,
            se,
            margin,
        });
    }
    TailComparison {
        bound_kind: bound.kind.label().to_string(),
        verdict,
        worst_margin,
        rows,
    }
}

impl TailComparison {
    /// CSV table: `u,bound,freq,se,margin`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("u,bound,freq,se,margin\n");
        for r in &self.rows {
            out.push_str(&csv_row(&[
                fmt_f64(r.u),
                fmt_f64(r.bound),
                fmt_f64(r.freq),
                fmt_f64(r.se),
                fmt_f64(r.margin),
            ]));
        }
        out
    }

    /// The JSON verdict document.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
