//! The experiment configuration schema. Unknown keys are rejected
//! everywhere so that typos fail loudly instead of silently running the
//! default.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub experiment: Experiment,
    /// Master seed; every replica stream derives from it.
    #[serde(default)]
    pub seed: u64,
    /// Replica / sample count for Monte Carlo experiments.
    #[serde(default = "default_replicas")]
    pub replicas: u64,
    /// Output directory (CLI --out overrides).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
    /// Experiment-specific parameters.
    #[serde(default)]
    pub params: Params,
}

fn default_replicas() -> u64 {
    1000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    Ising { n: usize, beta: f64 },
    Supermarket { n: usize, lambda: f64, d: usize },
    Linext { n: usize },
    KernelFile { path: String },
}

impl ModelConfig {
    pub fn label(&self) -> &'static str {
        match self {
            ModelConfig::Ising { .. } => "ising",
            ModelConfig::Supermarket { .. } => "supermarket",
            ModelConfig::Linext { .. } => "linext",
            ModelConfig::KernelFile { .. } => "kernel_file",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Mix,
    Conc,
    Profile,
    Ode,
    Maxq,
    Chaos,
    Cutoff,
}

impl Experiment {
    pub fn label(&self) -> &'static str {
        match self {
            Experiment::Mix => "mix",
            Experiment::Conc => "conc",
            Experiment::Profile => "profile",
            Experiment::Ode => "ode",
            Experiment::Maxq => "maxq",
            Experiment::Chaos => "chaos",
            Experiment::Cutoff => "cutoff",
        }
    }
}

/// Union of per-experiment parameters; each experiment reads its own
/// fields and rejects configs that set fields belonging to another one.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    // mix
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<u64>,

    // conc
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observable: Option<ObservableConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_grid: Option<UGridConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<BoundConfig>,
    /// Restrict to S₀ = {‖x‖₁ ≤ cn, ‖x‖∞ ≤ c ln n} (supermarket only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restricted_c: Option<f64>,

    // profile
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<ProfileMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs: Option<usize>,

    // ode
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,

    // maxq / chaos
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in_factor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacing: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncate_at: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bootstrap: Option<usize>,

    // cutoff
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gammas: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservableConfig {
    /// Ising: `m(σ)/2` (1-Lipschitz).
    HalfMagnetization,
    /// Ising: `m(σ)` (2-Lipschitz).
    Magnetization,
    /// Supermarket: `‖x‖₁` (1-Lipschitz).
    TotalCustomers,
    /// Supermarket: `‖x‖∞` (1-Lipschitz).
    MaxQueue,
    /// Supermarket: `ℓ(k, x)` (1-Lipschitz).
    QueuesAtLeast { k: u32 },
    /// Linext: the slot of the free element (1-Lipschitz).
    Position,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum UGridConfig {
    /// Evenly spaced: `max/points, 2·max/points, …, max`.
    Even { max: f64, points: usize },
    /// Explicit increasing grid.
    List { list: Vec<f64> },
}

impl UGridConfig {
    pub fn to_grid(&self) -> Vec<f64> {
        match self {
            UGridConfig::Even { max, points } => (1..=*points)
                .map(|j| j as f64 * max / *points as f64)
                .collect(),
            UGridConfig::List { list } => list.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundConfig {
    /// One-step contraction bound with an explicit constant.
    Geometric { alpha: f64 },
    /// Fit `α̂₁ = 1 − c₁/n` from exact one-step contraction at small sizes
    /// (Ising only).
    GeometricFitIsing {
        #[serde(default = "default_fit_ns")]
        fit_ns: Vec<usize>,
    },
    /// Time-t profile bound with explicit `α_1..α_t`.
    Azuma { alphas: Vec<f64> },
    /// Stationary bound for a geometric profile.
    StationaryGeometric { alpha: f64 },
    /// Variance/deviation form.
    Bernstein { v: f64, alpha_hat: f64 },
    /// Bounded-differences form with explicit conditional ranges.
    Mcdiarmid { ranges: Vec<f64> },
}

fn default_fit_ns() -> Vec<usize> {
    vec![4, 5, 6]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileMode {
    Exact,
    Mc,
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}
