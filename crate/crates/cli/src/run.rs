//! Experiment dispatch: validates the (model, experiment) pairing, runs the
//! owning module, and emits CSV tables plus the JSON run report.

use crate::config::{
    BoundConfig, Experiment, ExperimentConfig, ModelConfig, ObservableConfig, ProfileMode,
    UGridConfig,
};
use crate::report::{OutputDir, RunReport, RunVerdict, ToolInfo};
use anyhow::{anyhow, bail, Context, Result};
use mixlab_core::bounds::{
    self, compare, empirical_tail, EmpiricalTail, TailBound, Verdict,
};
use mixlab_core::chain::{Chain, Observable};
use mixlab_core::coupling::{
    contraction_profile_exact, contraction_profile_mc, geometric_alpha, AdjacentPairs,
    ContractionProfile, Coupling, ProfileScope, RestrictedSet,
};
use mixlab_core::exact::Kernel;
use mixlab_core::models::fluid;
use mixlab_core::models::ising::{
    self, cutoff_scan, cutoff_time, IsingChain, IsingState, SynchronousCoupling,
};
use mixlab_core::models::linext::{self, LinextChain};
use mixlab_core::models::supermarket::{
    self, MonotoneCoupling, SupermarketChain,
};
use mixlab_core::rng::ReplicaRng;
use mixlab_core::util::{csv_row, fmt_f64};
use serde_json::json;
use std::path::Path;
use std::time::Instant;

/// Largest Ising system enumerated exactly (2ⁿ states with a dense metric).
const MAX_ISING_ENUMERATION: usize = 12;

/// Run one experiment; `Ok(verdict)` maps to the process exit code.
pub fn run(config: &ExperimentConfig, out_dir: &Path) -> Result<Option<RunVerdict>> {
    let start = Instant::now();
    let mut out = OutputDir::create(out_dir)?;
    let (verdict, summary) = match config.experiment {
        Experiment::Mix => run_mix(config, &mut out)?,
        Experiment::Conc => run_conc(config, &mut out)?,
        Experiment::Profile => run_profile(config, &mut out)?,
        Experiment::Ode => run_ode(config, &mut out)?,
        Experiment::Maxq => run_maxq(config, &mut out)?,
        Experiment::Chaos => run_chaos(config, &mut out)?,
        Experiment::Cutoff => run_cutoff(config, &mut out)?,
    };
    let report = RunReport {
        tool: ToolInfo {
            name: "mixlab",
            version: env!("CARGO_PKG_VERSION"),
        },
        experiment: config.experiment.label(),
        config: config.clone(),
        seed: config.seed,
        verdict,
        summary,
        artifacts: Vec::new(),
        wall_clock_secs: start.elapsed().as_secs_f64(),
    };
    out.finish(report)?;
    Ok(verdict)
}

/// Build the dense kernel for enumerable models; refuse unbounded ones.
fn enumerated_kernel(model: &ModelConfig) -> Result<Kernel> {
    match model {
        ModelConfig::Ising { n, beta } => {
            if *n > MAX_ISING_ENUMERATION {
                bail!(
                    "exact analysis enumerates 2^n configurations; n = {n} exceeds the \
                     cap of {MAX_ISING_ENUMERATION}"
                );
            }
            let chain = IsingChain::new(*n, *beta)?;
            Ok(Kernel::from_chain(&chain)?.kernel)
        }
        ModelConfig::Linext { n } => {
            let chain = LinextChain::new(*n)?;
            Ok(Kernel::from_chain(&chain)?.kernel)
        }
        ModelConfig::KernelFile { path } => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading kernel file {path}"))?;
            Ok(Kernel::from_json_str(&text)?)
        }
        ModelConfig::Supermarket { .. } => bail!(
            "the supermarket state space is unbounded and its worst-case distance to \
             stationarity is unbounded too; exact mixing analysis is refused for this model"
        ),
    }
}

fn run_mix(config: &ExperimentConfig, out: &mut OutputDir) -> Result<(Option<RunVerdict>, serde_json::Value)> {
    let kernel = enumerated_kernel(&config.model)?;
    let eps = config.params.eps.unwrap_or(0.25);
    let t_cap = config.params.t_max.unwrap_or(10_000);
    let (curve, crossing) = kernel.mixing_curve(eps, t_cap)?;
    let mut csv = String::from("t,d_t\n");
    for (t, &d) in curve.iter().enumerate() {
        csv.push_str(&csv_row(&[t.to_string(), fmt_f64(d)]));
    }
    out.write_csv("distance_curve.csv", &csv)?;
    let summary = json!({
        "n_states": kernel.n_states(),
        "eps": eps,
        "t_cap": t_cap,
        "t_mix": crossing,
        "reached_cap": crossing.is_none(),
        "distance_at_end": curve.last(),
    });
    Ok((None, summary))
}

fn parse_bound(
    bound: &BoundConfig,
    model: &ModelConfig,
    lipschitz: f64,
    horizon: u64,
) -> Result<(TailBound, serde_json::Value)> {
    let (bound, params) = match bound {
        BoundConfig::Geometric { alpha } => (
            bounds::geometric_bound(*alpha)?,
            json!({"alpha": alpha}),
        ),
        BoundConfig::GeometricFitIsing { fit_ns } => {
            let ModelConfig::Ising { n, beta } = model else {
                bail!("geometric_fit_ising bounds require the ising model");
            };
            if fit_ns.is_empty() {
                bail!("fit_ns must not be empty");
            }
            let mut c1 = 0.0;
            for &np in fit_ns {
                if np > MAX_ISING_ENUMERATION {
                    bail!("fit size {np} exceeds the enumeration cap");
                }
                let kernel = Kernel::from_chain(&IsingChain::new(np, *beta)?)?.kernel;
                c1 += np as f64 * (1.0 - geometric_alpha(&kernel)?);
            }
            c1 /= fit_ns.len() as f64;
            let alpha_hat = 1.0 - c1 / *n as f64;
            (
                bounds::geometric_bound(alpha_hat)?,
                json!({"fit_ns": fit_ns, "c1": c1, "alpha_hat": alpha_hat}),
            )
        }
        BoundConfig::Azuma { alphas } => {
            if (alphas.len() as u64) < horizon {
                bail!(
                    "an azuma bound at time t = {horizon} needs a profile of at least \
                     that length; {} alphas were supplied",
                    alphas.len()
                );
            }
            let profile = ContractionProfile::exact(alphas.clone());
            (
                bounds::azuma_bound(&profile, horizon as usize)?,
                json!({"alphas": alphas}),
            )
        }
        BoundConfig::StationaryGeometric { alpha } => (
            bounds::stationary_bound_geometric(*alpha)?,
            json!({"alpha": alpha}),
        ),
        BoundConfig::Bernstein { v, alpha_hat } => (
            bounds::bernstein_bound(*v, *alpha_hat)?,
            json!({"v": v, "alpha_hat": alpha_hat}),
        ),
        BoundConfig::Mcdiarmid { ranges } => (
            bounds::mcdiarmid_range_bound(ranges)?,
            json!({"ranges": ranges}),
        ),
    };
    Ok((bound.with_lipschitz(lipschitz), params))
}

fn default_horizon(n: usize) -> u64 {
    (10.0 * n as f64 * (n as f64).ln()).round() as u64
}

fn default_grid(n: usize) -> Vec<f64> {
    let max = 3.0 * (n as f64).sqrt();
    (1..=20).map(|j| j as f64 * max / 20.0).collect()
}

struct ConcSetup<'a, C: Chain> {
    chain: &'a C,
    observable: Observable<C::State>,
    x0: C::State,
    set: Option<RestrictedSet<C::State>>,
}

fn conc_over<C: Chain>(
    setup: ConcSetup<'_, C>,
    config: &ExperimentConfig,
    t: u64,
    grid: &[f64],
    out: &mut OutputDir,
) -> Result<(Option<RunVerdict>, serde_json::Value)> {
    let bound_cfg = config
        .params
        .bound
        .as_ref()
        .ok_or_else(|| anyhow!("conc requires params.bound"))?;
    let (bound, bound_params) = parse_bound(
        bound_cfg,
        &config.model,
        setup.observable.lipschitz_constant,
        t,
    )?;
    let tail: EmpiricalTail = empirical_tail(
        setup.chain,
        &setup.observable,
        &setup.x0,
        t,
        grid,
        config.replicas,
        config.seed,
        setup.set.as_ref(),
    )?;
    let comparison = compare(&tail, &bound);
    out.write_csv("tail_comparison.csv", &comparison.to_csv())?;
    if let Some(intersected) = tail.intersected() {
        let cmp_restricted = compare(&intersected, &bound);
        out.write_csv("tail_comparison_restricted.csv", &cmp_restricted.to_csv())?;
    }
    let verdict = match comparison.verdict {
        Verdict::Consistent => RunVerdict::Consistent,
        Verdict::Inconsistent => RunVerdict::Inconsistent,
    };
    let summary = json!({
        "observable": setup.observable.name,
        "lipschitz_constant": setup.observable.lipschitz_constant,
        "t": t,
        "replicas": tail.replicas,
        "center": tail.center,
        "center_se": tail.center_se,
        "escape_fraction": tail.escape_fraction,
        "bound_kind": comparison.bound_kind,
        "bound_params": bound_params,
        "worst_margin": comparison.worst_margin,
    });
    Ok((Some(verdict), summary))
}

fn run_conc(config: &ExperimentConfig, out: &mut OutputDir) -> Result<(Option<RunVerdict>, serde_json::Value)> {
    let obs_cfg = config
        .params
        .observable
        .as_ref()
        .ok_or_else(|| anyhow!("conc requires params.observable"))?;
    match &config.model {
        ModelConfig::Ising { n, beta } => {
            if config.params.restricted_c.is_some() {
                bail!("restricted_c applies to the supermarket model only");
            }
            let chain = IsingChain::new(*n, *beta)?;
            let observable = match obs_cfg {
                ObservableConfig::HalfMagnetization => ising::half_magnetization_observable(),
                ObservableConfig::Magnetization => ising::magnetization_observable(),
                other => bail!("observable {other:?} is not defined for the ising model"),
            };
            let t = config.params.t.unwrap_or_else(|| default_horizon(*n));
            let grid = config
                .params
                .u_grid
                .as_ref()
                .map(UGridConfig::to_grid)
                .unwrap_or_else(|| default_grid(*n));
            conc_over(
                ConcSetup {
                    chain: &chain,
                    observable,
                    x0: IsingState::all_plus(*n),
                    set: None,
                },
                config,
                t,
                &grid,
                out,
            )
        }
        ModelConfig::Supermarket { n, lambda, d } => {
            let chain = SupermarketChain::new(*n, *lambda, *d)?;
            let observable = match obs_cfg {
                ObservableConfig::TotalCustomers => supermarket::total_customers_observable(),
                ObservableConfig::MaxQueue => supermarket::max_queue_observable(),
                ObservableConfig::QueuesAtLeast { k } => {
                    supermarket::queues_at_least_observable(*k)
                }
                other => bail!("observable {other:?} is not defined for the supermarket model"),
            };
            let t = config.params.t.unwrap_or_else(|| default_horizon(*n));
            let grid = config
                .params
                .u_grid
                .as_ref()
                .map(UGridConfig::to_grid)
                .unwrap_or_else(|| default_grid(*n));
            let set = config
                .params
                .restricted_c
                .map(|c| supermarket::norm_restricted_set(*n, c));
            conc_over(
                ConcSetup {
                    chain: &chain,
                    observable,
                    x0: chain.empty_state(),
                    set,
                },
                config,
                t,
                &grid,
                out,
            )
        }
        ModelConfig::Linext { n } => {
            if config.params.restricted_c.is_some() {
                bail!("restricted_c applies to the supermarket model only");
            }
            let chain = LinextChain::new(*n)?;
            let observable = match obs_cfg {
                ObservableConfig::Position => linext::position_observable(),
                other => bail!("observable {other:?} is not defined for the linext model"),
            };
            let t = config.params.t.unwrap_or_else(|| default_horizon(*n));
            let grid = config
                .params
                .u_grid
                .as_ref()
                .map(UGridConfig::to_grid)
                .unwrap_or_else(|| default_grid(*n));
            conc_over(
                ConcSetup {
                    chain: &chain,
                    observable,
                    x0: (*n as u32).div_ceil(2),
                    set: None,
                },
                config,
                t,
                &grid,
                out,
            )
        }
        ModelConfig::KernelFile { .. } => {
            bail!("conc needs a model observable; kernel files support mix and profile")
        }
    }
}

fn emit_profile(
    profile: &ContractionProfile,
    out: &mut OutputDir,
) -> Result<(Option<RunVerdict>, serde_json::Value)> {
    out.write_csv("contraction_profile.csv", &profile.to_csv())?;
    let summary = json!({
        "provenance": profile.provenance.label(),
        "alpha_1": profile.alphas.first(),
        "alpha_last": profile.alphas.last(),
        "length": profile.len(),
    });
    Ok((None, summary))
}

fn mc_profile<C: Chain>(
    chain: &C,
    coupling: &impl Coupling<C>,
    pairs: AdjacentPairs<C>,
    config: &ExperimentConfig,
    t_max: usize,
    scope: ProfileScope,
) -> Result<ContractionProfile> {
    Ok(contraction_profile_mc(
        chain,
        coupling,
        pairs,
        t_max,
        config.replicas,
        2.576, // 99% normal band
        config.seed,
        scope,
    )?)
}

fn run_profile(config: &ExperimentConfig, out: &mut OutputDir) -> Result<(Option<RunVerdict>, serde_json::Value)> {
    let mode = config.params.mode.unwrap_or(ProfileMode::Exact);
    let t_max = config.params.t_max.unwrap_or(20) as usize;
    match mode {
        ProfileMode::Exact => {
            let kernel = enumerated_kernel(&config.model)?;
            let profile = contraction_profile_exact(&kernel, t_max)?;
            emit_profile(&profile, out)
        }
        ProfileMode::Mc => {
            let pairs = config.params.pairs.unwrap_or(10);
            match &config.model {
                ModelConfig::Ising { n, beta } => {
                    let chain = IsingChain::new(*n, *beta)?;
                    let n_sites = *n;
                    let sampler = move |rng: &mut ReplicaRng| {
                        IsingState::new(
                            (0..n_sites)
                                .map(|_| if rng.uniform() < 0.5 { 1i8 } else { -1 })
                                .collect(),
                        )
                    };
                    let profile = mc_profile(
                        &chain,
                        &SynchronousCoupling,
                        AdjacentPairs::Sampled {
                            n_pairs: pairs,
                            sample_start: &sampler,
                        },
                        config,
                        t_max,
                        ProfileScope::Global,
                    )?;
                    emit_profile(&profile, out)
                }
                ModelConfig::Supermarket { n, lambda, d } => {
                    let chain = SupermarketChain::new(*n, *lambda, *d)?;
                    // Start pairs from short burn-ins of the empty state:
                    // the restricted-scope profile covers the good region.
                    let seed = config.seed;
                    let sampler_chain = chain.clone();
                    let sampler = move |rng: &mut ReplicaRng| {
                        let mut x = sampler_chain.empty_state();
                        let warm = 4 * sampler_chain.n() as u64;
                        let mut warm_rng =
                            ReplicaRng::with_label(seed, rng.next_u64(), 0x7a11);
                        for _ in 0..warm {
                            x = sampler_chain.step(&x, &mut warm_rng);
                        }
                        x
                    };
                    let profile = mc_profile(
                        &chain,
                        &MonotoneCoupling,
                        AdjacentPairs::Sampled {
                            n_pairs: pairs,
                            sample_start: &sampler,
                        },
                        config,
                        t_max,
                        ProfileScope::RestrictedToS0,
                    )?;
                    emit_profile(&profile, out)
                }
                other => bail!(
                    "Monte Carlo profiles are defined for ising and supermarket models, \
                     not {}",
                    other.label()
                ),
            }
        }
    }
}

fn run_ode(config: &ExperimentConfig, out: &mut OutputDir) -> Result<(Option<RunVerdict>, serde_json::Value)> {
    let ModelConfig::Supermarket { lambda, d, .. } = &config.model else {
        bail!("the fluid ODE belongs to the supermarket model");
    };
    let d = u32::try_from(*d).expect("validated d");
    let k_max = config
        .params
        .k_max
        .unwrap_or_else(|| fluid::default_k_max(*lambda, d));
    let t_end = config
        .params
        .t_end
        .unwrap_or(if d == 1 { 6000.0 } else { 500.0 });
    let dt = config.params.dt.unwrap_or(0.05);
    let result = fluid::integrate(*lambda, d, &fluid::FluidProfile::all_empty(k_max), t_end, dt)?;
    let mut csv = String::from("k,v,fixed_point\n");
    let mut worst_gap = 0.0f64;
    for (k, &v) in result.v.iter().enumerate() {
        let fp = fluid::tail_fixed_point(*lambda, d, k);
        worst_gap = worst_gap.max((v - fp).abs());
        csv.push_str(&csv_row(&[k.to_string(), fmt_f64(v), fmt_f64(fp)]));
    }
    out.write_csv("fluid_profile.csv", &csv)?;
    let summary = json!({
        "lambda": lambda,
        "d": d,
        "k_max": k_max,
        "t_end": t_end,
        "dt": dt,
        "worst_gap_to_fixed_point": worst_gap,
    });
    Ok((None, summary))
}

fn burn_in_of(config: &ExperimentConfig, n: usize) -> Result<u64> {
    let burn_in = match config.params.burn_in_factor {
        Some(f) => (f * n as f64 * (n as f64).ln()).ceil() as u64,
        None => supermarket::default_burn_in(n),
    };
    let cap = mixlab_core::chain::step_cap();
    if burn_in > cap {
        bail!(
            "burn-in of {burn_in} steps exceeds the step cap {cap} \
             (override with MIXLAB_CAP_STEPS)"
        );
    }
    Ok(burn_in)
}

fn run_maxq(config: &ExperimentConfig, out: &mut OutputDir) -> Result<(Option<RunVerdict>, serde_json::Value)> {
    let ModelConfig::Supermarket { n, lambda, d } = &config.model else {
        bail!("maxq is a supermarket experiment");
    };
    let chain = SupermarketChain::new(*n, *lambda, *d)?;
    if *d < 2 {
        bail!("two-point max-queue concentration needs d ≥ 2");
    }
    let burn_in = burn_in_of(config, *n)?;
    let samples = supermarket::max_queue_samples(&chain, burn_in, config.replicas, config.seed);
    let report = supermarket::max_queue_report(&chain, &samples)?;
    let mut csv = String::from("max_queue,count\n");
    for &(v, c) in &report.histogram {
        csv.push_str(&csv_row(&[v.to_string(), c.to_string()]));
    }
    out.write_csv("max_queue_histogram.csv", &csv)?;
    let consistent = report.top_two_adjacent && report.top_two_mass >= 0.9;
    let summary = json!({
        "burn_in": burn_in,
        "samples": config.replicas,
        "top_two": report.top_two,
        "top_two_adjacent": report.top_two_adjacent,
        "top_two_mass": report.top_two_mass,
        "md_predictor": report.md_predictor,
    });
    Ok((
        Some(if consistent {
            RunVerdict::Consistent
        } else {
            RunVerdict::Inconsistent
        }),
        summary,
    ))
}

fn run_chaos(config: &ExperimentConfig, out: &mut OutputDir) -> Result<(Option<RunVerdict>, serde_json::Value)> {
    let ModelConfig::Supermarket { n, lambda, d } = &config.model else {
        bail!("chaos is a supermarket experiment");
    };
    let chain = SupermarketChain::new(*n, *lambda, *d)?;
    let k_max = config.params.truncate_at.unwrap_or(6);
    let samples = config.params.samples.unwrap_or(20_000);
    let spacing = config.params.spacing.unwrap_or(2 * *n as u64);
    let bootstrap = config.params.bootstrap.unwrap_or(100);
    let burn_in = burn_in_of(config, *n)?;
    let report = supermarket::chaoticity_estimate(
        &chain,
        burn_in,
        samples,
        spacing,
        k_max,
        bootstrap,
        config.seed,
    )?;
    let mut csv = String::from("pair_r,k_max,tv,bootstrap_se,null_tv,samples\n");
    csv.push_str(&csv_row(&[
        "2".into(),
        k_max.to_string(),
        fmt_f64(report.tv),
        fmt_f64(report.bootstrap_se),
        fmt_f64(report.null_tv),
        report.samples.to_string(),
    ]));
    out.write_csv("chaoticity.csv", &csv)?;
    let summary = json!({
        "burn_in": burn_in,
        "spacing": spacing,
        "k_max": k_max,
        "tv": report.tv,
        "bootstrap_se": report.bootstrap_se,
        "null_tv": report.null_tv,
        "samples": report.samples,
    });
    Ok((None, summary))
}

fn run_cutoff(config: &ExperimentConfig, out: &mut OutputDir) -> Result<(Option<RunVerdict>, serde_json::Value)> {
    let ModelConfig::Ising { n, beta } = &config.model else {
        bail!("the cut-off scan is an ising experiment");
    };
    let gammas = config
        .params
        .gammas
        .clone()
        .unwrap_or_else(|| (-4..=4).map(f64::from).collect());
    let points = cutoff_scan(*n, *beta, &gammas, config.replicas, config.seed)?;
    let mut csv = String::from(
        "gamma,t,tv_lower,tv_magnetization_exact,coalescence_upper,coalescence_se\n",
    );
    for p in &points {
        csv.push_str(&csv_row(&[
            fmt_f64(p.gamma),
            p.t.to_string(),
            fmt_f64(p.tv_lower),
            fmt_f64(p.tv_magnetization_exact),
            fmt_f64(p.coalescence_upper),
            fmt_f64(p.coalescence_se),
        ]));
    }
    out.write_csv("cutoff_curve.csv", &csv)?;
    let summary = json!({
        "t_n": cutoff_time(*n, *beta),
        "gammas": gammas,
        "replicas": config.replicas,
        "first_point": {"gamma": points.first().map(|p| p.gamma), "tv_lower": points.first().map(|p| p.tv_lower)},
        "last_point": {"gamma": points.last().map(|p| p.gamma), "coalescence_upper": points.last().map(|p| p.coalescence_upper)},
    });
    Ok((None, summary))
}
