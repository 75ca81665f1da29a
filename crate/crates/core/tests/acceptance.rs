//! Acceptance suite: every release gate runs here, one test per criterion,
//! each printing a PASS/FAIL line (visible with `--nocapture`).
//!
//! Budgets are generous on commodity hardware; each criterion asserts its
//! own wall-clock ceiling so that regressions in the hot paths surface as
//! failures rather than silent slowdowns.

mod common;

use common::{brute_force_transport, random_dist, random_metric};
use mixlab_core::bounds::{
    azuma_bound, compare, empirical_tail, geometric_bound, mcdiarmid_range_bound, Verdict,
};
use mixlab_core::coupling::{geometric_alpha, ContractionProfile};
use mixlab_core::exact::{wasserstein, Dist, Kernel};
use mixlab_core::models::fluid::{
    default_k_max, integrate, tail_fixed_point, FluidProfile,
};
use mixlab_core::models::ising::{
    cutoff_scan, gibbs_exact, half_magnetization_observable, IsingChain, IsingState,
};
use mixlab_core::models::linext::{stationary_position_moments, LinextChain};
use mixlab_core::models::supermarket::{
    default_burn_in, equilibrium_profile, max_queue_report, max_queue_samples, CoupledPair,
    SupermarketChain,
};
use mixlab_core::rng::ReplicaRng;
use std::time::{Duration, Instant};

fn criterion(id: u32, name: &str, budget: Duration, check: impl FnOnce() -> Result<String, String>) {
    let start = Instant::now();
    let outcome = check();
    let elapsed = start.elapsed();
    match outcome {
        Ok(details) => {
            println!("ACCEPTANCE {id} ({name}): PASS — {details} [{elapsed:.2?}]");
            assert!(
                elapsed <= budget,
                "criterion {id} exceeded its {budget:?} budget: {elapsed:?}"
            );
        }
        Err(msg) => {
            println!("ACCEPTANCE {id} ({name}): FAIL — {msg} [{elapsed:.2?}]");
            panic!("acceptance criterion {id} failed: {msg}");
        }
    }
}

#[test]
fn acceptance_01_wasserstein_oracle_equivalence() {
    criterion(1, "wasserstein-oracle", Duration::from_secs(10), || {
        let mut rng = ReplicaRng::new(0xacc1, 0);
        let mut worst = 0.0f64;
        for case in 0..200 {
            let n = 4;
            let dist = random_metric(n, &mut rng);
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|x| {
                    let nbrs: Vec<usize> = (0..n).filter(|&y| dist[x][y] == 1).collect();
                    let mut row = vec![0.0; n];
                    for &y in &nbrs {
                        row[y] = 0.5 / nbrs.len() as f64;
                    }
                    row[x] = 0.5;
                    row
                })
                .collect();
            let kernel = Kernel::new(rows, None).map_err(|e| e.to_string())?;
            let a = Dist::new(random_dist(n, &mut rng)).map_err(|e| e.to_string())?;
            let b = Dist::new(random_dist(n, &mut rng)).map_err(|e| e.to_string())?;
            let solver = wasserstein(&a, &b, kernel.metric());

            let mut p = Vec::new();
            let mut pi = Vec::new();
            let mut q = Vec::new();
            let mut qi = Vec::new();
            for x in 0..n {
                let diff = a.weights()[x] - b.weights()[x];
                if diff > 0.0 {
                    p.push(diff);
                    pi.push(x);
                } else if diff < 0.0 {
                    q.push(-diff);
                    qi.push(x);
                }
            }
            let oracle = if p.is_empty() {
                0.0
            } else {
                brute_force_transport(&p, &q, &|i, j| f64::from(dist[pi[i]][qi[j]]))
            };
            let gap = (solver - oracle).abs();
            worst = worst.max(gap);
            if gap > 1e-9 {
                return Err(format!("case {case}: solver {solver} vs oracle {oracle}"));
            }
        }
        Ok(format!("200 instances, worst |Δ| = {worst:.2e}"))
    });
}

#[test]
fn acceptance_02_gibbs_dynamics_consistency() {
    criterion(2, "gibbs-dynamics", Duration::from_secs(30), || {
        let mut worst_pi = 0.0f64;
        let mut worst_rev = 0.0f64;
        for &n in &[2usize, 4, 6] {
            for &beta in &[0.0f64, 0.5, 1.5] {
                let chain = IsingChain::new(n, beta).map_err(|e| e.to_string())?;
                let kernel = Kernel::from_chain(&chain).map_err(|e| e.to_string())?.kernel;
                let pi = kernel.stationary(1e-12).map_err(|e| e.to_string())?;
                let gibbs = gibbs_exact(n, beta).map_err(|e| e.to_string())?;
                for (a, b) in pi.weights().iter().zip(gibbs.weights()) {
                    let gap = (a - b).abs();
                    worst_pi = worst_pi.max(gap);
                    if gap > 1e-10 {
                        return Err(format!("n={n} β={beta}: |π − gibbs| = {gap:.2e}"));
                    }
                }
                for x in 0..kernel.n_states() {
                    for y in 0..kernel.n_states() {
                        let gap = (gibbs.weights()[x] * kernel.prob(x, y)
                            - gibbs.weights()[y] * kernel.prob(y, x))
                        .abs();
                        worst_rev = worst_rev.max(gap);
                        if gap > 1e-12 {
                            return Err(format!(
                                "n={n} β={beta}: reversibility violated by {gap:.2e}"
                            ));
                        }
                    }
                }
            }
        }
        Ok(format!(
            "9 (n,β) pairs: worst |π − gibbs| = {worst_pi:.2e}, worst balance gap = {worst_rev:.2e}"
        ))
    });
}

#[test]
fn acceptance_03_bound_formula_identities() {
    criterion(3, "bound-identities", Duration::from_secs(5), || {
        let mut rng = ReplicaRng::new(0xacc3, 0);
        for case in 0..1000 {
            let len = 1 + rng.index(40);
            let alphas: Vec<f64> = (0..len).map(|_| rng.uniform() * 3.0).collect();
            let profile = ContractionProfile::exact(alphas.clone());
            let azuma = azuma_bound(&profile, len).map_err(|e| e.to_string())?;
            let ranges: Vec<f64> = alphas.iter().rev().map(|a| 2.0 * a).collect();
            let mcd = mcdiarmid_range_bound(&ranges).map_err(|e| e.to_string())?;
            let mut prev_a = f64::INFINITY;
            for i in 0..25 {
                let u = i as f64 * 0.4;
                let (a, m) = (azuma.eval(u), mcd.eval(u));
                if (a - m).abs() > 1e-12 {
                    return Err(format!("case {case}: azuma {a} vs mcdiarmid {m} at u={u}"));
                }
                if a > 1.0 + 1e-15 || a > prev_a + 1e-15 {
                    return Err(format!("case {case}: bound not capped/monotone at u={u}"));
                }
                prev_a = a;
            }
            if azuma.eval(0.0) != 1.0 {
                return Err(format!("case {case}: bound at u=0 is not 1"));
            }
        }
        Ok("1000 random profiles: identity within 1e-12, monotone, capped".into())
    });
}

#[test]
fn acceptance_04_concentration_envelope_ising() {
    criterion(4, "ising-envelope", Duration::from_secs(300), || {
        let n = 100usize;
        let beta = 0.5;
        // Fit the contraction constant at small n from the exact one-step
        // Wasserstein supremum, then extrapolate the 1 − c₁/n form.
        let fit_ns = [4usize, 5, 6];
        let mut c1 = 0.0;
        for &np in &fit_ns {
            let kernel = Kernel::from_chain(&IsingChain::new(np, beta).map_err(|e| e.to_string())?)
                .map_err(|e| e.to_string())?
                .kernel;
            let alpha = geometric_alpha(&kernel).map_err(|e| e.to_string())?;
            c1 += np as f64 * (1.0 - alpha);
        }
        c1 /= fit_ns.len() as f64;
        let alpha_hat = 1.0 - c1 / n as f64;
        let bound = geometric_bound(alpha_hat).map_err(|e| e.to_string())?;

        let chain = IsingChain::new(n, beta).map_err(|e| e.to_string())?;
        let t = (10.0 * n as f64 * (n as f64).ln()).round() as u64;
        let u_max = 3.0 * (n as f64).sqrt();
        let grid: Vec<f64> = (1..=20).map(|j| j as f64 * u_max / 20.0).collect();
        let tail = empirical_tail(
            &chain,
            &half_magnetization_observable(),
            &IsingState::all_plus(n),
            t,
            &grid,
            20_000,
            0xacc4,
            None,
        )
        .map_err(|e| e.to_string())?;
        let cmp = compare(&tail, &bound);
        if cmp.verdict != Verdict::Consistent {
            let bad = cmp
                .rows
                .iter()
                .find(|r| r.freq > r.bound + 3.0 * r.se)
                .expect("inconsistent row");
            return Err(format!(
                "tail exceeds bound at u={}: freq {} vs bound {}",
                bad.u, bad.freq, bad.bound
            ));
        }
        Ok(format!(
            "c₁ = {c1:.4}, α̂₁ = {alpha_hat:.6}, t = {t}, 20000 replicas: \
             empirical ≤ bound + 3·SE on all 20 grid points (worst margin {:.4})",
            cmp.worst_margin
        ))
    });
}

#[test]
fn acceptance_05_linext_negative_control() {
    criterion(5, "linext-negative-control", Duration::from_secs(60), || {
        let n = 64usize;
        let chain = LinextChain::new(n).map_err(|e| e.to_string())?;
        let moments = stationary_position_moments(&chain, 3_000_000, 4000, 65_536, 0xacc5);
        let target = n as f64 / 12f64.sqrt();
        let rel = (moments.stddev - target).abs() / target;
        if rel > 0.05 {
            return Err(format!(
                "stddev {:.4} deviates {rel:.3} from n/√12 = {target:.4}",
                moments.stddev
            ));
        }
        Ok(format!(
            "stationary stddev {:.4} within {:.2}% of n/√12 = {target:.4}: deviations are \
             of order n, not √n",
            moments.stddev,
            rel * 100.0
        ))
    });
}

#[test]
fn acceptance_06_fluid_fixed_point() {
    criterion(6, "fluid-fixed-point", Duration::from_secs(30), || {
        let mut worst = 0.0f64;
        for &lambda in &[0.5f64, 0.7, 0.9] {
            for &d in &[1u32, 2, 3] {
                let k_max = default_k_max(lambda, d);
                let t_end = if d == 1 { 6000.0 } else { 500.0 };
                let out = integrate(lambda, d, &FluidProfile::all_empty(k_max), t_end, 0.05)
                    .map_err(|e| e.to_string())?;
                for k in 0..=k_max {
                    let gap = (out.v[k] - tail_fixed_point(lambda, d, k)).abs();
                    worst = worst.max(gap);
                    if gap > 1e-6 {
                        return Err(format!(
                            "λ={lambda} d={d} k={k}: |v − fixed point| = {gap:.2e}"
                        ));
                    }
                }
            }
        }
        Ok(format!(
            "9 (λ,d) pairs from the all-empty profile: worst gap {worst:.2e} ≤ 1e-6"
        ))
    });
}

#[test]
fn acceptance_07_supermarket_equilibrium_profile() {
    criterion(7, "supermarket-profile", Duration::from_secs(120), || {
        let n = 500usize;
        let lambda = 0.7;
        let chain = SupermarketChain::new(n, lambda, 2).map_err(|e| e.to_string())?;
        let profile = equilibrium_profile(&chain, default_burn_in(n), 1_000_000, 4, 0xacc7);
        let mut details = Vec::new();
        for k in 1..=3usize {
            let target = tail_fixed_point(lambda, 2, k);
            let got = profile.tail_fractions[k - 1];
            if (got - target).abs() > 0.02 {
                return Err(format!(
                    "k={k}: time-averaged ℓ(k)/n = {got:.5} vs λ^(2^k−1) = {target:.5}"
                ));
            }
            details.push(format!("k={k}: {got:.4}≈{target:.4}"));
        }
        Ok(details.join(", "))
    });
}

#[test]
fn acceptance_08_two_point_max_queue() {
    criterion(8, "two-point-max-queue", Duration::from_secs(600), || {
        let chain = SupermarketChain::new(10_000, 0.9, 2).map_err(|e| e.to_string())?;
        let samples = max_queue_samples(&chain, default_burn_in(10_000), 200, 0xacc8);
        let report = max_queue_report(&chain, &samples).map_err(|e| e.to_string())?;
        if !report.top_two_adjacent {
            return Err(format!(
                "top two max values {:?} are not adjacent",
                report.top_two
            ));
        }
        if report.top_two_mass < 0.9 {
            return Err(format!(
                "top two values carry only {:.3} of the samples",
                report.top_two_mass
            ));
        }
        Ok(format!(
            "200 stationary samples: histogram {:?}, top two {:?} carry {:.1}% \
             (asymptotic predictor m_d(n) = {})",
            report.histogram,
            report.top_two,
            report.top_two_mass * 100.0,
            report.md_predictor
        ))
    });
}

#[test]
fn acceptance_09_monotone_coupling() {
    criterion(9, "monotone-coupling", Duration::from_secs(120), || {
        let n = 100usize;
        let chain = SupermarketChain::new(n, 0.7, 2).map_err(|e| e.to_string())?;
        for r in 0..1000u64 {
            let mut rng = ReplicaRng::with_label(0xacc9, r, 0);
            let x0 = chain.empty_state();
            let mut y0 = x0.clone();
            y0[(r % n as u64) as usize] = 1;
            let mut pair = CoupledPair::new(chain.clone(), x0, y0);
            let mut prev = pair.dist();
            for s in 0..100_000u64 {
                pair.step(&mut rng);
                if pair.dist() > prev {
                    return Err(format!(
                        "replica {r}: distance rose {prev} → {} at step {s}",
                        pair.dist()
                    ));
                }
                prev = pair.dist();
            }
        }
        Ok("1000 coupled pairs × 10⁵ steps: ℓ₁ distance never increased".into())
    });
}

#[test]
fn acceptance_10_cutoff_shape() {
    criterion(10, "ising-cutoff-shape", Duration::from_secs(300), || {
        let points = cutoff_scan(500, 0.5, &[-4.0, 0.0, 4.0], 2000, 0xacc10)
            .map_err(|e| e.to_string())?;
        let low = &points[0];
        let high = &points[2];
        if low.tv_lower <= 0.9 {
            return Err(format!(
                "magnetisation TV lower bound at γ=−4 is {:.4} ≤ 0.9",
                low.tv_lower
            ));
        }
        if high.coalescence_upper >= 0.1 {
            return Err(format!(
                "coalescence upper bound at γ=+4 is {:.4} ≥ 0.1",
                high.coalescence_upper
            ));
        }
        Ok(format!(
            "γ=−4: lower {:.4} > 0.9; γ=0: [{:.4}, {:.4}]; γ=+4: upper {:.4} < 0.1",
            low.tv_lower, points[1].tv_lower, points[1].coalescence_upper, high.coalescence_upper
        ))
    });
}
