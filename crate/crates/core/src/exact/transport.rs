//! Total variation and exact Wasserstein distance.
//!
//! The Wasserstein distance is solved as a transportation problem with
//! successive shortest paths on the bipartite excess/deficit graph. Costs
//! are the integer graph distances, so Dijkstra potentials stay integral
//! and reduced-cost comparisons are exact; only the transported masses are
//! floating point.
//!
//! Because the cost is a metric, the optimum depends only on the signed
//! difference of the two measures: common mass stays in place, the excess
//! `(μ₁ − μ₂)₊` ships to the deficit `(μ₂ − μ₁)₊`.

use crate::exact::kernel::{Dist, Metric};

/// Mass below which residual supply is treated as shipped (guards against
/// accumulated rounding in the f64 bookkeeping).
const MASS_EPS: f64 = 1e-14;

/// Total variation distance: half the ℓ₁ distance.
pub fn tv_distance(a: &Dist, b: &Dist) -> f64 {
    assert_eq!(a.len(), b.len(), "distributions on different state spaces");
    0.5 * a
        .weights()
        .iter()
        .zip(b.weights())
        .map(|(x, y)| (x - y).abs())
        .sum::<f64>()
}

/// An optimal transport solution between two distributions.
#[derive(Debug, Clone)]
pub struct Transport {
    /// Optimal cost (the Wasserstein distance).
    pub cost: f64,
    /// Positive flows as (source state, sink state, mass).
    pub plan: Vec<(usize, usize, f64)>,
    /// Excess states (supply support) with their supplies.
    pub sources: Vec<(usize, f64)>,
    /// Deficit states (demand support) with their demands.
    pub sinks: Vec<(usize, f64)>,
    /// Optimal dual value per source (aligned with `sources`).
    pub source_potential: Vec<f64>,
    /// Optimal dual value per sink (aligned with `sinks`).
    pub sink_potential: Vec<f64>,
}

/// Exact Wasserstein distance under the graph metric.
pub fn wasserstein(a: &Dist, b: &Dist, metric: &Metric) -> f64 {
    wasserstein_full(a, b, metric).cost
}

/// Exact Wasserstein distance plus optimal plan and dual potentials.
pub fn wasserstein_full(a: &Dist, b: &Dist, metric: &Metric) -> Transport {
    assert_eq!(a.len(), b.len(), "distributions on different state spaces");
    assert_eq!(a.len(), metric.n(), "metric size mismatch");

    let mut sources = Vec::new();
    let mut sinks = Vec::new();
    for (x, (&wa, &wb)) in a.weights().iter().zip(b.weights()).enumerate() {
        let diff = wa - wb;
        if diff > MASS_EPS {
            sources.push((x, diff));
        } else if diff < -MASS_EPS {
            sinks.push((x, -diff));
        }
    }
    if sources.is_empty() || sinks.is_empty() {
        return Transport {
            cost: 0.0,
            plan: Vec::new(),
            sources,
            sinks,
            source_potential: Vec::new(),
            sink_potential: Vec::new(),
        };
    }

    let ns = sources.len();
    let nt = sinks.len();
    let cost = |i: usize, j: usize| -> f64 { f64::from(metric.get(sources[i].0, sinks[j].0)) };

    let mut supply: Vec<f64> = sources.iter().map(|&(_, m)| m).collect();
    let mut demand: Vec<f64> = sinks.iter().map(|&(_, m)| m).collect();
    // Ship the smaller of the two totals; they differ only by rounding.
    let shippable = supply.iter().sum::<f64>().min(demand.iter().sum::<f64>());
    let mut remaining = shippable;

    // Node ids: 0..ns sources, ns..ns+nt sinks. Potentials keep all residual
    // reduced costs non-negative; they stay integer-valued throughout.
    let nv = ns + nt;
    let mut potential = vec![0.0f64; nv];
    let mut flow: std::collections::HashMap<(usize, usize), f64> = std::collections::HashMap::new();

    while remaining > MASS_EPS {
        // Multi-source Dijkstra over the residual graph (dense, no heap).
        let mut dist = vec![f64::INFINITY; nv];
        let mut prev: Vec<Option<usize>> = vec![None; nv];
        let mut done = vec![false; nv];
        for i in 0..ns {
            if supply[i] > MASS_EPS {
                dist[i] = 0.0;
            }
        }
        let mut target: Option<usize> = None;
        loop {
            let mut u = usize::MAX;
            let mut best = f64::INFINITY;
            for v in 0..nv {
                if !done[v] && dist[v] < best {
                    best = dist[v];
                    u = v;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            if u >= ns && demand[u - ns] > MASS_EPS {
                target = Some(u);
                break;
            }
            if u < ns {
                // Forward arcs to every sink.
                for j in 0..nt {
                    let v = ns + j;
                    if done[v] {
                        continue;
                    }
                    let rc = cost(u, j) + potential[u] - potential[v];
                    debug_assert!(rc >= -1e-9);
                    if dist[u] + rc < dist[v] {
                        dist[v] = dist[u] + rc;
                        prev[v] = Some(u);
                    }
                }
            } else {
                // Backward arcs along positive flows.
                let j = u - ns;
                for i in 0..ns {
                    if done[i] {
                        continue;
                    }
                    let f = flow.get(&(i, j)).copied().unwrap_or(0.0);
                    if f <= MASS_EPS {
                        continue;
                    }
                    let rc = -cost(i, j) + potential[u] - potential[i];
                    debug_assert!(rc >= -1e-9);
                    if dist[u] + rc < dist[i] {
                        dist[i] = dist[u] + rc;
                        prev[i] = Some(u);
                    }
                }
            }
        }
        let target = target.expect("transportation problem is always feasible");
        let dist_target = dist[target];
        for v in 0..nv {
            potential[v] += dist[v].min(dist_target);
        }

        // Trace the augmenting path and find the bottleneck.
        let mut path = Vec::new();
        let mut v = target;
        while let Some(u) = prev[v] {
            path.push((u, v));
            v = u;
        }
        path.reverse();
        let first = path.first().expect("path has at least one arc").0;
        let mut bottleneck = supply[first].min(demand[target - ns]);
        for &(u, w) in &path {
            if u >= ns {
                // Backward arc (sink u → source w): limited by flow (w, u).
                bottleneck = bottleneck.min(flow[&(w, u - ns)]);
            }
        }
        bottleneck = bottleneck.min(remaining);

        for &(u, w) in &path {
            if u < ns {
                *flow.entry((u, w - ns)).or_insert(0.0) += bottleneck;
            } else {
                let f = flow.get_mut(&(w, u - ns)).expect("backward arc has flow");
                *f -= bottleneck;
                if *f <= MASS_EPS {
                    flow.remove(&(w, u - ns));
                }
            }
        }
        supply[first] -= bottleneck;
        demand[target - ns] -= bottleneck;
        remaining -= bottleneck;
    }

    let mut total = 0.0;
    let mut plan = Vec::new();
    for (&(i, j), &f) in flow.iter() {
        if f > MASS_EPS {
            total += f * cost(i, j);
            plan.push((sources[i].0, sinks[j].0, f));
        }
    }
    plan.sort_unstable_by_key(|&(x, y, _)| (x, y));

    // LP duals: u_i = −φ_i on sources, v_j = φ_j on sinks; then
    // u_i + v_j ≤ c_ij with equality on flow-carrying arcs.
    let source_potential: Vec<f64> = (0..ns).map(|i| -potential[i]).collect();
    let sink_potential: Vec<f64> = (0..nt).map(|j| potential[ns + j]).collect();

    Transport {
        cost: total,
        plan,
        sources,
        sinks,
        source_potential,
        sink_potential,
    }
}

/// The Kantorovich–Rubinstein dual witness: a 1-Lipschitz function `f` with
/// `μ₁(f) − μ₂(f)` equal to the Wasserstein distance, extracted from the
/// optimal dual potentials as `f(x) = min_j (d(x, sink_j) − v_j)`.
pub fn kr_witness(t: &Transport, metric: &Metric) -> Vec<f64> {
    let n = metric.n();
    if t.sinks.is_empty() {
        return vec![0.0; n];
    }
    (0..n)
        .map(|x| {
            t.sinks
                .iter()
                .zip(&t.sink_potential)
                .map(|(&(sink, _), &v)| f64::from(metric.get(x, sink)) - v)
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::kernel::Kernel;

    fn path3() -> Kernel {
        Kernel::new(
            vec![
                vec![0.5, 0.5, 0.0],
                vec![0.25, 0.5, 0.25],
                vec![0.0, 0.5, 0.5],
            ],
            None,
        )
        .unwrap()
    }

    #[test]
    fn tv_basics() {
        let a = Dist::new(vec![0.5, 0.5]).unwrap();
        let b = Dist::new(vec![0.9, 0.1]).unwrap();
        assert!((tv_distance(&a, &a) - 0.0).abs() < 1e-15);
        assert!((tv_distance(&a, &b) - 0.4).abs() < 1e-15);
        let dx = Dist::delta(2, 0);
        let dy = Dist::delta(2, 1);
        assert!((tv_distance(&dx, &dy) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn tv_equals_sup_over_events_on_small_spaces() {
        // Enumerate all events on 3 states.
        let a = Dist::new(vec![0.2, 0.5, 0.3]).unwrap();
        let b = Dist::new(vec![0.4, 0.1, 0.5]).unwrap();
        let mut sup: f64 = 0.0;
        for mask in 0u8..8 {
            let (mut pa, mut pb) = (0.0, 0.0);
            for x in 0..3 {
                if mask & (1 << x) != 0 {
                    pa += a.weights()[x];
                    pb += b.weights()[x];
                }
            }
            sup = sup.max((pa - pb).abs());
        }
        assert!((tv_distance(&a, &b) - sup).abs() < 1e-14);
    }

    #[test]
    fn wasserstein_identical_is_zero() {
        let k = path3();
        let mu = Dist::new(vec![0.2, 0.3, 0.5]).unwrap();
        assert_eq!(wasserstein(&mu, &mu, k.metric()), 0.0);
    }

    #[test]
    fn point_masses_give_graph_distance() {
        let k = path3();
        let dx = Dist::delta(3, 0);
        let dz = Dist::delta(3, 2);
        assert!((wasserstein(&dx, &dz, k.metric()) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn point_mass_source_cost_is_weighted_distance() {
        // Path a–b–c, δ_a vs (0, 0.5, 0.5): cost = 0.5·1 + 0.5·2 = 1.5.
        let k = path3();
        let da = Dist::delta(3, 0);
        let nu = Dist::new(vec![0.0, 0.5, 0.5]).unwrap();
        assert!((wasserstein(&da, &nu, k.metric()) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn duality_holds_on_path_graph() {
        let k = path3();
        let a = Dist::new(vec![0.6, 0.1, 0.3]).unwrap();
        let b = Dist::new(vec![0.1, 0.4, 0.5]).unwrap();
        let t = wasserstein_full(&a, &b, k.metric());
        // Dual feasibility and complementary slackness.
        for (i, &(_, _)) in t.sources.iter().enumerate() {
            for (j, &(_, _)) in t.sinks.iter().enumerate() {
                let c = f64::from(k.metric().get(t.sources[i].0, t.sinks[j].0));
                assert!(t.source_potential[i] + t.sink_potential[j] <= c + 1e-9);
            }
        }
        let dual: f64 = t
            .sources
            .iter()
            .zip(&t.source_potential)
            .map(|(&(_, p), &u)| p * u)
            .sum::<f64>()
            + t.sinks
                .iter()
                .zip(&t.sink_potential)
                .map(|(&(_, q), &v)| q * v)
                .sum::<f64>();
        assert!((dual - t.cost).abs() < 1e-9);

        // The extracted witness is 1-Lipschitz and attains the optimum.
        let f = kr_witness(&t, k.metric());
        for x in 0..3 {
            for y in 0..3 {
                assert!((f[x] - f[y]).abs() <= f64::from(k.metric().get(x, y)) + 1e-9);
            }
        }
        let attained: f64 = (0..3)
            .map(|x| f[x] * (a.weights()[x] - b.weights()[x]))
            .sum();
        assert!((attained - t.cost).abs() < 1e-9);
    }

    #[test]
    fn tv_lower_bounds_wasserstein() {
        let k = path3();
        let a = Dist::new(vec![0.7, 0.2, 0.1]).unwrap();
        let b = Dist::new(vec![0.1, 0.1, 0.8]).unwrap();
        let w = wasserstein(&a, &b, k.metric());
        assert!(tv_distance(&a, &b) <= w + 1e-12);
        assert!(w <= f64::from(k.metric().max_support_distance(&a, &b)) + 1e-12);
    }

    #[test]
    fn plan_marginals_match_excess_and_deficit() {
        let k = path3();
        let a = Dist::new(vec![0.6, 0.1, 0.3]).unwrap();
        let b = Dist::new(vec![0.1, 0.4, 0.5]).unwrap();
        let t = wasserstein_full(&a, &b, k.metric());
        let mut shipped_from = std::collections::HashMap::new();
        let mut shipped_to = std::collections::HashMap::new();
        for &(x, y, f) in &t.plan {
            *shipped_from.entry(x).or_insert(0.0) += f;
            *shipped_to.entry(y).or_insert(0.0) += f;
        }
        for &(x, m) in &t.sources {
            assert!((shipped_from[&x] - m).abs() < 1e-12);
        }
        for &(y, m) in &t.sinks {
            assert!((shipped_to[&y] - m).abs() < 1e-12);
        }
    }
}
