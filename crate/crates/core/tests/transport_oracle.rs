//! The transportation solver against an independent brute-force oracle,
//! plus Kantorovich duality spot checks.

mod common;

use common::{brute_force_transport, random_dist, random_metric};
use mixlab_core::exact::{kr_witness, tv_distance, wasserstein, wasserstein_full, Dist, Kernel};
use mixlab_core::rng::ReplicaRng;

/// Build a Kernel whose metric equals the given distance table (the rows
/// themselves are a lazy walk on the same graph).
fn kernel_with_metric(dist: &[Vec<u32>]) -> Kernel {
    let n = dist.len();
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
    Kernel::new(rows, None).unwrap()
}

#[test]
fn solver_matches_brute_force_on_random_instances() {
    let mut rng = ReplicaRng::new(0xfeed, 0);
    for case in 0..100 {
        let n = 3 + rng.index(2); // 3 or 4 states
        let dist = random_metric(n, &mut rng);
        let kernel = kernel_with_metric(&dist);
        let a = Dist::new(random_dist(n, &mut rng)).unwrap();
        let b = Dist::new(random_dist(n, &mut rng)).unwrap();
        let solver = wasserstein(&a, &b, kernel.metric());

        // The oracle works on the excess/deficit reduction, which is exact
        // for metric costs.
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
        assert!(
            (solver - oracle).abs() < 1e-9,
            "case {case}: solver {solver} vs oracle {oracle}"
        );
    }
}

#[test]
fn random_lipschitz_functions_never_beat_the_optimum() {
    let mut rng = ReplicaRng::new(0xd0a1, 0);
    for _ in 0..50 {
        let n = 4 + rng.index(3);
        let dist = random_metric(n, &mut rng);
        let kernel = kernel_with_metric(&dist);
        let a = Dist::new(random_dist(n, &mut rng)).unwrap();
        let b = Dist::new(random_dist(n, &mut rng)).unwrap();
        let t = wasserstein_full(&a, &b, kernel.metric());

        // Random functions, made 1-Lipschitz by inf-convolution with d.
        for _ in 0..20 {
            let raw: Vec<f64> = (0..n).map(|_| rng.uniform() * 10.0 - 5.0).collect();
            let f: Vec<f64> = (0..n)
                .map(|x| {
                    (0..n)
                        .map(|y| raw[y] + f64::from(dist[x][y]))
                        .fold(f64::INFINITY, f64::min)
                })
                .collect();
            let gap: f64 = (0..n)
                .map(|x| f[x] * (a.weights()[x] - b.weights()[x]))
                .sum();
            assert!(gap.abs() <= t.cost + 1e-9);
        }

        // The extracted dual witness attains the optimum exactly.
        let witness = kr_witness(&t, kernel.metric());
        let attained: f64 = (0..n)
            .map(|x| witness[x] * (a.weights()[x] - b.weights()[x]))
            .sum();
        assert!(
            (attained - t.cost).abs() < 1e-6,
            "witness gap {attained} vs optimum {}",
            t.cost
        );
        for x in 0..n {
            for y in 0..n {
                assert!((witness[x] - witness[y]).abs() <= f64::from(dist[x][y]) + 1e-9);
            }
        }
    }
}

#[test]
fn tv_lower_bounds_and_support_diameter_upper_bounds() {
    let mut rng = ReplicaRng::new(0xabba, 0);
    for _ in 0..100 {
        let n = 3 + rng.index(4);
        let dist = random_metric(n, &mut rng);
        let kernel = kernel_with_metric(&dist);
        let a = Dist::new(random_dist(n, &mut rng)).unwrap();
        let b = Dist::new(random_dist(n, &mut rng)).unwrap();
        let w = wasserstein(&a, &b, kernel.metric());
        assert!(tv_distance(&a, &b) <= w + 1e-12);
        assert!(w <= f64::from(kernel.metric().max_support_distance(&a, &b)) + 1e-12);
    }
}
