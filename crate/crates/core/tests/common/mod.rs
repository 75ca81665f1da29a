//! Shared test support: an independent brute-force transportation oracle
//! and random small metric-space instances.
//!
//! The oracle enumerates every spanning tree of the complete bipartite
//! supply/demand graph (every vertex of the transportation polytope is a
//! tree solution), solves each tree by leaf elimination and keeps the best
//! feasible cost. It shares no code with the production solver.

use mixlab_core::rng::ReplicaRng;

/// Exact transportation cost between supply `p` and demand `q` under
/// `cost(i, j)`, by exhaustive tree enumeration. Intended for ≤ 5 points
/// per side.
pub fn brute_force_transport(p: &[f64], q: &[f64], cost: &dyn Fn(usize, usize) -> f64) -> f64 {
    let m = p.len();
    let k = q.len();
    assert!(m >= 1 && k >= 1 && m + k <= 12, "oracle is for tiny instances");
    let edges: Vec<(usize, usize)> = (0..m)
        .flat_map(|i| (0..k).map(move |j| (i, j)))
        .collect();
    let need = m + k - 1;
    let mut best = f64::INFINITY;
    let mut chosen = vec![0usize; need];
    combinations(edges.len(), need, &mut chosen, 0, 0, &mut |subset| {
        if let Some(c) = tree_cost(m, k, p, q, subset, &edges, cost) {
            if c < best {
                best = c;
            }
        }
    });
    best
}

fn combinations(
    n: usize,
    k: usize,
    buf: &mut Vec<usize>,
    start: usize,
    depth: usize,
    visit: &mut impl FnMut(&[usize]),
) {
    if depth == k {
        visit(buf);
        return;
    }
    for i in start..=(n - (k - depth)) {
        buf[depth] = i;
        combinations(n, k, buf, i + 1, depth + 1, visit);
    }
}

/// Solve the flows forced by a candidate tree; `None` if the edge set is
/// not a spanning tree or a forced flow is negative.
fn tree_cost(
    m: usize,
    k: usize,
    p: &[f64],
    q: &[f64],
    subset: &[usize],
    edges: &[(usize, usize)],
    cost: &dyn Fn(usize, usize) -> f64,
) -> Option<f64> {
    let v = m + k;
    // Spanning tree check: v−1 edges and no cycle.
    let mut parent: Vec<usize> = (0..v).collect();
    fn find(parent: &mut Vec<usize>, x: usize) -> usize {
        if parent[x] != x {
            let root = find(parent, parent[x]);
            parent[x] = root;
        }
        parent[x]
    }
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); v]; // (other, edge idx)
    for (slot, &e) in subset.iter().enumerate() {
        let (i, j) = edges[e];
        let (a, b) = (i, m + j);
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra == rb {
            return None; // cycle
        }
        parent[ra] = rb;
        adj[a].push((b, slot));
        adj[b].push((a, slot));
        let _ = slot;
    }

    // Leaf elimination.
    let mut balance: Vec<f64> = p
        .iter()
        .copied()
        .chain(q.iter().copied())
        .collect();
    let mut degree: Vec<usize> = adj.iter().map(|a| a.len()).collect();
    let mut removed_edge = vec![false; subset.len()];
    let mut removed_node = vec![false; v];
    let mut stack: Vec<usize> = (0..v).filter(|&x| degree[x] == 1).collect();
    let mut total = 0.0;
    let mut processed = 0;
    while let Some(leaf) = stack.pop() {
        if removed_node[leaf] || degree[leaf] == 0 {
            continue;
        }
        let &(other, slot) = adj[leaf]
            .iter()
            .find(|&&(_, s)| !removed_edge[s])
            .unwrap();
        let flow = balance[leaf];
        if flow < -1e-12 {
            return None;
        }
        let (i, j) = edges[subset[slot]];
        total += flow.max(0.0) * cost(i, j);
        balance[other] -= flow;
        removed_edge[slot] = true;
        removed_node[leaf] = true;
        degree[leaf] = 0;
        degree[other] -= 1;
        if degree[other] == 1 {
            stack.push(other);
        }
        processed += 1;
        if processed == subset.len() {
            break;
        }
    }
    if processed != subset.len() {
        return None; // disconnected
    }
    Some(total)
}

/// A random connected undirected graph metric on `n` points: a uniform
/// spanning path plus random extra edges, metrised by BFS.
#[allow(clippy::needless_range_loop)]
pub fn random_metric(n: usize, rng: &mut ReplicaRng) -> Vec<Vec<u32>> {
    let mut adjacency = vec![vec![false; n]; n];
    // Random permutation path keeps it connected.
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.index(i + 1));
    }
    for w in order.windows(2) {
        adjacency[w[0]][w[1]] = true;
        adjacency[w[1]][w[0]] = true;
    }
    for x in 0..n {
        for y in (x + 1)..n {
            if rng.uniform() < 0.3 {
                adjacency[x][y] = true;
                adjacency[y][x] = true;
            }
        }
    }
    // BFS all pairs.
    let mut dist = vec![vec![u32::MAX; n]; n];
    for s in 0..n {
        dist[s][s] = 0;
        let mut queue = std::collections::VecDeque::from([s]);
        while let Some(x) = queue.pop_front() {
            for y in 0..n {
                if adjacency[x][y] && dist[s][y] == u32::MAX {
                    dist[s][y] = dist[s][x] + 1;
                    queue.push_back(y);
                }
            }
        }
    }
    dist
}

/// A random probability vector of length `n`.
pub fn random_dist(n: usize, rng: &mut ReplicaRng) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n).map(|_| rng.uniform() + 1e-3).collect();
    // Occasionally zero some entries to stress degenerate supports.
    if rng.uniform() < 0.5 {
        let z = rng.index(n);
        w[z] = 0.0;
    }
    let sum: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= sum);
    // Make the sum exactly 1 up to one ulp by adjusting the largest entry.
    let resid = 1.0 - w.iter().sum::<f64>();
    let argmax = (0..n).max_by(|&i, &j| w[i].total_cmp(&w[j])).unwrap();
    w[argmax] += resid;
    w
}
