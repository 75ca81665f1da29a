//! Row-stochastic kernels over enumerated state spaces, their graph metric,
//! stationary distributions, distance-to-stationarity curves and mixing
//! times.

use crate::chain::StateSpace;
use crate::error::{Error, Result};
use crate::exact::transport::tv_distance;
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, VecDeque};
use std::io::Write;

/// Row-sum / probability-vector tolerance.
const PROB_TOL: f64 = 1e-12;

/// Default tolerance for stationary solves.
pub const DEFAULT_STATIONARY_TOL: f64 = 1e-12;

/// Cap on elementary row operations for dense matrix work (resource guard).
const WORK_CAP: u128 = 200_000_000_000;

/// Row-operation cap for power iteration.
const POWER_ITER_ROW_OPS: u64 = 10_000_000;

/// Threshold below which the stationary solver uses a direct LU solve.
const DIRECT_SOLVE_MAX_STATES: usize = 2000;

fn check_work(work: u128) -> Result<()> {
    if work > WORK_CAP {
        return Err(Error::WorkBudgetExceeded {
            work,
            cap: WORK_CAP,
        });
    }
    Ok(())
}

/// A probability vector over an enumerated state space.
#[derive(Debug, Clone, PartialEq)]
pub struct Dist(Vec<f64>);

impl Dist {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidArgument("empty distribution".into()));
        }
        let mut sum = 0.0;
        for &w in &weights {
            if w < -0.0 || !w.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "negative or non-finite weight {w}"
                )));
            }
            sum += w;
        }
        if (sum - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidArgument(format!(
                "weights sum to {sum}, expected 1 within {PROB_TOL}"
            )));
        }
        Ok(Dist(weights))
    }

    /// Point mass at state `x`.
    pub fn delta(n: usize, x: usize) -> Self {
        let mut w = vec![0.0; n];
        w[x] = 1.0;
        Dist(w)
    }

    pub fn uniform(n: usize) -> Self {
        Dist(vec![1.0 / n as f64; n])
    }

    /// Internal constructor for vectors produced by exact arithmetic.
    pub(crate) fn from_raw(weights: Vec<f64>) -> Self {
        Dist(weights)
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Expectation of `f` under the distribution.
    pub fn expect(&self, f: impl Fn(usize) -> f64) -> f64 {
        self.0.iter().enumerate().map(|(i, &w)| w * f(i)).sum()
    }
}

/// Shortest-path distance table of the adjacency graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Metric {
    n: usize,
    d: Vec<u32>,
}

impl Metric {
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.d[x * self.n + y]
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn diameter(&self) -> u32 {
        self.d.iter().copied().max().unwrap_or(0)
    }

    /// Largest distance between a state charged by `a` and one charged by `b`.
    pub fn max_support_distance(&self, a: &Dist, b: &Dist) -> u32 {
        let mut m = 0;
        for (x, &wa) in a.weights().iter().enumerate() {
            if wa <= 0.0 {
                continue;
            }
            for (y, &wb) in b.weights().iter().enumerate() {
                if wb > 0.0 {
                    m = m.max(self.get(x, y));
                }
            }
        }
        m
    }
}

/// JSON interchange form: `{n_states, triplets: [[row, col, prob], ...],
/// state_labels?}`. Probabilities are written with 17 significant digits.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KernelJson {
    n_states: usize,
    triplets: Vec<(usize, usize, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    state_labels: Option<Vec<String>>,
}

/// An enumerated finite chain: a row-stochastic matrix plus the shortest
/// path metric of its adjacency graph (connected by construction).
#[derive(Debug, Clone)]
pub struct Kernel {
    n: usize,
    /// Row-major transition probabilities.
    p: Vec<f64>,
    metric: Metric,
    labels: Option<Vec<String>>,
}

impl Kernel {
    pub fn new(rows: Vec<Vec<f64>>, labels: Option<Vec<String>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidKernel("no states".into()));
        }
        if let Some(ls) = &labels {
            if ls.len() != n {
                return Err(Error::InvalidKernel(format!(
                    "{} labels for {} states",
                    ls.len(),
                    n
                )));
            }
        }
        let mut p = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidKernel(format!(
                    "row {i} has length {} in an n={n} kernel",
                    row.len()
                )));
            }
            let mut sum = 0.0;
            for &v in row {
                if v < 0.0 || !v.is_finite() {
                    return Err(Error::InvalidKernel(format!(
                        "negative or non-finite entry {v} in row {i}"
                    )));
                }
                sum += v;
            }
            if (sum - 1.0).abs() > PROB_TOL {
                return Err(Error::InvalidKernel(format!(
                    "row {i} sums to {sum}, expected 1 within {PROB_TOL}"
                )));
            }
            p.extend_from_slice(row);
        }
        // Symmetric support: P(x,y) > 0 iff P(y,x) > 0.
        for x in 0..n {
            for y in (x + 1)..n {
                if (p[x * n + y] > 0.0) != (p[y * n + x] > 0.0) {
                    return Err(Error::InvalidKernel(format!(
                        "asymmetric support between states {x} and {y}"
                    )));
                }
            }
        }
        let metric = bfs_metric(n, &p)?;
        Ok(Kernel {
            n,
            p,
            metric,
            labels,
        })
    }

    /// Enumerate a finite chain into a kernel; state ids follow the chain's
    /// canonical enumeration order.
    pub fn from_chain<C: StateSpace>(chain: &C) -> Result<Enumerated<C::State>> {
        let states = chain.states();
        let n = states.len();
        let index: HashMap<C::State, usize> = states
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, s)| (s, i))
            .collect();
        if index.len() != n {
            return Err(Error::InvalidKernel("duplicate states in enumeration".into()));
        }
        let mut rows = vec![vec![0.0; n]; n];
        for (i, s) in states.iter().enumerate() {
            for (next, prob) in chain.row(s) {
                let j = *index.get(&next).ok_or_else(|| {
                    Error::InvalidKernel(format!("row of state {i} leaves the enumerated space"))
                })?;
                rows[i][j] += prob;
            }
        }
        let kernel = Kernel::new(rows, None)?;
        Ok(Enumerated {
            kernel,
            states,
            index,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn row(&self, x: usize) -> &[f64] {
        &self.p[x * self.n..(x + 1) * self.n]
    }

    #[inline]
    pub fn prob(&self, x: usize, y: usize) -> f64 {
        self.p[x * self.n + y]
    }

    pub fn metric(&self) -> &Metric {
        &self.metric
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// One application of the kernel: returns `mu P`.
    pub fn apply_once(&self, mu: &Dist) -> Dist {
        let n = self.n;
        let mut out = vec![0.0; n];
        for (x, &w) in mu.weights().iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let row = self.row(x);
            for y in 0..n {
                out[y] += w * row[y];
            }
        }
        Dist::from_raw(out)
    }

    /// `mu P^t`; `t = 0` returns `mu` unchanged.
    pub fn apply(&self, mu: &Dist, t: u64) -> Result<Dist> {
        if mu.len() != self.n {
            return Err(Error::InvalidArgument(format!(
                "distribution over {} states applied to an n={} kernel",
                mu.len(),
                self.n
            )));
        }
        check_work(t as u128 * (self.n as u128) * (self.n as u128))?;
        let mut cur = mu.clone();
        for _ in 0..t {
            cur = self.apply_once(&cur);
        }
        Ok(cur)
    }

    /// Period of the chain: gcd of all cycle lengths of the transition
    /// digraph (1 means aperiodic). Uses BFS levels; valid because the
    /// support graph is symmetric and connected.
    pub fn period(&self) -> u64 {
        let n = self.n;
        let mut level = vec![u64::MAX; n];
        let mut queue = VecDeque::new();
        level[0] = 0;
        queue.push_back(0usize);
        let mut order = Vec::with_capacity(n);
        while let Some(x) = queue.pop_front() {
            order.push(x);
            for y in 0..n {
                if self.prob(x, y) > 0.0 && level[y] == u64::MAX {
                    level[y] = level[x] + 1;
                    queue.push_back(y);
                }
            }
        }
        let mut g: u64 = 0;
        for &x in &order {
            for y in 0..n {
                if self.prob(x, y) > 0.0 {
                    let diff = (level[x] + 1).abs_diff(level[y]);
                    g = gcd(g, diff);
                }
            }
        }
        if g == 0 {
            1
        } else {
            g
        }
    }

    /// Stationary distribution with `‖πP − π‖₁ ≤ tol`.
    ///
    /// Direct LU solve on `(Pᵀ − I)` with a normalisation row for small
    /// chains, power iteration otherwise (or as a fallback when the direct
    /// residual misses `tol`). Periodic chains are rejected.
    pub fn stationary(&self, tol: f64) -> Result<Dist> {
        let period = self.period();
        if period != 1 {
            return Err(Error::Periodic { period });
        }
        if self.n <= DIRECT_SOLVE_MAX_STATES {
            if let Some(pi) = self.stationary_direct() {
                if self.residual_l1(&pi) <= tol {
                    return Ok(Dist::from_raw(pi));
                }
            }
        }
        self.stationary_power(tol)
    }

    fn residual_l1(&self, pi: &[f64]) -> f64 {
        let next = self.apply_once(&Dist::from_raw(pi.to_vec()));
        pi.iter()
            .zip(next.weights())
            .map(|(a, b)| (a - b).abs())
            .sum()
    }

    fn stationary_direct(&self) -> Option<Vec<f64>> {
        let n = self.n;
        // (Pᵀ − I) π = 0 with the last equation replaced by Σ π = 1.
        let mut a = nalgebra::DMatrix::<f64>::zeros(n, n);
        for x in 0..n {
            for y in 0..n {
                a[(y, x)] = self.prob(x, y);
            }
        }
        for i in 0..n {
            a[(i, i)] -= 1.0;
        }
        for j in 0..n {
            a[(n - 1, j)] = 1.0;
        }
        let mut b = nalgebra::DVector::<f64>::zeros(n);
        b[n - 1] = 1.0;
        let lu = a.lu();
        let sol = lu.solve(&b)?;
        let mut pi: Vec<f64> = sol.iter().copied().collect();
        let sum: f64 = pi.iter().sum();
        if sum <= 0.0 || !sum.is_finite() {
            return None;
        }
        for w in &mut pi {
            *w = (*w / sum).max(0.0);
        }
        Some(pi)
    }

    fn stationary_power(&self, tol: f64) -> Result<Dist> {
        let max_iters = (POWER_ITER_ROW_OPS / self.n as u64).max(100);
        let mut cur = Dist::uniform(self.n);
        let mut residual = f64::INFINITY;
        for it in 0..max_iters {
            let next = self.apply_once(&cur);
            residual = cur
                .weights()
                .iter()
                .zip(next.weights())
                .map(|(a, b)| (a - b).abs())
                .sum();
            cur = next;
            if residual <= tol {
                return Ok(cur);
            }
            let _ = it;
        }
        Err(Error::NotConverged {
            residual,
            iterations: max_iters,
            tol,
        })
    }

    /// Worst-start distance to stationarity `d(t) = max_x dtv(δ_x Pᵗ, π)`
    /// for `t = 0..=t_max`, computed by one matrix-power pass reused across
    /// all starts.
    pub fn distance_curve(&self, t_max: u64) -> Result<Vec<f64>> {
        let pi = self.stationary(DEFAULT_STATIONARY_TOL)?;
        self.distance_curve_with(&pi, t_max)
    }

    pub fn distance_curve_with(&self, pi: &Dist, t_max: u64) -> Result<Vec<f64>> {
        let n = self.n;
        check_work((t_max as u128 + 1) * (n as u128) * (n as u128) * (n as u128))?;
        let mut rows: Vec<Dist> = (0..n).map(|x| Dist::delta(n, x)).collect();
        let mut curve = Vec::with_capacity(t_max as usize + 1);
        curve.push(max_tv_to(&rows, pi));
        for _ in 1..=t_max {
            rows = rows.iter().map(|r| self.apply_once(r)).collect();
            curve.push(max_tv_to(&rows, pi));
        }
        Ok(curve)
    }

    /// Least `t` with `d(t) ≤ eps`, or [`Error::NotMixedWithinCap`].
    pub fn mixing_time(&self, eps: f64, t_cap: u64) -> Result<u64> {
        let (curve, crossing) = self.mixing_curve(eps, t_cap)?;
        crossing.ok_or(Error::NotMixedWithinCap {
            cap: t_cap,
            distance: *curve.last().expect("nonempty curve"),
        })
    }

    /// The distance curve up to the first crossing of `eps` (or `t_cap`),
    /// together with the crossing time when reached.
    pub fn mixing_curve(&self, eps: f64, t_cap: u64) -> Result<(Vec<f64>, Option<u64>)> {
        if !(0.0 < eps && eps < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "mixing threshold must lie in (0,1), got {eps}"
            )));
        }
        let pi = self.stationary(DEFAULT_STATIONARY_TOL)?;
        let n = self.n;
        check_work((t_cap as u128 + 1) * (n as u128) * (n as u128) * (n as u128))?;
        let mut rows: Vec<Dist> = (0..n).map(|x| Dist::delta(n, x)).collect();
        let mut curve = vec![max_tv_to(&rows, &pi)];
        if curve[0] <= eps {
            return Ok((curve, Some(0)));
        }
        for t in 1..=t_cap {
            rows = rows.iter().map(|r| self.apply_once(r)).collect();
            let d = max_tv_to(&rows, &pi);
            curve.push(d);
            if d <= eps {
                return Ok((curve, Some(t)));
            }
        }
        Ok((curve, None))
    }

    /// Serialize to the documented JSON triplet schema.
    pub fn to_json_string(&self) -> Result<String> {
        let triplets: Vec<(usize, usize, f64)> = (0..self.n)
            .flat_map(|x| {
                (0..self.n)
                    .filter(move |&y| self.prob(x, y) > 0.0)
                    .map(move |y| (x, y, self.prob(x, y)))
            })
            .collect();
        let doc = KernelJson {
            n_states: self.n,
            triplets,
            state_labels: self.labels.clone(),
        };
        let mut out = Vec::new();
        let mut ser = serde_json::Serializer::with_formatter(&mut out, SigDigitFormatter);
        serde::Serialize::serialize(&doc, &mut ser)?;
        Ok(String::from_utf8(out).expect("json output is utf8"))
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let doc: KernelJson = serde_json::from_str(s)?;
        let n = doc.n_states;
        if n == 0 {
            return Err(Error::InvalidKernel("n_states must be positive".into()));
        }
        let mut rows = vec![vec![0.0; n]; n];
        let mut seen = std::collections::HashSet::new();
        for (r, c, p) in doc.triplets {
            if r >= n || c >= n {
                return Err(Error::InvalidKernel(format!(
                    "triplet ({r},{c}) out of range for n_states={n}"
                )));
            }
            if !seen.insert((r, c)) {
                return Err(Error::InvalidKernel(format!(
                    "duplicate triplet for ({r},{c})"
                )));
            }
            rows[r][c] = p;
        }
        Kernel::new(rows, doc.state_labels)
    }
}

fn max_tv_to(rows: &[Dist], pi: &Dist) -> f64 {
    rows.iter()
        .map(|r| tv_distance(r, pi))
        .fold(0.0, f64::max)
}

/// A kernel together with the enumerated states it was built from.
#[derive(Debug, Clone)]
pub struct Enumerated<S> {
    pub kernel: Kernel,
    pub states: Vec<S>,
    index: HashMap<S, usize>,
}

impl<S: Eq + std::hash::Hash> Enumerated<S> {
    pub fn id(&self, s: &S) -> Option<usize> {
        self.index.get(s).copied()
    }

    pub fn state(&self, id: usize) -> &S {
        &self.states[id]
    }
}

/// A kernel viewed as a sampled chain over dense state ids, so imported
/// kernels plug into the trajectory, coupling and tail machinery.
#[derive(Debug, Clone)]
pub struct KernelChain {
    kernel: Kernel,
}

impl KernelChain {
    pub fn new(kernel: Kernel) -> Self {
        KernelChain { kernel }
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }
}

impl crate::chain::Chain for KernelChain {
    type State = usize;

    fn step(&self, x: &usize, rng: &mut crate::rng::ReplicaRng) -> usize {
        let row = self.kernel.row(*x);
        let u = rng.uniform();
        let mut acc = 0.0;
        for (y, &p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                return y;
            }
        }
        // Trailing rounding mass goes to the last positive entry.
        row.iter().rposition(|&p| p > 0.0).unwrap_or(*x)
    }

    fn neighbors(&self, x: &usize) -> Vec<usize> {
        (0..self.kernel.n_states())
            .filter(|&y| y != *x && self.kernel.prob(*x, y) > 0.0)
            .collect()
    }

    fn distance(&self, x: &usize, y: &usize) -> u64 {
        u64::from(self.kernel.metric().get(*x, *y))
    }
}

impl crate::chain::RowChain for KernelChain {
    fn row(&self, x: &usize) -> Vec<(usize, f64)> {
        self.kernel
            .row(*x)
            .iter()
            .enumerate()
            .filter(|&(_, &p)| p > 0.0)
            .map(|(y, &p)| (y, p))
            .collect()
    }
}

impl crate::chain::StateSpace for KernelChain {
    fn states(&self) -> Vec<usize> {
        (0..self.kernel.n_states()).collect()
    }
}

/// JSON formatter that writes every f64 with 17 significant digits.
struct SigDigitFormatter;

impl serde_json::ser::Formatter for SigDigitFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + Write,
    {
        write!(writer, "{value:.16e}")
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// All-pairs shortest paths on the adjacency graph via BFS from each state;
/// errors if the graph is disconnected.
fn bfs_metric(n: usize, p: &[f64]) -> Result<Metric> {
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|x| {
            (0..n)
                .filter(|&y| y != x && p[x * n + y] > 0.0)
                .collect()
        })
        .collect();
    let mut d = vec![u32::MAX; n * n];
    for start in 0..n {
        let row = &mut d[start * n..(start + 1) * n];
        row[start] = 0;
        let mut queue = VecDeque::new();
        queue.push_back(start);
        while let Some(x) = queue.pop_front() {
            for &y in &adj[x] {
                if row[y] == u32::MAX {
                    row[y] = row[x] + 1;
                    queue.push_back(y);
                }
            }
        }
        let missing = row.iter().filter(|&&v| v == u32::MAX).count();
        if missing > 0 {
            return Err(Error::NotConnected { missing });
        }
    }
    Ok(Metric { n, d })
}
