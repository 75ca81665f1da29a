//! Python bindings: the exact kernel machinery, the concentration bound
//! family, and the reference-model experiments, importable as `mixlab`.
//!
//! Build with `cargo build --release -p mixlab-py`; the produced
//! `libmixlab.so` imports as `mixlab.so` (see `python/smoke_test.py`).

use mixlab_core::bounds;
use mixlab_core::coupling::{contraction_profile_exact, geometric_alpha, ContractionProfile};
use mixlab_core::exact::{self, Dist, Kernel as CoreKernel};
use mixlab_core::models::{fluid, ising, linext, supermarket};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn dist(weights: Vec<f64>) -> PyResult<Dist> {
    Dist::new(weights).map_err(err)
}

/// Total variation distance between two probability vectors.
#[pyfunction]
fn tv_distance(p: Vec<f64>, q: Vec<f64>) -> PyResult<f64> {
    if p.len() != q.len() {
        return Err(PyValueError::new_err("length mismatch"));
    }
    Ok(exact::tv_distance(&dist(p)?, &dist(q)?))
}

/// An enumerated chain: transition matrix plus its graph metric.
#[pyclass]
struct Kernel {
    inner: CoreKernel,
}

#[pymethods]
impl Kernel {
    /// Parse the JSON triplet schema.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Kernel {
            inner: CoreKernel::from_json_str(text).map_err(err)?,
        })
    }

    /// The Curie–Weiss Glauber kernel on 2ⁿ configurations (n ≤ 12).
    #[staticmethod]
    fn ising(n: usize, beta: f64) -> PyResult<Self> {
        if n > 12 {
            return Err(PyValueError::new_err("ising enumeration capped at n = 12"));
        }
        let chain = ising::IsingChain::new(n, beta).map_err(err)?;
        Ok(Kernel {
            inner: CoreKernel::from_chain(&chain).map_err(err)?.kernel,
        })
    }

    /// The linear-extension walk kernel on n slots.
    #[staticmethod]
    fn linext(n: usize) -> PyResult<Self> {
        let chain = linext::LinextChain::new(n).map_err(err)?;
        Ok(Kernel {
            inner: CoreKernel::from_chain(&chain).map_err(err)?.kernel,
        })
    }

    fn n_states(&self) -> usize {
        self.inner.n_states()
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json_string().map_err(err)
    }

    /// Graph distance between two dense state ids.
    fn distance(&self, x: usize, y: usize) -> u32 {
        self.inner.metric().get(x, y)
    }

    /// `μ Pᵗ` as a new probability vector.
    fn apply(&self, mu: Vec<f64>, t: u64) -> PyResult<Vec<f64>> {
        Ok(self
            .inner
            .apply(&dist(mu)?, t)
            .map_err(err)?
            .weights()
            .to_vec())
    }

    #[pyo3(signature = (tol = 1e-12))]
    fn stationary(&self, tol: f64) -> PyResult<Vec<f64>> {
        Ok(self.inner.stationary(tol).map_err(err)?.weights().to_vec())
    }

    /// Exact Wasserstein distance between two distributions on this chain.
    fn wasserstein(&self, p: Vec<f64>, q: Vec<f64>) -> PyResult<f64> {
        Ok(exact::wasserstein(&dist(p)?, &dist(q)?, self.inner.metric()))
    }

    /// Worst-start distance to stationarity for `t = 0..=t_max`.
    fn distance_curve(&self, t_max: u64) -> PyResult<Vec<f64>> {
        self.inner.distance_curve(t_max).map_err(err)
    }

    #[pyo3(signature = (eps = 0.25, t_cap = 100_000))]
    fn mixing_time(&self, eps: f64, t_cap: u64) -> PyResult<u64> {
        self.inner.mixing_time(eps, t_cap).map_err(err)
    }

    /// Exact contraction profile `α_1..α_t`.
    fn contraction_profile(&self, t: usize) -> PyResult<Vec<f64>> {
        Ok(contraction_profile_exact(&self.inner, t)
            .map_err(err)?
            .alphas)
    }

    /// Exact one-step contraction constant.
    fn geometric_alpha(&self) -> PyResult<f64> {
        geometric_alpha(&self.inner).map_err(err)
    }
}

/// `min(1, 2·exp(−u²/(2 Σ_{i≤t} α_i²)))` on a grid.
#[pyfunction]
fn azuma_bound(alphas: Vec<f64>, t: usize, us: Vec<f64>) -> PyResult<Vec<f64>> {
    let profile = ContractionProfile::exact(alphas);
    let bound = bounds::azuma_bound(&profile, t).map_err(err)?;
    Ok(bound.curve(&us))
}

/// The stationary bound for a geometric profile, in the raw deviation.
#[pyfunction]
fn stationary_bound_geometric(alpha: f64, us: Vec<f64>) -> PyResult<Vec<f64>> {
    let bound = bounds::stationary_bound_geometric(alpha).map_err(err)?;
    Ok(bound.curve(&us))
}

/// `min(1, 2·exp(−u²(1−α²)/(2α²)))` on a grid; requires `0 < α < 1`.
#[pyfunction]
fn geometric_bound(alpha: f64, us: Vec<f64>) -> PyResult<Vec<f64>> {
    let bound = bounds::geometric_bound(alpha).map_err(err)?;
    Ok(bound.curve(&us))
}

/// `min(1, 2·exp(−u²/(4v(1+α̂u/(6v)))))` on a grid.
#[pyfunction]
fn bernstein_bound(v: f64, alpha_hat: f64, us: Vec<f64>) -> PyResult<Vec<f64>> {
    let bound = bounds::bernstein_bound(v, alpha_hat).map_err(err)?;
    Ok(bound.curve(&us))
}

/// `min(1, 2·exp(−2u²/Σ ran_i²))` on a grid.
#[pyfunction]
fn mcdiarmid_bound(ranges: Vec<f64>, us: Vec<f64>) -> PyResult<Vec<f64>> {
    let bound = bounds::mcdiarmid_range_bound(&ranges).map_err(err)?;
    Ok(bound.curve(&us))
}

/// Exact Gibbs magnetisation law: `(values, probabilities)`.
#[pyfunction]
fn ising_gibbs_magnetization(n: usize, beta: f64) -> PyResult<(Vec<i64>, Vec<f64>)> {
    let d = ising::gibbs_magnetization(n, beta).map_err(err)?;
    Ok((d.values, d.probs))
}

/// Bi-modality scan: `(bimodal, witness_c)`.
#[pyfunction]
fn ising_bimodality(n: usize, beta: f64) -> PyResult<(bool, Option<f64>)> {
    let report = ising::bimodality_check(n, beta).map_err(err)?;
    Ok((report.bimodal, report.witness_c))
}

/// The cut-off location `t_n = n·ln n / (2(1−β))`.
#[pyfunction]
fn ising_cutoff_time(n: usize, beta: f64) -> f64 {
    ising::cutoff_time(n, beta)
}

/// One scanned point: `(gamma, t, tv_lower, tv_exact, coalescence_upper)`.
type CutoffRow = (f64, u64, f64, f64, f64);

/// Mixing scan around the cut-off.
#[pyfunction]
fn ising_cutoff_scan(
    n: usize,
    beta: f64,
    gammas: Vec<f64>,
    replicas: u64,
    seed: u64,
) -> PyResult<Vec<CutoffRow>> {
    let points = ising::cutoff_scan(n, beta, &gammas, replicas, seed).map_err(err)?;
    Ok(points
        .into_iter()
        .map(|p| {
            (
                p.gamma,
                p.t,
                p.tv_lower,
                p.tv_magnetization_exact,
                p.coalescence_upper,
            )
        })
        .collect())
}

/// Equilibrium tail value `λ^{1+d+…+d^{k−1}}`.
#[pyfunction]
fn fluid_fixed_point(lambda: f64, d: u32, k: usize) -> f64 {
    fluid::tail_fixed_point(lambda, d, k)
}

/// Integrate the fluid ODE from the all-empty profile; returns `v(0..=k_max)`.
#[pyfunction]
#[pyo3(signature = (lambda, d, t_end, dt = 0.05, k_max = None))]
fn fluid_integrate(
    lambda: f64,
    d: u32,
    t_end: f64,
    dt: f64,
    k_max: Option<usize>,
) -> PyResult<Vec<f64>> {
    let k_max = k_max.unwrap_or_else(|| fluid::default_k_max(lambda, d));
    let out = fluid::integrate(lambda, d, &fluid::FluidProfile::all_empty(k_max), t_end, dt)
        .map_err(err)?;
    Ok(out.v)
}

/// The two-point max-queue location predictor `m_d(n)`.
#[pyfunction]
fn md_predictor(n: usize, lambda: f64, d: u32) -> PyResult<u32> {
    supermarket::md_predictor(n, lambda, d).map_err(err)
}

/// Time-averaged `ℓ(k)/n` for `k = 1..=k_max` after burn-in from empty.
#[pyfunction]
fn supermarket_equilibrium_profile(
    n: usize,
    lambda: f64,
    d: usize,
    burn_in: u64,
    steps: u64,
    k_max: u32,
    seed: u64,
) -> PyResult<Vec<f64>> {
    let chain = supermarket::SupermarketChain::new(n, lambda, d).map_err(err)?;
    Ok(supermarket::equilibrium_profile(&chain, burn_in, steps, k_max, seed).tail_fractions)
}

/// Independent stationary max-queue samples (each replica burns in from
/// empty).
#[pyfunction]
fn supermarket_max_queue_samples(
    n: usize,
    lambda: f64,
    d: usize,
    burn_in: u64,
    samples: u64,
    seed: u64,
) -> PyResult<Vec<u32>> {
    let chain = supermarket::SupermarketChain::new(n, lambda, d).map_err(err)?;
    Ok(supermarket::max_queue_samples(&chain, burn_in, samples, seed))
}

/// Empirical probability that the supermarket chain started empty leaves
/// the interior of `S₀ = {‖x‖₁ ≤ cn, ‖x‖∞ ≤ c·ln n}` within `t` steps;
/// returns `(fraction, standard_error)`. This is the `δ` consumed by the
/// conditional stationary bound.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
fn supermarket_escape_probability(
    n: usize,
    lambda: f64,
    d: usize,
    c: f64,
    t: u64,
    replicas: u64,
    seed: u64,
) -> PyResult<(f64, f64)> {
    let chain = supermarket::SupermarketChain::new(n, lambda, d).map_err(err)?;
    let set = supermarket::norm_restricted_set(n, c);
    let esc = mixlab_core::coupling::escape_probability(
        &chain,
        &set,
        &chain.empty_state(),
        t,
        replicas,
        seed,
    )
    .map_err(err)?;
    Ok((esc.fraction_escaped, esc.standard_error))
}

/// Long-run `(mean, stddev)` of the linear-extension position.
#[pyfunction]
fn linext_position_moments(
    n: usize,
    burn_in: u64,
    samples: usize,
    spacing: u64,
    seed: u64,
) -> PyResult<(f64, f64)> {
    let chain = linext::LinextChain::new(n).map_err(err)?;
    let m = linext::stationary_position_moments(&chain, burn_in, samples, spacing, seed);
    Ok((m.mean, m.stddev))
}

#[pymodule]
fn mixlab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Kernel>()?;
    m.add_function(wrap_pyfunction!(tv_distance, m)?)?;
    m.add_function(wrap_pyfunction!(azuma_bound, m)?)?;
    m.add_function(wrap_pyfunction!(stationary_bound_geometric, m)?)?;
    m.add_function(wrap_pyfunction!(geometric_bound, m)?)?;
    m.add_function(wrap_pyfunction!(bernstein_bound, m)?)?;
    m.add_function(wrap_pyfunction!(mcdiarmid_bound, m)?)?;
    m.add_function(wrap_pyfunction!(ising_gibbs_magnetization, m)?)?;
    m.add_function(wrap_pyfunction!(ising_bimodality, m)?)?;
    m.add_function(wrap_pyfunction!(ising_cutoff_time, m)?)?;
    m.add_function(wrap_pyfunction!(ising_cutoff_scan, m)?)?;
    m.add_function(wrap_pyfunction!(fluid_fixed_point, m)?)?;
    m.add_function(wrap_pyfunction!(fluid_integrate, m)?)?;
    m.add_function(wrap_pyfunction!(md_predictor, m)?)?;
    m.add_function(wrap_pyfunction!(supermarket_equilibrium_profile, m)?)?;
    m.add_function(wrap_pyfunction!(supermarket_max_queue_samples, m)?)?;
    m.add_function(wrap_pyfunction!(supermarket_escape_probability, m)?)?;
    m.add_function(wrap_pyfunction!(linext_position_moments, m)?)?;
    Ok(())
}
