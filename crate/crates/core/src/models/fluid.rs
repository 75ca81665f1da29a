//! Fluid limit of the supermarket model: the tail-fraction profile
//! `v_t(k) ≈ fraction of queues with length ≥ k` solves
//!
//! ```text
//! dv_t(k)/dt = λ (v_t(k−1)^d − v_t(k)^d) − (v_t(k) − v_t(k+1)),   k ≥ 1,
//! ```
//!
//! with `v_t(0) = 1` and monotone initial data. The unique fixed point is
//! `v(k) = λ^{1 + d + … + d^{k−1}}`; its super-geometric decay lets the
//! system be truncated at a `k_max` where the fixed point drops below 1e-14,
//! closing the boundary with `v(k_max + 1) = 0`.

use crate::error::{Error, Result};

/// Tolerance for monotonicity violations after integration.
const MONOTONE_TOL: f64 = 1e-9;

/// Truncation threshold for the automatic `k_max`.
const TRUNCATION_MASS: f64 = 1e-14;

/// A monotone tail profile `v(0) = 1 ≥ v(1) ≥ … ≥ v(k_max) ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct FluidProfile {
    /// `v[k]` for `k = 0..=k_max`.
    pub v: Vec<f64>,
}

impl FluidProfile {
    pub fn new(v: Vec<f64>) -> Result<Self> {
        if v.is_empty() || (v[0] - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(
                "profile must start with v(0) = 1".into(),
            ));
        }
        for w in v.windows(2) {
            if w[1] > w[0] + 1e-12 || w[1] < -1e-12 {
                return Err(Error::InvalidArgument(
                    "profile must be non-increasing within [0,1]".into(),
                ));
            }
        }
        Ok(FluidProfile { v })
    }

    /// The all-empty system: `v(k) = 0` for `k ≥ 1`.
    pub fn all_empty(k_max: usize) -> Self {
        let mut v = vec![0.0; k_max + 1];
        v[0] = 1.0;
        FluidProfile { v }
    }

    pub fn k_max(&self) -> usize {
        self.v.len() - 1
    }
}

/// Exponent `1 + d + … + d^{k−1}` (k terms), as a float to avoid overflow.
fn tail_exponent(d: u32, k: usize) -> f64 {
    let mut sum = 0.0;
    let mut term = 1.0f64;
    for _ in 0..k {
        sum += term;
        term *= f64::from(d);
        if sum > 1e300 {
            break;
        }
    }
    sum
}

/// The equilibrium tail value `λ^{1 + d + … + d^{k−1}}` (`λ^k` for d = 1).
pub fn tail_fixed_point(lambda: f64, d: u32, k: usize) -> f64 {
    if k == 0 {
        return 1.0;
    }
    lambda.powf(tail_exponent(d, k))
}

/// Smallest truncation depth at which the fixed point is below 1e-14.
pub fn default_k_max(lambda: f64, d: u32) -> usize {
    let mut k = 1;
    while tail_fixed_point(lambda, d, k) >= TRUNCATION_MASS && k < 10_000 {
        k += 1;
    }
    k
}

/// The fixed-point profile truncated at `k_max`.
pub fn fixed_point_profile(lambda: f64, d: u32, k_max: usize) -> FluidProfile {
    FluidProfile {
        v: (0..=k_max).map(|k| tail_fixed_point(lambda, d, k)).collect(),
    }
}

fn derivatives(lambda: f64, d: u32, v: &[f64], out: &mut [f64]) {
    let k_max = v.len() - 1;
    let di = d as i32;
    for k in 1..=k_max {
        let above = if k == k_max { 0.0 } else { v[k + 1] };
        out[k] = lambda * (v[k - 1].powi(di) - v[k].powi(di)) - (v[k] - above);
    }
}

/// Integrate the tail ODE with fixed-step fourth-order Runge–Kutta.
///
/// The result is clipped to `[0,1]`; a monotonicity violation beyond 1e-9
/// (a symptom of too large a step) is an error suggesting a smaller `dt`.
pub fn integrate(
    lambda: f64,
    d: u32,
    v0: &FluidProfile,
    t_end: f64,
    dt: f64,
) -> Result<FluidProfile> {
    if !(0.0 < lambda && lambda < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "arrival rate must lie in (0,1), got {lambda}"
        )));
    }
    if d == 0 {
        return Err(Error::InvalidArgument("need d ≥ 1 choices".into()));
    }
    if !(dt > 0.0 && t_end >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "bad integration window t_end={t_end}, dt={dt}"
        )));
    }
    let steps = (t_end / dt).ceil() as u64;
    let m = v0.v.len();
    let mut v = v0.v.clone();
    let mut k1 = vec![0.0; m];
    let mut k2 = vec![0.0; m];
    let mut k3 = vec![0.0; m];
    let mut k4 = vec![0.0; m];
    let mut tmp = vec![0.0; m];
    tmp[0] = 1.0;

    for step in 0..steps {
        derivatives(lambda, d, &v, &mut k1);
        for k in 1..m {
            tmp[k] = v[k] + 0.5 * dt * k1[k];
        }
        derivatives(lambda, d, &tmp, &mut k2);
        for k in 1..m {
            tmp[k] = v[k] + 0.5 * dt * k2[k];
        }
        derivatives(lambda, d, &tmp, &mut k3);
        for k in 1..m {
            tmp[k] = v[k] + dt * k3[k];
        }
        derivatives(lambda, d, &tmp, &mut k4);
        for k in 1..m {
            v[k] += dt / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]);
        }
        // Instability shows up as a monotonicity break; catch it early.
        if step % 1024 == 0 {
            check_monotone(&v, (step + 1) as f64 * dt)?;
        }
    }
    check_monotone(&v, t_end)?;
    for x in v.iter_mut() {
        *x = x.clamp(0.0, 1.0);
    }
    Ok(FluidProfile { v })
}

fn check_monotone(v: &[f64], t: f64) -> Result<()> {
    let mut violation = 0.0f64;
    for w in v.windows(2) {
        violation = violation.max(w[1] - w[0]);
    }
    violation = violation.max(-v[v.len() - 1]);
    if violation > MONOTONE_TOL {
        return Err(Error::OdeUnstable { violation, t });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponent_and_fixed_point_values() {
        assert_eq!(tail_exponent(2, 3), 7.0); // 1 + 2 + 4
        assert_eq!(tail_exponent(1, 5), 5.0);
        assert!((tail_fixed_point(0.9, 2, 2) - 0.9f64.powi(3)).abs() < 1e-15);
        assert!((tail_fixed_point(0.7, 1, 4) - 0.7f64.powi(4)).abs() < 1e-15);
    }

    #[test]
    fn fixed_point_is_stationary_d2() {
        let lambda = 0.7;
        let k_max = default_k_max(lambda, 2);
        let fp = fixed_point_profile(lambda, 2, k_max);
        let out = integrate(lambda, 2, &fp, 10.0, 0.01).unwrap();
        for (a, b) in out.v.iter().zip(&fp.v) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn fixed_point_is_stationary_d1() {
        // For d = 1 the profile λ^k is stationary (single-queue tail law).
        let lambda = 0.5;
        let k_max = default_k_max(lambda, 1);
        let fp = fixed_point_profile(lambda, 1, k_max);
        let out = integrate(lambda, 1, &fp, 10.0, 0.01).unwrap();
        for (a, b) in out.v.iter().zip(&fp.v) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn empty_start_converges_to_fixed_point() {
        let lambda = 0.7;
        let k_max = default_k_max(lambda, 2);
        let out = integrate(lambda, 2, &FluidProfile::all_empty(k_max), 60.0, 0.01).unwrap();
        for k in 0..=k_max {
            assert!(
                (out.v[k] - tail_fixed_point(lambda, 2, k)).abs() < 1e-6,
                "k={k}: {} vs {}",
                out.v[k],
                tail_fixed_point(lambda, 2, k)
            );
        }
    }

    #[test]
    fn two_step_sizes_agree() {
        let lambda = 0.8;
        let k_max = default_k_max(lambda, 2);
        let a = integrate(lambda, 2, &FluidProfile::all_empty(k_max), 20.0, 0.02).unwrap();
        let b = integrate(lambda, 2, &FluidProfile::all_empty(k_max), 20.0, 0.005).unwrap();
        for (x, y) in a.v.iter().zip(&b.v) {
            assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn rejects_bad_profiles_and_parameters() {
        assert!(FluidProfile::new(vec![0.9, 0.5]).is_err());
        assert!(FluidProfile::new(vec![1.0, 0.5, 0.7]).is_err());
        assert!(integrate(1.2, 2, &FluidProfile::all_empty(4), 1.0, 0.01).is_err());
        assert!(integrate(0.5, 0, &FluidProfile::all_empty(4), 1.0, 0.01).is_err());
    }

    #[test]
    fn oversized_step_reports_instability() {
        let lambda = 0.9;
        let k_max = default_k_max(lambda, 2);
        let err = integrate(lambda, 2, &FluidProfile::all_empty(k_max), 400.0, 1.9);
        match err {
            Err(Error::OdeUnstable { .. }) => {}
            other => panic!("expected instability, got {other:?}"),
        }
    }
}
