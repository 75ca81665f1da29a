//! Small shared helpers: fixed-order parallel map, numeric formatting.

use rayon::prelude::*;

/// Map `f` over replica indices `0..replicas` in parallel, returning results
/// in replica order. Reductions over the returned vector are therefore
/// schedule-independent.
pub fn replica_map<R, F>(replicas: u64, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(u64) -> R + Sync + Send,
{
    (0..replicas).into_par_iter().map(f).collect()
}

/// Format a float with 17 significant digits, the table interchange format
/// used by every CSV emitter in the workspace.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        // Avoid "-0" leaking into golden files.
        return "0.0000000000000000e0".to_string();
    }
    format!("{x:.16e}")
}

/// Render one CSV row; fields are joined with ',' and terminated with '\n'.
pub fn csv_row(fields: &[String]) -> String {
    let mut s = fields.join(",");
    s.push('\n');
    s
}

/// Sample standard deviation (n-1 denominator); 0 for fewer than 2 samples.
pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let ss = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>();
    (ss / (n - 1.0)).sqrt()
}

/// Binomial standard error of an empirical frequency.
pub fn binomial_se(freq: f64, n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    (freq * (1.0 - freq) / n as f64).sqrt()
}

/// log(sum(exp(xs))) with the usual max shift.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fmt_has_17_significant_digits() {
        assert_eq!(fmt_f64(0.25), "2.5000000000000000e-1");
        assert_eq!(fmt_f64(1.0), "1.0000000000000000e0");
        assert_eq!(fmt_f64(0.0), "0.0000000000000000e0");
        assert_eq!(fmt_f64(-0.0), "0.0000000000000000e0");
    }

    #[test]
    fn replica_map_is_order_fixed() {
        let a = replica_map(100, |r| r * r);
        let expected: Vec<u64> = (0..100).map(|r| r * r).collect();
        assert_eq!(a, expected);
    }

    #[test]
    fn log_sum_exp_matches_direct() {
        let xs = [0.0, (2.0f64).ln(), (3.0f64).ln()];
        assert!((log_sum_exp(&xs) - (6.0f64).ln()).abs() < 1e-12);
    }
}
