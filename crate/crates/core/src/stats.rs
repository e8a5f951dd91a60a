//! Small statistical helpers used by the estimators and the test suite.

/// Sample mean and standard error (ddof = 1). Empty input gives (NaN, NaN);
/// a single observation gives SE = 0.
///
/// Uses Welford's update, so a slice of identical values returns that value
/// bit for bit with SE exactly 0 — degenerate estimators stay exact.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (k, x) in xs.iter().enumerate() {
        let delta = x - mean;
        mean += delta / (k + 1) as f64;
        m2 += delta * (x - mean);
    }
    if n == 1 {
        return (mean, 0.0);
    }
    let var = (m2 / (n - 1) as f64).max(0.0);
    (mean, (var / n as f64).sqrt())
}

/// Kolmogorov-Smirnov statistic of `samples` against the CDF `f`.
/// Sorts a copy of the samples.
pub fn ks_statistic(samples: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let c = f(x);
        d = d.max(c - i as f64 / n).max((i + 1) as f64 / n - c);
    }
    d
}

/// Central differences on a uniform or non-uniform grid, one-sided at the ends.
pub fn central_differences(grid: &[f64], values: &[f64]) -> Vec<f64> {
    assert_eq!(grid.len(), values.len());
    let n = grid.len();
    let mut out = vec![0.0; n];
    if n < 2 {
        return out;
    }
    out[0] = (values[1] - values[0]) / (grid[1] - grid[0]);
    out[n - 1] = (values[n - 1] - values[n - 2]) / (grid[n - 1] - grid[n - 2]);
    for k in 1..n - 1 {
        out[k] = (values[k + 1] - values[k - 1]) / (grid[k + 1] - grid[k - 1]);
    }
    out
}

/// Euclidean norm.
pub fn norm2(xs: &[f64]) -> f64 {
    xs.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_and_se_basics() {
        let (m, se) = mean_and_se(&[1.0, 2.0, 3.0]);
        assert!((m - 2.0).abs() < 1e-15);
        assert!((se - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
        let (m1, se1) = mean_and_se(&[5.0]);
        assert_eq!(m1, 5.0);
        assert_eq!(se1, 0.0);
    }

    #[test]
    fn identical_samples_give_exact_mean_and_zero_se() {
        let xs = vec![0.7; 1000];
        let (m, se) = mean_and_se(&xs);
        assert_eq!(m, 0.7);
        assert_eq!(se, 0.0);
    }

    #[test]
    fn ks_of_exact_uniform_grid_is_small() {
        // midpoints of n equal bins against U(0,1): D = 1/(2n)
        let n = 100;
        let xs: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let d = ks_statistic(&xs, |x| x.clamp(0.0, 1.0));
        assert!((d - 0.5 / n as f64).abs() < 1e-12);
    }

    #[test]
    fn central_differences_of_linear_grid_are_exact() {
        let grid: Vec<f64> = (0..10).map(|i| i as f64 * 0.5).collect();
        let vals: Vec<f64> = grid.iter().map(|t| 3.0 * t + 1.0).collect();
        for d in central_differences(&grid, &vals) {
            assert!((d - 3.0).abs() < 1e-12);
        }
    }
}
