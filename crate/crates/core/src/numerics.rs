//! Small numerical helpers shared across the engines.

/// Neumaier-compensated sum. Keeps the error of long reductions near one
/// ulp of the result, which the reproducibility and closed-form tests
/// rely on.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    compensated_sum(xs.iter().copied()) / xs.len() as f64
}

/// Unbiased sample standard deviation (n-1 denominator).
pub fn sample_std(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss = compensated_sum(xs.iter().map(|x| (x - m) * (x - m)));
    (ss / (n - 1) as f64).sqrt()
}

/// Mean together with the standard error of the mean.
pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let m = mean(xs);
    let se = if xs.len() < 2 {
        0.0
    } else {
        sample_std(xs) / (xs.len() as f64).sqrt()
    };
    (m, se)
}

/// `n` evenly spaced points with both endpoints included (`n >= 2`).
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2, "linspace needs at least two points");
    let step = (b - a) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { b } else { a + i as f64 * step })
        .collect()
}

/// Quantile of a sorted slice by linear interpolation, `q` in [0,1].
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let w = pos - lo as f64;
        sorted[lo] * (1.0 - w) + sorted[hi] * w
    }
}

/// Thomas algorithm for a tridiagonal system. `sub[0]` and
/// `sup[n-1]` are ignored. Returns `None` on a vanishing pivot.
pub fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = diag.len();
    assert!(sub.len() == n && sup.len() == n && rhs.len() == n);
    if n == 0 {
        return Some(Vec::new());
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    if diag[0].abs() < f64::MIN_POSITIVE {
        return None;
    }
    c[0] = sup[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let denom = diag[i] - sub[i] * c[i - 1];
        if denom.abs() < f64::MIN_POSITIVE {
            return None;
        }
        c[i] = sup[i] / denom;
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / denom;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    Some(x)
}

/// Least-squares slope of `ln y` against `ln x`. Points with
/// non-positive coordinates are skipped; returns NaN when fewer than two
/// usable points remain.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_beats_naive_on_cancellation() {
        // 1 + 1e-16 added 1e5 times loses the tail under naive summation.
        let mut xs = vec![1e-16; 100_000];
        xs.insert(0, 1.0);
        let s = compensated_sum(xs.iter().copied());
        assert!((s - (1.0 + 1e-11)).abs() < 1e-24);
    }

    #[test]
    fn mean_of_equal_values_is_exact() {
        let xs = vec![0.001; 100_000];
        assert_eq!(mean(&xs), 0.001);
    }

    #[test]
    fn tridiagonal_solves_identity() {
        let n = 5;
        let x = solve_tridiagonal(&vec![0.0; n], &vec![1.0; n], &vec![0.0; n], &[1., 2., 3., 4., 5.])
            .unwrap();
        assert_eq!(x, vec![1., 2., 3., 4., 5.]);
    }

    #[test]
    fn tridiagonal_matches_dense_solve() {
        let sub = [0.0, -1.0, -0.5, -2.0];
        let diag = [4.0, 5.0, 6.0, 5.0];
        let sup = [-1.0, -2.0, -1.0, 0.0];
        let rhs = [1.0, 2.0, 3.0, 4.0];
        let x = solve_tridiagonal(&sub, &diag, &sup, &rhs).unwrap();
        // Multiply back.
        let n = 4;
        for i in 0..n {
            let mut v = diag[i] * x[i];
            if i > 0 {
                v += sub[i] * x[i - 1];
            }
            if i < n - 1 {
                v += sup[i] * x[i + 1];
            }
            assert!((v - rhs[i]).abs() < 1e-12, "row {i}: {v} vs {}", rhs[i]);
        }
    }

    #[test]
    fn tridiagonal_rejects_singular() {
        assert!(solve_tridiagonal(&[0.0, 0.0], &[0.0, 1.0], &[0.0, 0.0], &[1.0, 1.0]).is_none());
    }

    #[test]
    fn quantiles_interpolate() {
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&xs, 0.0), 0.0);
        assert_eq!(quantile_sorted(&xs, 1.0), 4.0);
        assert_eq!(quantile_sorted(&xs, 0.5), 2.0);
        assert!((quantile_sorted(&xs, 0.625) - 2.5).abs() < 1e-15);
    }

    #[test]
    fn slope_recovers_power_law() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x * x).collect();
        assert!((log_log_slope(&xs, &ys) - 2.0).abs() < 1e-12);
    }
}
