//! Small numerical helpers shared across the crate: order-fixed reductions,
//! quadrature weights, C^2 window functions and least-squares slopes.

/// Pairwise (cascade) summation. Associativity is fixed by the recursion, so
/// the result is independent of caller iteration order and reproducible
/// bit-for-bit, while the error constant stays O(log n) rather than O(n).
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

/// n + 1 equally spaced points covering [a, b] inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(n >= 1);
    let h = (b - a) / n as f64;
    (0..=n).map(|i| a + h * i as f64).collect()
}

/// Trapezoid weight for node i of an (n+1)-point uniform grid with spacing h.
#[inline]
pub fn trapezoid_weight(i: usize, n: usize, h: f64) -> f64 {
    if i == 0 || i == n {
        0.5 * h
    } else {
        h
    }
}

/// Quintic smoothstep on [0, 1]: s^3 (10 - 15 s + 6 s^2). C^2 at both ends
/// (value, first and second derivative vanish at 0; value 1, derivatives
/// vanish at 1). Returns (value, d/ds, d2/ds2) with clamping outside [0, 1].
pub fn smoothstep5(s: f64) -> (f64, f64, f64) {
    if s <= 0.0 {
        (0.0, 0.0, 0.0)
    } else if s >= 1.0 {
        (1.0, 0.0, 0.0)
    } else {
        let s2 = s * s;
        let s3 = s2 * s;
        let v = s3 * (10.0 - 15.0 * s + 6.0 * s2);
        let d = 30.0 * s2 * (1.0 - 2.0 * s + s2);
        let dd = 60.0 * s * (1.0 - 3.0 * s + 2.0 * s2);
        (v, d, dd)
    }
}

/// Least-squares slope of y against x. Panics if fewer than two points.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    assert!(x.len() >= 2);
    let n = x.len() as f64;
    let mx = pairwise_sum(x) / n;
    let my = pairwise_sum(y) / n;
    let sxy: Vec<f64> = x.iter().zip(y).map(|(&a, &b)| (a - mx) * (b - my)).collect();
    let sxx: Vec<f64> = x.iter().map(|&a| (a - mx) * (a - mx)).collect();
    pairwise_sum(&sxy) / pairwise_sum(&sxx)
}

/// Sample mean and standard error of the mean.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    assert!(n >= 2, "need at least two samples");
    let mean = pairwise_sum(xs) / n as f64;
    let devs: Vec<f64> = xs.iter().map(|&x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&devs) / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_naive_on_small_input() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(pairwise_sum(&xs), 15.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
        assert_eq!(pairwise_sum(&[7.5]), 7.5);
    }

    #[test]
    fn pairwise_is_permutation_stable_for_exact_inputs() {
        // Integers are exact in f64, so any order must give the same bits.
        let a: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        let b: Vec<f64> = (0..1000).rev().map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&a), pairwise_sum(&b));
    }

    #[test]
    fn smoothstep_is_c2_at_the_ends() {
        let (v0, d0, dd0) = smoothstep5(1e-9);
        assert!(v0 < 1e-20 && d0 < 1e-12 && dd0 < 1e-6);
        let (v1, d1, dd1) = smoothstep5(1.0 - 1e-9);
        assert!((v1 - 1.0).abs() < 1e-12 && d1.abs() < 1e-12 && dd1.abs() < 1e-6);
        let (vh, _, _) = smoothstep5(0.5);
        assert!((vh - 0.5).abs() < 1e-15);
    }

    #[test]
    fn smoothstep_derivatives_match_differences() {
        for &s in &[0.2, 0.5, 0.8] {
            let eps = 1e-6;
            let (_, d, dd) = smoothstep5(s);
            let (vp, dp, _) = smoothstep5(s + eps);
            let (vm, dm, _) = smoothstep5(s - eps);
            assert!((d - (vp - vm) / (2.0 * eps)).abs() < 1e-8);
            assert!((dd - (dp - dm) / (2.0 * eps)).abs() < 1e-7);
        }
    }

    #[test]
    fn slope_of_exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y = [3.0, 5.0, 7.0, 9.0];
        assert!((ls_slope(&x, &y) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn mean_and_se_on_known_sample() {
        let (m, se) = mean_and_se(&[1.0, 2.0, 3.0, 4.0]);
        assert!((m - 2.5).abs() < 1e-15);
        // Sample variance 5/3, SE = sqrt(5/12).
        assert!((se - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
    }
}
