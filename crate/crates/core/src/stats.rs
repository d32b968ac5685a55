//! Small statistical helpers: moments and the standard normal quantile.

use crate::scalar::Scalar;

/// Arithmetic mean; zero for an empty slice.
pub fn mean<T: Scalar>(xs: &[T]) -> T {
    if xs.is_empty() {
        return T::zero();
    }
    xs.iter().fold(T::zero(), |a, &x| a + x) / T::of_usize(xs.len())
}

/// Sample variance with the `n − 1` denominator; zero when fewer than two
/// samples.
pub fn sample_variance<T: Scalar>(xs: &[T]) -> T {
    if xs.len() < 2 {
        return T::zero();
    }
    let m = mean(xs);
    let ss = xs
        .iter()
        .map(|&x| (x - m) * (x - m))
        .fold(T::zero(), |a, x| a + x);
    ss / T::of_usize(xs.len() - 1)
}

/// Sample standard deviation (`n − 1` denominator).
pub fn sample_std<T: Scalar>(xs: &[T]) -> T {
    sample_variance(xs).sqrt()
}

/// Population variance (`n` denominator).
pub fn population_variance<T: Scalar>(xs: &[T]) -> T {
    if xs.is_empty() {
        return T::zero();
    }
    let m = mean(xs);
    xs.iter()
        .map(|&x| (x - m) * (x - m))
        .fold(T::zero(), |a, x| a + x)
        / T::of_usize(xs.len())
}

/// Lower quantile of the standard normal distribution (inverse CDF).
///
/// Acklam's rational approximation; relative error below `1.2e-9` over the
/// whole open interval, which is far tighter than any threshold tolerance in
/// this crate. Panics outside `(0, 1)`.
pub fn standard_normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile probability must be in (0,1)");

    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383_577_518_672_69e2,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];

    const P_LOW: f64 = 0.02425;
    const P_HIGH: f64 = 1.0 - P_LOW;

    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= P_HIGH {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -((((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0))
    }
}

/// Upper quantile `z` with `P(Z > z) = alpha` for a standard normal `Z`.
pub fn standard_normal_upper_quantile(alpha: f64) -> f64 {
    standard_normal_quantile(1.0 - alpha)
}

/// Threshold for the empirical upper quantile at the given exceedance rate:
/// the smallest training value such that at most `floor(rate·n)` training
/// values lie strictly above it.
pub fn empirical_upper_threshold<T: Scalar>(values: &[T], rate: f64) -> T {
    assert!(!values.is_empty());
    let mut sorted: Vec<T> = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let allowed = ((rate * values.len() as f64).floor() as usize).min(values.len() - 1);
    sorted[values.len() - 1 - allowed]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_known_values() {
        let cases = [
            (0.5, 0.0),
            (0.95, 1.6448536269514722),
            (0.975, 1.959963984540054),
            (0.999, 3.090232306167813),
            (0.9999, 3.719_016_485_455_68),
            (0.0001, -3.719_016_485_455_68),
        ];
        for (p, z) in cases {
            let got = standard_normal_quantile(p);
            assert!(
                (got - z).abs() < 2e-8,
                "quantile({p}) = {got}, expected {z}"
            );
        }
    }

    #[test]
    fn quantile_symmetry() {
        for &p in &[0.01, 0.1, 0.3, 0.45] {
            let lo = standard_normal_quantile(p);
            let hi = standard_normal_quantile(1.0 - p);
            assert!((lo + hi).abs() < 1e-9);
        }
    }

    #[test]
    fn moments() {
        let xs = [1.0f64, 1.0, 1.0, 0.0];
        assert!((mean(&xs) - 0.75).abs() < 1e-12);
        assert!((sample_std(&xs) - 0.5).abs() < 1e-12);
        let ys = [3.0f64, 0.0, 0.0, 0.0];
        assert!((sample_std(&ys) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn empirical_threshold_small_rates() {
        let scores: Vec<f64> = (0..100).map(|i| i as f64).collect();
        // Rate below 1/n keeps every training point at or below the threshold.
        assert_eq!(empirical_upper_threshold(&scores, 1e-5), 99.0);
        // 5% of 100 = 5 values may exceed.
        assert_eq!(empirical_upper_threshold(&scores, 0.05), 94.0);
    }
}
