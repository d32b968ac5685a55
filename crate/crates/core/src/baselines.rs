//! The four comparison detectors: Fourier high-pass residual, wavelet
//! residual, Kalman innovations, and the flow-equilibrium (AAV) statistic.
//!
//! Each detector emits the shared [`DetectionResult`]. The spectral pair
//! score the per-bin norm of what their low-frequency baseline cannot
//! explain; the Kalman detector scores normalized one-step innovations; the
//! AAV statistic scores how correlated the per-flow packet deltas of two
//! consecutive bins are.

use crate::detection::DetectionResult;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::stats::{empirical_upper_threshold, mean, sample_std, standard_normal_quantile};
use crate::timeseries::FlowSeries;
use crate::wavelet::{wavedec, waverec, WaveletFilters};

/// Scales features to unit training variance when enabled; mixed-unit
/// features otherwise let the loudest feature dominate the residual norms.
fn training_scales<T: Scalar>(series: &FlowSeries<T>, train_bins: usize, enabled: bool) -> Vec<T> {
    let m = series.n_features();
    if !enabled {
        return vec![T::one(); m];
    }
    let train = train_bins.clamp(2, series.n_bins());
    (0..m)
        .map(|f| {
            let col: Vec<T> = (0..train).map(|b| series.value(b, f)).collect();
            let sd = sample_std(&col);
            if sd > T::zero() {
                sd
            } else {
                T::one()
            }
        })
        .collect()
}

/// Fourier-analysis detector configuration.
#[derive(Debug, Clone)]
pub struct FourierConfig {
    /// Periods shorter than this are treated as residual (default 2 hours).
    pub cutoff_period_seconds: f64,
    pub target_fpr: f64,
    pub train_bins: usize,
    pub standardize: bool,
}

impl Default for FourierConfig {
    fn default() -> Self {
        FourierConfig {
            cutoff_period_seconds: 7200.0,
            target_fpr: 2e-5,
            train_bins: 256,
            standardize: false,
        }
    }
}

/// Dense DFT with an exact twiddle table. The traces this crate works with
/// are a few thousand bins, where the quadratic transform is entirely
/// adequate and has no length restrictions.
fn dft<T: Scalar>(x: &[T], inverse: bool) -> Vec<(T, T)> {
    let n = x.len();
    let sign = if inverse { 1.0 } else { -1.0 };
    let twiddle: Vec<(T, T)> = (0..n)
        .map(|j| {
            let ang = sign * 2.0 * std::f64::consts::PI * j as f64 / n as f64;
            (T::of(ang.cos()), T::of(ang.sin()))
        })
        .collect();
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let mut re = T::zero();
        let mut im = T::zero();
        for (t, &v) in x.iter().enumerate() {
            let (c, s) = twiddle[(k * t) % n];
            re += v * c;
            im += v * s;
        }
        out.push((re, im));
    }
    out
}

fn idft_complex<T: Scalar>(x: &[(T, T)]) -> Vec<(T, T)> {
    let n = x.len();
    let twiddle: Vec<(T, T)> = (0..n)
        .map(|j| {
            let ang = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
            (T::of(ang.cos()), T::of(ang.sin()))
        })
        .collect();
    let inv_n = T::one() / T::of_usize(n);
    let mut out = Vec::with_capacity(n);
    for t in 0..n {
        let mut re = T::zero();
        let mut im = T::zero();
        for (k, &(xr, xi)) in x.iter().enumerate() {
            let (c, s) = twiddle[(k * t) % n];
            re += xr * c - xi * s;
            im += xr * s + xi * c;
        }
        out.push((re * inv_n, im * inv_n));
    }
    out
}

/// Low-pass baseline per feature by zeroing DFT coefficients above the
/// cutoff frequency (cutoff bin inclusive); the score is the Euclidean norm
/// of the per-bin residual across features.
pub fn fourier_detect<T: Scalar>(
    series: &FlowSeries<T>,
    cfg: &FourierConfig,
) -> Result<DetectionResult<T>> {
    let n = series.n_bins();
    let m = series.n_features();
    if n < 4 {
        return Err(Error::parameter("series", "need at least 4 bins"));
    }
    if cfg.cutoff_period_seconds <= 0.0 {
        return Err(Error::parameter(
            "cutoff_period_seconds",
            "must be positive",
        ));
    }
    let scales = training_scales(series, cfg.train_bins, cfg.standardize);
    // Keep k cycles-per-window while k / (n·bin_seconds) <= 1 / period.
    let kc = (n as f64 * series.bin_seconds() as f64 / cfg.cutoff_period_seconds).floor() as usize;

    let mut residual = vec![vec![T::zero(); m]; n];
    for f in 0..m {
        let col: Vec<T> = (0..n).map(|b| series.value(b, f) / scales[f]).collect();
        let mut spec = dft(&col, false);
        for (k, c) in spec.iter_mut().enumerate() {
            let freq_idx = k.min(n - k);
            if freq_idx > kc {
                *c = (T::zero(), T::zero());
            }
        }
        let baseline = idft_complex(&spec);
        for (b, r) in residual.iter_mut().enumerate() {
            r[f] = col[b] - baseline[b].0;
        }
    }
    let scores: Vec<T> = residual
        .iter()
        .map(|r| {
            r.iter()
                .map(|&x| x * x)
                .fold(T::zero(), |a, x| a + x)
                .sqrt()
        })
        .collect();
    let train = cfg.train_bins.clamp(1, n);
    let threshold = empirical_upper_threshold(&scores[..train], cfg.target_fpr);
    Ok(DetectionResult::new(
        "fourier",
        scores,
        threshold,
        series.start_time(),
        series.bin_seconds(),
    ))
}

/// Wavelet-analysis detector configuration.
#[derive(Debug, Clone)]
pub struct WaveletConfig {
    /// Decomposition depth.
    pub levels: usize,
    /// Detail levels `1..=cutoff` are treated as residual.
    pub cutoff_level: usize,
    pub target_fpr: f64,
    pub train_bins: usize,
    pub standardize: bool,
}

impl Default for WaveletConfig {
    fn default() -> Self {
        WaveletConfig {
            levels: 3,
            cutoff_level: 3,
            target_fpr: 2e-5,
            train_bins: 256,
            standardize: false,
        }
    }
}

/// Baseline from the approximation below `cutoff_level` (details at the
/// cutoff and finer zeroed); db6 filters, symmetric extension.
pub fn wavelet_detect<T: Scalar>(
    series: &FlowSeries<T>,
    cfg: &WaveletConfig,
) -> Result<DetectionResult<T>> {
    let n = series.n_bins();
    let m = series.n_features();
    let filters = WaveletFilters::<T>::db6();
    if n < filters.len() {
        return Err(Error::parameter(
            "series",
            format!("need at least {} bins for the db6 filter", filters.len()),
        ));
    }
    if cfg.levels == 0 || cfg.cutoff_level == 0 || cfg.cutoff_level > cfg.levels {
        return Err(Error::parameter(
            "cutoff_level",
            "need 1 <= cutoff_level <= levels",
        ));
    }
    let scales = training_scales(series, cfg.train_bins, cfg.standardize);

    let mut residual = vec![vec![T::zero(); m]; n];
    for f in 0..m {
        let col: Vec<T> = (0..n).map(|b| series.value(b, f) / scales[f]).collect();
        let mut dec = wavedec(&col, &filters, cfg.levels)?;
        let zero_upto = cfg.cutoff_level.min(dec.levels());
        for d in dec.details.iter_mut().take(zero_upto) {
            for v in d.iter_mut() {
                *v = T::zero();
            }
        }
        let baseline = waverec(&dec, &filters)?;
        for (b, r) in residual.iter_mut().enumerate() {
            r[f] = col[b] - baseline[b];
        }
    }
    let scores: Vec<T> = residual
        .iter()
        .map(|r| {
            r.iter()
                .map(|&x| x * x)
                .fold(T::zero(), |a, x| a + x)
                .sqrt()
        })
        .collect();
    let train = cfg.train_bins.clamp(1, n);
    let threshold = empirical_upper_threshold(&scores[..train], cfg.target_fpr);
    Ok(DetectionResult::new(
        "wavelet",
        scores,
        threshold,
        series.start_time(),
        series.bin_seconds(),
    ))
}

/// Kalman innovation detector configuration. Unset variances are estimated
/// from the training prefix (observation noise from first differences, a
/// small fraction of it as process noise).
#[derive(Debug, Clone)]
pub struct KalmanConfig {
    pub target_fpr: f64,
    pub process_var: Option<f64>,
    pub obs_var: Option<f64>,
    pub train_bins: usize,
}

impl Default for KalmanConfig {
    fn default() -> Self {
        KalmanConfig {
            target_fpr: 2e-5,
            process_var: None,
            obs_var: None,
            train_bins: 256,
        }
    }
}

/// Local-level filter per feature; the score is the largest normalized
/// innovation `|y − ŷ|/√S` across features, with the two-sided Gaussian
/// threshold Bonferroni-adjusted for the feature count.
pub fn kalman_detect<T: Scalar>(
    series: &FlowSeries<T>,
    cfg: &KalmanConfig,
) -> Result<DetectionResult<T>> {
    let n = series.n_bins();
    let m = series.n_features();
    if n < 2 {
        return Err(Error::parameter("series", "need at least 2 bins"));
    }
    if !(0.0 < cfg.target_fpr && cfg.target_fpr < 1.0) {
        return Err(Error::parameter("target_fpr", "must lie in (0, 1)"));
    }
    let train = cfg.train_bins.clamp(2, n);

    let mut scores = vec![T::zero(); n];
    for f in 0..m {
        let col = series.column(f);
        let r = match cfg.obs_var {
            Some(v) => T::of(v),
            None => {
                // Var of first differences of (level + noise) is q + 2r;
                // with q small, half of it estimates r.
                let diffs: Vec<T> = col[..train].windows(2).map(|w| w[1] - w[0]).collect();
                crate::stats::population_variance(&diffs) / T::of(2.0)
            }
        };
        let q = match cfg.process_var {
            Some(v) => T::of(v),
            None => r * T::of(0.01),
        };
        let mut level = col[0];
        let mut p = r;
        for (t, &y) in col.iter().enumerate().skip(1) {
            let s = p + q + r;
            let nu = y - level;
            let z = if s > T::zero() {
                nu.abs() / s.sqrt()
            } else if nu == T::zero() {
                T::zero()
            } else {
                T::infinity()
            };
            if z > scores[t] {
                scores[t] = z;
            }
            if s > T::zero() {
                let gain = (p + q) / s;
                level += gain * nu;
                p = (T::one() - gain) * (p + q);
            } else {
                level = y;
            }
        }
    }
    let per_feature_fpr = cfg.target_fpr / m as f64;
    let threshold = T::of(standard_normal_quantile(1.0 - per_feature_fpr / 2.0));
    Ok(DetectionResult::new(
        "kalman",
        scores,
        threshold,
        series.start_time(),
        series.bin_seconds(),
    ))
}

/// Flow-equilibrium detector configuration.
#[derive(Debug, Clone)]
pub struct AstuteConfig {
    pub target_fpr: f64,
    pub train_bins: usize,
    pub standardize: bool,
}

impl Default for AstuteConfig {
    fn default() -> Self {
        AstuteConfig {
            target_fpr: 2e-5,
            train_bins: 256,
            standardize: false,
        }
    }
}

/// The assessment value of one delta vector:
/// `mean(δ) / stdev(δ) · √m` with the sample (n−1) standard deviation.
/// Zero spread with a nonzero mean is the fully correlated limit and maps to
/// the infinity sentinel.
pub fn assessment_value<T: Scalar>(deltas: &[T]) -> T {
    let m = deltas.len();
    let mu = mean(deltas);
    let sd = sample_std(deltas);
    if sd == T::zero() {
        if mu == T::zero() {
            T::zero()
        } else {
            T::infinity()
        }
    } else {
        (mu / sd * T::of_usize(m).sqrt()).abs()
    }
}

/// Scores each bin by `|AAV|` of the per-flow deltas against the previous
/// bin; alarms where it exceeds the two-sided Gaussian quantile for the
/// target false-positive rate.
pub fn astute_detect<T: Scalar>(
    series: &FlowSeries<T>,
    cfg: &AstuteConfig,
) -> Result<DetectionResult<T>> {
    let n = series.n_bins();
    let m = series.n_features();
    if m < 2 {
        return Err(Error::parameter(
            "series",
            "the equilibrium statistic needs at least 2 flows",
        ));
    }
    if !(0.0 < cfg.target_fpr && cfg.target_fpr < 1.0) {
        return Err(Error::parameter("target_fpr", "must lie in (0, 1)"));
    }
    let scales = training_scales(series, cfg.train_bins, cfg.standardize);
    let mut scores = vec![T::zero(); n];
    let mut deltas = vec![T::zero(); m];
    #[allow(clippy::needless_range_loop)]
    for t in 1..n {
        for (f, d) in deltas.iter_mut().enumerate() {
            *d = (series.value(t, f) - series.value(t - 1, f)) / scales[f];
        }
        scores[t] = assessment_value(&deltas);
    }
    let threshold = T::of(standard_normal_quantile(1.0 - cfg.target_fpr / 2.0));
    Ok(DetectionResult::new(
        "astute",
        scores,
        threshold,
        series.start_time(),
        series.bin_seconds(),
    ))
}


#[cfg(test)]
mod roundtrip_tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;

    /// With the cutoff above the Nyquist index the baseline keeps every
    /// coefficient, so baseline + residual reconstructs the series and the
    /// scores vanish: the transform pair is lossless.
    #[test]
    fn fourier_full_band_round_trip() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let vals: Vec<f64> = (0..37).map(|_| rng.random::<f64>() * 100.0).collect();
        let scale = vals.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
        let s = FlowSeries::from_columns(&[vals], 300, vec!["y".into()], 0).unwrap();
        let cfg = FourierConfig {
            cutoff_period_seconds: 1.0, // keeps all frequencies
            ..FourierConfig::default()
        };
        let res = fourier_detect(&s, &cfg).unwrap();
        for &v in &res.scores {
            assert!(v <= 1e-8 * scale, "residual {v}");
        }
    }
}
