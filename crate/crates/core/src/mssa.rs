//! The multivariate singular-spectrum detector.
//!
//! Pipeline: lag-embed the (normalized) series, eigendecompose the lag
//! covariance, keep the leading subspace as the model of normal traffic, and
//! score each sliding window by the norm of its residual against that
//! subspace. The residual threshold comes from the tail-eigenvalue
//! Q-statistic at a target false-alarm rate, or from a fixed value.
//!
//! Component reconstruction (diagonal averaging of the rank-1 terms) and
//! weighted-correlation grouping support choosing the subspace dimension.

use crate::detection::DetectionResult;
use crate::eig::{symmetric_eigen, SymmetricEigen};
use crate::error::{Error, Result};
use crate::hankel::{embed, hankelize_rank_one, TrajectoryMatrix};
use crate::matrix::{dot, vec_norm, Matrix};
use crate::scalar::Scalar;
use crate::stats::standard_normal_upper_quantile;
use crate::timeseries::FlowSeries;

/// Eigen-structure of the lag covariance of a trajectory matrix.
///
/// `eigenvalues` are sorted descending and clamped at zero; `eigenvectors`
/// holds the orthonormal basis as columns. Together with the trajectory
/// matrix they generate the rank-1 expansion `Y = Σᵢ (Y·uᵢ)·uᵢᵀ`, whose
/// normalized right factors are exposed by [`right_vectors`].
#[derive(Debug, Clone)]
pub struct SpectralDecomposition<T> {
    pub eigenvalues: Vec<T>,
    pub eigenvectors: Matrix<T>,
}

impl<T: Scalar> SpectralDecomposition<T> {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }
}

/// `C = Yᵀ·Y` under the rows-are-windows convention; exactly symmetric.
pub fn lag_covariance<T: Scalar>(traj: &TrajectoryMatrix<T>) -> Matrix<T> {
    traj.data().gram()
}

/// Eigendecomposition of a symmetric matrix, sorted descending with small
/// negative eigenvalues clamped to zero. Rejects matrices that are not
/// symmetric to within `1e-8` of their magnitude.
pub fn decompose<T: Scalar>(c: &Matrix<T>) -> Result<SpectralDecomposition<T>> {
    if !c.is_square() {
        return Err(Error::Shape("covariance must be square".to_string()));
    }
    let scale = c.max_abs().max(T::one());
    if c.max_asymmetry() > T::of(1e-8) * scale {
        return Err(Error::Shape(
            "matrix is not symmetric within tolerance".to_string(),
        ));
    }
    let SymmetricEigen { values, vectors } = symmetric_eigen(c)?;
    let clamped = values
        .iter()
        .map(|&l| if l < T::zero() { T::zero() } else { l })
        .collect();
    Ok(SpectralDecomposition {
        eigenvalues: clamped,
        eigenvectors: vectors,
    })
}

/// Normalized right factors of the expansion: column `i` is `Y·uᵢ / √λᵢ`
/// (zero where the eigenvalue vanishes), so that
/// `Y = Σᵢ √λᵢ · rᵢ · uᵢᵀ`.
pub fn right_vectors<T: Scalar>(
    traj: &TrajectoryMatrix<T>,
    dec: &SpectralDecomposition<T>,
) -> Matrix<T> {
    let n_w = traj.n_windows();
    let dim = dec.dim();
    let mut out = Matrix::zeros(n_w, dim);
    let lam1 = dec.eigenvalues.first().copied().unwrap_or(T::zero());
    let floor = lam1 * T::of(1e-24);
    for i in 0..dim {
        let lam = dec.eigenvalues[i];
        if lam <= floor || lam <= T::zero() {
            continue;
        }
        let sigma = lam.sqrt();
        let u = dec.eigenvectors.col(i);
        let w = traj.data().mul_vec(&u);
        for (r, &val) in w.iter().enumerate() {
            out[(r, i)] = val / sigma;
        }
    }
    out
}

/// The retained subspace of normal traffic: the first `k` eigenvectors.
#[derive(Debug, Clone)]
pub struct SubspaceModel<T> {
    pub basis: Matrix<T>,
    pub k: usize,
    pub ell: usize,
    pub m: usize,
    /// Full training spectrum, kept for thresholding.
    pub train_eigenvalues: Vec<T>,
}

impl<T: Scalar> SubspaceModel<T> {
    pub fn dim(&self) -> usize {
        self.ell * self.m
    }
}

/// Takes the top-`k` eigenvectors as the normal-traffic subspace.
pub fn build_subspace<T: Scalar>(
    dec: &SpectralDecomposition<T>,
    k: usize,
    ell: usize,
    m: usize,
) -> Result<SubspaceModel<T>> {
    let dim = dec.dim();
    if ell * m != dim {
        return Err(Error::Shape(format!(
            "decomposition dim {dim} does not match ell*m = {}",
            ell * m
        )));
    }
    if k < 1 || k > dim {
        return Err(Error::parameter(
            "k",
            format!("retained dimension must be in 1..={dim}, got {k}"),
        ));
    }
    Ok(SubspaceModel {
        basis: dec.eigenvectors.columns(0, k),
        k,
        ell,
        m,
        train_eigenvalues: dec.eigenvalues.clone(),
    })
}

/// Euclidean distance of a window from its projection onto the model
/// subspace, `‖z − U_k U_kᵀ z‖`. Windows that are in-span up to roundoff
/// score exactly zero.
pub fn deviation_score<T: Scalar>(model: &SubspaceModel<T>, window: &[T]) -> Result<T> {
    if window.len() != model.dim() {
        return Err(Error::Shape(format!(
            "window length {} does not match model dim {}",
            window.len(),
            model.dim()
        )));
    }
    let coords = model.basis.tr_mul_vec(window);
    let proj = model.basis.mul_vec(&coords);
    let mut ss = T::zero();
    for (z, p) in window.iter().zip(&proj) {
        let d = *z - *p;
        ss += d * d;
    }
    let e = ss.sqrt();
    let znorm = vec_norm(window);
    let snap = T::epsilon() * T::of_usize(model.dim().max(16)) * T::of(8.0);
    if e <= snap * znorm {
        Ok(T::zero())
    } else {
        Ok(e)
    }
}

/// Sums the selected rank-1 terms of the expansion and diagonal-averages
/// them back into a series. Component indices are zero-based in eigenvalue
/// order; an empty selection yields the zero series.
pub fn reconstruct_components<T: Scalar>(
    traj: &TrajectoryMatrix<T>,
    dec: &SpectralDecomposition<T>,
    indices: &[usize],
) -> Result<FlowSeries<T>> {
    let dim = traj.dim();
    if dec.dim() != dim {
        return Err(Error::Shape(
            "decomposition does not match trajectory".to_string(),
        ));
    }
    let n = traj.series_len();
    let m = traj.n_features();
    let mut acc = Matrix::zeros(n, m);
    for &i in indices {
        if i >= dim {
            return Err(Error::parameter(
                "indices",
                format!("component {i} out of range 0..{dim}"),
            ));
        }
        let u = dec.eigenvectors.col(i);
        let w = traj.data().mul_vec(&u);
        let part = hankelize_rank_one(traj, &w, &u)?;
        for r in 0..n {
            for c in 0..m {
                acc[(r, c)] += part.value(r, c);
            }
        }
    }
    FlowSeries::new(
        acc,
        traj.bin_seconds(),
        traj.feature_names().to_vec(),
        traj.start_time(),
    )
}

/// Weighted correlations between all reconstructed elementary components.
#[derive(Debug, Clone)]
pub struct WCorrMatrix<T> {
    pub rho: Matrix<T>,
    pub weights: Vec<T>,
}

/// The series weights `w_t = min{t, ℓ, n − ℓ}` (1-based `t`).
pub fn wcorr_weights<T: Scalar>(n: usize, ell: usize) -> Vec<T> {
    (1..=n)
        .map(|t| T::of_usize(t.min(ell).min(n - ell)))
        .collect()
}

fn weighted_inner<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>, weights: &[T]) -> T {
    let mut acc = T::zero();
    for (t, &w) in weights.iter().enumerate() {
        acc += w * dot(a.row(t), b.row(t));
    }
    acc
}

/// Pairwise weighted correlations of all elementary reconstructed series.
/// Components with zero weighted norm get a zero row and column.
pub fn wcorrelation<T: Scalar>(
    traj: &TrajectoryMatrix<T>,
    dec: &SpectralDecomposition<T>,
) -> Result<WCorrMatrix<T>> {
    let dim = traj.dim();
    if dec.dim() != dim {
        return Err(Error::Shape(
            "decomposition does not match trajectory".to_string(),
        ));
    }
    let n = traj.series_len();
    let weights = wcorr_weights::<T>(n, traj.ell());

    let mut components: Vec<Matrix<T>> = Vec::with_capacity(dim);
    for i in 0..dim {
        let u = dec.eigenvectors.col(i);
        let w = traj.data().mul_vec(&u);
        components.push(hankelize_rank_one(traj, &w, &u)?.values().clone());
    }

    let mut cov = Matrix::zeros(dim, dim);
    for i in 0..dim {
        for j in i..dim {
            let v = weighted_inner(&components[i], &components[j], &weights);
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    let sigmas: Vec<T> = (0..dim)
        .map(|i| cov[(i, i)].max(T::zero()).sqrt())
        .collect();
    let max_sigma = sigmas.iter().fold(T::zero(), |a, &s| a.max(s));
    let floor = max_sigma * T::of(1e-12);
    let mut rho = Matrix::zeros(dim, dim);
    for i in 0..dim {
        if sigmas[i] <= floor {
            continue;
        }
        rho[(i, i)] = T::one();
        for j in (i + 1)..dim {
            if sigmas[j] <= floor {
                continue;
            }
            let r = cov[(i, j)] / (sigmas[i] * sigmas[j]);
            rho[(i, j)] = r;
            rho[(j, i)] = r;
        }
    }
    Ok(WCorrMatrix { rho, weights })
}

/// How to pick the retained component set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GroupStrategy<T> {
    /// Smallest prefix `{1..k}` whose maximum absolute w-correlation with its
    /// complement falls below the cutoff.
    LeadingBlock { cutoff: T },
    /// The fixed prefix `{1..k}`.
    Fixed(usize),
}

/// Outcome of component grouping: the prefix length and whether any prefix
/// actually separated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroupSelection {
    pub k: usize,
    pub low_separability: bool,
}

impl GroupSelection {
    pub fn indices(&self) -> Vec<usize> {
        (0..self.k).collect()
    }
}

/// Picks the retained prefix from the w-correlation structure.
pub fn select_group<T: Scalar>(
    wcorr: &WCorrMatrix<T>,
    strategy: GroupStrategy<T>,
) -> GroupSelection {
    let dim = wcorr.rho.rows();
    match strategy {
        GroupStrategy::Fixed(k) => GroupSelection {
            k: k.clamp(1, dim.max(1)),
            low_separability: false,
        },
        GroupStrategy::LeadingBlock { cutoff } => {
            for k in 1..dim {
                let mut worst = T::zero();
                for i in 0..k {
                    for j in k..dim {
                        let r = wcorr.rho[(i, j)].abs();
                        if r > worst {
                            worst = r;
                        }
                    }
                }
                if worst < cutoff {
                    return GroupSelection {
                        k,
                        low_separability: false,
                    };
                }
            }
            GroupSelection {
                k: 1,
                low_separability: true,
            }
        }
    }
}

/// Which constant multiplies the first bracket term of the Q-statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QBetaVariant {
    /// The standard-normal upper-β quantile (the Q-statistic literature).
    NormalQuantile,
    /// The literal `1 − β` factor, kept for compatibility.
    OneMinusBeta,
}

/// The upper-β quantile approximation for the squared residual, built from
/// the tail-eigenvalue moments `φᵢ = Σ λʲᵢ` and the exponent
/// `h = 1 − 2φ₁φ₃ / 3φ₂²`. Returns zero for an empty or all-zero tail, and
/// zero whenever the approximation degenerates (non-finite or negative).
pub fn q_beta_threshold_with<T: Scalar>(
    tail_eigenvalues: &[T],
    beta: T,
    variant: QBetaVariant,
) -> Result<T> {
    if beta <= T::zero() || beta >= T::one() {
        return Err(Error::parameter("beta", "must lie strictly in (0, 1)"));
    }
    let mut phi1 = T::zero();
    let mut phi2 = T::zero();
    let mut phi3 = T::zero();
    for &l in tail_eigenvalues {
        let l = l.max(T::zero());
        phi1 += l;
        phi2 += l * l;
        phi3 += l * l * l;
    }
    if phi1 <= T::zero() || phi2 <= T::zero() {
        return Ok(T::zero());
    }
    let h = T::one() - T::of(2.0) * phi1 * phi3 / (T::of(3.0) * phi2 * phi2);
    if h == T::zero() {
        return Ok(T::zero());
    }
    let c = match variant {
        QBetaVariant::NormalQuantile => T::of(standard_normal_upper_quantile(beta.as_f64())),
        QBetaVariant::OneMinusBeta => T::one() - beta,
    };
    let bracket = c * (T::of(2.0) * phi2 * h * h).sqrt() / phi1
        + T::one()
        + phi2 * h * (h - T::one()) / (phi1 * phi1);
    if bracket <= T::zero() {
        return Ok(T::zero());
    }
    let q = phi1 * bracket.powf(T::one() / h);
    if !q.is_finite() || q < T::zero() {
        return Ok(T::zero());
    }
    Ok(q)
}

/// [`q_beta_threshold_with`] using the standard-normal quantile variant.
pub fn q_beta_threshold<T: Scalar>(tail_eigenvalues: &[T], beta: T) -> Result<T> {
    q_beta_threshold_with(tail_eigenvalues, beta, QBetaVariant::NormalQuantile)
}

/// Retained-dimension selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KSelection<T> {
    Fixed(usize),
    /// Choose via [`select_group`] with the leading-block strategy on the
    /// training window.
    Auto {
        cutoff: T,
    },
}

/// Alarm threshold selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdMode<T> {
    /// Q-statistic at false-alarm rate β, applied to the squared residual.
    QBeta,
    /// Fixed threshold on the residual norm itself.
    Fixed(T),
}

/// Detector configuration.
#[derive(Debug, Clone)]
pub struct DetectorConfig<T> {
    pub ell: usize,
    pub k: KSelection<T>,
    pub beta: T,
    pub train_bins: usize,
    pub threshold_mode: ThresholdMode<T>,
    /// Scale each feature to unit training variance in addition to
    /// centering.
    pub standardize: bool,
    /// Fit the model on the whole series instead of the training prefix.
    pub fit_on_all: bool,
    pub q_variant: QBetaVariant,
}

impl<T: Scalar> Default for DetectorConfig<T> {
    fn default() -> Self {
        DetectorConfig {
            ell: 8,
            k: KSelection::Auto { cutoff: T::of(0.3) },
            beta: T::of(1e-3),
            train_bins: 256,
            threshold_mode: ThresholdMode::QBeta,
            standardize: false,
            fit_on_all: false,
            q_variant: QBetaVariant::NormalQuantile,
        }
    }
}

/// Fitted detector state, exposed for reuse across traces that share one
/// training window.
#[derive(Debug, Clone)]
pub struct FittedDetector<T> {
    pub model: SubspaceModel<T>,
    pub threshold: T,
    pub means: Vec<T>,
    pub scales: Vec<T>,
    pub selection: GroupSelection,
}

fn normalize_row<T: Scalar>(row: &[T], means: &[T], scales: &[T], out: &mut [T]) {
    for ((o, &v), (&mu, &sc)) in out.iter_mut().zip(row).zip(means.iter().zip(scales)) {
        *o = (v - mu) / sc;
    }
}

/// Fits the subspace model and threshold on the training prefix.
pub fn fit<T: Scalar>(
    series: &FlowSeries<T>,
    config: &DetectorConfig<T>,
) -> Result<FittedDetector<T>> {
    let n = series.n_bins();
    let m = series.n_features();
    if config.ell < 1 {
        return Err(Error::parameter("ell", "window length must be >= 1"));
    }
    if config.beta <= T::zero() || config.beta >= T::one() {
        return Err(Error::parameter("beta", "must lie strictly in (0, 1)"));
    }
    let train_bins = if config.fit_on_all {
        n
    } else {
        config.train_bins
    };
    if train_bins < config.ell + 1 {
        return Err(Error::parameter(
            "train_bins",
            format!(
                "training window must hold at least ell+1 = {} bins",
                config.ell + 1
            ),
        ));
    }
    if !config.fit_on_all && n < config.train_bins + config.ell {
        return Err(Error::parameter(
            "series",
            format!(
                "series of {n} bins is too short for train_bins {} + ell {}",
                config.train_bins, config.ell
            ),
        ));
    }

    let train = series.slice_bins(0, train_bins)?;
    let (mut means, mut scales) = {
        let (_, means) = crate::timeseries::center(&train);
        (means, vec![T::one(); m])
    };
    if config.standardize {
        let (_, mu, sc) = crate::timeseries::standardize(&train);
        means = mu;
        scales = sc;
    }

    let norm_values = Matrix::from_fn(train_bins, m, |r, c| {
        (train.value(r, c) - means[c]) / scales[c]
    });
    let norm_train = train.with_values(norm_values)?;
    let traj = embed(&norm_train, config.ell)?;
    let dec = decompose(&lag_covariance(&traj))?;

    let selection = match config.k {
        KSelection::Fixed(k) => GroupSelection {
            k,
            low_separability: false,
        },
        KSelection::Auto { cutoff } => select_group(
            &wcorrelation(&traj, &dec)?,
            GroupStrategy::LeadingBlock { cutoff },
        ),
    };
    let model = build_subspace(&dec, selection.k, config.ell, m)?;

    let threshold = match config.threshold_mode {
        ThresholdMode::Fixed(v) => v,
        ThresholdMode::QBeta => {
            // The Q-statistic wants eigenvalues of the window covariance, so
            // the Gram spectrum is scaled by the training window count.
            let n_w = T::of_usize(traj.n_windows());
            let lam1 = dec.eigenvalues.first().copied().unwrap_or(T::zero());
            let floor = lam1 * T::of(1e-12);
            let tail: Vec<T> = dec.eigenvalues[selection.k..]
                .iter()
                .map(|&l| if l < floor { T::zero() } else { l / n_w })
                .collect();
            q_beta_threshold_with(&tail, config.beta, config.q_variant)?
                .max(T::zero())
                .sqrt()
        }
    };

    Ok(FittedDetector {
        model,
        threshold,
        means,
        scales,
        selection,
    })
}

/// Scores every window of the series against a fitted model. The score of
/// the window ending at bin `t` is attributed to bin `t` (the newest sample
/// in the window); the first `ell − 1` bins have no complete window and
/// score zero.
pub fn score<T: Scalar>(
    series: &FlowSeries<T>,
    fitted: &FittedDetector<T>,
) -> Result<DetectionResult<T>> {
    let n = series.n_bins();
    let m = series.n_features();
    let ell = fitted.model.ell;
    if m != fitted.model.m {
        return Err(Error::Shape("feature count differs from fit".to_string()));
    }
    if n < ell {
        return Err(Error::parameter("series", "shorter than one window"));
    }
    let mut scores = vec![T::zero(); n];
    let mut window = vec![T::zero(); ell * m];
    let mut norm_row = vec![T::zero(); m];
    // Ring of normalized rows laid out in block form on the fly.
    #[allow(clippy::needless_range_loop)]
    for t in 0..n {
        normalize_row(series.row(t), &fitted.means, &fitted.scales, &mut norm_row);
        // Shift each feature block left by one and append.
        for q in 0..m {
            let base = q * ell;
            for j in 0..ell - 1 {
                window[base + j] = window[base + j + 1];
            }
            window[base + ell - 1] = norm_row[q];
        }
        if t + 1 >= ell {
            scores[t] = deviation_score(&fitted.model, &window)?;
        }
    }
    Ok(DetectionResult::new(
        "mssa",
        scores,
        fitted.threshold,
        series.start_time(),
        series.bin_seconds(),
    ))
}

/// End-to-end detection: fit on the training prefix, score everything.
pub fn detect<T: Scalar>(
    series: &FlowSeries<T>,
    config: &DetectorConfig<T>,
) -> Result<DetectionResult<T>> {
    let fitted = fit(series, config)?;
    score(series, &fitted)
}
