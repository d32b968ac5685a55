//! Linear dynamical system view: simulation, subspace identification from
//! shifted Hankel factors, and the one-step residual detector.
//!
//! Identification follows the classical shift-invariance argument: factor
//! the block Hankel matrix `H(1) = P·Q` by SVD, read the state transition
//! from `H(2) = P·A·Q`, and take the measurement map from the top block of
//! the observability-style factor. Pseudo-inverses of the rank-`k` factors
//! reduce to diagonal scalings of the singular vectors.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::detection::DetectionResult;
use crate::eig::{cholesky_psd, general_eigenvalues, svd_via_gram, ComplexEigenvalue};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::mssa::{q_beta_threshold_with, QBetaVariant};
use crate::scalar::Scalar;
use crate::timeseries::FlowSeries;

/// A discrete-time linear dynamical system
/// `x(t+1) = A x(t) + w(t)`, `y(t) = C x(t) + v(t)` with Gaussian process
/// and measurement noise of covariance `Q` and `R`.
#[derive(Debug, Clone)]
pub struct LinearDynamicalSystem<T> {
    a: Matrix<T>,
    c: Matrix<T>,
    q_chol: Matrix<T>,
    r_chol: Matrix<T>,
    x0: Vec<T>,
}

impl<T: Scalar> LinearDynamicalSystem<T> {
    pub fn new(a: Matrix<T>, c: Matrix<T>, q: Matrix<T>, r: Matrix<T>, x0: Vec<T>) -> Result<Self> {
        let n = a.rows();
        if !a.is_square() {
            return Err(Error::Shape("A must be square".to_string()));
        }
        if c.cols() != n {
            return Err(Error::Shape("C must have one column per state".to_string()));
        }
        let m = c.rows();
        if q.rows() != n || !q.is_square() {
            return Err(Error::Shape("Q must be n x n".to_string()));
        }
        if r.rows() != m || !r.is_square() {
            return Err(Error::Shape("R must be m x m".to_string()));
        }
        if x0.len() != n {
            return Err(Error::Shape("x0 must have one entry per state".to_string()));
        }
        let scale_q = q.max_abs().max(T::one());
        if q.max_asymmetry() > T::of(1e-10) * scale_q {
            return Err(Error::parameter("Q", "must be symmetric"));
        }
        let scale_r = r.max_abs().max(T::one());
        if r.max_asymmetry() > T::of(1e-10) * scale_r {
            return Err(Error::parameter("R", "must be symmetric"));
        }
        // PSD is enforced by the factorization itself.
        let q_chol = cholesky_psd(&q)?;
        let r_chol = cholesky_psd(&r)?;
        Ok(LinearDynamicalSystem {
            a,
            c,
            q_chol,
            r_chol,
            x0,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.a.rows()
    }

    pub fn obs_dim(&self) -> usize {
        self.c.rows()
    }
}

fn gaussian_vec<T: Scalar>(chol: &Matrix<T>, rng: &mut ChaCha8Rng) -> Vec<T> {
    let n = chol.rows();
    let z: Vec<T> = (0..n)
        .map(|_| {
            let v: f64 = StandardNormal.sample(rng);
            T::of(v)
        })
        .collect();
    chol.mul_vec(&z)
}

/// Simulates the system for `n_steps` observations; deterministic for a
/// fixed seed.
pub fn simulate_lds<T: Scalar>(
    sys: &LinearDynamicalSystem<T>,
    n_steps: usize,
    seed: u64,
) -> Result<FlowSeries<T>> {
    if n_steps < 2 {
        return Err(Error::parameter("n_steps", "need at least 2 observations"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = sys.obs_dim();
    let mut values = Matrix::zeros(n_steps, m);
    let mut x = sys.x0.clone();
    for t in 0..n_steps {
        let noise = gaussian_vec(&sys.r_chol, &mut rng);
        let y = sys.c.mul_vec(&x);
        for q in 0..m {
            values[(t, q)] = y[q] + noise[q];
        }
        let w = gaussian_vec(&sys.q_chol, &mut rng);
        let mut next = sys.a.mul_vec(&x);
        for (nx, wi) in next.iter_mut().zip(&w) {
            *nx += *wi;
        }
        x = next;
    }
    let names = (0..m).map(|q| format!("y{}", q + 1)).collect();
    FlowSeries::new(values, 1, names, 0)
}

/// A rank-`k` system estimate: transition `A_k`, measurement `C_k`, and the
/// balanced Hankel factors `P_k` (observability side) and `Q_k` (state
/// sequence side).
#[derive(Debug, Clone)]
pub struct LdsEstimate<T> {
    pub a_k: Matrix<T>,
    pub c_k: Matrix<T>,
    pub p_k: Matrix<T>,
    pub q_k: Matrix<T>,
    pub k: usize,
    pub ell: usize,
    pub m: usize,
}

impl<T: Scalar> LdsEstimate<T> {
    /// Eigenvalues of the estimated transition: the recovered system poles.
    pub fn poles(&self) -> Result<Vec<ComplexEigenvalue<T>>> {
        general_eigenvalues(&self.a_k)
    }
}

/// Block Hankel matrix in the lags-as-rows orientation: row block `i`
/// (rows `i·m .. (i+1)·m`), column `j` holds `y(i + j + offset)`.
fn block_hankel<T: Scalar>(
    series: &FlowSeries<T>,
    ell: usize,
    offset: usize,
    cols: usize,
) -> Matrix<T> {
    let m = series.n_features();
    Matrix::from_fn(ell * m, cols, |r, j| {
        let lag = r / m;
        let q = r % m;
        series.value(offset + lag + j, q)
    })
}

/// Identifies a rank-`k` model from the shifted Hankel factorization.
pub fn estimate_lds<T: Scalar>(
    series: &FlowSeries<T>,
    ell: usize,
    k: usize,
) -> Result<LdsEstimate<T>> {
    let n = series.n_bins();
    let m = series.n_features();
    if ell < 1 || n < ell + 2 {
        return Err(Error::parameter(
            "ell",
            format!("need n >= ell + 2 to form the shifted pair (n = {n}, ell = {ell})"),
        ));
    }
    let cols = n - ell; // shared column count of H(1) and H(2)
    if k < 1 || k > (ell * m).min(cols) {
        return Err(Error::parameter(
            "k",
            format!("model order must be in 1..={}", (ell * m).min(cols)),
        ));
    }
    let h1 = block_hankel(series, ell, 0, cols);
    let h2 = block_hankel(series, ell, 1, cols);

    let svd = svd_via_gram(&h1)?;
    let sigma1 = svd.sigma.first().copied().unwrap_or(T::zero());
    if sigma1 == T::zero() {
        // The zero matrix factors exactly at any order with zero factors.
        return Ok(LdsEstimate {
            a_k: Matrix::zeros(k, k),
            c_k: Matrix::zeros(m, k),
            p_k: Matrix::zeros(ell * m, k),
            q_k: Matrix::zeros(k, cols),
            k,
            ell,
            m,
        });
    }
    // The Gram route resolves singular values down to about sqrt(eps)
    // relative; anything below that is numerical rank noise.
    let rank = svd
        .sigma
        .iter()
        .filter(|&&s| s > sigma1 * T::of(1e-6))
        .count();
    if k > rank {
        return Err(Error::Rank(format!(
            "requested order {k} exceeds the numerical rank {rank} of H(1)"
        )));
    }

    let sqrt_sigma: Vec<T> = svd.sigma[..k].iter().map(|&s| s.sqrt()).collect();
    let u_k = svd.u.columns(0, k);
    let v_k = svd.v.columns(0, k);

    let p_k = Matrix::from_fn(ell * m, k, |r, c| u_k[(r, c)] * sqrt_sigma[c]);
    let q_k = Matrix::from_fn(k, cols, |r, c| sqrt_sigma[r] * v_k[(c, r)]);

    // A_k = pinv(P_k) · H(2) · pinv(Q_k) = D^{-1/2} U_kᵀ H(2) V_k D^{-1/2}.
    let uth2 = u_k.transpose().matmul(&h2);
    let core = uth2.matmul(&v_k);
    let a_k = Matrix::from_fn(k, k, |r, c| core[(r, c)] / (sqrt_sigma[r] * sqrt_sigma[c]));

    let c_k = Matrix::from_fn(m, k, |r, c| p_k[(r, c)]);

    Ok(LdsEstimate {
        a_k,
        c_k,
        p_k,
        q_k,
        k,
        ell,
        m,
    })
}

/// Threshold policy for the residual detector.
#[derive(Debug, Clone, Copy)]
pub enum LdsThreshold<T> {
    Fixed(T),
    /// Q-statistic on the squared residual, fed with the unexplained tail of
    /// the Hankel spectrum scaled to column covariance.
    QBeta {
        beta: T,
    },
}

/// One-step output residual `‖y(t) − C_k x̂(t)‖` per bin. States are read
/// from the columns of `Q_k` and propagated by `A_k` beyond its horizon,
/// which keeps the detector causal to the end of the series.
pub fn lds_residual<T: Scalar>(
    series: &FlowSeries<T>,
    est: &LdsEstimate<T>,
    threshold: LdsThreshold<T>,
) -> Result<DetectionResult<T>> {
    let n = series.n_bins();
    let m = series.n_features();
    if m != est.m {
        return Err(Error::Shape(format!(
            "estimate was fit on {} features, series has {m}",
            est.m
        )));
    }
    let horizon = est.q_k.cols();
    let mut scores = vec![T::zero(); n];
    let mut x: Vec<T> = vec![T::zero(); est.k];
    #[allow(clippy::needless_range_loop)]
    for t in 0..n {
        if t < horizon {
            x = est.q_k.col(t);
        } else {
            x = est.a_k.mul_vec(&x);
        }
        let yhat = est.c_k.mul_vec(&x);
        let mut ss = T::zero();
        for q in 0..m {
            let d = series.value(t, q) - yhat[q];
            ss += d * d;
        }
        scores[t] = ss.sqrt();
    }

    let thr = match threshold {
        LdsThreshold::Fixed(v) => v,
        LdsThreshold::QBeta { beta } => {
            let svd = svd_via_gram(&block_hankel(series, est.ell, 0, n - est.ell))?;
            let cols = T::of_usize(n - est.ell);
            let tail: Vec<T> = svd.sigma[est.k.min(svd.sigma.len())..]
                .iter()
                .map(|&s| s * s / cols)
                .collect();
            q_beta_threshold_with(&tail, beta, QBetaVariant::NormalQuantile)?
                .max(T::zero())
                .sqrt()
        }
    };

    Ok(DetectionResult::new(
        "lds",
        scores,
        thr,
        series.start_time(),
        series.bin_seconds(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::vec_norm;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn rotation(theta: f64, rho: f64) -> Matrix<f64> {
        Matrix::from_rows(&[
            vec![rho * theta.cos(), -rho * theta.sin()],
            vec![rho * theta.sin(), rho * theta.cos()],
        ])
    }

    fn noiseless(a: Matrix<f64>, c: Matrix<f64>, x0: Vec<f64>) -> LinearDynamicalSystem<f64> {
        let n = a.rows();
        let m = c.rows();
        LinearDynamicalSystem::new(a, c, Matrix::zeros(n, n), Matrix::zeros(m, m), x0).unwrap()
    }

    #[test]
    fn simulate_nilpotent_impulse() {
        let sys = noiseless(Matrix::zeros(2, 2), Matrix::identity(2), vec![3.0, -1.0]);
        let y = simulate_lds(&sys, 4, 0).unwrap();
        assert_eq!(y.row(0), &[3.0, -1.0]);
        for t in 1..4 {
            assert_eq!(y.row(t), &[0.0, 0.0]);
        }
    }

    #[test]
    fn simulate_identity_is_constant() {
        let sys = noiseless(Matrix::identity(2), Matrix::identity(2), vec![2.0, 5.0]);
        let y = simulate_lds(&sys, 6, 1).unwrap();
        for t in 0..6 {
            assert_eq!(y.row(t), &[2.0, 5.0]);
        }
    }

    #[test]
    fn simulate_scalar_decay_closed_form() {
        let sys = noiseless(
            Matrix::from_rows(&[vec![0.9]]),
            Matrix::from_rows(&[vec![1.0]]),
            vec![1.0],
        );
        let y = simulate_lds(&sys, 30, 7).unwrap();
        for t in 0..30 {
            assert!(close(y.value(t, 0), 0.9f64.powi(t as i32), 1e-12));
        }
    }

    #[test]
    fn simulate_is_deterministic_per_seed() {
        let sys = LinearDynamicalSystem::new(
            Matrix::from_rows(&[vec![0.8]]),
            Matrix::from_rows(&[vec![1.0]]),
            Matrix::from_rows(&[vec![0.1]]),
            Matrix::from_rows(&[vec![0.2]]),
            vec![0.0],
        )
        .unwrap();
        let a = simulate_lds(&sys, 50, 99).unwrap();
        let b = simulate_lds(&sys, 50, 99).unwrap();
        assert_eq!(a, b);
        let c = simulate_lds(&sys, 50, 100).unwrap();
        assert_ne!(a, c);
    }

    /// Oracle: the simulator's closed form for a scalar system.
    #[test]
    fn estimate_recovers_scalar_pole() {
        let sys = noiseless(
            Matrix::from_rows(&[vec![0.9]]),
            Matrix::from_rows(&[vec![1.0]]),
            vec![1.0],
        );
        let y = simulate_lds(&sys, 60, 0).unwrap();
        let est = estimate_lds(&y, 4, 1).unwrap();
        let poles = est.poles().unwrap();
        assert_eq!(poles.len(), 1);
        assert!(close(poles[0].0, 0.9, 1e-6), "pole {:?}", poles[0]);
        assert!(poles[0].1.abs() < 1e-9);
    }

    #[test]
    fn estimate_recovers_rotation_poles() {
        let sys = noiseless(
            rotation(0.3, 1.0),
            Matrix::from_rows(&[vec![1.0, 0.0]]),
            vec![1.0, 0.0],
        );
        let y = simulate_lds(&sys, 120, 0).unwrap();
        let est = estimate_lds(&y, 6, 2).unwrap();
        let poles = est.poles().unwrap();
        assert_eq!(poles.len(), 2);
        for &(re, im) in &poles {
            let modulus = (re * re + im * im).sqrt();
            assert!(close(modulus, 1.0, 1e-6), "modulus {modulus}");
            assert!(close(im.abs().atan2(re).abs(), 0.3, 1e-6));
        }
    }

    #[test]
    fn estimate_constant_series_pole_one() {
        let s = FlowSeries::univariate(vec![4.0; 24]).unwrap();
        let est = estimate_lds(&s, 3, 1).unwrap();
        let poles = est.poles().unwrap();
        assert!(close(poles[0].0, 1.0, 1e-8));
    }

    #[test]
    fn estimate_rejects_orders_above_rank() {
        let sys = noiseless(
            Matrix::from_rows(&[vec![0.9]]),
            Matrix::from_rows(&[vec![1.0]]),
            vec![1.0],
        );
        let y = simulate_lds(&sys, 40, 0).unwrap();
        assert!(matches!(estimate_lds(&y, 4, 3), Err(Error::Rank(_))));
    }

    #[test]
    fn factorization_and_shift_consistency() {
        let sys = noiseless(
            rotation(0.4, 0.97),
            Matrix::from_rows(&[vec![1.0, 0.2]]),
            vec![1.0, -0.3],
        );
        let y = simulate_lds(&sys, 80, 0).unwrap();
        let est = estimate_lds(&y, 5, 2).unwrap();
        let cols = y.n_bins() - 5;
        let h1 = block_hankel(&y, 5, 0, cols);
        let h2 = block_hankel(&y, 5, 1, cols);

        let pq = est.p_k.matmul(&est.q_k);
        let rel1 = pq.sub(&h1).frobenius_norm() / h1.frobenius_norm();
        assert!(rel1 <= 1e-8, "P·Q reconstruction error {rel1}");

        let paq = est.p_k.matmul(&est.a_k).matmul(&est.q_k);
        let rel2 = paq.sub(&h2).frobenius_norm() / h2.frobenius_norm();
        assert!(rel2 <= 1e-6, "shift property error {rel2}");
    }

    #[test]
    fn poles_invariant_under_series_scaling() {
        let sys = noiseless(
            rotation(0.25, 0.9),
            Matrix::from_rows(&[vec![1.0, 0.0]]),
            vec![1.0, 0.5],
        );
        let y = simulate_lds(&sys, 70, 0).unwrap();
        let scaled = y.with_values(y.values().scale(37.5)).unwrap();
        let mut p1 = estimate_lds(&y, 5, 2).unwrap().poles().unwrap();
        let mut p2 = estimate_lds(&scaled, 5, 2).unwrap().poles().unwrap();
        let by_value =
            |a: &(f64, f64), b: &(f64, f64)| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal);
        p1.sort_by(by_value);
        p2.sort_by(by_value);
        for (a, b) in p1.iter().zip(&p2) {
            assert!(close(a.0, b.0, 1e-8));
            assert!(close(a.1, b.1, 1e-8));
        }
        // In the balanced square-root factorization both C_k and the state
        // factor pick up sqrt(s), so the output scales by s overall.
        let c1 = estimate_lds(&y, 5, 2).unwrap().c_k;
        let c2 = estimate_lds(&scaled, 5, 2).unwrap().c_k;
        let ratio = c2.frobenius_norm() / c1.frobenius_norm();
        assert!(close(ratio, 37.5f64.sqrt(), 1e-6));
    }

    #[test]
    fn residual_vanishes_on_well_specified_system() {
        let sys = noiseless(
            rotation(0.3, 1.0),
            Matrix::from_rows(&[vec![1.0, 0.0]]),
            vec![1.0, 0.0],
        );
        let y = simulate_lds(&sys, 100, 0).unwrap();
        let est = estimate_lds(&y, 6, 2).unwrap();
        let res = lds_residual(&y, &est, LdsThreshold::Fixed(1.0)).unwrap();
        let ynorm = vec_norm(&y.column(0));
        for (t, &s) in res.scores.iter().enumerate() {
            assert!(s <= 1e-6 * ynorm, "bin {t}: residual {s}");
        }
    }

    #[test]
    fn residual_spike_at_known_bin() {
        let sys = noiseless(
            rotation(0.3, 0.995),
            Matrix::from_rows(&[vec![1.0, 0.0]]),
            vec![1.0, 0.0],
        );
        let mut y = simulate_lds(&sys, 200, 0).unwrap();
        let t_star = 120;
        let mut vals = y.values().clone();
        vals[(t_star, 0)] += 5.0;
        y = y.with_values(vals).unwrap();
        let est = estimate_lds(&y, 10, 2).unwrap();
        let res = lds_residual(&y, &est, LdsThreshold::Fixed(1.0)).unwrap();
        let argmax = res
            .scores
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(argmax, t_star);
    }

    #[test]
    fn residual_zero_series_scores_zero() {
        let zero = FlowSeries::univariate(vec![0.0; 30]).unwrap();
        let est = estimate_lds(&zero, 4, 1).unwrap();
        let res = lds_residual(&zero, &est, LdsThreshold::Fixed(0.5)).unwrap();
        assert!(res.scores.iter().all(|&s| s == 0.0));
        assert_eq!(res.alarm_count(), 0);
    }

    #[test]
    fn noisy_pole_recovery_within_tolerance() {
        let sys = LinearDynamicalSystem::new(
            rotation(0.3, 1.0),
            Matrix::from_rows(&[vec![1.0, 0.0]]),
            Matrix::zeros(2, 2),
            Matrix::from_rows(&[vec![0.0001]]), // sigma = 0.01
            vec![1.0, 0.0],
        )
        .unwrap();
        let y = simulate_lds(&sys, 600, 3).unwrap();
        let est = estimate_lds(&y, 20, 2).unwrap();
        let poles = est.poles().unwrap();
        for &(re, im) in &poles {
            let modulus = (re * re + im * im).sqrt();
            assert!(close(modulus, 1.0, 1e-2), "modulus {modulus}");
            assert!(close(im.abs().atan2(re).abs(), 0.3, 1e-2));
        }
    }
}
