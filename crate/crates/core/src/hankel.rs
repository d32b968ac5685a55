//! Lag embedding into trajectory (block Hankel) matrices and the
//! diagonal-averaging inverse.
//!
//! Convention: rows are sliding windows, columns are the `ℓ` lag copies of
//! each feature, features concatenated as horizontal blocks. Each block is
//! Hankel on its own, so diagonal averaging works block by block.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;
use crate::timeseries::FlowSeries;

/// Lag-embedded trajectory matrix of a [`FlowSeries`].
///
/// `data` is `n_windows × (ell·m)` with `n_windows = n − ell + 1`; block `q`
/// occupies columns `q·ell .. (q+1)·ell` and holds `y_q(i + j)` at window `i`,
/// lag `j`. Series metadata is retained so reconstructions can be turned
/// back into a [`FlowSeries`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryMatrix<T> {
    data: Matrix<T>,
    ell: usize,
    m: usize,
    n: usize,
    bin_seconds: u64,
    start_time: i64,
    feature_names: Vec<String>,
}

impl<T: Scalar> TrajectoryMatrix<T> {
    pub fn data(&self) -> &Matrix<T> {
        &self.data
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn n_features(&self) -> usize {
        self.m
    }

    /// Length of the underlying series segment.
    pub fn series_len(&self) -> usize {
        self.n
    }

    pub fn n_windows(&self) -> usize {
        self.data.rows()
    }

    /// Width of the embedding space, `ell · m`.
    pub fn dim(&self) -> usize {
        self.ell * self.m
    }

    pub fn window(&self, i: usize) -> &[T] {
        self.data.row(i)
    }

    pub fn bin_seconds(&self) -> u64 {
        self.bin_seconds
    }

    pub fn start_time(&self) -> i64 {
        self.start_time
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Rewraps an arbitrary matrix of matching shape in this layout, e.g. a
    /// residual or a rank-1 term destined for [`hankelize`].
    pub fn with_data(&self, data: Matrix<T>) -> Result<TrajectoryMatrix<T>> {
        if data.rows() != self.data.rows() || data.cols() != self.data.cols() {
            return Err(Error::Shape(format!(
                "layout is {}x{}, data is {}x{}",
                self.data.rows(),
                self.data.cols(),
                data.rows(),
                data.cols()
            )));
        }
        Ok(TrajectoryMatrix {
            data,
            ..self.clone()
        })
    }
}

/// Embeds a series with window length `ell` (`1 ≤ ell < n`).
pub fn embed<T: Scalar>(series: &FlowSeries<T>, ell: usize) -> Result<TrajectoryMatrix<T>> {
    shifted_hankel(series, ell, 1)
}

/// The shifted trajectory matrix `H(t)` (1-based `t`; `t = 1` is [`embed`]).
/// Windows start at offset `t − 1`, so `H(t)` of a series equals `H(1)` of
/// the same series with the first `t − 1` samples dropped.
pub fn shifted_hankel<T: Scalar>(
    series: &FlowSeries<T>,
    ell: usize,
    t: usize,
) -> Result<TrajectoryMatrix<T>> {
    let n = series.n_bins();
    let m = series.n_features();
    if ell < 1 || ell >= n {
        return Err(Error::parameter(
            "ell",
            format!("window length must satisfy 1 <= ell < n = {n}, got {ell}"),
        ));
    }
    if t < 1 {
        return Err(Error::parameter("t", "shift index is 1-based"));
    }
    let offset = t - 1;
    if offset + ell > n {
        return Err(Error::parameter(
            "t",
            format!("no window of length {ell} starts at offset {offset} in a series of {n}"),
        ));
    }
    let n_eff = n - offset;
    let n_windows = n_eff - ell + 1;
    let data = Matrix::from_fn(n_windows, ell * m, |i, col| {
        let q = col / ell;
        let j = col % ell;
        series.value(offset + i + j, q)
    });
    Ok(TrajectoryMatrix {
        data,
        ell,
        m,
        n: n_eff,
        bin_seconds: series.bin_seconds(),
        start_time: series.bin_start(offset),
        feature_names: series.feature_names().to_vec(),
    })
}

/// Number of entries on anti-diagonal `s` of an `n_windows × ell` Hankel
/// block covering a series of length `n`.
fn diagonal_count(s: usize, ell: usize, n_windows: usize, n: usize) -> usize {
    (s + 1).min(ell).min(n_windows).min(n - s)
}

/// Diagonal averaging: maps a matrix in trajectory layout back to the
/// nearest series. Each feature block is averaged over its anti-diagonals
/// (`i + j = s`), producing a series of the original length.
pub fn hankelize<T: Scalar>(traj: &TrajectoryMatrix<T>) -> Result<FlowSeries<T>> {
    let (ell, m, n) = (traj.ell, traj.m, traj.n);
    let n_windows = traj.n_windows();
    if n_windows + ell != n + 1 || traj.data.cols() != ell * m {
        return Err(Error::Shape(format!(
            "inconsistent layout: {} windows, ell {ell}, m {m}, n {n}",
            n_windows
        )));
    }
    let mut values = Matrix::zeros(n, m);
    for q in 0..m {
        for i in 0..n_windows {
            let row = traj.data.row(i);
            for j in 0..ell {
                values[(i + j, q)] += row[q * ell + j];
            }
        }
        for s in 0..n {
            let cnt = diagonal_count(s, ell, n_windows, n);
            values[(s, q)] /= T::of_usize(cnt);
        }
    }
    FlowSeries::new(
        values,
        traj.bin_seconds,
        traj.feature_names.clone(),
        traj.start_time,
    )
}

/// Diagonal-averages the rank-1 matrix `w · uᵀ` without materializing it.
///
/// `w` has one entry per window and `u` one per embedding coordinate; per
/// feature block the anti-diagonal sums are exactly the convolution of `w`
/// with the block's slice of `u`. Agrees with [`hankelize`] of the dense
/// product (see tests) at a fraction of the cost.
pub fn hankelize_rank_one<T: Scalar>(
    traj: &TrajectoryMatrix<T>,
    w: &[T],
    u: &[T],
) -> Result<FlowSeries<T>> {
    let (ell, m, n) = (traj.ell, traj.m, traj.n);
    let n_windows = traj.n_windows();
    if w.len() != n_windows || u.len() != ell * m {
        return Err(Error::Shape(format!(
            "rank-1 factors must be {n_windows} and {}, got {} and {}",
            ell * m,
            w.len(),
            u.len()
        )));
    }
    let mut values = Matrix::zeros(n, m);
    for q in 0..m {
        let block = &u[q * ell..(q + 1) * ell];
        for (i, &wi) in w.iter().enumerate() {
            if wi == T::zero() {
                continue;
            }
            for (j, &uj) in block.iter().enumerate() {
                values[(i + j, q)] += wi * uj;
            }
        }
        for s in 0..n {
            let cnt = diagonal_count(s, ell, n_windows, n);
            values[(s, q)] /= T::of_usize(cnt);
        }
    }
    FlowSeries::new(
        values,
        traj.bin_seconds,
        traj.feature_names.clone(),
        traj.start_time,
    )
}
