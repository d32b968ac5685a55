//! Orthogonal discrete wavelet transform with symmetric boundary extension.
//!
//! The bank is the standard conjugate-quadrature pair built from a scaling
//! filter `h`: analysis low-pass is `h` reversed, analysis high-pass is
//! `(−1)^k h[k]`, and synthesis is the adjoint. Coefficients are kept in the
//! expansive (full-convolution) form, which makes the round trip exact for
//! any signal length and extension mode.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Daubechies order-6 scaling filter (12 taps, 6 vanishing moments),
/// normalized so the coefficients sum to √2.
pub const DB6_SCALING: [f64; 12] = [
    0.111540743350109,
    0.494623890398453,
    0.751133908021093,
    0.315250351709195,
    -0.226264693965169,
    -0.129766867567262,
    0.097501605587079,
    0.027522865530016,
    -0.031582039317674,
    0.000553842201161,
    0.004777257511010,
    -0.001077301085308,
];

#[derive(Debug, Clone)]
pub struct WaveletFilters<T> {
    pub dec_lo: Vec<T>,
    pub dec_hi: Vec<T>,
}

impl<T: Scalar> WaveletFilters<T> {
    /// Builds the analysis pair from a scaling filter.
    pub fn from_scaling(h: &[f64]) -> Self {
        let l = h.len();
        let dec_lo: Vec<T> = (0..l).map(|k| T::of(h[l - 1 - k])).collect();
        let dec_hi: Vec<T> = (0..l)
            .map(|k| {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                T::of(sign * h[k])
            })
            .collect();
        WaveletFilters { dec_lo, dec_hi }
    }

    pub fn db6() -> Self {
        Self::from_scaling(&DB6_SCALING)
    }

    /// Haar pair; handy in tests.
    pub fn haar() -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Self::from_scaling(&[s, s])
    }

    pub fn len(&self) -> usize {
        self.dec_lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dec_lo.is_empty()
    }
}

/// Half-sample symmetric extension by `pad` samples on each side.
fn symmetric_extend<T: Scalar>(x: &[T], pad: usize) -> Vec<T> {
    let n = x.len();
    debug_assert!(pad <= n, "extension longer than the signal");
    let mut ext = Vec::with_capacity(n + 2 * pad);
    for i in (0..pad).rev() {
        ext.push(x[i]);
    }
    ext.extend_from_slice(x);
    for i in 0..pad {
        ext.push(x[n - 1 - i]);
    }
    ext
}

/// One analysis step: returns `(approx, detail)` of length
/// `⌊(n + L − 1) / 2⌋` each.
pub fn dwt_single<T: Scalar>(x: &[T], filters: &WaveletFilters<T>) -> (Vec<T>, Vec<T>) {
    let l = filters.len();
    let n = x.len();
    let ext = symmetric_extend(x, l - 1);
    let out_len = (n + l - 1) / 2;
    let mut approx = Vec::with_capacity(out_len);
    let mut detail = Vec::with_capacity(out_len);
    for k in 0..out_len {
        let base = 2 * k + 1;
        let mut a = T::zero();
        let mut d = T::zero();
        for j in 0..l {
            let v = ext[base + j];
            a += filters.dec_lo[j] * v;
            d += filters.dec_hi[j] * v;
        }
        approx.push(a);
        detail.push(d);
    }
    (approx, detail)
}

/// One synthesis step (adjoint of [`dwt_single`]), producing `out_len`
/// samples. `out_len` may not exceed `2·len(approx) − L + 2`.
pub fn idwt_single<T: Scalar>(
    approx: &[T],
    detail: &[T],
    filters: &WaveletFilters<T>,
    out_len: usize,
) -> Result<Vec<T>> {
    if approx.len() != detail.len() {
        return Err(Error::Shape(
            "approximation and detail lengths differ".to_string(),
        ));
    }
    let l = filters.len();
    let la = approx.len();
    if 2 * la + 2 < l || out_len > 2 * la + 2 - l {
        return Err(Error::Shape(format!(
            "cannot synthesize {out_len} samples from {la} coefficients"
        )));
    }
    let mut out = vec![T::zero(); out_len];
    // out[i] = Σ_k a[k]·dec_lo[i + L − 2 − 2k] + d[k]·dec_hi[i + L − 2 − 2k]
    for (k, (&a, &d)) in approx.iter().zip(detail).enumerate() {
        let shift = 2 * k;
        for j in 0..l {
            let idx = shift + j;
            if idx + 2 < l {
                continue;
            }
            let i = idx + 2 - l;
            if i >= out_len {
                break;
            }
            out[i] += a * filters.dec_lo[j] + d * filters.dec_hi[j];
        }
    }
    Ok(out)
}

/// Multi-level analysis: detail bands from finest (level 1) to coarsest,
/// plus the final approximation. `lengths[i]` records the input length at
/// level `i + 1` so synthesis can restore exact sizes. Decomposition stops
/// early once the approximation is shorter than the filter.
#[derive(Debug, Clone)]
pub struct WaveletDecomposition<T> {
    pub approx: Vec<T>,
    pub details: Vec<Vec<T>>,
    pub lengths: Vec<usize>,
}

impl<T> WaveletDecomposition<T> {
    pub fn levels(&self) -> usize {
        self.details.len()
    }
}

pub fn wavedec<T: Scalar>(
    x: &[T],
    filters: &WaveletFilters<T>,
    levels: usize,
) -> Result<WaveletDecomposition<T>> {
    if x.len() < filters.len() {
        return Err(Error::parameter(
            "series",
            format!(
                "signal of {} samples is shorter than the {}-tap filter",
                x.len(),
                filters.len()
            ),
        ));
    }
    if levels == 0 {
        return Err(Error::parameter("levels", "need at least one level"));
    }
    let mut approx = x.to_vec();
    let mut details = Vec::new();
    let mut lengths = Vec::new();
    for _ in 0..levels {
        if approx.len() < filters.len() {
            break;
        }
        lengths.push(approx.len());
        let (a, d) = dwt_single(&approx, filters);
        details.push(d);
        approx = a;
    }
    Ok(WaveletDecomposition {
        approx,
        details,
        lengths,
    })
}

pub fn waverec<T: Scalar>(
    dec: &WaveletDecomposition<T>,
    filters: &WaveletFilters<T>,
) -> Result<Vec<T>> {
    let mut current = dec.approx.clone();
    for (level, detail) in dec.details.iter().enumerate().rev() {
        current = idwt_single(&current, detail, filters, dec.lengths[level])?;
    }
    Ok(current)
}
