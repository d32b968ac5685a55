//! Dense eigen and singular value routines.
//!
//! Symmetric problems go through Householder tridiagonalization followed by
//! implicit-shift QL iteration; general (non-symmetric) eigenvalues go
//! through a balanced Hessenberg reduction and Francis double-shift QR.
//! Both are the classical EISPACK-lineage algorithms. Singular values are
//! obtained from the eigendecomposition of the smaller Gram matrix, which is
//! accurate enough at the scales and tolerances this crate targets.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Eigendecomposition of a symmetric matrix: `A = V diag(values) Vᵀ`.
///
/// Eigenvalues are sorted descending; `vectors` holds the corresponding
/// orthonormal eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct SymmetricEigen<T> {
    pub values: Vec<T>,
    pub vectors: Matrix<T>,
}

/// Computes the eigendecomposition of a symmetric matrix.
///
/// The input is not checked for symmetry beyond a debug assertion; callers
/// that accept untrusted matrices should validate first (see
/// [`crate::mssa::decompose`]).
pub fn symmetric_eigen<T: Scalar>(a: &Matrix<T>) -> Result<SymmetricEigen<T>> {
    if !a.is_square() {
        return Err(Error::Shape(format!(
            "symmetric eigendecomposition needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let n = a.rows();
    let mut v = a.clone();
    let mut d = vec![T::zero(); n];
    let mut e = vec![T::zero(); n];
    tred2(&mut v, &mut d, &mut e);
    tql2(&mut v, &mut d, &mut e)?;
    sort_descending(&mut v, &mut d);
    Ok(SymmetricEigen {
        values: d,
        vectors: v,
    })
}

/// Householder reduction to tridiagonal form (in-place, accumulating the
/// transformation in `v`).
fn tred2<T: Scalar>(v: &mut Matrix<T>, d: &mut [T], e: &mut [T]) {
    let n = v.rows();
    for (j, dj) in d.iter_mut().enumerate() {
        *dj = v[(n - 1, j)];
    }

    for i in (1..n).rev() {
        let mut scale = T::zero();
        let mut h = T::zero();
        for dk in d.iter().take(i) {
            scale += dk.abs();
        }
        if scale == T::zero() {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1, j)];
                v[(i, j)] = T::zero();
                v[(j, i)] = T::zero();
            }
        } else {
            for dk in d.iter_mut().take(i) {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > T::zero() {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = T::zero();
            }

            for j in 0..i {
                f = d[j];
                v[(j, i)] = f;
                g = e[j] + v[(j, j)] * f;
                for k in (j + 1)..i {
                    g += v[(k, j)] * d[k];
                    e[k] += v[(k, j)] * f;
                }
                e[j] = g;
            }
            f = T::zero();
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    let delta = f * e[k] + g * d[k];
                    v[(k, j)] -= delta;
                }
                d[j] = v[(i - 1, j)];
                v[(i, j)] = T::zero();
            }
        }
        d[i] = h;
    }

    for i in 0..(n - 1) {
        v[(n - 1, i)] = v[(i, i)];
        v[(i, i)] = T::one();
        let h = d[i + 1];
        if h != T::zero() {
            for (k, dk) in d.iter_mut().enumerate().take(i + 1) {
                *dk = v[(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = T::zero();
                for k in 0..=i {
                    g += v[(k, i + 1)] * v[(k, j)];
                }
                for (k, dk) in d.iter().enumerate().take(i + 1) {
                    v[(k, j)] -= g * *dk;
                }
            }
        }
        for k in 0..=i {
            v[(k, i + 1)] = T::zero();
        }
    }
    for (j, dj) in d.iter_mut().enumerate() {
        *dj = v[(n - 1, j)];
        v[(n - 1, j)] = T::zero();
    }
    v[(n - 1, n - 1)] = T::one();
    e[0] = T::zero();
}

/// Implicit-shift QL iteration on a symmetric tridiagonal matrix.
fn tql2<T: Scalar>(v: &mut Matrix<T>, d: &mut [T], e: &mut [T]) -> Result<()> {
    let n = v.rows();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = T::zero();

    let mut f = T::zero();
    let mut tst1 = T::zero();
    for l in 0..n {
        let tl = d[l].abs() + e[l].abs();
        if tl > tst1 {
            tst1 = tl;
        }

        let mut m = l;
        while m < n {
            if e[m].abs() <= tst1 * T::epsilon() {
                break;
            }
            m += 1;
        }
        if m == n {
            m = n - 1;
        }

        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > 60 {
                    return Err(Error::Rank("QL iteration failed to converge".to_string()));
                }

                let mut g = d[l];
                let two = T::of(2.0);
                let mut p = (d[l + 1] - g) / (two * e[l]);
                let mut r = p.hypot(T::one());
                if p < T::zero() {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = T::one();
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = T::zero();
                let mut s2 = T::zero();
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);

                    for k in 0..n {
                        h = v[(k, i + 1)];
                        v[(k, i + 1)] = s * v[(k, i)] + c * h;
                        v[(k, i)] = c * v[(k, i)] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;

                if e[l].abs() <= tst1 * T::epsilon() {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = T::zero();
    }
    Ok(())
}

fn sort_descending<T: Scalar>(v: &mut Matrix<T>, d: &mut [T]) {
    let n = d.len();
    for i in 0..n {
        let mut k = i;
        let mut p = d[i];
        for (j, dj) in d.iter().enumerate().take(n).skip(i + 1) {
            if *dj > p {
                k = j;
                p = *dj;
            }
        }
        if k != i {
            d[k] = d[i];
            d[i] = p;
            for j in 0..n {
                let tmp = v[(j, i)];
                v[(j, i)] = v[(j, k)];
                v[(j, k)] = tmp;
            }
        }
    }
}

/// One eigenvalue of a real matrix, as a `(re, im)` pair.
pub type ComplexEigenvalue<T> = (T, T);

/// Eigenvalues of a general (square, real) matrix, sorted by descending
/// modulus. Complex pairs come out adjacent with conjugate imaginary parts.
pub fn general_eigenvalues<T: Scalar>(a: &Matrix<T>) -> Result<Vec<ComplexEigenvalue<T>>> {
    if !a.is_square() {
        return Err(Error::Shape(format!(
            "eigenvalues need a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let n = a.rows();
    if n == 0 {
        return Ok(Vec::new());
    }
    if n == 1 {
        return Ok(vec![(a[(0, 0)], T::zero())]);
    }
    let mut h = a.clone();
    balance(&mut h);
    hessenberg(&mut h);
    let mut vals = hqr(&mut h)?;
    vals.sort_by(|x, y| {
        let mx = (x.0 * x.0 + x.1 * x.1).as_f64();
        let my = (y.0 * y.0 + y.1 * y.1).as_f64();
        my.partial_cmp(&mx).unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(vals)
}

/// Diagonal similarity scaling to reduce the matrix norm (EISPACK `balanc`).
fn balance<T: Scalar>(a: &mut Matrix<T>) {
    let n = a.rows();
    let radix = T::of(2.0);
    let sqrdx = radix * radix;
    loop {
        let mut done = true;
        for i in 0..n {
            let mut r = T::zero();
            let mut c = T::zero();
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if c != T::zero() && r != T::zero() {
                let mut g = r / radix;
                let mut f = T::one();
                let s = c + r;
                let mut c = c;
                while c < g {
                    f *= radix;
                    c *= sqrdx;
                }
                g = r * radix;
                while c > g {
                    f /= radix;
                    c /= sqrdx;
                }
                if (c + r) / f < T::of(0.95) * s {
                    done = false;
                    g = T::one() / f;
                    for j in 0..n {
                        a[(i, j)] *= g;
                    }
                    for j in 0..n {
                        a[(j, i)] *= f;
                    }
                }
            }
        }
        if done {
            break;
        }
    }
}

/// Reduction to upper Hessenberg form by stabilized elementary similarity
/// transformations (EISPACK `elmhes`).
fn hessenberg<T: Scalar>(a: &mut Matrix<T>) {
    let n = a.rows();
    for m in 1..n.saturating_sub(1) {
        let mut x = T::zero();
        let mut i = m;
        for j in m..n {
            if a[(j, m - 1)].abs() > x.abs() {
                x = a[(j, m - 1)];
                i = j;
            }
        }
        if i != m {
            for j in (m - 1)..n {
                let tmp = a[(i, j)];
                a[(i, j)] = a[(m, j)];
                a[(m, j)] = tmp;
            }
            for j in 0..n {
                let tmp = a[(j, i)];
                a[(j, i)] = a[(j, m)];
                a[(j, m)] = tmp;
            }
        }
        if x != T::zero() {
            for i in (m + 1)..n {
                let mut y = a[(i, m - 1)];
                if y != T::zero() {
                    y /= x;
                    a[(i, m - 1)] = y;
                    for j in m..n {
                        let delta = y * a[(m, j)];
                        a[(i, j)] -= delta;
                    }
                    for j in 0..n {
                        let delta = y * a[(j, i)];
                        a[(j, m)] += delta;
                    }
                }
            }
        }
    }
    // Zero the lower triangle below the first subdiagonal.
    for i in 2..n {
        for j in 0..(i - 1) {
            a[(i, j)] = T::zero();
        }
    }
}

fn sign_of<T: Scalar>(a: T, b: T) -> T {
    if b >= T::zero() {
        a.abs()
    } else {
        -a.abs()
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix, eigenvalues only
/// (EISPACK `hqr`, zero-based).
fn hqr<T: Scalar>(a: &mut Matrix<T>) -> Result<Vec<ComplexEigenvalue<T>>> {
    let n = a.rows();
    let mut out = vec![(T::zero(), T::zero()); n];

    let mut anorm = T::zero();
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += a[(i, j)].abs();
        }
    }
    if anorm == T::zero() {
        return Ok(out);
    }

    let half = T::of(0.5);
    let mut nn: isize = n as isize - 1;
    let mut t = T::zero();
    while nn >= 0 {
        let mut its = 0;
        loop {
            // Look for a single small subdiagonal element.
            let mut l = nn;
            while l >= 1 {
                let s = a[((l - 1) as usize, (l - 1) as usize)].abs()
                    + a[(l as usize, l as usize)].abs();
                let s = if s == T::zero() { anorm } else { s };
                if a[(l as usize, (l - 1) as usize)].abs() <= T::epsilon() * s {
                    a[(l as usize, (l - 1) as usize)] = T::zero();
                    break;
                }
                l -= 1;
            }
            let x = a[(nn as usize, nn as usize)];
            if l == nn {
                out[nn as usize] = (x + t, T::zero());
                nn -= 1;
                break;
            }
            let y = a[((nn - 1) as usize, (nn - 1) as usize)];
            let w = a[(nn as usize, (nn - 1) as usize)] * a[((nn - 1) as usize, nn as usize)];
            if l == nn - 1 {
                let p = half * (y - x);
                let q = p * p + w;
                let z = q.abs().sqrt();
                let x = x + t;
                if q >= T::zero() {
                    let z = p + sign_of(z, p);
                    let first = x + z;
                    let second = if z == T::zero() { first } else { x - w / z };
                    out[(nn - 1) as usize] = (first, T::zero());
                    out[nn as usize] = (second, T::zero());
                } else {
                    out[(nn - 1) as usize] = (x + p, z);
                    out[nn as usize] = (x + p, -z);
                }
                nn -= 2;
                break;
            }

            if its == 60 {
                return Err(Error::Rank("QR iteration failed to converge".to_string()));
            }
            let (mut x, mut y, mut w) = (x, y, w);
            if its == 10 || its == 20 || its == 30 || its == 40 || its == 50 {
                // Exceptional shift.
                t += x;
                for i in 0..=(nn as usize) {
                    a[(i, i)] -= x;
                }
                let s = a[(nn as usize, (nn - 1) as usize)].abs()
                    + a[((nn - 1) as usize, (nn - 2) as usize)].abs();
                x = T::of(0.75) * s;
                y = x;
                w = T::of(-0.4375) * s * s;
            }
            its += 1;

            // Form shift and look for two consecutive small subdiagonals.
            let mut m = nn - 2;
            let (mut p, mut q, mut r) = (T::zero(), T::zero(), T::zero());
            while m >= l {
                let z = a[(m as usize, m as usize)];
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / a[((m + 1) as usize, m as usize)]
                    + a[(m as usize, (m + 1) as usize)];
                q = a[((m + 1) as usize, (m + 1) as usize)] - z - rr - ss;
                r = a[((m + 2) as usize, (m + 1) as usize)];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = a[(m as usize, (m - 1) as usize)].abs() * (q.abs() + r.abs());
                let v = p.abs()
                    * (a[((m - 1) as usize, (m - 1) as usize)].abs()
                        + z.abs()
                        + a[((m + 1) as usize, (m + 1) as usize)].abs());
                if u <= T::epsilon() * v {
                    break;
                }
                m -= 1;
            }
            for i in (m + 2)..=nn {
                a[(i as usize, (i - 2) as usize)] = T::zero();
                if i != m + 2 {
                    a[(i as usize, (i - 3) as usize)] = T::zero();
                }
            }

            // Double QR step on rows l..=nn, columns m..=nn.
            for k in m..=(nn - 1) {
                if k != m {
                    p = a[(k as usize, (k - 1) as usize)];
                    q = a[((k + 1) as usize, (k - 1) as usize)];
                    r = if k != nn - 1 {
                        a[((k + 2) as usize, (k - 1) as usize)]
                    } else {
                        T::zero()
                    };
                    x = p.abs() + q.abs() + r.abs();
                    if x != T::zero() {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = sign_of((p * p + q * q + r * r).sqrt(), p);
                if s != T::zero() {
                    if k == m {
                        if l != m {
                            a[(k as usize, (k - 1) as usize)] = -a[(k as usize, (k - 1) as usize)];
                        }
                    } else {
                        a[(k as usize, (k - 1) as usize)] = -s * x;
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    let z = r / s;
                    q /= p;
                    r /= p;
                    for j in (k as usize)..=(nn as usize) {
                        let mut pp = a[(k as usize, j)] + q * a[((k + 1) as usize, j)];
                        if k != nn - 1 {
                            pp += r * a[((k + 2) as usize, j)];
                            a[((k + 2) as usize, j)] -= pp * z;
                        }
                        a[((k + 1) as usize, j)] -= pp * y;
                        a[(k as usize, j)] -= pp * x;
                    }
                    let mmin = if nn < k + 3 { nn } else { k + 3 };
                    for i in (l as usize)..=(mmin as usize) {
                        let mut pp = x * a[(i, k as usize)] + y * a[(i, (k + 1) as usize)];
                        if k != nn - 1 {
                            pp += z * a[(i, (k + 2) as usize)];
                            a[(i, (k + 2) as usize)] -= pp * r;
                        }
                        a[(i, (k + 1) as usize)] -= pp * q;
                        a[(i, k as usize)] -= pp;
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Thin singular value decomposition `A = U diag(σ) Vᵀ` with
/// `r = min(rows, cols)` triples, σ descending and clamped at zero.
#[derive(Debug, Clone)]
pub struct Svd<T> {
    pub u: Matrix<T>,
    pub sigma: Vec<T>,
    pub v: Matrix<T>,
}

/// SVD through the eigendecomposition of the smaller Gram matrix.
pub fn svd_via_gram<T: Scalar>(a: &Matrix<T>) -> Result<Svd<T>> {
    let (rows, cols) = (a.rows(), a.cols());
    let r = rows.min(cols);
    if rows <= cols {
        let eig = symmetric_eigen(&a.gram_right())?;
        let sigma: Vec<T> = eig.values[..r]
            .iter()
            .map(|&l| if l > T::zero() { l.sqrt() } else { T::zero() })
            .collect();
        let u = eig.vectors.columns(0, r);
        let tol = sigma.first().copied().unwrap_or(T::zero()) * T::of(1e-300);
        let mut v = Matrix::zeros(cols, r);
        for i in 0..r {
            if sigma[i] > tol && sigma[i] > T::zero() {
                let ui = u.col(i);
                let col = a.tr_mul_vec(&ui);
                for (rr, val) in col.iter().enumerate() {
                    v[(rr, i)] = *val / sigma[i];
                }
            }
        }
        Ok(Svd { u, sigma, v })
    } else {
        let eig = symmetric_eigen(&a.gram())?;
        let sigma: Vec<T> = eig.values[..r]
            .iter()
            .map(|&l| if l > T::zero() { l.sqrt() } else { T::zero() })
            .collect();
        let v = eig.vectors.columns(0, r);
        let tol = sigma.first().copied().unwrap_or(T::zero()) * T::of(1e-300);
        let mut u = Matrix::zeros(rows, r);
        for i in 0..r {
            if sigma[i] > tol && sigma[i] > T::zero() {
                let vi = v.col(i);
                let col = a.mul_vec(&vi);
                for (rr, val) in col.iter().enumerate() {
                    u[(rr, i)] = *val / sigma[i];
                }
            }
        }
        Ok(Svd { u, sigma, v })
    }
}

/// Cholesky factor of a symmetric positive semidefinite matrix, with
/// zero-pivot columns zeroed out. Errors if the matrix is indefinite beyond
/// a small tolerance.
pub fn cholesky_psd<T: Scalar>(a: &Matrix<T>) -> Result<Matrix<T>> {
    if !a.is_square() {
        return Err(Error::Shape("cholesky needs a square matrix".to_string()));
    }
    let n = a.rows();
    let scale = a.max_abs().max(T::one());
    let tol = scale * T::of(1e-10);
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut s = a[(j, j)];
        for k in 0..j {
            s -= l[(j, k)] * l[(j, k)];
        }
        if s < -tol {
            return Err(Error::Parameter {
                name: "covariance",
                msg: "matrix is not positive semidefinite".to_string(),
            });
        }
        if s <= tol {
            l[(j, j)] = T::zero();
            continue;
        }
        let pivot = s.sqrt();
        l[(j, j)] = pivot;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / pivot;
        }
    }
    Ok(l)
}
