//! Eigenvalues of small dense matrices.
//!
//! Symmetric spectra come from cyclic Jacobi rotations; general spectra from
//! Householder reduction to upper Hessenberg form followed by the
//! Francis double-shift QR iteration (the EISPACK `orthes`/`hqr` pair,
//! eigenvalues only).

use num_complex::Complex;

use super::{LinalgError, Matrix};
use crate::scalar::{lit, Real};

/// Largest dimension accepted by [`general_eigenvalues`].
pub const DEFAULT_DIMENSION_CAP: usize = 64;

/// Entrywise symmetry tolerance relative to `max|m|`.
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

const JACOBI_TOLERANCE: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

fn check_square<T: Real>(m: &Matrix<T>) -> Result<(), LinalgError> {
    if !m.is_square() {
        return Err(LinalgError::NonSquare {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    if !m.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    Ok(())
}

/// Eigenvalues of the symmetric part `(m + mᵀ)/2`, ascending.
///
/// `m` must already be symmetric to within [`SYMMETRY_TOLERANCE`].
pub fn symmetric_eigenvalues<T: Real>(m: &Matrix<T>) -> Result<Vec<T>, LinalgError> {
    check_square(m)?;
    if !m.is_symmetric(lit(SYMMETRY_TOLERANCE)) {
        return Err(LinalgError::NotSymmetric);
    }
    Ok(jacobi_eigenvalues(m.symmetrized()))
}

fn jacobi_eigenvalues<T: Real>(mut a: Matrix<T>) -> Vec<T> {
    let n = a.rows();
    let scale = a.frobenius();
    let tol = lit::<T>(JACOBI_TOLERANCE).max(T::epsilon()) * scale;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let off = off_diagonal_norm(&a);
        if off <= tol || scale == T::zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let two = lit::<T>(2.0);
                let theta = (a[(q, q)] - a[(p, p)]) / (two * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<T> = (0..n).map(|i| a[(i, i)]).collect();
    eig.sort_by(|x, y| x.partial_cmp(y).expect("finite eigenvalues"));
    eig
}

fn off_diagonal_norm<T: Real>(a: &Matrix<T>) -> T {
    let n = a.rows();
    let mut s = T::zero();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s.sqrt()
}

/// All `n` complex eigenvalues of a real square matrix, with multiplicity.
///
/// Complex eigenvalues come out in conjugate pairs, positive imaginary part
/// first. Order is otherwise the deflation order of the QR iteration.
pub fn general_eigenvalues<T: Real>(m: &Matrix<T>) -> Result<Vec<Complex<T>>, LinalgError> {
    general_eigenvalues_capped(m, DEFAULT_DIMENSION_CAP)
}

/// [`general_eigenvalues`] with an explicit dimension cap.
pub fn general_eigenvalues_capped<T: Real>(
    m: &Matrix<T>,
    cap: usize,
) -> Result<Vec<Complex<T>>, LinalgError> {
    check_square(m)?;
    let n = m.rows();
    if n > cap {
        return Err(LinalgError::DimensionCap { n, cap });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut h = m.to_rows();
    reduce_to_hessenberg(&mut h);
    hessenberg_qr(h, 1000 * n)
}

fn reduce_to_hessenberg<T: Real>(h: &mut [Vec<T>]) {
    let n = h.len();
    if n < 3 {
        return;
    }
    let high = n - 1;
    let mut ort = vec![T::zero(); n];
    for m in 1..high {
        let scale: T = (m..=high).map(|i| h[i][m - 1].abs()).sum();
        if scale == T::zero() {
            continue;
        }
        let mut hh = T::zero();
        for i in (m..=high).rev() {
            ort[i] = h[i][m - 1] / scale;
            hh += ort[i] * ort[i];
        }
        let mut g = hh.sqrt();
        if ort[m] > T::zero() {
            g = -g;
        }
        hh -= ort[m] * g;
        ort[m] -= g;

        for j in m..n {
            let mut f = T::zero();
            for i in (m..=high).rev() {
                f += ort[i] * h[i][j];
            }
            f /= hh;
            for i in m..=high {
                h[i][j] -= f * ort[i];
            }
        }
        for row in h.iter_mut().take(high + 1) {
            let mut f = T::zero();
            for j in (m..=high).rev() {
                f += ort[j] * row[j];
            }
            f /= hh;
            for j in m..=high {
                row[j] -= f * ort[j];
            }
        }
        ort[m] *= scale;
        h[m][m - 1] = scale * g;
    }
}

#[allow(clippy::many_single_char_names)]
fn hessenberg_qr<T: Real>(mut h: Vec<Vec<T>>, budget: usize) -> Result<Vec<Complex<T>>, LinalgError> {
    let nn = h.len();
    let zero = T::zero();
    let eps = T::epsilon();
    let half = lit::<T>(0.5);
    let mut re = vec![zero; nn];
    let mut im = vec![zero; nn];

    let mut norm = zero;
    for (i, row) in h.iter().enumerate() {
        for v in &row[i.saturating_sub(1)..] {
            norm += v.abs();
        }
    }

    let mut n = nn as isize - 1;
    let low: isize = 0;
    let mut exshift = zero;
    let (mut p, mut q, mut r) = (zero, zero, zero);
    let (mut s, mut z);
    let mut iter = 0usize;
    let mut total = 0usize;

    while n >= low {
        let nu = n as usize;
        // Locate a negligible subdiagonal entry.
        let mut l = n;
        while l > low {
            let lu = l as usize;
            s = h[lu - 1][lu - 1].abs() + h[lu][lu].abs();
            if s == zero {
                s = norm;
            }
            if h[lu][lu - 1].abs() < eps * s {
                break;
            }
            l -= 1;
        }

        if l == n {
            // One root.
            h[nu][nu] += exshift;
            re[nu] = h[nu][nu];
            im[nu] = zero;
            n -= 1;
            iter = 0;
        } else if l == n - 1 {
            // Two roots from the trailing 2x2 block.
            let w = h[nu][nu - 1] * h[nu - 1][nu];
            p = (h[nu - 1][nu - 1] - h[nu][nu]) * half;
            q = p * p + w;
            z = q.abs().sqrt();
            h[nu][nu] += exshift;
            h[nu - 1][nu - 1] += exshift;
            let x = h[nu][nu];
            if q >= zero {
                z = if p >= zero { p + z } else { p - z };
                re[nu - 1] = x + z;
                re[nu] = re[nu - 1];
                if z != zero {
                    re[nu] = x - w / z;
                }
                im[nu - 1] = zero;
                im[nu] = zero;
            } else {
                re[nu - 1] = x + p;
                re[nu] = x + p;
                im[nu - 1] = z;
                im[nu] = -z;
            }
            n -= 2;
            iter = 0;
        } else {
            let mut x = h[nu][nu];
            let mut y = zero;
            let mut w = zero;
            if l < n {
                y = h[nu - 1][nu - 1];
                w = h[nu][nu - 1] * h[nu - 1][nu];
            }

            // Exceptional shifts.
            if iter == 10 {
                exshift += x;
                for (i, row) in h.iter_mut().enumerate().take(nu + 1) {
                    row[i] -= x;
                }
                s = h[nu][nu - 1].abs() + h[nu - 1][nu - 2].abs();
                x = lit::<T>(0.75) * s;
                y = x;
                w = lit::<T>(-0.4375) * s * s;
            }
            if iter == 30 {
                s = (y - x) * half;
                s = s * s + w;
                if s > zero {
                    s = s.sqrt();
                    if y < x {
                        s = -s;
                    }
                    s = x - w / ((y - x) * half + s);
                    for (i, row) in h.iter_mut().enumerate().take(nu + 1) {
                        row[i] -= s;
                    }
                    exshift += s;
                    x = lit(0.964);
                    y = x;
                    w = x;
                }
            }

            iter += 1;
            total += 1;
            if total > budget {
                return Err(LinalgError::IterationLimit { budget });
            }

            // Look for two consecutive small subdiagonal entries.
            let mut m = n - 2;
            while m >= l {
                let mu = m as usize;
                z = h[mu][mu];
                r = x - z;
                s = y - z;
                p = (r * s - w) / h[mu + 1][mu] + h[mu][mu + 1];
                q = h[mu + 1][mu + 1] - z - r - s;
                r = h[mu + 2][mu + 1];
                s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let lhs = h[mu][mu - 1].abs() * (q.abs() + r.abs());
                let rhs = eps
                    * (p.abs() * (h[mu - 1][mu - 1].abs() + z.abs() + h[mu + 1][mu + 1].abs()));
                if lhs < rhs {
                    break;
                }
                m -= 1;
            }
            let mu = m as usize;

            for i in (mu + 2)..=nu {
                h[i][i - 2] = zero;
                if i > mu + 2 {
                    h[i][i - 3] = zero;
                }
            }

            // Double QR step on rows l..=n, columns m..=n.
            for k in mu..nu {
                let notlast = k != nu - 1;
                if k != mu {
                    p = h[k][k - 1];
                    q = h[k + 1][k - 1];
                    r = if notlast { h[k + 2][k - 1] } else { zero };
                    x = p.abs() + q.abs() + r.abs();
                    if x == zero {
                        continue;
                    }
                    p /= x;
                    q /= x;
                    r /= x;
                }
                s = (p * p + q * q + r * r).sqrt();
                if p < zero {
                    s = -s;
                }
                if s != zero {
                    if k != mu {
                        h[k][k - 1] = -s * x;
                    } else if l != m {
                        h[k][k - 1] = -h[k][k - 1];
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;

                    for j in k..nn {
                        p = h[k][j] + q * h[k + 1][j];
                        if notlast {
                            p += r * h[k + 2][j];
                            h[k + 2][j] -= p * z;
                        }
                        h[k][j] -= p * x;
                        h[k + 1][j] -= p * y;
                    }
                    for row in h.iter_mut().take(nu.min(k + 3) + 1) {
                        p = x * row[k] + y * row[k + 1];
                        if notlast {
                            p += z * row[k + 2];
                            row[k + 2] -= p * r;
                        }
                        row[k] -= p;
                        row[k + 1] -= p * q;
                    }
                }
            }
        }
    }

    Ok(re
        .into_iter()
        .zip(im)
        .map(|(a, b)| Complex::new(a, b))
        .collect())
}

/// Largest eigenvalue modulus.
pub fn spectral_radius<T: Real>(m: &Matrix<T>) -> Result<T, LinalgError> {
    Ok(general_eigenvalues(m)?
        .iter()
        .fold(T::zero(), |acc, z| acc.max(z.norm())))
}
