//! Central finite differences for gradients and partitioned Hessians.

use super::{BoxDomain, Gradient, HessianBlocks, Objective, Point};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::{to_f64, Real};

pub const DEFAULT_GRADIENT_STEP: f64 = 1e-5;
pub const DEFAULT_HESSIAN_STEP: f64 = 1e-4;

fn check_interior<T: Real>(domain: &BoxDomain<T>, p: &Point<T>, h: T) -> Result<()> {
    if !(h > T::zero()) || !h.is_finite() {
        return Err(Error::InvalidInput(format!("finite-difference step must be positive, got {h}")));
    }
    if !domain.contains_with_margin(&p.stacked(), h) {
        return Err(Error::OutOfDomain {
            point: p.to_string(),
            margin: to_f64(h),
        });
    }
    Ok(())
}

fn eval<T: Real>(f: &dyn Objective<T>, z: &[T], dx: usize) -> T {
    f.value(&z[..dx], &z[dx..])
}

pub(crate) fn central_gradient<T: Real>(f: &dyn Objective<T>, p: &Point<T>, h: T) -> Gradient<T> {
    let dx = f.dim_x();
    let mut z = p.stacked();
    let two_h = h + h;
    let mut g = Vec::with_capacity(z.len());
    for i in 0..z.len() {
        let zi = z[i];
        z[i] = zi + h;
        let fp = eval(f, &z, dx);
        z[i] = zi - h;
        let fm = eval(f, &z, dx);
        z[i] = zi;
        g.push((fp - fm) / two_h);
    }
    let gy = g.split_off(dx);
    Gradient { gx: g, gy }
}

pub(crate) fn central_hessian<T: Real>(f: &dyn Objective<T>, p: &Point<T>, h: T) -> HessianBlocks<T> {
    let dx = f.dim_x();
    let dy = f.dim_y();
    let n = dx + dy;
    let mut z = p.stacked();
    let f0 = eval(f, &z, dx);
    let h2 = h * h;
    let four_h2 = h2 * crate::lit(4.0);
    let mut full = Matrix::zeros(n, n);
    for i in 0..n {
        let zi = z[i];
        z[i] = zi + h;
        let fp = eval(f, &z, dx);
        z[i] = zi - h;
        let fm = eval(f, &z, dx);
        z[i] = zi;
        full[(i, i)] = (fp - f0 - f0 + fm) / h2;
        for j in 0..i {
            let zj = z[j];
            let corner = |si: T, sj: T, z: &mut Vec<T>| {
                z[i] = zi + si * h;
                z[j] = zj + sj * h;
                let v = eval(f, z, dx);
                z[i] = zi;
                z[j] = zj;
                v
            };
            let one = T::one();
            let fpp = corner(one, one, &mut z);
            let fpm = corner(one, -one, &mut z);
            let fmp = corner(-one, one, &mut z);
            let fmm = corner(-one, -one, &mut z);
            let v = (fpp - fpm - fmp + fmm) / four_h2;
            full[(i, j)] = v;
            full[(j, i)] = v;
        }
    }
    split_blocks(&full, dx)
}

pub(crate) fn split_blocks<T: Real>(full: &Matrix<T>, dx: usize) -> HessianBlocks<T> {
    let n = full.rows();
    let dy = n - dx;
    let mut a = Matrix::zeros(dx, dx);
    let mut b = Matrix::zeros(dy, dy);
    let mut c = Matrix::zeros(dx, dy);
    for i in 0..n {
        for j in 0..n {
            let v = full[(i, j)];
            match (i < dx, j < dx) {
                (true, true) => a[(i, j)] = v,
                (false, false) => b[(i - dx, j - dx)] = v,
                (true, false) => c[(i, j - dx)] = v,
                (false, true) => {}
            }
        }
    }
    HessianBlocks { a, b, c }
}

/// Central-difference gradient with step `h`.
///
/// `p` must lie inside the domain by at least `h` in every coordinate.
pub fn fd_gradient<T: Real>(f: &dyn Objective<T>, p: &Point<T>, h: T) -> Result<Gradient<T>> {
    super::check_dims(f, p)?;
    check_interior(&f.domain(), p, h)?;
    let g = central_gradient(f, p, h);
    if !g.is_finite() {
        return Err(Error::NonFinite(format!("finite-difference gradient at {p}")));
    }
    Ok(g)
}

/// Second-order central-difference Hessian with step `h`; `a` and `b` are
/// symmetric by construction.
pub fn fd_hessian<T: Real>(f: &dyn Objective<T>, p: &Point<T>, h: T) -> Result<HessianBlocks<T>> {
    super::check_dims(f, p)?;
    check_interior(&f.domain(), p, h)?;
    let hb = central_hessian(f, p, h);
    if !hb.is_finite() {
        return Err(Error::NonFinite(format!("finite-difference Hessian at {p}")));
    }
    Ok(hb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::catalog;

    #[test]
    fn gradient_of_saddle_and_sine() {
        let f = catalog::<f64>("quadratic_saddle").unwrap();
        let g = fd_gradient(f.as_ref(), &Point::from_f64(&[1.0], &[1.0]), 1e-5).unwrap();
        assert!((g.gx[0] - 2.0).abs() < 1e-8 && (g.gy[0] + 2.0).abs() < 1e-8);

        let f = catalog::<f64>("sin_sum").unwrap();
        let g = fd_gradient(f.as_ref(), &Point::from_f64(&[0.0], &[0.0]), 1e-4).unwrap();
        let exact = f.gradient(&[0.0], &[0.0]).unwrap();
        assert!((g.gx[0] - exact.gx[0]).abs() < 1e-7);
        assert!((g.gy[0] - exact.gy[0]).abs() < 1e-7);
    }

    #[test]
    fn outside_box_is_rejected() {
        let f = catalog::<f64>("xy_cos").unwrap();
        let err = fd_gradient(f.as_ref(), &Point::from_f64(&[2.0], &[0.0]), 1e-5).unwrap_err();
        assert!(matches!(err, Error::OutOfDomain { .. }));
        // On the boundary the stencil would step outside.
        let err = fd_gradient(f.as_ref(), &Point::from_f64(&[1.0], &[0.0]), 1e-5).unwrap_err();
        assert!(matches!(err, Error::OutOfDomain { .. }));
    }

    #[test]
    fn hessian_examples() {
        let f = catalog::<f64>("quadratic_saddle").unwrap();
        let h = fd_hessian(f.as_ref(), &Point::from_f64(&[0.7], &[-1.3]), 1e-4).unwrap();
        assert!((h.a[(0, 0)] - 2.0).abs() < 1e-5);
        assert!((h.b[(0, 0)] + 2.0).abs() < 1e-5);
        assert!(h.c[(0, 0)].abs() < 1e-5);

        let f = catalog::<f64>("coupled_quadratic").unwrap();
        let h = fd_hessian(f.as_ref(), &Point::from_f64(&[0.0], &[0.0]), 1e-4).unwrap();
        assert!((h.c[(0, 0)] - 5.0).abs() < 1e-5);

        let f = catalog::<f64>("xy_cos").unwrap();
        let pi = std::f64::consts::PI;
        let h = fd_hessian(f.as_ref(), &Point::from_f64(&[0.0], &[-pi]), 1e-4).unwrap();
        assert!((h.b[(0, 0)] - (-pi).cos()).abs() < 1e-5);
        assert!((h.b[(0, 0)] + 1.0).abs() < 1e-5);
    }
}
