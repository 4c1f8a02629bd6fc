//! Quadratic forms `f = ½xᵀAx + xᵀCy + ½yᵀBy`, stationary at the origin.

use rand::Rng;

use super::{BoxDomain, Gradient, HessianBlocks, Lipschitz, Objective};
use crate::error::Result;
use crate::linalg::{schur_complement, symmetric_eigenvalues, Matrix};
use crate::scalar::Real;

#[derive(Clone, Debug)]
pub struct Quadratic<T: Real> {
    blocks: HessianBlocks<T>,
    ell: T,
}

impl<T: Real> Quadratic<T> {
    /// `a` and `b` are symmetrized.
    pub fn new(a: Matrix<T>, b: Matrix<T>, c: Matrix<T>) -> Result<Self> {
        let blocks = HessianBlocks {
            a: a.symmetrized(),
            b: b.symmetrized(),
            c,
        };
        Matrix::from_blocks(&blocks.a, &blocks.c, &blocks.c.transpose(), &blocks.b)?;
        let ell = symmetric_eigenvalues(&blocks.full())?
            .iter()
            .fold(T::zero(), |m, v| m.max(v.abs()));
        Ok(Self { blocks, ell })
    }

    pub fn blocks(&self) -> &HessianBlocks<T> {
        &self.blocks
    }
}

impl<T: Real> Objective<T> for Quadratic<T> {
    fn name(&self) -> String {
        format!("quadratic[{}x{}]", self.blocks.a.rows(), self.blocks.b.rows())
    }
    fn dim_x(&self) -> usize {
        self.blocks.a.rows()
    }
    fn dim_y(&self) -> usize {
        self.blocks.b.rows()
    }
    fn domain(&self) -> BoxDomain<T> {
        BoxDomain::unbounded(self.dim_x() + self.dim_y())
    }
    fn value(&self, x: &[T], y: &[T]) -> T {
        let dot = |u: &[T], v: &[T]| u.iter().zip(v).map(|(&p, &q)| p * q).sum::<T>();
        let half: T = crate::lit(0.5);
        half * dot(x, &self.blocks.a.mul_vec(x))
            + dot(x, &self.blocks.c.mul_vec(y))
            + half * dot(y, &self.blocks.b.mul_vec(y))
    }
    fn gradient(&self, x: &[T], y: &[T]) -> Option<Gradient<T>> {
        let ct = self.blocks.c.transpose();
        let add = |u: Vec<T>, v: Vec<T>| u.into_iter().zip(v).map(|(p, q)| p + q).collect();
        Some(Gradient {
            gx: add(self.blocks.a.mul_vec(x), self.blocks.c.mul_vec(y)),
            gy: add(ct.mul_vec(x), self.blocks.b.mul_vec(y)),
        })
    }
    fn hessian(&self, _x: &[T], _y: &[T]) -> Option<HessianBlocks<T>> {
        Some(self.blocks.clone())
    }
    fn lipschitz(&self) -> Lipschitz<T> {
        Lipschitz {
            value: None,
            gradient: Some(self.ell),
        }
    }
}

fn random_symmetric<R: Rng>(n: usize, rng: &mut R) -> Matrix<f64> {
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = rng.gen_range(-2.0..2.0);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

fn random_matrix<R: Rng>(r: usize, c: usize, rng: &mut R) -> Matrix<f64> {
    let data = (0..r * c).map(|_| rng.gen_range(-2.0..2.0)).collect();
    Matrix::new(r, c, data).expect("finite by construction")
}

/// Random orthogonal matrix by Gram–Schmidt on a random square matrix.
fn random_orthogonal<R: Rng>(n: usize, rng: &mut R) -> Matrix<f64> {
    loop {
        let m = random_matrix(n, n, rng);
        let mut q: Vec<Vec<f64>> = Vec::with_capacity(n);
        for i in 0..n {
            let mut v = m.row(i).to_vec();
            for u in &q {
                let d: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(u).for_each(|(a, b)| *a -= d * b);
            }
            let nv = crate::scalar::norm(&v);
            if nv < 1e-3 {
                break;
            }
            v.iter_mut().for_each(|a| *a /= nv);
            q.push(v);
        }
        if q.len() == n {
            return Matrix::from_rows(&q);
        }
    }
}

/// Symmetric matrix `Q diag(λ) Qᵀ` with eigenvalue magnitudes in
/// `[margin, 3]`; all negative with probability `neg_bias`, random signs
/// otherwise.
fn random_spectrum<R: Rng>(n: usize, margin: f64, neg_bias: f64, rng: &mut R) -> Matrix<f64> {
    let all_negative = rng.gen_bool(neg_bias);
    let lambdas: Vec<f64> = (0..n)
        .map(|_| {
            let mag = rng.gen_range(margin..3.0);
            if all_negative || rng.gen_bool(0.5) {
                -mag
            } else {
                mag
            }
        })
        .collect();
    let q = random_orthogonal(n, rng);
    let d = Matrix::diag(&lambdas);
    q.matmul(&d)
        .and_then(|qd| qd.matmul(&q.transpose()))
        .expect("conforming")
        .symmetrized()
}

/// Quadratic with independent uniform entries in `[-2, 2)`.
pub fn random_quadratic<R: Rng>(d1: usize, d2: usize, rng: &mut R) -> Quadratic<f64> {
    Quadratic::new(random_symmetric(d1, rng), random_symmetric(d2, rng), random_matrix(d1, d2, rng))
        .expect("finite by construction")
}

/// Quadratic whose `B` and Schur complement `A − C B⁻¹ Cᵀ` have every
/// eigenvalue at least `margin` away from zero.
///
/// `B` is negative definite about half the time so that strict local
/// minimax and non-minimax instances are both common.
pub fn random_quadratic_with_margins<R: Rng>(d1: usize, d2: usize, margin: f64, rng: &mut R) -> Quadratic<f64> {
    loop {
        let b = random_spectrum(d2, margin * 1.5, 0.5, rng);
        let c = random_matrix(d1, d2, rng).scale(0.5);
        let a = random_symmetric(d1, rng);
        let Ok(s) = schur_complement(&a, &b, &c) else {
            continue;
        };
        let Ok(mu) = symmetric_eigenvalues(&s) else {
            continue;
        };
        if mu.iter().all(|m| m.abs() > margin) {
            return Quadratic::new(a, b, c).expect("finite by construction");
        }
    }
}
