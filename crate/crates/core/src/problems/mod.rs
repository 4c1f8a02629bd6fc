//! Objective functions `f: X × Y → ℝ`, their differentials, and the catalog
//! of worked examples.

mod catalog;
pub mod expr;
mod fd;
mod quadratic;

use serde::Serialize;

pub use catalog::{catalog, catalog_entries, catalog_with_param, AnalyticObjective, CatalogEntry};
pub use expr::ExprObjective;
pub use fd::{fd_gradient, fd_hessian, DEFAULT_GRADIENT_STEP, DEFAULT_HESSIAN_STEP};
pub use quadratic::{random_quadratic, random_quadratic_with_margins, Quadratic};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::{norm, Real};

/// A point `(x, y)` with `x ∈ ℝ^{d1}`, `y ∈ ℝ^{d2}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Point<T> {
    pub x: Vec<T>,
    pub y: Vec<T>,
}

impl<T: Real> Point<T> {
    pub fn new(x: Vec<T>, y: Vec<T>) -> Self {
        Self { x, y }
    }

    pub fn from_f64(x: &[f64], y: &[f64]) -> Self {
        Self {
            x: x.iter().map(|&v| crate::lit(v)).collect(),
            y: y.iter().map(|&v| crate::lit(v)).collect(),
        }
    }

    /// Splits a stacked vector `z = (x, y)`.
    pub fn from_stacked(z: &[T], dim_x: usize) -> Self {
        Self {
            x: z[..dim_x].to_vec(),
            y: z[dim_x..].to_vec(),
        }
    }

    pub fn stacked(&self) -> Vec<T> {
        self.x.iter().chain(&self.y).copied().collect()
    }

    pub fn origin(dim_x: usize, dim_y: usize) -> Self {
        Self {
            x: vec![T::zero(); dim_x],
            y: vec![T::zero(); dim_y],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(&self.y).all(|v| v.is_finite())
    }

    pub fn norm(&self) -> T {
        norm(&self.stacked())
    }

    pub fn distance(&self, other: &Self) -> T {
        crate::scalar::dist(&self.stacked(), &other.stacked())
    }
}

impl<T: Real> std::fmt::Display for Point<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let join = |v: &[T]| v.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(", ");
        write!(f, "(x = [{}], y = [{}])", join(&self.x), join(&self.y))
    }
}

/// Per-coordinate bounds over the stacked coordinates `(x, y)`; infinite
/// bounds mean unbounded.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoxDomain<T> {
    pub lower: Vec<T>,
    pub upper: Vec<T>,
}

impl<T: Real> BoxDomain<T> {
    pub fn unbounded(dim: usize) -> Self {
        Self {
            lower: vec![T::neg_infinity(); dim],
            upper: vec![T::infinity(); dim],
        }
    }

    pub fn new(lower: Vec<T>, upper: Vec<T>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch("box bounds differ in length".into()));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::InvalidInput("box lower bound exceeds upper bound".into()));
        }
        Ok(Self { lower, upper })
    }

    /// Box from `(lo, hi)` pairs, one per stacked coordinate.
    pub fn from_intervals(bounds: &[(f64, f64)]) -> Self {
        Self {
            lower: bounds.iter().map(|b| crate::lit(b.0)).collect(),
            upper: bounds.iter().map(|b| crate::lit(b.1)).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, z: &[T]) -> bool {
        self.contains_with_margin(z, T::zero())
    }

    pub fn contains_with_margin(&self, z: &[T], margin: T) -> bool {
        z.len() == self.dim()
            && z
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(&v, (&l, &u))| v >= l + margin && v <= u - margin)
    }

    pub fn contains_point(&self, p: &Point<T>) -> bool {
        self.contains(&p.stacked())
    }

    pub fn is_bounded(&self) -> bool {
        self.lower.iter().chain(&self.upper).all(|v| v.is_finite())
    }

    /// Restriction to coordinates `range`.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        Self {
            lower: self.lower[range.clone()].to_vec(),
            upper: self.upper[range].to_vec(),
        }
    }

    /// Coordinate-wise intersection.
    pub fn intersect(&self, other: &Self) -> Self {
        Self {
            lower: self.lower.iter().zip(&other.lower).map(|(&a, &b)| a.max(b)).collect(),
            upper: self.upper.iter().zip(&other.upper).map(|(&a, &b)| a.min(b)).collect(),
        }
    }

    pub fn clamp(&self, z: &mut [T]) {
        for ((v, &l), &u) in z.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.max(l).min(u);
        }
    }

    pub fn diameter(&self) -> T {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(&l, &u)| (u - l) * (u - l))
            .sum::<T>()
            .sqrt()
    }
}

/// Partial gradients `(∇ₓf, ∇ᵧf)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Gradient<T> {
    pub gx: Vec<T>,
    pub gy: Vec<T>,
}

impl<T: Real> Gradient<T> {
    pub fn norm(&self) -> T {
        self.gx
            .iter()
            .chain(&self.gy)
            .map(|&v| v * v)
            .sum::<T>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.gx.iter().chain(&self.gy).all(|v| v.is_finite())
    }

    pub fn stacked(&self) -> Vec<T> {
        self.gx.iter().chain(&self.gy).copied().collect()
    }
}

/// The partitioned Hessian: `a = ∇²ₓₓf`, `b = ∇²ᵧᵧf`, `c = ∇²ₓᵧf`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HessianBlocks<T> {
    pub a: Matrix<T>,
    pub b: Matrix<T>,
    pub c: Matrix<T>,
}

impl<T: Real> HessianBlocks<T> {
    pub fn from_f64(a: &[&[f64]], b: &[&[f64]], c: &[&[f64]]) -> Self {
        Self {
            a: Matrix::from_f64_rows(a),
            b: Matrix::from_f64_rows(b),
            c: Matrix::from_f64_rows(c),
        }
    }

    /// The full `(d1+d2)²` Hessian.
    pub fn full(&self) -> Matrix<T> {
        Matrix::from_blocks(&self.a, &self.c, &self.c.transpose(), &self.b)
            .expect("blocks conform by construction")
    }

    pub fn is_finite(&self) -> bool {
        self.a.is_finite() && self.b.is_finite() && self.c.is_finite()
    }
}

/// Lipschitz constants of `f` (value) and of `∇f` (gradient) on the domain.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Lipschitz<T> {
    /// `L`: `|f(p) − f(q)| ≤ L‖p − q‖`.
    pub value: Option<T>,
    /// `ℓ`: `‖∇f(p) − ∇f(q)‖ ≤ ℓ‖p − q‖`.
    pub gradient: Option<T>,
}

/// An objective `f(x, y)` on a box domain.
///
/// Analytic differentials are optional; [`gradient_at`] and [`hessian_at`]
/// fall back to central finite differences.
pub trait Objective<T: Real>: Send + Sync {
    fn name(&self) -> String;
    fn dim_x(&self) -> usize;
    fn dim_y(&self) -> usize;
    fn domain(&self) -> BoxDomain<T>;
    fn value(&self, x: &[T], y: &[T]) -> T;

    fn gradient(&self, _x: &[T], _y: &[T]) -> Option<Gradient<T>> {
        None
    }

    fn hessian(&self, _x: &[T], _y: &[T]) -> Option<HessianBlocks<T>> {
        None
    }

    fn lipschitz(&self) -> Lipschitz<T> {
        Lipschitz::default()
    }

    fn x_box(&self) -> BoxDomain<T> {
        self.domain().slice(0..self.dim_x())
    }

    fn y_box(&self) -> BoxDomain<T> {
        self.domain().slice(self.dim_x()..self.dim_x() + self.dim_y())
    }
}

fn check_dims<T: Real>(f: &dyn Objective<T>, p: &Point<T>) -> Result<()> {
    if p.x.len() != f.dim_x() || p.y.len() != f.dim_y() {
        return Err(Error::DimensionMismatch(format!(
            "point has ({}, {}) coordinates, objective expects ({}, {})",
            p.x.len(),
            p.y.len(),
            f.dim_x(),
            f.dim_y()
        )));
    }
    Ok(())
}

/// Value at `p`, checked for dimensions and finiteness.
pub fn value_at<T: Real>(f: &dyn Objective<T>, p: &Point<T>) -> Result<T> {
    check_dims(f, p)?;
    let v = f.value(&p.x, &p.y);
    if !v.is_finite() {
        return Err(Error::NonFinite(format!("f at {p}")));
    }
    Ok(v)
}

/// Analytic gradient when available, central differences otherwise.
pub fn gradient_at<T: Real>(f: &dyn Objective<T>, p: &Point<T>) -> Result<Gradient<T>> {
    check_dims(f, p)?;
    let g = match f.gradient(&p.x, &p.y) {
        Some(g) => g,
        None => fd::central_gradient(f, p, crate::lit(DEFAULT_GRADIENT_STEP)),
    };
    if !g.is_finite() {
        return Err(Error::NonFinite(format!("gradient at {p}")));
    }
    Ok(g)
}

/// Analytic Hessian when available, central differences otherwise.
pub fn hessian_at<T: Real>(f: &dyn Objective<T>, p: &Point<T>) -> Result<HessianBlocks<T>> {
    check_dims(f, p)?;
    let h = match f.hessian(&p.x, &p.y) {
        Some(h) => h,
        None => fd::central_hessian(f, p, crate::lit(DEFAULT_HESSIAN_STEP)),
    };
    if !h.is_finite() {
        return Err(Error::NonFinite(format!("Hessian at {p}")));
    }
    Ok(h)
}

/// `g(u, v) := −f(v, u)`: the maximin problem of `f` seen as a minimax
/// problem, with the players' roles exchanged.
pub struct Swapped<'a, T: Real>(pub &'a dyn Objective<T>);

impl<T: Real> Swapped<'_, T> {
    pub fn swap_point(p: &Point<T>) -> Point<T> {
        Point::new(p.y.clone(), p.x.clone())
    }
}

impl<T: Real> Objective<T> for Swapped<'_, T> {
    fn name(&self) -> String {
        format!("swapped({})", self.0.name())
    }

    fn dim_x(&self) -> usize {
        self.0.dim_y()
    }

    fn dim_y(&self) -> usize {
        self.0.dim_x()
    }

    fn domain(&self) -> BoxDomain<T> {
        let d = self.0.domain();
        let dx = self.0.dim_x();
        let mut lower = d.lower[dx..].to_vec();
        lower.extend_from_slice(&d.lower[..dx]);
        let mut upper = d.upper[dx..].to_vec();
        upper.extend_from_slice(&d.upper[..dx]);
        BoxDomain { lower, upper }
    }

    fn value(&self, u: &[T], v: &[T]) -> T {
        -self.0.value(v, u)
    }

    fn gradient(&self, u: &[T], v: &[T]) -> Option<Gradient<T>> {
        let g = self.0.gradient(v, u)?;
        Some(Gradient {
            gx: g.gy.iter().map(|&c| -c).collect(),
            gy: g.gx.iter().map(|&c| -c).collect(),
        })
    }

    fn hessian(&self, u: &[T], v: &[T]) -> Option<HessianBlocks<T>> {
        let h = self.0.hessian(v, u)?;
        let neg = -T::one();
        Some(HessianBlocks {
            a: h.b.scale(neg),
            b: h.a.scale(neg),
            c: h.c.transpose().scale(neg),
        })
    }

    fn lipschitz(&self) -> Lipschitz<T> {
        self.0.lipschitz()
    }
}
