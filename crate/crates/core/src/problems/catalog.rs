//! Named analytic objectives with exact differentials.

use std::f64::consts::PI;

use serde::Serialize;

use super::{BoxDomain, Gradient, HessianBlocks, Lipschitz, Objective};
use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigenvalues, Matrix};
use crate::scalar::Real;

type ValueFn<T> = Box<dyn Fn(&[T], &[T]) -> T + Send + Sync>;
type GradFn<T> = Box<dyn Fn(&[T], &[T]) -> Gradient<T> + Send + Sync>;
type HessFn<T> = Box<dyn Fn(&[T], &[T]) -> HessianBlocks<T> + Send + Sync>;

/// An objective assembled from closures.
pub struct AnalyticObjective<T: Real> {
    name: String,
    dim_x: usize,
    dim_y: usize,
    domain: BoxDomain<T>,
    value: ValueFn<T>,
    gradient: Option<GradFn<T>>,
    hessian: Option<HessFn<T>>,
    lipschitz: Lipschitz<T>,
}

impl<T: Real> AnalyticObjective<T> {
    pub fn new(
        name: impl Into<String>,
        dim_x: usize,
        dim_y: usize,
        domain: BoxDomain<T>,
        value: impl Fn(&[T], &[T]) -> T + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            dim_x,
            dim_y,
            domain,
            value: Box::new(value),
            gradient: None,
            hessian: None,
            lipschitz: Lipschitz::default(),
        }
    }

    pub fn with_gradient(mut self, g: impl Fn(&[T], &[T]) -> Gradient<T> + Send + Sync + 'static) -> Self {
        self.gradient = Some(Box::new(g));
        self
    }

    pub fn with_hessian(
        mut self,
        h: impl Fn(&[T], &[T]) -> HessianBlocks<T> + Send + Sync + 'static,
    ) -> Self {
        self.hessian = Some(Box::new(h));
        self
    }

    pub fn with_lipschitz(mut self, value: Option<f64>, gradient: Option<f64>) -> Self {
        self.lipschitz = Lipschitz {
            value: value.map(crate::lit),
            gradient: gradient.map(crate::lit),
        };
        self
    }
}

impl<T: Real> Objective<T> for AnalyticObjective<T> {
    fn name(&self) -> String {
        self.name.clone()
    }
    fn dim_x(&self) -> usize {
        self.dim_x
    }
    fn dim_y(&self) -> usize {
        self.dim_y
    }
    fn domain(&self) -> BoxDomain<T> {
        self.domain.clone()
    }
    fn value(&self, x: &[T], y: &[T]) -> T {
        (self.value)(x, y)
    }
    fn gradient(&self, x: &[T], y: &[T]) -> Option<Gradient<T>> {
        self.gradient.as_ref().map(|g| g(x, y))
    }
    fn hessian(&self, x: &[T], y: &[T]) -> Option<HessianBlocks<T>> {
        self.hessian.as_ref().map(|h| h(x, y))
    }
    fn lipschitz(&self) -> Lipschitz<T> {
        self.lipschitz
    }
}

/// One row of the catalog table.
#[derive(Clone, Debug, Serialize)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub formula: &'static str,
    pub domain: &'static str,
    pub role: &'static str,
    pub parameterized: bool,
}

const ENTRIES: &[CatalogEntry] = &[
    CatalogEntry {
        name: "quadratic_saddle",
        formula: "x^2 - y^2",
        domain: "R x R",
        role: "local Nash and local minimax at the origin",
        parameterized: false,
    },
    CatalogEntry {
        name: "coupled_quadratic",
        formula: "-x^2 + 5xy - y^2",
        domain: "R x R",
        role: "local minimax but not local Nash at the origin",
        parameterized: false,
    },
    CatalogEntry {
        name: "xy_cos",
        formula: "0.2xy - cos(y)",
        domain: "[-1,1] x [-2pi,2pi]",
        role: "global minimax at (0, +-pi) that is neither stationary nor local minimax",
        parameterized: false,
    },
    CatalogEntry {
        name: "xy_cos_concave",
        formula: "-0.03x^2 + 0.2xy - cos(y)",
        domain: "[-1,1] x [-2pi,2pi]",
        role: "windowed (Evtushenko) minimax at (0,-pi) that is not local",
        parameterized: false,
    },
    CatalogEntry {
        name: "sin_sum",
        formula: "sin(x + y)",
        domain: "R x R",
        role: "no pure Nash equilibrium, local or global",
        parameterized: false,
    },
    CatalogEntry {
        name: "no_local_minimax",
        formula: "y^2 - 2xy",
        domain: "[-1,1] x [-1,1]",
        role: "no local minimax point on the box",
        parameterized: false,
    },
    CatalogEntry {
        name: "limit_nash",
        formula: "x^2 + 2 sqrt(eps) xy + (eps/2) y^2",
        domain: "R x R",
        role: "gamma-GDA stable for gamma = 1/eps but not local Nash",
        parameterized: true,
    },
    CatalogEntry {
        name: "limit_minimax",
        formula: "-x^2 + 2 sqrt(eps) xy - (eps/2) y^2",
        domain: "R x R",
        role: "strict local minimax but gamma-GDA unstable for gamma = 1/eps",
        parameterized: true,
    },
    CatalogEntry {
        name: "limit_minimax_4d",
        formula: "x1^2 + 2 sqrt(eps) x1 y1 + (eps/2) y1^2 - x2^2/2 + 2 sqrt(eps) x2 y2 - eps y2^2",
        domain: "R^2 x R^2",
        role: "gamma-GDA stable but neither local minimax nor local maximin",
        parameterized: true,
    },
    CatalogEntry {
        name: "bilinear",
        formula: "xy",
        domain: "R x R",
        role: "GDA flow cycles, discrete GDA spirals outward",
        parameterized: false,
    },
    CatalogEntry {
        name: "strong_concave_y",
        formula: "x^2 - (y - x)^2",
        domain: "[-2,2] x [-2,2]",
        role: "strongly concave in y, phi(x) = x^2; max-oracle rate study",
        parameterized: false,
    },
    CatalogEntry {
        name: "abs_value",
        formula: "xy",
        domain: "[-2,2] x [-1,1]",
        role: "phi(x) = |x|; nonsmooth Moreau envelope",
        parameterized: false,
    },
    CatalogEntry {
        name: "degenerate_b",
        formula: "x^2 + xy",
        domain: "R x R",
        role: "singular yy-Hessian at the origin",
        parameterized: false,
    },
];

/// All catalog identifiers with formula, domain and role.
pub fn catalog_entries() -> &'static [CatalogEntry] {
    ENTRIES
}

/// Looks up a catalog entry; parameterized entries use `eps = 1`.
pub fn catalog<T: Real>(name: &str) -> Result<Box<dyn Objective<T>>> {
    catalog_with_param(name, 1.0)
}

fn l<T: Real>(v: f64) -> T {
    crate::lit(v)
}

fn m1<T: Real>(v: T) -> Matrix<T> {
    Matrix::diag(&[v])
}

fn g1<T: Real>(gx: T, gy: T) -> Gradient<T> {
    Gradient {
        gx: vec![gx],
        gy: vec![gy],
    }
}

fn h1<T: Real>(a: T, b: T, c: T) -> HessianBlocks<T> {
    HessianBlocks {
        a: m1(a),
        b: m1(b),
        c: m1(c),
    }
}

fn spectral_norm(h: &[&[f64]]) -> f64 {
    let m = Matrix::<f64>::from_f64_rows(h);
    symmetric_eigenvalues(&m)
        .expect("constant Hessian is symmetric")
        .iter()
        .fold(0.0, |acc: f64, v| acc.max(v.abs()))
}

/// Scalar quadratic `½a x² + c xy + ½b y²` on `domain`.
fn scalar_quadratic<T: Real>(
    name: String,
    a: f64,
    b: f64,
    c: f64,
    domain: BoxDomain<T>,
    value_lipschitz: Option<f64>,
) -> AnalyticObjective<T> {
    let (ta, tb, tc): (T, T, T) = (l(a), l(b), l(c));
    let half: T = l(0.5);
    let ell = spectral_norm(&[&[a, c], &[c, b]]);
    AnalyticObjective::new(name, 1, 1, domain, move |x, y| {
        half * ta * x[0] * x[0] + tc * x[0] * y[0] + half * tb * y[0] * y[0]
    })
    .with_gradient(move |x, y| g1(ta * x[0] + tc * y[0], tc * x[0] + tb * y[0]))
    .with_hessian(move |_, _| h1(ta, tb, tc))
    .with_lipschitz(value_lipschitz, Some(ell))
}

fn xy_cos_family<T: Real>(name: &str, quad: f64, value_lipschitz: f64, ell: f64) -> AnalyticObjective<T> {
    let q: T = l(quad);
    let k: T = l(0.2);
    let half: T = l(0.5);
    AnalyticObjective::new(
        name,
        1,
        1,
        BoxDomain::from_intervals(&[(-1.0, 1.0), (-2.0 * PI, 2.0 * PI)]),
        move |x, y| half * q * x[0] * x[0] + k * x[0] * y[0] - y[0].cos(),
    )
    .with_gradient(move |x, y| g1(q * x[0] + k * y[0], k * x[0] + y[0].sin()))
    .with_hessian(move |_, y| h1(q, y[0].cos(), k))
    .with_lipschitz(Some(value_lipschitz), Some(ell))
}

/// Looks up a catalog entry with parameter `eps` (ignored by fixed entries).
pub fn catalog_with_param<T: Real>(name: &str, eps: f64) -> Result<Box<dyn Objective<T>>> {
    let unbounded2 = || BoxDomain::<T>::unbounded(2);
    let entry = ENTRIES
        .iter()
        .find(|e| e.name == name)
        .ok_or_else(|| Error::UnknownName(name.to_string()))?;
    if entry.parameterized && !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidInput(format!("parameter eps must be positive, got {eps}")));
    }
    let label = if entry.parameterized {
        format!("{name}[eps={eps}]")
    } else {
        name.to_string()
    };
    let se = eps.sqrt();
    let f: Box<dyn Objective<T>> = match name {
        "quadratic_saddle" => Box::new(scalar_quadratic(label, 2.0, -2.0, 0.0, unbounded2(), None)),
        "coupled_quadratic" => Box::new(scalar_quadratic(label, -2.0, -2.0, 5.0, unbounded2(), None)),
        "bilinear" => Box::new(scalar_quadratic(label, 0.0, 0.0, 1.0, unbounded2(), None)),
        "degenerate_b" => Box::new(scalar_quadratic(label, 2.0, 0.0, 1.0, unbounded2(), None)),
        "limit_nash" => Box::new(scalar_quadratic(label, 2.0, eps, 2.0 * se, unbounded2(), None)),
        "limit_minimax" => Box::new(scalar_quadratic(label, -2.0, -eps, 2.0 * se, unbounded2(), None)),
        "no_local_minimax" => Box::new(scalar_quadratic(
            label,
            0.0,
            2.0,
            -2.0,
            BoxDomain::from_intervals(&[(-1.0, 1.0), (-1.0, 1.0)]),
            Some(20f64.sqrt()),
        )),
        "strong_concave_y" => Box::new(scalar_quadratic(
            label,
            0.0,
            -2.0,
            2.0,
            BoxDomain::from_intervals(&[(-2.0, 2.0), (-2.0, 2.0)]),
            Some(80f64.sqrt()),
        )),
        "abs_value" => Box::new(scalar_quadratic(
            label,
            0.0,
            0.0,
            1.0,
            BoxDomain::from_intervals(&[(-2.0, 2.0), (-1.0, 1.0)]),
            Some(5f64.sqrt()),
        )),
        "xy_cos" => Box::new(xy_cos_family(&label, 0.0, 1.54, (1.0 + 1.16f64.sqrt()) / 2.0)),
        "xy_cos_concave" => Box::new(xy_cos_family(&label, -0.06, 1.58, 1.041)),
        "sin_sum" => Box::new(
            AnalyticObjective::new(label, 1, 1, unbounded2(), |x: &[T], y: &[T]| (x[0] + y[0]).sin())
                .with_gradient(|x, y| {
                    let c = (x[0] + y[0]).cos();
                    g1(c, c)
                })
                .with_hessian(|x, y| {
                    let s = -(x[0] + y[0]).sin();
                    h1(s, s, s)
                })
                .with_lipschitz(Some(2f64.sqrt()), Some(2.0)),
        ),
        "limit_minimax_4d" => {
            let e: T = l(eps);
            let s2: T = l(2.0 * se);
            let half: T = l(0.5);
            let ell = spectral_norm(&[
                &[2.0, 0.0, 2.0 * se, 0.0],
                &[0.0, -1.0, 0.0, 2.0 * se],
                &[2.0 * se, 0.0, eps, 0.0],
                &[0.0, 2.0 * se, 0.0, -2.0 * eps],
            ]);
            Box::new(
                AnalyticObjective::new(label, 2, 2, BoxDomain::unbounded(4), move |x: &[T], y: &[T]| {
                    x[0] * x[0] + s2 * x[0] * y[0] + half * e * y[0] * y[0] - half * x[1] * x[1]
                        + s2 * x[1] * y[1]
                        - e * y[1] * y[1]
                })
                .with_gradient(move |x, y| Gradient {
                    gx: vec![x[0] + x[0] + s2 * y[0], -x[1] + s2 * y[1]],
                    gy: vec![s2 * x[0] + e * y[0], s2 * x[1] - (e + e) * y[1]],
                })
                .with_hessian(move |_, _| HessianBlocks {
                    a: Matrix::diag(&[l(2.0), l(-1.0)]),
                    b: Matrix::diag(&[e, -(e + e)]),
                    c: Matrix::diag(&[s2, s2]),
                })
                .with_lipschitz(None, Some(ell)),
            )
        }
        _ => unreachable!("every table entry has a constructor"),
    };
    Ok(f)
}
