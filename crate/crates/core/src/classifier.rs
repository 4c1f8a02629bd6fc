//! Second-order classification of stationary points: strict local Nash,
//! strict local minimax/maximin, γ-GDA linear stability and the ∞-GDA limit.

use num_complex::Complex;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::export::complex_list;
use crate::linalg::{
    general_eigenvalues, min_cost_matching, near_singular_symmetric, schur_complement_with,
    symmetric_eigenvalues, Matrix,
};
use crate::problems::{gradient_at, hessian_at, HessianBlocks, Objective, Point};
use crate::scalar::{lit, to_f64, Real};

pub const DEFAULT_STATION_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_STRICT_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_SINGULARITY_TOLERANCE: f64 = crate::linalg::DEFAULT_SINGULARITY_TOLERANCE;
pub const DEFAULT_GAMMA_LADDER: [f64; 4] = [10.0, 100.0, 1000.0, 10000.0];

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Tolerances<T> {
    /// `‖∇f‖ ≤ station` counts as stationary.
    pub station: T,
    /// Band around zero in which eigenvalue signs are not trusted.
    pub strict: T,
    /// `min|eig B| ≤ sing · max(1, ‖B‖)` counts as singular.
    pub sing: T,
}

impl<T: Real> Default for Tolerances<T> {
    fn default() -> Self {
        Self {
            station: lit(DEFAULT_STATION_TOLERANCE),
            strict: lit(DEFAULT_STRICT_TOLERANCE),
            sing: lit(DEFAULT_SINGULARITY_TOLERANCE),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum NashVerdict {
    StrictNash,
    NotNash,
    SecondOrderMarginal,
    NotStationary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum MinimaxVerdict {
    StrictLocalMinimax,
    NecessaryFailed,
    DegenerateB,
    SecondOrderMarginal,
    NotStationary,
}

/// Signed distance of each deciding eigenvalue from its threshold; positive
/// means the strict condition holds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Margins<T> {
    pub nash: T,
    pub minimax: Option<T>,
    pub maximin: Option<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Classification<T> {
    pub point: Point<T>,
    pub gradient_norm: T,
    pub is_stationary: bool,
    pub nash_verdict: NashVerdict,
    pub minimax_verdict: MinimaxVerdict,
    pub maximin_verdict: MinimaxVerdict,
    pub a_eigenvalues: Vec<T>,
    pub b_eigenvalues: Vec<T>,
    /// Eigenvalues of `A − C B⁻¹ Cᵀ`; empty when `B` is singular.
    pub schur_eigenvalues: Vec<T>,
    /// Eigenvalues of `B − Cᵀ A⁻¹ C` (the maximin Schur complement, sign
    /// flipped back); empty when `A` is singular.
    pub maximin_schur_eigenvalues: Vec<T>,
    /// The minimax necessary condition `B ⪯ 0` and, when `B` is invertible,
    /// `A − C B⁻¹ Cᵀ ⪰ 0`.
    pub necessary_condition_holds: bool,
    pub margins: Margins<T>,
}

impl<T: Real> Classification<T> {
    pub fn is_strict_local_minimax(&self) -> bool {
        self.minimax_verdict == MinimaxVerdict::StrictLocalMinimax
    }
    pub fn is_strict_local_maximin(&self) -> bool {
        self.maximin_verdict == MinimaxVerdict::StrictLocalMinimax
    }
    pub fn is_strict_nash(&self) -> bool {
        self.nash_verdict == NashVerdict::StrictNash
    }
}

fn min_of<T: Real>(v: &[T]) -> T {
    v.iter().copied().fold(T::infinity(), T::min)
}

fn max_of<T: Real>(v: &[T]) -> T {
    v.iter().copied().fold(T::neg_infinity(), T::max)
}

struct MinimaxSide<T> {
    verdict: MinimaxVerdict,
    schur: Vec<T>,
    margin: Option<T>,
    necessary: bool,
}

fn minimax_side<T: Real>(h: &HessianBlocks<T>, b_eig: &[T], tol: &Tolerances<T>) -> Result<MinimaxSide<T>> {
    let max_b = max_of(b_eig);
    let (singular, _) = near_singular_symmetric(&h.b, tol.sing)?;
    if max_b > tol.strict {
        let schur = if singular {
            Vec::new()
        } else {
            symmetric_eigenvalues(&schur_complement_with(&h.a, &h.b, &h.c, tol.sing)?)?
        };
        return Ok(MinimaxSide {
            verdict: MinimaxVerdict::NecessaryFailed,
            schur,
            margin: Some(-max_b),
            necessary: false,
        });
    }
    if singular {
        return Ok(MinimaxSide {
            verdict: MinimaxVerdict::DegenerateB,
            schur: Vec::new(),
            margin: None,
            necessary: true,
        });
    }
    let schur = symmetric_eigenvalues(&schur_complement_with(&h.a, &h.b, &h.c, tol.sing)?)?;
    let min_s = min_of(&schur);
    let verdict = if min_s > tol.strict {
        MinimaxVerdict::StrictLocalMinimax
    } else if min_s < -tol.strict {
        MinimaxVerdict::NecessaryFailed
    } else {
        MinimaxVerdict::SecondOrderMarginal
    };
    Ok(MinimaxSide {
        verdict,
        margin: Some(min_s.min(-max_b)),
        necessary: min_s >= -tol.strict,
        schur,
    })
}

/// `g(u, v) = −f(v, u)` has blocks `(−B, −A, −Cᵀ)`.
pub fn swap_blocks<T: Real>(h: &HessianBlocks<T>) -> HessianBlocks<T> {
    let neg = -T::one();
    HessianBlocks {
        a: h.b.scale(neg),
        b: h.a.scale(neg),
        c: h.c.transpose().scale(neg),
    }
}

/// Classifies from precomputed blocks and gradient norm.
pub fn classify_blocks<T: Real>(
    point: Point<T>,
    h: &HessianBlocks<T>,
    gradient_norm: T,
    tol: &Tolerances<T>,
) -> Result<Classification<T>> {
    let a_eig = symmetric_eigenvalues(&h.a)?;
    let b_eig = symmetric_eigenvalues(&h.b)?;
    let is_stationary = gradient_norm <= tol.station;

    let nash_margin = min_of(&a_eig).min(-max_of(&b_eig));
    let nash = if nash_margin > tol.strict {
        NashVerdict::StrictNash
    } else if nash_margin < -tol.strict {
        NashVerdict::NotNash
    } else {
        NashVerdict::SecondOrderMarginal
    };

    let minimax = minimax_side(h, &b_eig, tol)?;
    let swapped = swap_blocks(h);
    let neg_a: Vec<T> = a_eig.iter().rev().map(|&v| -v).collect();
    let maximin = minimax_side(&swapped, &neg_a, tol)?;

    let gate = |v| if is_stationary { v } else { MinimaxVerdict::NotStationary };
    Ok(Classification {
        point,
        gradient_norm,
        is_stationary,
        nash_verdict: if is_stationary { nash } else { NashVerdict::NotStationary },
        minimax_verdict: gate(minimax.verdict),
        maximin_verdict: gate(maximin.verdict),
        a_eigenvalues: a_eig,
        b_eigenvalues: b_eig,
        schur_eigenvalues: minimax.schur,
        maximin_schur_eigenvalues: maximin.schur.iter().rev().map(|&v| -v).collect(),
        necessary_condition_holds: minimax.necessary,
        margins: Margins {
            nash: nash_margin,
            minimax: minimax.margin,
            maximin: maximin.margin,
        },
    })
}

fn check_point<T: Real>(f: &dyn Objective<T>, p: &Point<T>) -> Result<()> {
    if !p.is_finite() {
        return Err(Error::NonFinite(format!("point {p}")));
    }
    if p.x.len() == f.dim_x() && p.y.len() == f.dim_y() && !f.domain().contains_point(p) {
        return Err(Error::OutOfDomain {
            point: p.to_string(),
            margin: 0.0,
        });
    }
    Ok(())
}

pub fn classify<T: Real>(f: &dyn Objective<T>, p: &Point<T>) -> Result<Classification<T>> {
    classify_with(f, p, &Tolerances::default())
}

pub fn classify_with<T: Real>(f: &dyn Objective<T>, p: &Point<T>, tol: &Tolerances<T>) -> Result<Classification<T>> {
    check_point(f, p)?;
    let g = gradient_at(f, p)?;
    let h = hessian_at(f, p)?;
    classify_blocks(p.clone(), &h, g.norm(), tol)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum StabilityVerdict {
    StrictStable,
    StrictUnstable,
    Marginal,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct GdaStability<T: Real> {
    pub gamma: T,
    pub jacobian: Matrix<T>,
    #[serde(serialize_with = "complex_list")]
    pub eigenvalues: Vec<Complex<T>>,
    pub verdict: StabilityVerdict,
}

/// `J_γ = [[−A/γ, −C/γ], [Cᵀ, B]]`, the Jacobian of the γ-GDA flow.
pub fn gda_jacobian<T: Real>(h: &HessianBlocks<T>, gamma: T) -> Matrix<T> {
    let inv = -T::one() / gamma;
    Matrix::from_blocks(&h.a.scale(inv), &h.c.scale(inv), &h.c.transpose(), &h.b).expect("blocks conform")
}

pub fn stability_verdict<T: Real>(eigenvalues: &[Complex<T>], strict: T) -> StabilityVerdict {
    if eigenvalues.iter().all(|l| l.re < -strict) {
        StabilityVerdict::StrictStable
    } else if eigenvalues.iter().any(|l| l.re > strict) {
        StabilityVerdict::StrictUnstable
    } else {
        StabilityVerdict::Marginal
    }
}

pub fn gda_stability_blocks<T: Real>(h: &HessianBlocks<T>, gamma: T, strict: T) -> Result<GdaStability<T>> {
    if !(gamma > T::zero()) || !gamma.is_finite() {
        return Err(Error::InvalidInput(format!("gamma must be positive, got {gamma}")));
    }
    let jacobian = gda_jacobian(h, gamma);
    let eigenvalues = general_eigenvalues(&jacobian)?;
    Ok(GdaStability {
        gamma,
        verdict: stability_verdict(&eigenvalues, strict),
        jacobian,
        eigenvalues,
    })
}

pub fn gda_stability<T: Real>(f: &dyn Objective<T>, p: &Point<T>, gamma: T) -> Result<GdaStability<T>> {
    check_point(f, p)?;
    let h = hessian_at(f, p)?;
    gda_stability_blocks(&h, gamma, lit(DEFAULT_STRICT_TOLERANCE))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Membership {
    Inside,
    Outside,
    DegeneratePoint,
    /// The Schur complement has an eigenvalue inside the strictness band.
    Marginal,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct LadderRow<T> {
    pub gamma: T,
    pub epsilon: T,
    pub verdict: StabilityVerdict,
    /// `max_i |λ_i + εμ_i| / ε` over the eigenvalues matched to `−εμ`.
    pub small_error_ratio: Option<T>,
    /// `max_i |λ_{i+d1} − ν_i|` over the eigenvalues matched to `ν`.
    pub large_error: Option<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct InfinityGdaVerdict<T> {
    pub membership: Membership,
    /// `μ_i`, eigenvalues of the Schur complement.
    pub schur_eigenvalues: Vec<T>,
    /// `ν_i`, eigenvalues of `B`.
    pub b_eigenvalues: Vec<T>,
    pub table: Vec<LadderRow<T>>,
    /// `None` when the membership makes no prediction; otherwise whether
    /// the largest rung's verdict agrees with it.
    pub ladder_consistent: Option<bool>,
}

/// Pairs the full spectrum of `J_{1/ε}` with `{−εμ_i} ∪ {ν_j}` by exact
/// minimum-cost matching and returns the two error measures.
fn asymptotic_errors<T: Real>(eigs: &[Complex<T>], mu: &[T], nu: &[T], eps: f64) -> (f64, f64) {
    let predicted: Vec<Complex<f64>> = mu
        .iter()
        .map(|&m| Complex::new(-eps * to_f64(m), 0.0))
        .chain(nu.iter().map(|&v| Complex::new(to_f64(v), 0.0)))
        .collect();
    let actual: Vec<Complex<f64>> = eigs.iter().map(|l| Complex::new(to_f64(l.re), to_f64(l.im))).collect();
    let cost: Vec<Vec<f64>> = predicted
        .iter()
        .map(|p| actual.iter().map(|a| (a - p).norm()).collect())
        .collect();
    let assign = min_cost_matching(&cost);
    let d1 = mu.len();
    let mut small = 0.0f64;
    let mut large = 0.0f64;
    for (i, &j) in assign.iter().enumerate() {
        if i < d1 {
            small = small.max(cost[i][j] / eps);
        } else {
            large = large.max(cost[i][j]);
        }
    }
    (small, large)
}

pub fn infinity_gda_blocks<T: Real>(
    h: &HessianBlocks<T>,
    gamma_ladder: &[T],
    tol: &Tolerances<T>,
) -> Result<InfinityGdaVerdict<T>> {
    if gamma_ladder.iter().any(|g| !(*g > T::zero())) || gamma_ladder.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidInput("gamma ladder must be positive and increasing".into()));
    }
    let cls = classify_blocks(Point::origin(h.a.rows(), h.b.rows()), h, T::zero(), tol)?;
    let membership = match cls.minimax_verdict {
        MinimaxVerdict::StrictLocalMinimax => Membership::Inside,
        MinimaxVerdict::NecessaryFailed => Membership::Outside,
        MinimaxVerdict::DegenerateB => Membership::DegeneratePoint,
        _ => Membership::Marginal,
    };
    let degenerate = membership == Membership::DegeneratePoint;
    let mu = cls.schur_eigenvalues.clone();
    let nu = cls.b_eigenvalues.clone();

    let table = gamma_ladder
        .par_iter()
        .map(|&gamma| {
            let st = gda_stability_blocks(h, gamma, tol.strict)?;
            let eps = T::one() / gamma;
            let (small, large) = if degenerate || mu.is_empty() {
                (None, None)
            } else {
                let (s, l) = asymptotic_errors(&st.eigenvalues, &mu, &nu, to_f64(eps));
                (Some(lit(s)), Some(lit(l)))
            };
            Ok(LadderRow {
                gamma,
                epsilon: eps,
                verdict: st.verdict,
                small_error_ratio: small,
                large_error: large,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let last = table.last().map(|r| r.verdict);
    let ladder_consistent = match (membership, last) {
        (Membership::Inside, Some(v)) => Some(v == StabilityVerdict::StrictStable),
        (Membership::Outside, Some(v)) => Some(v != StabilityVerdict::StrictStable),
        _ => None,
    };
    Ok(InfinityGdaVerdict {
        membership,
        schur_eigenvalues: mu,
        b_eigenvalues: nu,
        table,
        ladder_consistent,
    })
}

/// The ∞-GDA limit test at a stationary point, sampled along `gamma_ladder`.
pub fn infinity_gda<T: Real>(f: &dyn Objective<T>, p: &Point<T>, gamma_ladder: &[T]) -> Result<InfinityGdaVerdict<T>> {
    infinity_gda_with(f, p, gamma_ladder, &Tolerances::default())
}

pub fn infinity_gda_with<T: Real>(
    f: &dyn Objective<T>,
    p: &Point<T>,
    gamma_ladder: &[T],
    tol: &Tolerances<T>,
) -> Result<InfinityGdaVerdict<T>> {
    check_point(f, p)?;
    let g = gradient_at(f, p)?;
    if g.norm() > tol.station {
        return Err(Error::NotStationary {
            grad_norm: to_f64(g.norm()),
        });
    }
    let h = hessian_at(f, p)?;
    infinity_gda_blocks(&h, gamma_ladder, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{catalog, catalog_with_param, fd_hessian};
    use std::f64::consts::PI;

    fn origin() -> Point<f64> {
        Point::from_f64(&[0.0], &[0.0])
    }

    #[test]
    fn saddle_is_nash_and_minimax() {
        let f = catalog::<f64>("quadratic_saddle").unwrap();
        let c = classify(f.as_ref(), &origin()).unwrap();
        assert_eq!(c.nash_verdict, NashVerdict::StrictNash);
        assert_eq!(c.minimax_verdict, MinimaxVerdict::StrictLocalMinimax);
        assert_eq!(c.schur_eigenvalues, vec![2.0]);
    }

    #[test]
    fn coupled_quadratic_is_minimax_only() {
        let f = catalog::<f64>("coupled_quadratic").unwrap();
        let c = classify(f.as_ref(), &origin()).unwrap();
        assert_eq!(c.nash_verdict, NashVerdict::NotNash);
        assert_eq!(c.minimax_verdict, MinimaxVerdict::StrictLocalMinimax);
        // −2 − 5·(−1/2)·5
        assert!((c.schur_eigenvalues[0] - 10.5).abs() < 1e-12);
        // Same function, roles swapped: A = −2 < 0 rules out maximin.
        assert_eq!(c.maximin_verdict, MinimaxVerdict::NecessaryFailed);

        let h = fd_hessian(f.as_ref(), &origin(), 1e-4).unwrap();
        let c = classify_blocks(origin(), &h, 0.0, &Tolerances::default()).unwrap();
        assert!((c.schur_eigenvalues[0] - 10.5).abs() < 1e-5);
    }

    #[test]
    fn sine_stationary_point_is_marginal() {
        let f = catalog::<f64>("sin_sum").unwrap();
        let c = classify(f.as_ref(), &Point::from_f64(&[PI / 2.0], &[0.0])).unwrap();
        assert!(c.is_stationary);
        assert_eq!(c.nash_verdict, NashVerdict::NotNash);
        assert_eq!(c.minimax_verdict, MinimaxVerdict::SecondOrderMarginal);
        assert!(c.schur_eigenvalues[0].abs() < 1e-12);
    }

    #[test]
    fn nonstationary_points_get_no_verdict() {
        let f = catalog::<f64>("xy_cos").unwrap();
        let c = classify(f.as_ref(), &Point::from_f64(&[0.0], &[PI])).unwrap();
        assert!(!c.is_stationary);
        assert!((c.gradient_norm - 0.2 * PI).abs() < 1e-12);
        assert_eq!(c.minimax_verdict, MinimaxVerdict::NotStationary);
        assert!(classify(f.as_ref(), &Point::from_f64(&[3.0], &[0.0])).is_err());
    }

    #[test]
    fn degenerate_b_is_reported() {
        let f = catalog::<f64>("degenerate_b").unwrap();
        let c = classify(f.as_ref(), &origin()).unwrap();
        assert_eq!(c.minimax_verdict, MinimaxVerdict::DegenerateB);
        assert!(c.schur_eigenvalues.is_empty());
        let v = infinity_gda(f.as_ref(), &origin(), &DEFAULT_GAMMA_LADDER).unwrap();
        assert_eq!(v.membership, Membership::DegeneratePoint);
        assert_eq!(v.ladder_consistent, None);
    }

    #[test]
    fn limit_examples_spectra() {
        let s7 = 7f64.sqrt();
        for (name, sign, expected) in [
            ("limit_nash", -1.0, StabilityVerdict::StrictStable),
            ("limit_minimax", 1.0, StabilityVerdict::StrictUnstable),
        ] {
            let f = catalog_with_param::<f64>(name, 1.0).unwrap();
            let st = gda_stability(f.as_ref(), &origin(), 1.0).unwrap();
            assert_eq!(st.verdict, expected);
            let mut eig = st.eigenvalues.clone();
            eig.sort_by(|a, b| a.im.partial_cmp(&b.im).unwrap());
            assert!((eig[0] - Complex::new(sign / 2.0, -s7 / 2.0)).norm() < 1e-12);
            assert!((eig[1] - Complex::new(sign / 2.0, s7 / 2.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn saddle_ladder_errors_do_not_grow() {
        for name in ["quadratic_saddle", "coupled_quadratic"] {
            let f = catalog::<f64>(name).unwrap();
            let v = infinity_gda(f.as_ref(), &origin(), &[10.0, 100.0, 1000.0]).unwrap();
            assert_eq!(v.membership, Membership::Inside);
            assert_eq!(v.ladder_consistent, Some(true));
            let ratios: Vec<f64> = v.table.iter().map(|r| r.small_error_ratio.unwrap()).collect();
            assert!(ratios.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{ratios:?}");
        }
        let f = catalog::<f64>("xy_cos").unwrap();
        let err = infinity_gda(f.as_ref(), &Point::from_f64(&[0.0], &[PI]), &[10.0]).unwrap_err();
        assert!(matches!(err, Error::NotStationary { .. }));
    }
}
