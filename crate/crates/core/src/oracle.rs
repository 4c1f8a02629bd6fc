//! Gradient descent with a max-oracle, the inner maximizer, and Moreau
//! envelope machinery for `φ(x) = max_y f(x, y)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::problems::{gradient_at, BoxDomain, Objective, Point};
use crate::scalar::{dist, lit, norm, to_f64, Real};

pub const DEFAULT_STARTS: usize = 16;
pub const DEFAULT_ASCENT_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_ASCENT_BUDGET: usize = 10_000;
pub const DEFAULT_PROX_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_PROX_BUDGET: usize = 100_000;
pub const DEFAULT_SEEDS: usize = 20;

const ARMIJO: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum OracleStrategy {
    /// Projected gradient ascent from a rotated Halton lattice.
    MultiStart { starts: usize },
    /// Dense grid over the y-box, polished by ascent from the best cell.
    Grid { resolution: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MaxOracleConfig {
    pub strategy: OracleStrategy,
    pub tolerance: f64,
    /// Ascent iterations per start.
    pub budget: usize,
    /// Points per axis for the Lipschitz grid certificate; `None` disables it.
    pub certificate_resolution: Option<usize>,
    /// Seed of the lattice rotation.
    pub seed: u64,
}

impl Default for MaxOracleConfig {
    fn default() -> Self {
        Self {
            strategy: OracleStrategy::MultiStart { starts: DEFAULT_STARTS },
            tolerance: DEFAULT_ASCENT_TOLERANCE,
            budget: DEFAULT_ASCENT_BUDGET,
            certificate_resolution: None,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MaxOracleResult<T> {
    pub y: Vec<T>,
    pub value: T,
    /// The requested ε when certified, otherwise the estimated gap.
    pub gap_bound: T,
    pub certified: bool,
}

/// `φ(x) = max_{y ∈ y_box} f(x, y)` together with the oracle realizing it.
pub struct PhiSpec<'a, T: Real> {
    pub f: &'a dyn Objective<T>,
    pub y_box: BoxDomain<T>,
    pub oracle: MaxOracleConfig,
}

impl<'a, T: Real> PhiSpec<'a, T> {
    /// Uses the objective's own y-box; fails when it is unbounded.
    pub fn new(f: &'a dyn Objective<T>) -> Result<Self> {
        Self::with_y_box(f, f.y_box())
    }

    pub fn with_y_box(f: &'a dyn Objective<T>, y_box: BoxDomain<T>) -> Result<Self> {
        if y_box.dim() != f.dim_y() {
            return Err(Error::DimensionMismatch("y-box does not match dim_y".into()));
        }
        if !y_box.is_bounded() {
            return Err(Error::UnboundedY);
        }
        Ok(Self {
            f,
            y_box,
            oracle: MaxOracleConfig::default(),
        })
    }

    pub fn with_oracle(mut self, oracle: MaxOracleConfig) -> Self {
        self.oracle = oracle;
        self
    }

    pub fn max(&self, x: &[T], epsilon: T) -> Result<MaxOracleResult<T>> {
        max_oracle_in(self.f, x, &self.y_box, epsilon, &self.oracle)
    }

    /// Danskin subgradient `∇ₓf(x, y⋆(x))` and `φ(x)`.
    fn subgradient(&self, x: &[T]) -> Result<(Vec<T>, T)> {
        let r = self.max(x, T::zero())?;
        let g = gradient_at(self.f, &Point::new(x.to_vec(), r.y))?;
        Ok((g.gx, r.value))
    }
}

fn nth_prime(k: usize) -> u64 {
    (2u64..)
        .filter(|&n| (2..).take_while(|d| d * d <= n).all(|d| n % d != 0))
        .nth(k)
        .expect("infinitely many primes")
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut out = 0.0;
    let mut w = inv;
    while i > 0 {
        out += (i % base) as f64 * w;
        i /= base;
        w *= inv;
    }
    out
}

/// First `m` points of the Halton sequence in `[0,1)^d`, rotated by a
/// seeded Cranley–Patterson shift. Prefixes are nested in `m`.
pub fn halton_lattice(m: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..d).map(|_| rng.gen()).collect();
    (0..m as u64)
        .map(|i| {
            (0..d)
                .map(|k| (radical_inverse(i + 1, nth_prime(k)) + shift[k]).fract())
                .collect()
        })
        .collect()
}

fn project<T: Real>(b: &BoxDomain<T>, y: &mut [T]) {
    b.clamp(y);
}

/// Projected gradient ascent with Armijo backtracking on `y ↦ f(x, y)`.
/// Returns the final point, value and projected-gradient norm.
fn ascend<T: Real>(
    f: &dyn Objective<T>,
    x: &[T],
    y0: Vec<T>,
    ybox: &BoxDomain<T>,
    tol: T,
    budget: usize,
) -> Result<(Vec<T>, T, T)> {
    let mut y = y0;
    project(ybox, &mut y);
    let mut v = f.value(x, &y);
    let mut step = T::one();
    let sigma: T = lit(ARMIJO);
    let mut pg_norm = T::infinity();
    for _ in 0..budget {
        let g = gradient_at(f, &Point::new(x.to_vec(), y.clone()))?.gy;
        let mut probe: Vec<T> = y.iter().zip(&g).map(|(&a, &b)| a + b).collect();
        project(ybox, &mut probe);
        pg_norm = dist(&probe, &y);
        if pg_norm <= tol {
            break;
        }
        let mut accepted = false;
        while step > lit(1e-20) {
            let mut cand: Vec<T> = y.iter().zip(&g).map(|(&a, &b)| a + step * b).collect();
            project(ybox, &mut cand);
            let gain: T = g.iter().zip(cand.iter().zip(&y)).map(|(&gi, (&c, &yi))| gi * (c - yi)).sum();
            let vc = f.value(x, &cand);
            if vc.is_finite() && vc >= v + sigma * gain {
                y = cand;
                v = vc;
                accepted = true;
                step = (step + step).min(lit(1e6));
                break;
            }
            step *= lit(0.5);
        }
        if !accepted {
            break;
        }
    }
    if !v.is_finite() {
        return Err(Error::NonFinite("max-oracle value".into()));
    }
    Ok((y, v, pg_norm))
}

fn lattice_points<T: Real>(ybox: &BoxDomain<T>, m: usize, seed: u64) -> Vec<Vec<T>> {
    halton_lattice(m, ybox.dim(), seed)
        .into_iter()
        .map(|u| {
            u.iter()
                .zip(ybox.lower.iter().zip(&ybox.upper))
                .map(|(&s, (&l, &h))| l + (h - l) * lit(s))
                .collect()
        })
        .collect()
}

/// Grid over `ybox` with `res` points per axis, in lexicographic order.
pub(crate) fn grid_points<T: Real>(ybox: &BoxDomain<T>, res: usize) -> Vec<Vec<T>> {
    let d = ybox.dim();
    let total = res.pow(d as u32);
    let axis = |k: usize, i: usize| -> T {
        let t: T = lit(i as f64 / (res - 1) as f64);
        ybox.lower[k] + (ybox.upper[k] - ybox.lower[k]) * t
    };
    (0..total)
        .map(|mut idx| {
            let mut p = vec![T::zero(); d];
            for k in (0..d).rev() {
                p[k] = axis(k, idx % res);
                idx /= res;
            }
            p
        })
        .collect()
}

/// Upper bound on `max_y f(x, ·)` from a grid: per cell,
/// `f(c) + ‖∇ᵧf(c)‖ r + ℓ r²/2` when ℓ is known, `f(c) + L r` otherwise.
fn grid_upper_bound<T: Real>(f: &dyn Objective<T>, x: &[T], ybox: &BoxDomain<T>, res: usize) -> Result<Option<(T, Vec<T>, T)>> {
    let lip = f.lipschitz();
    if lip.gradient.is_none() && lip.value.is_none() {
        return Ok(None);
    }
    let spacing: Vec<T> = ybox
        .lower
        .iter()
        .zip(&ybox.upper)
        .map(|(&l, &u)| (u - l) / lit((res - 1) as f64))
        .collect();
    let r = norm(&spacing) * lit(0.5);
    let mut best_val = T::neg_infinity();
    let mut best_y = Vec::new();
    let mut bound = T::neg_infinity();
    for y in grid_points(ybox, res) {
        let v = f.value(x, &y);
        let cell = match lip.gradient {
            Some(ell) => {
                let g = gradient_at(f, &Point::new(x.to_vec(), y.clone()))?;
                v + norm(&g.gy) * r + ell * r * r * lit(0.5)
            }
            None => v + lip.value.expect("checked") * r,
        };
        bound = bound.max(cell);
        if v > best_val {
            best_val = v;
            best_y = y;
        }
    }
    Ok(Some((bound, best_y, best_val)))
}

/// ε-approximate maximizer of `f(x, ·)` over the objective's y-box.
pub fn max_oracle<T: Real>(f: &dyn Objective<T>, x: &[T], epsilon: T, budget: usize) -> Result<MaxOracleResult<T>> {
    let cfg = MaxOracleConfig {
        budget,
        ..MaxOracleConfig::default()
    };
    let ybox = f.y_box();
    if !ybox.is_bounded() {
        return Err(Error::UnboundedY);
    }
    max_oracle_in(f, x, &ybox, epsilon, &cfg)
}

/// ε-approximate maximizer of `f(x, ·)` over `ybox`.
pub fn max_oracle_in<T: Real>(
    f: &dyn Objective<T>,
    x: &[T],
    ybox: &BoxDomain<T>,
    epsilon: T,
    cfg: &MaxOracleConfig,
) -> Result<MaxOracleResult<T>> {
    if !(epsilon >= T::zero()) {
        return Err(Error::InvalidInput(format!("epsilon must be nonnegative, got {epsilon}")));
    }
    if !ybox.is_bounded() {
        return Err(Error::UnboundedY);
    }
    if x.len() != f.dim_x() || ybox.dim() != f.dim_y() {
        return Err(Error::DimensionMismatch("max-oracle query".into()));
    }
    let tol: T = lit(cfg.tolerance);
    let starts = match cfg.strategy {
        OracleStrategy::MultiStart { starts } => lattice_points(ybox, starts.max(1), cfg.seed),
        OracleStrategy::Grid { resolution } => {
            let res = resolution.max(3);
            let mut best: Option<(T, Vec<T>)> = None;
            for y in grid_points(ybox, res) {
                let v = f.value(x, &y);
                if best.as_ref().is_none_or(|(bv, _)| v > *bv) {
                    best = Some((v, y));
                }
            }
            vec![best.expect("grid is nonempty").1]
        }
    };
    let mut best: Option<(Vec<T>, T, T)> = None;
    for y0 in starts {
        let run = ascend(f, x, y0, ybox, tol, cfg.budget)?;
        if best.as_ref().is_none_or(|b| run.1 > b.1) {
            best = Some(run);
        }
    }
    let (mut y, mut value, pg) = best.expect("at least one start");

    // Without a certificate, the gap is estimated from the final
    // projected-gradient norm: ‖g‖²/ℓ when ℓ is known.
    let estimate = match f.lipschitz().gradient {
        Some(ell) if ell > T::zero() => pg * pg / ell,
        _ => pg,
    };
    let (gap_bound, certified) = match cfg.certificate_resolution {
        Some(res) => match grid_upper_bound(f, x, ybox, res.max(3))? {
            Some((bound, gy, gv)) => {
                if gv > value {
                    y = gy;
                    value = gv;
                }
                let gap = (bound - value).max(T::zero());
                if gap <= epsilon {
                    (epsilon, true)
                } else {
                    (gap, false)
                }
            }
            None => (estimate, false),
        },
        None => (estimate, false),
    };
    Ok(MaxOracleResult {
        y,
        value,
        gap_bound,
        certified,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MoreauReport<T> {
    pub lambda: T,
    pub x: Vec<T>,
    pub x_hat: Vec<T>,
    pub envelope_value: T,
    /// `‖∇φ_λ(x)‖ = ‖x − x̂‖ / λ`.
    pub grad_norm: T,
    pub inner_iterations: usize,
}

fn check_lambda<T: Real>(f: &dyn Objective<T>, lambda: T) -> Result<()> {
    if !(lambda > T::zero()) {
        return Err(Error::InvalidInput(format!("lambda must be positive, got {lambda}")));
    }
    let ell = f.lipschitz().gradient.ok_or(Error::MissingLipschitz("gradient Lipschitz"))?;
    if ell > T::zero() && lambda >= T::one() / ell {
        return Err(Error::LambdaTooLarge {
            lambda: to_f64(lambda),
            limit: to_f64(T::one() / ell),
        });
    }
    Ok(())
}

/// Moreau envelope `φ_λ(x) = min_{x'} φ(x') + ‖x − x'‖²/(2λ)`, requiring
/// `λ < 1/ℓ`.
///
/// The proximal point is found by gradient descent with Armijo
/// backtracking on the Danskin subgradient. For scalar `x` a stalled
/// descent (a kink of `φ`) is finished by bisection on the sign of the
/// one-sided derivative, which the strong convexity of the prox objective
/// makes well defined.
pub fn moreau_envelope<T: Real>(phi: &PhiSpec<'_, T>, x: &[T], lambda: T) -> Result<MoreauReport<T>> {
    check_lambda(phi.f, lambda)?;
    if x.len() != phi.f.dim_x() {
        return Err(Error::DimensionMismatch("Moreau query point".into()));
    }
    let tol: T = lit(DEFAULT_PROX_TOLERANCE);
    let half_inv_lambda = T::one() / (lambda + lambda);
    let psi = |xp: &[T]| -> Result<T> {
        let r = phi.max(xp, T::zero())?;
        let d = dist(x, xp);
        Ok(r.value + d * d * half_inv_lambda)
    };
    let grad = |xp: &[T]| -> Result<(Vec<T>, T)> {
        let (g, v) = phi.subgradient(xp)?;
        let gp: Vec<T> = g.iter().zip(xp.iter().zip(x)).map(|(&gi, (&a, &b))| gi + (a - b) / lambda).collect();
        let d = dist(x, xp);
        Ok((gp, v + d * d * half_inv_lambda))
    };

    let mut xp = x.to_vec();
    let mut step = lambda;
    let sigma: T = lit(ARMIJO);
    let mut iterations = 0;
    let mut stalled = false;
    let (mut g, mut val) = grad(&xp)?;
    let mut flat = 0;
    while iterations < DEFAULT_PROX_BUDGET {
        if norm(&g) <= tol || flat >= 5 {
            break;
        }
        iterations += 1;
        let gg: T = g.iter().map(|&v| v * v).sum();
        let mut accepted = false;
        while step > lit(1e-18) {
            let cand: Vec<T> = xp.iter().zip(&g).map(|(&a, &b)| a - step * b).collect();
            let vc = psi(&cand)?;
            if vc <= val - sigma * step * gg {
                xp = cand;
                accepted = true;
                step = (step + step).min(lit(1e6));
                break;
            }
            step *= lit(0.5);
        }
        if !accepted {
            stalled = true;
            break;
        }
        let prev = val;
        (g, val) = grad(&xp)?;
        // The oracle's inexact y⋆ floors ‖g‖; stop once ψ no longer moves.
        if prev - val <= T::epsilon() * lit(8.0) * prev.abs().max(T::one()) {
            flat += 1;
        } else {
            flat = 0;
        }
    }
    if (stalled || norm(&g) > tol) && xp.len() == 1 {
        xp = vec![bisect_prox(phi, x[0], xp[0], lambda)?];
    }
    let d = dist(x, &xp);
    let phi_hat = phi.max(&xp, T::zero())?.value;
    Ok(MoreauReport {
        lambda,
        x: x.to_vec(),
        envelope_value: phi_hat + d * d * half_inv_lambda,
        grad_norm: d / lambda,
        x_hat: xp,
        inner_iterations: iterations,
    })
}

/// Scalar proximal point by bisection on the sign of `ψ'` near `guess`.
fn bisect_prox<T: Real>(phi: &PhiSpec<'_, T>, x: T, guess: T, lambda: T) -> Result<T> {
    // ψ(t) = φ(t) + (t − x)²/(2λ); any Danskin slope has the right sign
    // away from the minimizer.
    let slope_sign = |t: T| -> Result<bool> {
        let (g, _) = phi.subgradient(&[t])?;
        Ok(g[0] + (t - x) / lambda > T::zero())
    };
    let mut width = lambda.max(guess.abs() * lit(1e-6)).max(lit(1e-12));
    let (mut lo, mut hi) = (guess - width, guess + width);
    for _ in 0..200 {
        if !slope_sign(lo)? && slope_sign(hi)? {
            break;
        }
        width = width + width;
        lo = guess - width;
        hi = guess + width;
    }
    for _ in 0..200 {
        let mid = (lo + hi) * lit(0.5);
        if mid <= lo || mid >= hi {
            break;
        }
        if slope_sign(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((lo + hi) * lit(0.5))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SubgradientCertificate<T> {
    pub lambda: T,
    pub x_hat: Vec<T>,
    /// `‖x̂ − x‖ = λ ‖∇φ_λ(x)‖`.
    pub distance: T,
    /// `‖∇φ_λ(x)‖`, which bounds `min_{g ∈ ∂φ(x̂)} ‖g‖`.
    pub min_subgradient_norm_bound: T,
}

/// Near-stationarity certificate for the proximal point of `x`; `lambda`
/// defaults to `1/(2ℓ)`.
pub fn subgradient_certificate<T: Real>(
    phi: &PhiSpec<'_, T>,
    x: &[T],
    lambda: Option<T>,
) -> Result<SubgradientCertificate<T>> {
    let lambda = match lambda {
        Some(l) => l,
        None => default_lambda(phi.f)?,
    };
    let rep = moreau_envelope(phi, x, lambda)?;
    let distance = dist(&rep.x_hat, x);
    let identity_gap = (distance - lambda * rep.grad_norm).abs();
    if identity_gap > lit(1e-9) {
        return Err(Error::NonFinite(format!("Moreau identity violated by {identity_gap}")));
    }
    Ok(SubgradientCertificate {
        lambda,
        x_hat: rep.x_hat,
        distance,
        min_subgradient_norm_bound: rep.grad_norm,
    })
}

/// `1/(2ℓ)`.
pub fn default_lambda<T: Real>(f: &dyn Objective<T>) -> Result<T> {
    let ell = f.lipschitz().gradient.ok_or(Error::MissingLipschitz("gradient Lipschitz"))?;
    Ok(T::one() / (ell + ell))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Iterate<T> {
    pub x: Vec<T>,
    pub y: Vec<T>,
    /// `f(x_t, y_t)`, an ε-accurate estimate of `φ(x_t)`.
    pub phi: T,
    pub grad_x_norm: T,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct OracleParams<T> {
    pub eta: T,
    pub t: usize,
    pub epsilon: T,
    pub ell: T,
    pub lipschitz: T,
    pub gamma_param: T,
    pub lambda: T,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct OracleRun<T> {
    pub iterates: Vec<Iterate<T>>,
    pub chosen_index: usize,
    pub x_bar: Vec<T>,
    pub moreau: MoreauReport<T>,
    pub params: OracleParams<T>,
}

/// Iterates of gradient descent with a max-oracle; independent of the
/// seed, which only picks the output index.
pub fn max_oracle_gd_iterates<T: Real>(
    phi: &PhiSpec<'_, T>,
    x0: &[T],
    t_max: usize,
    epsilon: T,
    gamma_param: T,
) -> Result<Vec<Iterate<T>>> {
    let f = phi.f;
    if x0.len() != f.dim_x() {
        return Err(Error::DimensionMismatch("initial x".into()));
    }
    if !(gamma_param > T::zero()) {
        return Err(Error::InvalidInput(format!("gamma_param must be positive, got {gamma_param}")));
    }
    let eta = gamma_param / lit::<T>((t_max + 1) as f64).sqrt();
    let xbox = f.x_box();
    let mut x = x0.to_vec();
    let mut out = Vec::with_capacity(t_max + 1);
    for t in 0..=t_max {
        if !xbox.contains(&x) {
            return Err(Error::LeftDomain { iteration: t });
        }
        let r = phi.max(&x, epsilon).map_err(|e| Error::Oracle {
            iteration: t,
            source: Box::new(e),
        })?;
        let g = gradient_at(f, &Point::new(x.clone(), r.y.clone()))?.gx;
        let next: Vec<T> = x.iter().zip(&g).map(|(&a, &b)| a - eta * b).collect();
        out.push(Iterate {
            x: std::mem::replace(&mut x, next),
            y: r.y,
            phi: r.value,
            grad_x_norm: norm(&g),
        });
    }
    Ok(out)
}

/// Gradient descent with a max-oracle, step `η = γ/√(T+1)`, returning a
/// uniformly chosen iterate `x̄` and its Moreau report at `λ = 1/(2ℓ)`.
pub fn run_max_oracle_gd<T: Real>(
    phi: &PhiSpec<'_, T>,
    x0: &[T],
    t_max: usize,
    epsilon: T,
    gamma_param: T,
    seed: u64,
) -> Result<OracleRun<T>> {
    let f = phi.f;
    let lip = f.lipschitz();
    let ell = lip.gradient.ok_or(Error::MissingLipschitz("gradient Lipschitz"))?;
    let big_l = lip.value.ok_or(Error::MissingLipschitz("value Lipschitz"))?;
    let iterates = max_oracle_gd_iterates(phi, x0, t_max, epsilon, gamma_param)?;
    let chosen_index = choose_index(t_max, seed);
    let x_bar = iterates[chosen_index].x.clone();
    let lambda = default_lambda(f)?;
    let moreau = moreau_envelope(phi, &x_bar, lambda)?;
    Ok(OracleRun {
        chosen_index,
        x_bar,
        moreau,
        params: OracleParams {
            eta: gamma_param / lit::<T>((t_max + 1) as f64).sqrt(),
            t: t_max,
            epsilon,
            ell,
            lipschitz: big_l,
            gamma_param,
            lambda,
            seed,
        },
        iterates,
    })
}

/// Uniform index in `0..=t_max` drawn from `seed`.
pub fn choose_index(t_max: usize, seed: u64) -> usize {
    ChaCha8Rng::seed_from_u64(seed).gen_range(0..=t_max)
}

/// Right-hand side of the rate bound
/// `2(φ_λ(x₀) − min φ + ℓL²γ²)/(γ√(T+1)) + 4ℓε`.
pub fn rate_bound(envelope_gap: f64, ell: f64, big_l: f64, gamma: f64, t_max: usize, epsilon: f64) -> f64 {
    2.0 * (envelope_gap + ell * big_l * big_l * gamma * gamma) / (gamma * ((t_max + 1) as f64).sqrt()) + 4.0 * ell * epsilon
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RateRow {
    pub t: usize,
    /// Mean of `‖∇φ_λ(x̄)‖²` over the seeds' chosen indices.
    pub seed_mean: f64,
    /// Exact expectation over the uniform index: the mean of
    /// `‖∇φ_λ(x_t)‖²` over all iterates.
    pub expectation: f64,
    pub bound: f64,
    /// Every seed's `‖∇φ_λ(x̄)‖²` is at most `bound`.
    pub bound_holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RateStudy {
    pub rows: Vec<RateRow>,
    /// The expectation is nonincreasing in `T`.
    pub monotone: bool,
    /// Least-squares slope of `log(expectation − 4ℓε)` against `log(T+1)`.
    pub slope: f64,
    /// The seed mean is nonincreasing in `T`.
    pub seed_mean_monotone: bool,
    /// Least-squares slope of `log(seed mean)` against `log(T+1)`.
    pub seed_mean_slope: f64,
}

/// Runs the rate experiment for each budget in `budgets`.
///
/// `envelope_gap` is `φ_λ(x₀) − min φ`, supplied by the caller.
pub fn rate_study<T: Real>(
    phi: &PhiSpec<'_, T>,
    x0: &[T],
    budgets: &[usize],
    epsilon: T,
    gamma_param: T,
    seeds: usize,
    envelope_gap: f64,
) -> Result<RateStudy> {
    let f = phi.f;
    let lip = f.lipschitz();
    let ell = lip.gradient.ok_or(Error::MissingLipschitz("gradient Lipschitz"))?;
    let big_l = lip.value.ok_or(Error::MissingLipschitz("value Lipschitz"))?;
    let lambda = default_lambda(f)?;
    let mut rows = Vec::with_capacity(budgets.len());
    for &t_max in budgets {
        let iterates = max_oracle_gd_iterates(phi, x0, t_max, epsilon, gamma_param)?;
        let sq = iterates
            .par_iter()
            .map(|it| moreau_envelope(phi, &it.x, lambda).map(|m| to_f64(m.grad_norm).powi(2)))
            .collect::<Result<Vec<f64>>>()?;
        let expectation = sq.iter().sum::<f64>() / sq.len() as f64;
        let picks: Vec<f64> = (0..seeds as u64).map(|s| sq[choose_index(t_max, s)]).collect();
        let seed_mean = picks.iter().sum::<f64>() / picks.len().max(1) as f64;
        let bound = rate_bound(envelope_gap, to_f64(ell), to_f64(big_l), to_f64(gamma_param), t_max, to_f64(epsilon));
        rows.push(RateRow {
            t: t_max,
            seed_mean,
            expectation,
            bound,
            bound_holds: picks.iter().all(|&v| v <= bound) && expectation <= bound,
        });
    }
    let monotone = rows.windows(2).all(|w| w[1].expectation <= w[0].expectation);
    let floor = 4.0 * to_f64(ell) * to_f64(epsilon);
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.expectation > floor)
        .map(|r| (((r.t + 1) as f64).ln(), (r.expectation - floor).ln()))
        .collect();
    let seed_pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.seed_mean > 0.0)
        .map(|r| (((r.t + 1) as f64).ln(), r.seed_mean.ln()))
        .collect();
    Ok(RateStudy {
        seed_mean_monotone: rows.windows(2).all(|w| w[1].seed_mean <= w[0].seed_mean),
        seed_mean_slope: ls_slope(&seed_pts),
        rows,
        monotone,
        slope: ls_slope(&pts),
    })
}

fn ls_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{catalog, ExprObjective};
    use std::f64::consts::PI;

    #[test]
    fn concave_inner_problem() {
        let f = ExprObjective::<f64>::parse("-(y - x)^2")
            .unwrap()
            .with_domain(BoxDomain::from_intervals(&[(-2.0, 2.0), (-2.0, 2.0)]))
            .unwrap();
        let r = max_oracle(&f, &[0.3], 0.0, DEFAULT_ASCENT_BUDGET).unwrap();
        assert!((r.y[0] - 0.3).abs() < 1e-8);
        assert!(r.value.abs() < 1e-12);
        assert!(r.gap_bound <= 1e-10);
    }

    #[test]
    fn xy_cos_ties_and_certificate() {
        let f = catalog::<f64>("xy_cos").unwrap();
        let cfg = MaxOracleConfig {
            certificate_resolution: Some(200_001),
            ..MaxOracleConfig::default()
        };
        let r = max_oracle_in(f.as_ref(), &[0.0], &f.y_box(), 1e-8, &cfg).unwrap();
        assert!((r.y[0].abs() - PI).abs() < 1e-6);
        assert!((r.value - 1.0).abs() < 1e-12);
        assert!(r.certified);
        assert!(r.gap_bound <= 1e-8);
    }

    #[test]
    fn sine_inner_problem_on_explicit_box() {
        let f = catalog::<f64>("sin_sum").unwrap();
        assert!(matches!(max_oracle(f.as_ref(), &[0.0], 0.0, 100), Err(Error::UnboundedY)));
        let ybox = BoxDomain::from_intervals(&[(-3.0, 3.0)]);
        let r = max_oracle_in(f.as_ref(), &[0.0], &ybox, 0.0, &MaxOracleConfig::default()).unwrap();
        assert!((r.y[0] - PI / 2.0).abs() < 1e-6);
        assert!((r.value - 1.0).abs() < 1e-12);
        // Dense grid comparison.
        let grid_max = (0..100_000)
            .map(|i| (-3.0 + 6.0 * i as f64 / 99_999.0).sin())
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(r.value >= grid_max - 1e-12);
    }

    #[test]
    fn grid_strategy_agrees() {
        let f = catalog::<f64>("xy_cos").unwrap();
        let cfg = MaxOracleConfig {
            strategy: OracleStrategy::Grid { resolution: 1001 },
            ..MaxOracleConfig::default()
        };
        let r = max_oracle_in(f.as_ref(), &[0.5], &f.y_box(), 0.0, &cfg).unwrap();
        let m = max_oracle(f.as_ref(), &[0.5], 0.0, DEFAULT_ASCENT_BUDGET).unwrap();
        assert!((r.value - m.value).abs() < 1e-10);
    }

    #[test]
    fn moreau_of_quadratic_and_abs() {
        let f = catalog::<f64>("strong_concave_y").unwrap();
        let phi = PhiSpec::new(f.as_ref()).unwrap();
        let r = moreau_envelope(&phi, &[1.0], 0.25).unwrap();
        assert!((r.x_hat[0] - 1.0 / 1.5).abs() < 1e-8);
        assert!((r.grad_norm - 4.0 / 3.0).abs() < 1e-7);
        let r = moreau_envelope(&phi, &[0.0], 0.25).unwrap();
        assert_eq!(r.grad_norm, 0.0);
        assert!(matches!(
            moreau_envelope(&phi, &[0.0], 1.0 / f.lipschitz().gradient.unwrap()),
            Err(Error::LambdaTooLarge { .. })
        ));

        let c = subgradient_certificate(&phi, &[1.0], Some(0.25)).unwrap();
        assert!((c.distance - 1.0 / 3.0).abs() < 1e-8);

        let g = catalog::<f64>("abs_value").unwrap();
        let phi = PhiSpec::new(g.as_ref()).unwrap();
        let c = subgradient_certificate(&phi, &[0.1], Some(0.25)).unwrap();
        assert!(c.x_hat[0].abs() < 1e-9);
        assert!((c.min_subgradient_norm_bound - 0.4).abs() < 1e-8);
    }

    #[test]
    fn zero_budget_run_reports_initial_point() {
        let f = catalog::<f64>("strong_concave_y").unwrap();
        let phi = PhiSpec::new(f.as_ref()).unwrap();
        let run = run_max_oracle_gd(&phi, &[1.0], 0, 1e-6, 1.0, 3).unwrap();
        assert_eq!(run.x_bar, vec![1.0]);
        let m = moreau_envelope(&phi, &[1.0], default_lambda(f.as_ref()).unwrap()).unwrap();
        assert_eq!(run.moreau, m);
    }

    #[test]
    fn halton_prefixes_nest() {
        let a = halton_lattice(8, 2, 1);
        let b = halton_lattice(16, 2, 1);
        assert_eq!(a[..], b[..8]);
        assert!(b.iter().flatten().all(|&u| (0.0..1.0).contains(&u)));
    }
}
