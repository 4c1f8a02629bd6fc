//! Discrete γ-GDA, the γ-GDA flow (RK4), limit detection and basin
//! sampling.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::problems::{gradient_at, BoxDomain, Gradient, Objective, Point};
use crate::scalar::{dist, lit, norm, to_f64, Real};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct LimitDetection<T> {
    /// Step-normalized displacement (and gradient norm) below which a step
    /// counts toward convergence.
    pub station: T,
    /// Consecutive qualifying steps required for a fixed point.
    pub consecutive: usize,
    pub divergence_norm: T,
    /// The trajectory must leave this ball around an earlier point before a
    /// return counts as a loop.
    pub cycle_radius: T,
    /// Maximal return distance for a loop.
    pub cycle_drift: T,
}

impl<T: Real> Default for LimitDetection<T> {
    fn default() -> Self {
        Self {
            station: lit(crate::classifier::DEFAULT_STATION_TOLERANCE),
            consecutive: 10,
            divergence_norm: lit(1e6),
            cycle_radius: lit(1e-4),
            cycle_drift: lit(1e-5),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Mode {
    Discrete,
    Flow,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum DivergenceReason {
    NormThreshold,
    LeftDomain,
    NonFinite,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Limit<T> {
    FixedPoint(Point<T>),
    Cycle {
        period: T,
        /// The earlier point and the returning point.
        witnesses: Vec<Point<T>>,
    },
    Diverged {
        reason: DivergenceReason,
        /// Last finite point.
        last: Point<T>,
    },
    Exhausted,
}

impl<T> Limit<T> {
    pub fn class(&self) -> &'static str {
        match self {
            Limit::FixedPoint(_) => "FixedPoint",
            Limit::Cycle { .. } => "Cycle",
            Limit::Diverged { .. } => "Diverged",
            Limit::Exhausted => "Exhausted",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Trajectory<T> {
    pub points: Vec<Point<T>>,
    /// η for discrete runs, `dt` for the flow.
    pub step_size: T,
    pub gamma: T,
    pub mode: Mode,
    pub limit: Limit<T>,
    pub warnings: Vec<String>,
}

impl<T: Real> Trajectory<T> {
    /// Time of the `k`-th stored point (`k·η` or `k·dt`).
    pub fn time(&self, k: usize) -> T {
        self.step_size * lit(k as f64)
    }
}

fn validate<T: Real>(eta: T, gamma: T) -> Result<()> {
    if !(eta > T::zero()) || !eta.is_finite() {
        return Err(Error::InvalidInput(format!("step size must be positive, got {eta}")));
    }
    if !(gamma > T::zero()) || !gamma.is_finite() {
        return Err(Error::InvalidInput(format!("gamma must be positive, got {gamma}")));
    }
    Ok(())
}

/// The velocity `(−∇ₓf/γ, ∇ᵧf)` of the γ-GDA flow.
fn velocity<T: Real>(g: &Gradient<T>, gamma: T) -> Vec<T> {
    g.gx.iter().map(|&v| -v / gamma).chain(g.gy.iter().copied()).collect()
}

/// One simultaneous γ-GDA update:
/// `x ← x − (η/γ)∇ₓf(x, y)`, `y ← y + η∇ᵧf(x, y)`.
pub fn gda_step<T: Real>(f: &dyn Objective<T>, p: &Point<T>, eta: T, gamma: T) -> Result<Point<T>> {
    validate(eta, gamma)?;
    let g = gradient_at(f, p)?;
    let scale = eta / gamma;
    Ok(Point {
        x: p.x.iter().zip(&g.gx).map(|(&x, &d)| x - scale * d).collect(),
        y: p.y.iter().zip(&g.gy).map(|(&y, &d)| y + eta * d).collect(),
    })
}

/// One classic RK4 step of the γ-GDA flow.
pub fn flow_step<T: Real>(f: &dyn Objective<T>, p: &Point<T>, gamma: T, dt: T) -> Result<Point<T>> {
    validate(dt, gamma)?;
    let dx = f.dim_x();
    let z = p.stacked();
    let vel = |z: &[T]| -> Result<Vec<T>> { Ok(velocity(&gradient_at(f, &Point::from_stacked(z, dx))?, gamma)) };
    let axpy = |a: T, v: &[T]| -> Vec<T> { z.iter().zip(v).map(|(&zi, &vi)| zi + a * vi).collect() };
    let half: T = lit(0.5);
    let k1 = vel(&z)?;
    let k2 = vel(&axpy(half * dt, &k1))?;
    let k3 = vel(&axpy(half * dt, &k2))?;
    let k4 = vel(&axpy(dt, &k3))?;
    let sixth = dt / lit(6.0);
    let two: T = lit(2.0);
    let next: Vec<T> = (0..z.len())
        .map(|i| z[i] + sixth * (k1[i] + two * k2[i] + two * k3[i] + k4[i]))
        .collect();
    Ok(Point::from_stacked(&next, dx))
}

/// Spatial hash used by the cycle detector.
struct CycleDetector<T> {
    cell: f64,
    cells: HashMap<Vec<i64>, Vec<usize>>,
    long: Vec<usize>,
    stacked: Vec<Vec<T>>,
    arc: Vec<f64>,
    segments: bool,
}

impl<T: Real> CycleDetector<T> {
    fn new(cell: f64, segments: bool) -> Self {
        Self {
            cell,
            cells: HashMap::new(),
            long: Vec::new(),
            stacked: Vec::new(),
            arc: Vec::new(),
            segments,
        }
    }

    fn key(&self, z: &[T]) -> Vec<i64> {
        z.iter().map(|&v| (to_f64(v) / self.cell).floor() as i64).collect()
    }

    fn push(&mut self, z: Vec<T>) {
        let idx = self.stacked.len();
        let arc = match self.stacked.last() {
            Some(prev) => self.arc[idx - 1] + to_f64(dist(prev, &z)),
            None => 0.0,
        };
        self.arc.push(arc);
        self.stacked.push(z);
        // Discrete runs index points; the flow indexes segments ending at idx.
        if !self.segments {
            let k = self.key(&self.stacked[idx]);
            self.cells.entry(k).or_default().push(idx);
        } else if idx > 0 {
            let lo = self.key(&self.stacked[idx - 1]);
            let hi = self.key(&self.stacked[idx]);
            let (mins, maxs): (Vec<i64>, Vec<i64>) = lo.iter().zip(&hi).map(|(&a, &b)| (a.min(b), a.max(b))).unzip();
            let count: i64 = mins.iter().zip(&maxs).map(|(a, b)| b - a + 1).product();
            if count > 64 {
                self.long.push(idx);
            } else {
                for key in box_keys(&mins, &maxs) {
                    self.cells.entry(key).or_default().push(idx);
                }
            }
        }
    }

    /// Distance from `q` to stored element `idx` (point or segment ending there).
    fn distance(&self, idx: usize, q: &[T]) -> f64 {
        if !self.segments {
            return to_f64(dist(&self.stacked[idx], q));
        }
        let a = &self.stacked[idx - 1];
        let b = &self.stacked[idx];
        let ab: Vec<f64> = a.iter().zip(b).map(|(&u, &v)| to_f64(v - u)).collect();
        let aq: Vec<f64> = a.iter().zip(q).map(|(&u, &v)| to_f64(v - u)).collect();
        let len2: f64 = ab.iter().map(|v| v * v).sum();
        let t = if len2 > 0.0 {
            (ab.iter().zip(&aq).map(|(u, v)| u * v).sum::<f64>() / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        ab.iter().zip(&aq).map(|(u, v)| (v - t * u).powi(2)).sum::<f64>().sqrt()
    }

    /// Earliest stored index whose loop back to the newest point qualifies.
    fn find_loop(&self, radius: f64, drift: f64) -> Option<usize> {
        let t = self.stacked.len() - 1;
        let q = &self.stacked[t];
        let key = self.key(q);
        let lo: Vec<i64> = key.iter().map(|k| k - 1).collect();
        let hi: Vec<i64> = key.iter().map(|k| k + 1).collect();
        let mut candidates: Vec<usize> = box_keys(&lo, &hi)
            .filter_map(|k| self.cells.get(&k))
            .flatten()
            .copied()
            .chain(self.long.iter().copied())
            .filter(|&s| s < t)
            .collect();
        candidates.sort_unstable();
        candidates.dedup();
        candidates.into_iter().find(|&s| {
            self.arc[t] - self.arc[s] > 2.0 * radius
                && self.distance(s, q) <= drift
                && (s + 1..t).any(|k| to_f64(dist(&self.stacked[k], &self.stacked[s])) > radius)
        })
    }
}

fn box_keys(lo: &[i64], hi: &[i64]) -> impl Iterator<Item = Vec<i64>> {
    let lo = lo.to_vec();
    let hi = hi.to_vec();
    let mut cur = Some(lo.clone());
    std::iter::from_fn(move || {
        let out = cur.clone()?;
        let mut next = out.clone();
        let mut i = 0;
        loop {
            if i == next.len() {
                cur = None;
                break;
            }
            if next[i] < hi[i] {
                next[i] += 1;
                cur = Some(next);
                break;
            }
            next[i] = lo[i];
            i += 1;
        }
        Some(out)
    })
}

struct Run<'a, T: Real> {
    f: &'a dyn Objective<T>,
    domain: BoxDomain<T>,
    det: LimitDetection<T>,
    gamma: T,
    step: T,
    mode: Mode,
    max_steps: usize,
}

impl<T: Real> Run<'_, T> {
    fn execute(&self, p0: &Point<T>, warnings: Vec<String>) -> Result<Trajectory<T>> {
        let f = self.f;
        if p0.x.len() != f.dim_x() || p0.y.len() != f.dim_y() {
            return Err(Error::DimensionMismatch("initial point does not match the objective".into()));
        }
        let finish = |points: Vec<Point<T>>, limit| Trajectory {
            points,
            step_size: self.step,
            gamma: self.gamma,
            mode: self.mode,
            limit,
            warnings: warnings.clone(),
        };
        let diverged = |points: Vec<Point<T>>, reason| {
            let last = points.last().cloned().expect("nonempty");
            finish(points, Limit::Diverged { reason, last })
        };
        if !p0.is_finite() {
            return Err(Error::NonFinite(format!("initial point {p0}")));
        }
        if !self.domain.contains_point(p0) {
            return Ok(diverged(vec![p0.clone()], DivergenceReason::LeftDomain));
        }
        let mut points = vec![p0.clone()];
        match gradient_at(f, p0) {
            Ok(g) if g.norm() == T::zero() => return Ok(finish(points, Limit::FixedPoint(p0.clone()))),
            Ok(_) => {}
            Err(_) => return Ok(diverged(points, DivergenceReason::NonFinite)),
        }

        let transient = self.max_steps / 2;
        let cell = match self.mode {
            Mode::Discrete => to_f64(self.det.cycle_radius),
            Mode::Flow => to_f64(self.det.cycle_radius).max(1e-3),
        };
        let mut cycles = CycleDetector::new(cell, self.mode == Mode::Flow);
        cycles.push(p0.stacked());
        let mut streak = 0usize;
        let mut cur = p0.clone();
        for t in 1..=self.max_steps {
            let next = match self.mode {
                Mode::Discrete => gda_step(f, &cur, self.step, self.gamma),
                Mode::Flow => flow_step(f, &cur, self.gamma, self.step),
            };
            let next = match next {
                Ok(n) if n.is_finite() => n,
                _ => return Ok(diverged(points, DivergenceReason::NonFinite)),
            };
            if !self.domain.contains_point(&next) {
                points.push(next);
                return Ok(diverged(points, DivergenceReason::LeftDomain));
            }
            if next.norm() > self.det.divergence_norm {
                points.push(next);
                return Ok(diverged(points, DivergenceReason::NormThreshold));
            }
            let grad = match gradient_at(f, &next) {
                Ok(g) => g,
                Err(_) => {
                    points.push(next);
                    return Ok(diverged(points, DivergenceReason::NonFinite));
                }
            };
            let moved = next.distance(&cur) / self.step;
            // Velocity for the flow; the step quotient for discrete runs.
            let speed = match self.mode {
                Mode::Discrete => moved,
                Mode::Flow => norm(&velocity(&grad, self.gamma)),
            };
            if speed <= self.det.station && grad.norm() <= self.det.station {
                streak += 1;
            } else {
                streak = 0;
            }
            cycles.push(next.stacked());
            points.push(next.clone());
            if streak >= self.det.consecutive {
                return Ok(finish(points, Limit::FixedPoint(next)));
            }
            if t >= transient {
                if let Some(s) = cycles.find_loop(to_f64(self.det.cycle_radius), to_f64(self.det.cycle_drift)) {
                    let period = self.step * lit((t - s) as f64);
                    let witnesses = vec![points[s].clone(), next];
                    return Ok(finish(points, Limit::Cycle { period, witnesses }));
                }
            }
            cur = points.last().cloned().expect("nonempty");
        }
        Ok(finish(points, Limit::Exhausted))
    }
}

/// Runs discrete γ-GDA until a limit is detected or `max_steps` is reached.
pub fn run_gda<T: Real>(f: &dyn Objective<T>, p0: &Point<T>, eta: T, gamma: T, max_steps: usize) -> Result<Trajectory<T>> {
    run_gda_with(f, p0, eta, gamma, max_steps, &LimitDetection::default())
}

pub fn run_gda_with<T: Real>(
    f: &dyn Objective<T>,
    p0: &Point<T>,
    eta: T,
    gamma: T,
    max_steps: usize,
    det: &LimitDetection<T>,
) -> Result<Trajectory<T>> {
    validate(eta, gamma)?;
    if max_steps == 0 {
        return Err(Error::InvalidInput("max_steps must be at least 1".into()));
    }
    let mut warnings = Vec::new();
    if let Some(ell) = f.lipschitz().gradient {
        if eta > T::one() / ell {
            warnings.push(format!("step size {eta} exceeds 1/ell = {}", T::one() / ell));
        }
    }
    Run {
        f,
        domain: f.domain(),
        det: *det,
        gamma,
        step: eta,
        mode: Mode::Discrete,
        max_steps,
    }
    .execute(p0, warnings)
}

/// Integrates the γ-GDA flow with fixed-step RK4 up to `horizon`.
pub fn run_flow<T: Real>(f: &dyn Objective<T>, p0: &Point<T>, gamma: T, horizon: T, dt: T) -> Result<Trajectory<T>> {
    run_flow_with(f, p0, gamma, horizon, dt, &LimitDetection::default())
}

pub fn run_flow_with<T: Real>(
    f: &dyn Objective<T>,
    p0: &Point<T>,
    gamma: T,
    horizon: T,
    dt: T,
    det: &LimitDetection<T>,
) -> Result<Trajectory<T>> {
    validate(dt, gamma)?;
    if !(horizon >= dt) || !horizon.is_finite() {
        return Err(Error::InvalidInput(format!("horizon {horizon} must be at least dt = {dt}")));
    }
    let steps = (to_f64(horizon) / to_f64(dt)).round() as usize;
    Run {
        f,
        domain: f.domain(),
        det: *det,
        gamma,
        step: dt,
        mode: Mode::Flow,
        max_steps: steps.max(1),
    }
    .execute(p0, Vec::new())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Cluster<T> {
    pub center: Point<T>,
    pub count: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Tally<T> {
    pub fixed_point: usize,
    pub cycle: usize,
    pub diverged: usize,
    pub exhausted: usize,
    pub clusters: Vec<Cluster<T>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BasinSample<T> {
    pub inits: Vec<Point<T>>,
    pub limits: Vec<Limit<T>>,
    pub tally: Tally<T>,
}

pub const DEFAULT_CLUSTER_RADIUS: f64 = 1e-3;

/// Uniform point in `region` from the `index`-th stream of `seed`.
pub fn seeded_point<T: Real>(region: &BoxDomain<T>, dim_x: usize, seed: u64, index: u64) -> Point<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let z: Vec<T> = region
        .lower
        .iter()
        .zip(&region.upper)
        .map(|(&l, &u)| {
            let s: f64 = rng.gen();
            l + (u - l) * lit(s)
        })
        .collect();
    Point::from_stacked(&z, dim_x)
}

/// Greedy clustering of fixed points in input order.
pub fn cluster_limits<T: Real>(limits: &[Limit<T>], radius: T) -> Tally<T> {
    let mut tally = Tally {
        fixed_point: 0,
        cycle: 0,
        diverged: 0,
        exhausted: 0,
        clusters: Vec::new(),
    };
    for l in limits {
        match l {
            Limit::FixedPoint(p) => {
                tally.fixed_point += 1;
                match tally.clusters.iter_mut().find(|c| c.center.distance(p) <= radius) {
                    Some(c) => c.count += 1,
                    None => tally.clusters.push(Cluster {
                        center: p.clone(),
                        count: 1,
                    }),
                }
            }
            Limit::Cycle { .. } => tally.cycle += 1,
            Limit::Diverged { .. } => tally.diverged += 1,
            Limit::Exhausted => tally.exhausted += 1,
        }
    }
    tally
}

/// Runs discrete γ-GDA from `n` seeded uniform initializations in `region`
/// and tallies the limits. Results do not depend on the thread count.
pub fn sample_basins<T: Real>(
    f: &dyn Objective<T>,
    region: &BoxDomain<T>,
    n: usize,
    eta: T,
    gamma: T,
    max_steps: usize,
    seed: u64,
) -> Result<BasinSample<T>> {
    validate(eta, gamma)?;
    if n == 0 {
        return Err(Error::InvalidInput("basin sample needs n >= 1".into()));
    }
    if region.dim() != f.dim_x() + f.dim_y() || !region.is_bounded() {
        return Err(Error::InvalidInput("region must be a bounded box over all coordinates".into()));
    }
    let domain = f.domain();
    if !domain.contains(&region.lower) || !domain.contains(&region.upper) {
        return Err(Error::InvalidInput("region must lie within the domain".into()));
    }
    let inits: Vec<Point<T>> = (0..n as u64).map(|i| seeded_point(region, f.dim_x(), seed, i)).collect();
    let limits = inits
        .par_iter()
        .map(|p| run_gda(f, p, eta, gamma, max_steps).map(|t| t.limit))
        .collect::<Result<Vec<_>>>()?;
    let tally = cluster_limits(&limits, lit(DEFAULT_CLUSTER_RADIUS));
    Ok(BasinSample { inits, limits, tally })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::catalog;

    fn pt(x: f64, y: f64) -> Point<f64> {
        Point::from_f64(&[x], &[y])
    }

    #[test]
    fn single_steps() {
        let f = catalog::<f64>("quadratic_saddle").unwrap();
        let p = gda_step(f.as_ref(), &pt(1.0, 1.0), 0.1, 1.0).unwrap();
        assert!((p.x[0] - 0.8).abs() < 1e-15 && (p.y[0] - 0.8).abs() < 1e-15);
        let p = gda_step(f.as_ref(), &pt(1.0, 1.0), 0.1, 10.0).unwrap();
        assert!((p.x[0] - 0.98).abs() < 1e-15 && (p.y[0] - 0.8).abs() < 1e-15);
        let p = gda_step(f.as_ref(), &pt(0.0, 0.0), 0.1, 1.0).unwrap();
        assert_eq!(p, pt(0.0, 0.0));
        assert!(gda_step(f.as_ref(), &pt(0.0, 0.0), -0.1, 1.0).is_err());
    }

    #[test]
    fn saddle_converges_and_bilinear_diverges() {
        let f = catalog::<f64>("quadratic_saddle").unwrap();
        let t = run_gda(f.as_ref(), &pt(0.5, 0.3), 0.1, 1.0, 10_000).unwrap();
        match &t.limit {
            Limit::FixedPoint(p) => assert!(p.norm() < 1e-6),
            other => panic!("{other:?}"),
        }
        // Closed-form iterates (1 − 2η)^t.
        for (k, p) in t.points.iter().enumerate().take(20) {
            assert!((p.x[0] - 0.5 * 0.8f64.powi(k as i32)).abs() < 1e-14);
        }

        let f = catalog::<f64>("bilinear").unwrap();
        let t = run_gda(f.as_ref(), &pt(1.0, 1.0), 0.1, 1.0, 1_000_000).unwrap();
        assert!(matches!(t.limit, Limit::Diverged { reason: DivergenceReason::NormThreshold, .. }));
        // |1 ± iη| = √1.01 per step.
        let k = t.points.len() - 2;
        let expected = 2f64.sqrt() * 1.01f64.powf(k as f64 / 2.0);
        assert!((t.points[k].norm() / expected - 1.0).abs() < 1e-9);
    }

    #[test]
    fn exact_fixed_point_stops_immediately() {
        let f = catalog::<f64>("coupled_quadratic").unwrap();
        let t = run_gda(f.as_ref(), &pt(0.0, 0.0), 0.1, 1.0, 100).unwrap();
        assert_eq!(t.points.len(), 1);
        assert_eq!(t.limit, Limit::FixedPoint(pt(0.0, 0.0)));
    }

    #[test]
    fn flow_matches_exponential_and_cycles_on_bilinear() {
        let f = catalog::<f64>("quadratic_saddle").unwrap();
        let t = run_flow(f.as_ref(), &pt(1.0, 1.0), 1.0, 10.0, 1e-3).unwrap();
        assert!((t.points[1000].x[0] - (-2.0f64).exp()).abs() < 1e-6);
        assert!(matches!(t.limit, Limit::FixedPoint(_)));

        let f = catalog::<f64>("bilinear").unwrap();
        let t = run_flow(f.as_ref(), &pt(1.0, 0.0), 1.0, 10.0, 1e-3).unwrap();
        match &t.limit {
            Limit::Cycle { period, .. } => assert!((period - 2.0 * std::f64::consts::PI).abs() < 2e-3),
            other => panic!("{other:?}"),
        }
        // Exact orbit (cos t, sin t) for ẋ = −y, ẏ = x.
        let k = 3000;
        let s = t.time(k);
        assert!((t.points[k].x[0] - s.cos()).abs() < 1e-9);
        assert!((t.points[k].y[0] - s.sin()).abs() < 1e-9);
    }

    #[test]
    fn large_gamma_flow_reaches_coupled_minimax() {
        let f = catalog::<f64>("coupled_quadratic").unwrap();
        let t = run_flow(f.as_ref(), &pt(0.01, -0.01), 100.0, 300.0, 1e-2).unwrap();
        match &t.limit {
            Limit::FixedPoint(p) => assert!(p.norm() < 1e-5),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn box_keys_enumerates_product() {
        let keys: Vec<_> = box_keys(&[0, 5], &[1, 7]).collect();
        assert_eq!(keys.len(), 6);
        assert_eq!(keys[0], vec![0, 5]);
        assert_eq!(keys[5], vec![1, 7]);
    }

    #[test]
    fn basins_are_reproducible() {
        let f = catalog::<f64>("quadratic_saddle").unwrap();
        let region = BoxDomain::from_intervals(&[(-1.0, 1.0), (-1.0, 1.0)]);
        let a = sample_basins(f.as_ref(), &region, 100, 0.1, 1.0, 10_000, 5).unwrap();
        let b = sample_basins(f.as_ref(), &region, 100, 0.1, 1.0, 10_000, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.tally.fixed_point, 100);
        assert_eq!(a.tally.clusters.len(), 1);
        assert!(a.tally.clusters[0].center.norm() < 1e-3);
    }
}
