//! Brute-force grid checks of the minimax definitions: local-minimax
//! certificates, grid global minimax, windowed (Evtushenko) minimax and
//! stationary-point scans.

use rayon::prelude::*;
use serde::Serialize;

use crate::classifier::{classify, Classification, DEFAULT_STATION_TOLERANCE};
use crate::error::{Error, Result};
use crate::linalg::{solve_vec, symmetric_eigenvalues, Matrix};
use crate::problems::{gradient_at, hessian_at, BoxDomain, Gradient, Objective, Point};
use crate::scalar::{dist, lit, norm, to_f64, Real};

pub const DEFAULT_GRID_CAP: f64 = 1e7;
pub const DEFAULT_DELTA_LADDER: [f64; 4] = [0.5, 0.25, 0.1, 0.05];

/// A tensor grid over a box with `resolution` points per axis, endpoints
/// included.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct GridSpec<T> {
    #[serde(rename = "box")]
    pub bounds: BoxDomain<T>,
    pub resolution: usize,
}

impl<T: Real> GridSpec<T> {
    pub fn new(bounds: BoxDomain<T>, resolution: usize) -> Result<Self> {
        Self::with_cap(bounds, resolution, DEFAULT_GRID_CAP)
    }

    pub fn with_cap(bounds: BoxDomain<T>, resolution: usize, cap: f64) -> Result<Self> {
        if resolution < 3 {
            return Err(Error::InvalidInput(format!("grid resolution must be at least 3, got {resolution}")));
        }
        if !bounds.is_bounded() {
            return Err(Error::InvalidInput("grid box must be bounded".into()));
        }
        let cells = (resolution as f64).powi(bounds.dim() as i32);
        if cells > cap {
            return Err(Error::GridCapExceeded { cells, cap });
        }
        Ok(Self { bounds, resolution })
    }

    /// Grid over the objective's own (bounded) domain.
    pub fn over_domain(f: &dyn Objective<T>, resolution: usize) -> Result<Self> {
        Self::new(f.domain(), resolution)
    }

    fn axis(&self, k: usize) -> Vec<T> {
        let (l, u) = (self.bounds.lower[k], self.bounds.upper[k]);
        let n = self.resolution - 1;
        (0..=n)
            .map(|i| if i == n { u } else { l + (u - l) * lit(i as f64 / n as f64) })
            .collect()
    }

    /// Tensor grid over the axes in `range`, last axis fastest.
    pub fn points(&self, range: std::ops::Range<usize>) -> Vec<Vec<T>> {
        tensor(&range.map(|k| self.axis(k)).collect::<Vec<_>>())
    }

    pub fn spacing(&self, k: usize) -> T {
        (self.bounds.upper[k] - self.bounds.lower[k]) / lit((self.resolution - 1) as f64)
    }

    fn max_spacing(&self, range: std::ops::Range<usize>) -> T {
        range.map(|k| self.spacing(k)).fold(T::zero(), T::max)
    }
}

/// Tensor product of axes, last axis fastest.
fn tensor<T: Real>(axes: &[Vec<T>]) -> Vec<Vec<T>> {
    let total: usize = axes.iter().map(Vec::len).product();
    (0..total)
        .map(|mut idx| {
            let mut p = vec![T::zero(); axes.len()];
            for k in (0..axes.len()).rev() {
                let n = axes[k].len();
                p[k] = axes[k][idx % n];
                idx /= n;
            }
            p
        })
        .collect()
}

fn spectral_norm<T: Real>(m: &Matrix<T>) -> Result<T> {
    Ok(symmetric_eigenvalues(m)?.iter().fold(T::zero(), |a, v| a.max(v.abs())))
}

/// Largest Hessian spectral norm over a coarse sub-lattice of `bounds`.
pub fn curvature_estimate<T: Real>(f: &dyn Objective<T>, bounds: &BoxDomain<T>) -> Result<T> {
    let per_axis = 17usize;
    let axes: Vec<Vec<T>> = (0..bounds.dim())
        .map(|k| {
            (0..per_axis)
                .map(|i| bounds.lower[k] + (bounds.upper[k] - bounds.lower[k]) * lit(i as f64 / (per_axis - 1) as f64))
                .collect()
        })
        .collect();
    let mut best = T::zero();
    for z in tensor(&axes) {
        let h = hessian_at(f, &Point::from_stacked(&z, f.dim_x()))?;
        best = best.max(spectral_norm(&h.full())?);
    }
    Ok(best)
}

/// Values `f(x_i, y_j)` on a grid, with the derived error bands.
pub struct GridTable<T> {
    pub xs: Vec<Vec<T>>,
    pub ys: Vec<Vec<T>>,
    /// Row-major `values[i * ys.len() + j]`.
    pub values: Vec<T>,
    pub dim_x: usize,
    pub spacing_x: T,
    pub spacing_y: T,
    /// `2·ℓ̂·h²` with `ℓ̂` the sampled curvature and `h` the largest spacing.
    pub tau_grid: T,
    pub tau_refute: T,
}

impl<T: Real> GridTable<T> {
    pub fn build(f: &dyn Objective<T>, grid: &GridSpec<T>) -> Result<Self> {
        let (dx, dy) = (f.dim_x(), f.dim_y());
        if grid.bounds.dim() != dx + dy {
            return Err(Error::DimensionMismatch("grid box does not match the objective".into()));
        }
        let xs = grid.points(0..dx);
        let ys = grid.points(dx..dx + dy);
        let values: Vec<T> = xs
            .par_iter()
            .flat_map_iter(|x| ys.iter().map(move |y| f.value(x, y)))
            .collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("objective on the verification grid".into()));
        }
        let h = grid.max_spacing(0..dx + dy);
        let ell = curvature_estimate(f, &grid.bounds)?;
        let tau_grid = lit::<T>(2.0) * ell * h * h;
        Ok(Self {
            xs,
            ys,
            values,
            dim_x: dx,
            spacing_x: grid.max_spacing(0..dx),
            spacing_y: grid.max_spacing(dx..dx + dy),
            tau_grid,
            tau_refute: tau_grid * lit(4.0),
        })
    }

    fn row(&self, i: usize) -> &[T] {
        let ny = self.ys.len();
        &self.values[i * ny..(i + 1) * ny]
    }

    /// `max_j f(x_i, y_j)` over the whole y-grid.
    fn row_max(&self, i: usize) -> T {
        self.row(i).iter().copied().fold(T::neg_infinity(), T::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum CertificateVerdict<T> {
    ConsistentWithLocalMinimax,
    RefutedAtDelta {
        delta: T,
        witness: Vec<T>,
        /// Max of `f(witness, ·)` over the `δ₀`-ball around `y⋆`.
        witness_max: T,
    },
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MinimaxCertificate<T> {
    pub point: Point<T>,
    pub value: T,
    /// Decreasing.
    pub delta_ladder: Vec<T>,
    /// Smallest grid ε achieving the property at each δ; `None` when no ε
    /// up to `eps_cap` does.
    pub required_eps: Vec<Option<T>>,
    pub eps_cap: T,
    pub local_max_ok: bool,
    pub verdict: CertificateVerdict<T>,
    /// Some neighbourhood was clipped by the box.
    pub boundary: bool,
    pub tau_grid: T,
    pub tau_refute: T,
    pub spacing_x: T,
    pub spacing_y: T,
}

impl<T> MinimaxCertificate<T> {
    pub fn is_consistent(&self) -> bool {
        matches!(self.verdict, CertificateVerdict::ConsistentWithLocalMinimax)
    }
    pub fn is_refuted(&self) -> bool {
        matches!(self.verdict, CertificateVerdict::RefutedAtDelta { .. })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CertifyOptions<T> {
    /// `δ₀`; defaults to the largest ladder δ.
    pub eps_cap: Option<T>,
    /// Radius of the y-local-maximum check; defaults to the smallest δ.
    pub local_radius: Option<T>,
}

impl<T> Default for CertifyOptions<T> {
    fn default() -> Self {
        Self {
            eps_cap: None,
            local_radius: None,
        }
    }
}

fn clipped<T: Real>(center: &[T], radius: T, lower: &[T], upper: &[T]) -> bool {
    center
        .iter()
        .zip(lower.iter().zip(upper))
        .any(|(&c, (&l, &u))| c - radius < l || c + radius > u)
}

/// Grid test of the local minimax definition at `p`.
pub fn certify_local_minimax<T: Real>(
    f: &dyn Objective<T>,
    p: &Point<T>,
    grid: &GridSpec<T>,
    delta_ladder: &[T],
) -> Result<MinimaxCertificate<T>> {
    let table = GridTable::build(f, grid)?;
    certify_with_table(f, &table, grid, p, delta_ladder, &CertifyOptions::default())
}

/// As [`certify_local_minimax`], reusing a prebuilt table.
pub fn certify_with_table<T: Real>(
    f: &dyn Objective<T>,
    table: &GridTable<T>,
    grid: &GridSpec<T>,
    p: &Point<T>,
    delta_ladder: &[T],
    opts: &CertifyOptions<T>,
) -> Result<MinimaxCertificate<T>> {
    if delta_ladder.is_empty() || delta_ladder.iter().any(|d| !(*d > T::zero())) {
        return Err(Error::InvalidInput("delta ladder must be nonempty and positive".into()));
    }
    if p.x.len() != f.dim_x() || p.y.len() != f.dim_y() {
        return Err(Error::DimensionMismatch("certificate point".into()));
    }
    if !grid.bounds.contains_point(p) {
        return Err(Error::OutOfDomain {
            point: p.to_string(),
            margin: 0.0,
        });
    }
    let mut ladder = delta_ladder.to_vec();
    ladder.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
    ladder.dedup();
    let smallest = *ladder.last().expect("nonempty");
    let three: T = lit(3.0);
    if smallest < three * table.spacing_x * (T::one() - lit(1e-9)) {
        return Err(Error::GridTooCoarse {
            delta: to_f64(smallest),
            spacing: to_f64(table.spacing_x),
        });
    }
    let eps_cap = opts.eps_cap.unwrap_or(ladder[0]);
    let local_radius = opts.local_radius.unwrap_or(smallest);
    let f_star = f.value(&p.x, &p.y);
    let threshold = f_star - table.tau_grid;
    let refute_threshold = f_star - table.tau_refute;

    // y-local maximum of f(x⋆, ·) on the grid.
    let local_max_ok = table
        .ys
        .iter()
        .filter(|y| dist(y, &p.y) <= local_radius)
        .all(|y| f.value(&p.x, y) <= f_star + table.tau_grid);

    let y_dist: Vec<T> = table.ys.iter().map(|y| dist(y, &p.y)).collect();
    let x_dist: Vec<T> = table.xs.iter().map(|x| dist(x, &p.x)).collect();
    let outer = ladder[0];
    let rows: Vec<usize> = (0..table.xs.len()).filter(|&i| x_dist[i] <= outer).collect();

    // Per x: e(x), the distance to the nearest y' with f(x, y') ≥ f⋆ − τ,
    // and M(x), the max over the δ₀-ball.
    let per_row: Vec<(usize, Option<T>, T)> = rows
        .par_iter()
        .map(|&i| {
            let row = table.row(i);
            let mut e: Option<T> = None;
            let mut m = T::neg_infinity();
            for (j, &v) in row.iter().enumerate() {
                let d = y_dist[j];
                if d <= eps_cap {
                    m = m.max(v);
                    if v >= threshold && e.is_none_or(|cur| d < cur) {
                        e = Some(d);
                    }
                }
            }
            (i, e, m)
        })
        .collect();

    let mut required_eps = Vec::with_capacity(ladder.len());
    let mut refutation: Option<CertificateVerdict<T>> = None;
    for &delta in &ladder {
        let mut worst: Option<T> = Some(T::zero());
        let mut witness: Option<(usize, T)> = None;
        for &(i, e, m) in &per_row {
            if x_dist[i] > delta {
                continue;
            }
            worst = match (worst, e) {
                (Some(w), Some(e)) => Some(w.max(e)),
                _ => None,
            };
            if m < refute_threshold && witness.is_none_or(|(_, wm)| m < wm) {
                witness = Some((i, m));
            }
        }
        required_eps.push(worst);
        if let Some((i, m)) = witness {
            refutation = Some(CertificateVerdict::RefutedAtDelta {
                delta,
                witness: table.xs[i].clone(),
                witness_max: m,
            });
        }
    }

    // requiredEps must shrink at least in proportion to δ down the ladder,
    // up to two grid spacings.
    let final_eps = *required_eps.last().expect("nonempty");
    let shrink = match (required_eps.first().copied().flatten(), ladder.len() > 1) {
        (Some(first), true) => first * smallest / ladder[0],
        _ => T::zero(),
    };
    let floor = (table.spacing_y * lit(2.0) + shrink) * (T::one() + lit(1e-9));
    let verdict = if let Some(r) = refutation {
        r
    } else if local_max_ok && final_eps.is_some_and(|e| e <= floor) {
        CertificateVerdict::ConsistentWithLocalMinimax
    } else {
        CertificateVerdict::Inconclusive
    };
    let dx = f.dim_x();
    let boundary = clipped(&p.x, outer, &grid.bounds.lower[..dx], &grid.bounds.upper[..dx])
        || clipped(&p.y, eps_cap, &grid.bounds.lower[dx..], &grid.bounds.upper[dx..]);
    Ok(MinimaxCertificate {
        point: p.clone(),
        value: f_star,
        delta_ladder: ladder,
        required_eps,
        eps_cap,
        local_max_ok,
        verdict,
        boundary,
        tau_grid: table.tau_grid,
        tau_refute: table.tau_refute,
        spacing_x: table.spacing_x,
        spacing_y: table.spacing_y,
    })
}

/// Grid points whose y lies on the boundary of the y-box.
pub fn boundary_candidates<T: Real>(f: &dyn Objective<T>, grid: &GridSpec<T>) -> Vec<Point<T>> {
    let dx = f.dim_x();
    let dy = f.dim_y();
    let xs = grid.points(0..dx);
    let ys = grid.points(dx..dx + dy);
    let on_face = |y: &[T]| {
        y.iter()
            .enumerate()
            .any(|(k, &v)| v == grid.bounds.lower[dx + k] || v == grid.bounds.upper[dx + k])
    };
    let faces: Vec<&Vec<T>> = ys.iter().filter(|y| on_face(y)).collect();
    xs.iter()
        .flat_map(|x| faces.iter().map(move |y| Point::new(x.clone(), (*y).clone())))
        .collect()
}

/// Certifies every candidate against one shared table.
pub fn certify_candidates<T: Real>(
    f: &dyn Objective<T>,
    grid: &GridSpec<T>,
    candidates: &[Point<T>],
    delta_ladder: &[T],
) -> Result<Vec<MinimaxCertificate<T>>> {
    let table = GridTable::build(f, grid)?;
    candidates
        .par_iter()
        .map(|p| certify_with_table(f, &table, grid, p, delta_ladder, &CertifyOptions::default()))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct GlobalMinimax<T> {
    /// Grid minimizers of the grid `φ`, each paired with a grid argmax.
    pub points: Vec<Point<T>>,
    pub value: T,
    pub tau_grid: T,
}

/// Indices of `row` within `tol` of its max that are also grid-local
/// maxima in y.
fn tie_argmaxes<T: Real>(table: &GridTable<T>, row: &[T], tol: T, res_y: &[usize]) -> Vec<usize> {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    let strides: Vec<usize> = {
        let mut s = vec![1usize; res_y.len()];
        for k in (0..res_y.len().saturating_sub(1)).rev() {
            s[k] = s[k + 1] * res_y[k + 1];
        }
        s
    };
    (0..row.len())
        .filter(|&j| row[j] >= max - tol)
        .filter(|&j| grid_neighbors(j, res_y, &strides).all(|n| row[n] <= row[j]))
        .filter(|&j| j < table.ys.len())
        .collect()
}

/// Indices of the `3^d − 1` grid neighbours of `idx`.
fn grid_neighbors<'a>(idx: usize, res: &'a [usize], strides: &'a [usize]) -> impl Iterator<Item = usize> + 'a {
    let d = res.len();
    let coords: Vec<usize> = (0..d).map(|k| (idx / strides[k]) % res[k]).collect();
    let total = 3usize.pow(d as u32);
    (0..total).filter_map(move |code| {
        let mut c = code;
        let mut out = 0usize;
        let mut is_self = true;
        for k in 0..d {
            let off = (c % 3) as isize - 1;
            c /= 3;
            if off != 0 {
                is_self = false;
            }
            let v = coords[k] as isize + off;
            if v < 0 || v >= res[k] as isize {
                return None;
            }
            out += v as usize * strides[k];
        }
        (!is_self).then_some(out)
    })
}

/// All grid minimizers of `φ(x) = max_y f(x, y)` within `τ_grid` of the
/// minimum, each paired with its tied grid argmaxes.
pub fn grid_global_minimax<T: Real>(f: &dyn Objective<T>, grid: &GridSpec<T>) -> Result<GlobalMinimax<T>> {
    let table = GridTable::build(f, grid)?;
    Ok(global_from_table(&table, grid))
}

fn global_from_table<T: Real>(table: &GridTable<T>, grid: &GridSpec<T>) -> GlobalMinimax<T> {
    let phi: Vec<T> = (0..table.xs.len()).map(|i| table.row_max(i)).collect();
    let value = phi.iter().copied().fold(T::infinity(), T::min);
    let res_y = vec![grid.resolution; table.ys.first().map_or(0, Vec::len)];
    let mut points = Vec::new();
    for (i, &v) in phi.iter().enumerate() {
        if v <= value + table.tau_grid {
            for j in tie_argmaxes(table, table.row(i), table.tau_grid, &res_y) {
                points.push(Point::new(table.xs[i].clone(), table.ys[j].clone()));
            }
        }
    }
    GlobalMinimax {
        points,
        value,
        tau_grid: table.tau_grid,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct GlobalPointReport<T> {
    pub point: Point<T>,
    pub gradient: Gradient<T>,
    pub gradient_norm: T,
    pub classification: Classification<T>,
    pub certificate: MinimaxCertificate<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct GlobalNotLocalReport<T> {
    pub global: GlobalMinimax<T>,
    pub points: Vec<GlobalPointReport<T>>,
}

/// Grid global minimax points, each classified and certified.
pub fn check_global_not_local<T: Real>(
    f: &dyn Objective<T>,
    grid: &GridSpec<T>,
    delta_ladder: &[T],
) -> Result<GlobalNotLocalReport<T>> {
    let table = GridTable::build(f, grid)?;
    let global = global_from_table(&table, grid);
    let points = global
        .points
        .par_iter()
        .map(|p| {
            let gradient = gradient_at(f, p)?;
            Ok(GlobalPointReport {
                point: p.clone(),
                gradient_norm: gradient.norm(),
                gradient,
                classification: classify(f, p)?,
                certificate: certify_with_table(f, &table, grid, p, delta_ladder, &CertifyOptions::default())?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GlobalNotLocalReport { global, points })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct EvtushenkoWitness<T> {
    pub x: Vec<T>,
    /// `max_{y ∈ W} f(x, y)` on the grid.
    pub windowed_max: T,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct EvtushenkoReport<T> {
    pub holds: bool,
    /// `y⋆` maximizes `f(x⋆, ·)` over the window's y-grid.
    pub y_is_window_max: bool,
    pub value: T,
    pub witness: Option<EvtushenkoWitness<T>>,
    pub tau_grid: T,
}

/// Whether `p` is a grid global minimax point of `f` restricted to `window`.
pub fn evtushenko_check<T: Real>(
    f: &dyn Objective<T>,
    p: &Point<T>,
    window: &BoxDomain<T>,
    resolution: usize,
) -> Result<EvtushenkoReport<T>> {
    if !window.contains_point(p) {
        return Err(Error::OutOfDomain {
            point: p.to_string(),
            margin: 0.0,
        });
    }
    let grid = GridSpec::new(window.clone(), resolution)?;
    let table = GridTable::build(f, &grid)?;
    let f_star = f.value(&p.x, &p.y);
    let tau = table.tau_grid;
    let y_is_window_max = table.ys.iter().all(|y| f.value(&p.x, y) <= f_star + tau);
    let mut witness: Option<EvtushenkoWitness<T>> = None;
    for i in 0..table.xs.len() {
        let m = table.row_max(i);
        if m < f_star - tau && witness.as_ref().is_none_or(|w| m < w.windowed_max) {
            witness = Some(EvtushenkoWitness {
                x: table.xs[i].clone(),
                windowed_max: m,
            });
        }
    }
    Ok(EvtushenkoReport {
        holds: y_is_window_max && witness.is_none(),
        y_is_window_max,
        value: f_star,
        witness,
        tau_grid: tau,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ScanFailure<T> {
    pub start: Point<T>,
    pub last_gradient_norm: T,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct NashScan<T> {
    pub stationary: Vec<(Point<T>, Classification<T>)>,
    /// Candidates whose polishing did not reach stationarity
    /// (`NewtonDiverged`).
    pub newton_diverged: Vec<ScanFailure<T>>,
    pub tau_scan: T,
    pub candidates: usize,
}

/// Damped Newton (Levenberg–Marquardt) on `∇f = 0`.
fn polish<T: Real>(f: &dyn Objective<T>, start: &Point<T>, bounds: &BoxDomain<T>, tol: T) -> Result<std::result::Result<Point<T>, T>> {
    let dx = f.dim_x();
    let mut z = start.stacked();
    let mut g = gradient_at(f, start)?.stacked();
    let mut mu: T = lit(1e-6);
    for _ in 0..100 {
        let gn = norm(&g);
        if gn <= tol {
            return Ok(Ok(Point::from_stacked(&z, dx)));
        }
        let h = hessian_at(f, &Point::from_stacked(&z, dx))?.full();
        let ht = h.transpose();
        let hth = ht.matmul(&h)?;
        let htg = ht.mul_vec(&g);
        let mut improved = false;
        for _ in 0..30 {
            let mut m = hth.clone();
            for i in 0..m.rows() {
                m[(i, i)] += mu;
            }
            let Ok(step) = solve_vec(&m, &htg) else {
                mu *= lit(10.0);
                continue;
            };
            let cand: Vec<T> = z.iter().zip(&step).map(|(&a, &b)| a - b).collect();
            let gc = gradient_at(f, &Point::from_stacked(&cand, dx)).map(|g| g.stacked());
            match gc {
                Ok(gc) if norm(&gc) < gn => {
                    z = cand;
                    g = gc;
                    mu = (mu * lit(0.1)).max(lit(1e-12));
                    improved = true;
                    break;
                }
                _ => mu *= lit(10.0),
            }
        }
        if !improved {
            break;
        }
    }
    let gn = norm(&g);
    if gn <= tol && bounds.contains(&z) {
        Ok(Ok(Point::from_stacked(&z, dx)))
    } else {
        Ok(Err(gn))
    }
}

/// Finds grid cells where `‖∇f‖` has a local minimum below
/// `τ_scan = ℓ̂·h·√d`, polishes each to `‖∇f‖ ≤ τ_station`, deduplicates
/// within two spacings and classifies the survivors.
pub fn scan_for_local_nash<T: Real>(f: &dyn Objective<T>, grid: &GridSpec<T>) -> Result<NashScan<T>> {
    let d = f.dim_x() + f.dim_y();
    if grid.bounds.dim() != d {
        return Err(Error::DimensionMismatch("grid box does not match the objective".into()));
    }
    let axes: Vec<Vec<T>> = (0..d).map(|k| grid.axis(k)).collect();
    let pts = tensor(&axes);
    let dx = f.dim_x();
    let gnorm: Vec<T> = pts
        .par_iter()
        .map(|z| gradient_at(f, &Point::from_stacked(z, dx)).map(|g| g.norm()))
        .collect::<Result<_>>()?;
    let h = grid.max_spacing(0..d);
    let ell = curvature_estimate(f, &grid.bounds)?;
    let tau_scan = ell * h * lit::<T>(d as f64).sqrt();
    let res = vec![grid.resolution; d];
    let mut strides = vec![1usize; d];
    for k in (0..d.saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * res[k + 1];
    }
    let candidates: Vec<usize> = (0..pts.len())
        .filter(|&i| gnorm[i] < tau_scan)
        .filter(|&i| grid_neighbors(i, &res, &strides).all(|n| gnorm[n] >= gnorm[i]))
        .collect();
    let tol: T = lit(DEFAULT_STATION_TOLERANCE);
    let polished = candidates
        .par_iter()
        .map(|&i| {
            let start = Point::from_stacked(&pts[i], dx);
            polish(f, &start, &grid.bounds, tol).map(|r| (start, r))
        })
        .collect::<Result<Vec<_>>>()?;

    let radius = h * lit(2.0);
    let mut kept: Vec<Point<T>> = Vec::new();
    let mut newton_diverged = Vec::new();
    for (start, r) in polished {
        match r {
            Ok(p) => {
                if kept.iter().all(|q| q.distance(&p) > radius) {
                    kept.push(p);
                }
            }
            Err(gn) => newton_diverged.push(ScanFailure {
                start,
                last_gradient_norm: gn,
            }),
        }
    }
    let stationary = kept
        .into_par_iter()
        .map(|p| classify(f, &p).map(|c| (p, c)))
        .collect::<Result<Vec<_>>>()?;
    Ok(NashScan {
        stationary,
        newton_diverged,
        tau_scan,
        candidates: candidates.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::NashVerdict;
    use crate::problems::catalog;
    use std::f64::consts::PI;

    fn unit_grid(res: usize) -> GridSpec<f64> {
        GridSpec::new(BoxDomain::from_intervals(&[(-1.0, 1.0), (-1.0, 1.0)]), res).unwrap()
    }

    #[test]
    fn grid_spec_limits() {
        assert!(GridSpec::new(BoxDomain::<f64>::from_intervals(&[(0.0, 1.0)]), 2).is_err());
        let e = GridSpec::new(BoxDomain::<f64>::from_intervals(&[(0.0, 1.0); 4]), 100).unwrap_err();
        assert!(matches!(e, Error::GridCapExceeded { .. }));
        let g = unit_grid(201);
        assert_eq!(g.axis(0)[100], 0.0);
        assert_eq!(g.axis(0)[200], 1.0);
    }

    #[test]
    fn neighbours_are_clipped() {
        let res = [3usize, 3];
        let strides = [3usize, 1];
        let mut n: Vec<usize> = grid_neighbors(4, &res, &strides).collect();
        n.sort();
        assert_eq!(n, vec![0, 1, 2, 3, 5, 6, 7, 8]);
        assert_eq!(grid_neighbors(0, &res, &strides).count(), 3);
    }

    #[test]
    fn coupled_quadratic_certificate() {
        let f = catalog::<f64>("coupled_quadratic").unwrap();
        let o = Point::from_f64(&[0.0], &[0.0]);
        let c = certify_local_minimax(f.as_ref(), &o, &unit_grid(201), &DEFAULT_DELTA_LADDER).unwrap();
        assert!(c.is_consistent(), "{c:?}");
        // Minimal ε for −x² + 5xy − y² is (5 − √21)/2 · δ.
        let k = (5.0 - 21f64.sqrt()) / 2.0;
        for (delta, eps) in c.delta_ladder.iter().zip(&c.required_eps) {
            let eps = eps.unwrap();
            assert!(eps <= k * delta + 2.0 * c.spacing_y, "{delta} {eps}");
            assert!(eps <= 3.0 / 2.0 * delta);
        }
        assert!(c.required_eps.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn separable_saddle_sits_on_floor() {
        let f = catalog::<f64>("quadratic_saddle").unwrap();
        let o = Point::from_f64(&[0.0], &[0.0]);
        let c = certify_local_minimax(f.as_ref(), &o, &unit_grid(201), &DEFAULT_DELTA_LADDER).unwrap();
        assert!(c.is_consistent());
        assert!(c.required_eps.iter().all(|e| *e == Some(0.0)));
        let e = certify_local_minimax(f.as_ref(), &o, &unit_grid(201), &[0.02]).unwrap_err();
        assert!(matches!(e, Error::GridTooCoarse { .. }));
    }

    #[test]
    fn global_minimax_of_xy_cos() {
        let f = catalog::<f64>("xy_cos").unwrap();
        let grid = GridSpec::over_domain(f.as_ref(), 401).unwrap();
        let g = grid_global_minimax(f.as_ref(), &grid).unwrap();
        assert!((g.value - 1.0).abs() < 5e-3);
        assert_eq!(g.points.len(), 2);
        for p in &g.points {
            assert_eq!(p.x[0], 0.0);
            assert!((p.y[0].abs() - PI).abs() < 1e-12);
        }
    }

    #[test]
    fn saddle_global_and_scan() {
        let f = catalog::<f64>("quadratic_saddle").unwrap();
        let g = grid_global_minimax(f.as_ref(), &unit_grid(101)).unwrap();
        assert_eq!(g.value, 0.0);
        assert!(g.points.contains(&Point::from_f64(&[0.0], &[0.0])));
        assert!(g.points.iter().all(|p| p.y[0] == 0.0 && p.x[0] * p.x[0] <= g.tau_grid));
        let s = scan_for_local_nash(f.as_ref(), &unit_grid(101)).unwrap();
        assert_eq!(s.stationary.len(), 1);
        assert_eq!(s.stationary[0].1.nash_verdict, NashVerdict::StrictNash);
    }

    #[test]
    fn sine_plateau_is_returned_as_ties() {
        let f = catalog::<f64>("sin_sum").unwrap();
        let band = GridSpec::new(BoxDomain::from_intervals(&[(-1.0, 1.0), (-3.0, 3.0)]), 201).unwrap();
        let g = grid_global_minimax(f.as_ref(), &band).unwrap();
        assert!((g.value - 1.0).abs() < 1e-3);
        let xs: std::collections::BTreeSet<i64> = g.points.iter().map(|p| (p.x[0] * 1e6).round() as i64).collect();
        assert_eq!(xs.len(), 201);

        // On the square, x + y cannot reach ±π/2 or −3π/2 near x = −π/2.
        let square = GridSpec::new(BoxDomain::from_intervals(&[(-3.0, 3.0), (-3.0, 3.0)]), 201).unwrap();
        let g = grid_global_minimax(f.as_ref(), &square).unwrap();
        assert!((g.value - (3.0 - PI / 2.0).sin()).abs() < g.tau_grid);
        assert!(g.points.iter().all(|p| (p.x[0] + PI / 2.0).abs() < 0.1));
    }

    #[test]
    fn evtushenko_windows() {
        let f = catalog::<f64>("xy_cos").unwrap();
        let p = Point::from_f64(&[0.0], &[-PI]);
        let full = BoxDomain::from_intervals(&[(-1.0, 1.0), (-2.0 * PI, 2.0 * PI)]);
        assert!(evtushenko_check(f.as_ref(), &p, &full, 401).unwrap().holds);
        let half = BoxDomain::from_intervals(&[(-1.0, 1.0), (-2.0 * PI, 0.0)]);
        let r = evtushenko_check(f.as_ref(), &p, &half, 401).unwrap();
        assert!(!r.holds);
        assert!(r.witness.unwrap().x[0] > 0.0);

        let g = catalog::<f64>("quadratic_saddle").unwrap();
        let o = Point::from_f64(&[0.0], &[0.0]);
        for w in [0.1, 0.5, 1.0] {
            let window = BoxDomain::from_intervals(&[(-w, w), (-w, w)]);
            assert!(evtushenko_check(g.as_ref(), &o, &window, 101).unwrap().holds);
        }
    }
}
