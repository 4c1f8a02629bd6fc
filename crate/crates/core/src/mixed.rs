//! Mixed strategies through the N-sample augmented minimax
//! `min_{x_1..x_N} max_y (1/N) Σ f(x_i, y)` on a grid.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::problems::Objective;
use crate::scalar::{lit, Real};
use crate::verify::{GridSpec, GridTable, DEFAULT_GRID_CAP};

/// Largest N solved by exhaustive enumeration.
pub const EXHAUSTIVE_MAX_ATOMS: usize = 4;
pub const MAX_ATOMS: usize = 32;
pub const DEFAULT_RESTARTS: usize = 8;

/// Uniform mixture of point masses.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EmpiricalMixedStrategy<T> {
    pub atoms: Vec<Vec<T>>,
}

impl<T: Real> EmpiricalMixedStrategy<T> {
    pub fn point_mass(x: Vec<T>) -> Self {
        Self { atoms: vec![x] }
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn weights(&self) -> Vec<T> {
        let w = T::one() / lit(self.atoms.len() as f64);
        vec![w; self.atoms.len()]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AugmentedMinimax<T> {
    pub strategy: EmpiricalMixedStrategy<T>,
    /// Grid value of `max_y (1/N) Σ f(x_i, y)` at the returned atoms.
    pub value: T,
    pub best_response: Vec<T>,
    /// Atoms came from best-response coordinate descent, not enumeration.
    pub heuristic: bool,
    pub tau_grid: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MixedGap<T> {
    pub value: T,
    pub upper_player_gap: T,
    pub lower_player_gap: T,
}

/// Table `v[i * ny + j]` with dimensions.
struct Payoff<'a, T> {
    v: &'a [T],
    nx: usize,
    ny: usize,
}

impl<T: Real> Payoff<'_, T> {
    fn row(&self, i: usize) -> &[T] {
        &self.v[i * self.ny..(i + 1) * self.ny]
    }

    fn max_of_sum(&self, sum: &[T], scale: T) -> (T, usize) {
        sum.iter()
            .enumerate()
            .fold((T::neg_infinity(), 0), |(m, a), (j, &s)| if s * scale > m { (s * scale, j) } else { (m, a) })
    }
}

fn multiset_count(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n + i) as f64 / (i + 1) as f64)
}

/// Exhaustive over nondecreasing index tuples.
fn exhaustive<T: Real>(p: &Payoff<'_, T>, n: usize) -> (Vec<usize>, T, usize) {
    let scale = T::one() / lit(n as f64);
    let search = |first: usize| {
        let mut best = (vec![first; n], T::infinity(), 0usize);
        let mut idx = vec![first; n];
        let mut sums = vec![vec![T::zero(); p.ny]; n + 1];
        fn rec<T: Real>(
            p: &Payoff<'_, T>,
            depth: usize,
            start: usize,
            idx: &mut Vec<usize>,
            sums: &mut Vec<Vec<T>>,
            scale: T,
            best: &mut (Vec<usize>, T, usize),
        ) {
            let n = idx.len();
            if depth == n {
                let (m, j) = p.max_of_sum(&sums[n], scale);
                if m < best.1 {
                    *best = (idx.clone(), m, j);
                }
                return;
            }
            for i in start..p.nx {
                idx[depth] = i;
                let (lo, hi) = sums.split_at_mut(depth + 1);
                for ((s, &a), &b) in hi[0].iter_mut().zip(&lo[depth]).zip(p.row(i)) {
                    *s = a + b;
                }
                rec(p, depth + 1, i, idx, sums, scale, best);
            }
        }
        sums[1].copy_from_slice(p.row(first));
        rec(p, 1, first, &mut idx, &mut sums, scale, &mut best);
        best
    };
    (0..p.nx)
        .into_par_iter()
        .map(search)
        .reduce_with(|a, b| if b.1 < a.1 || (b.1 == a.1 && b.0 < a.0) { b } else { a })
        .expect("nonempty grid")
}

/// Best-response coordinate descent over atoms with seeded restarts.
fn heuristic<T: Real>(p: &Payoff<'_, T>, n: usize, restarts: usize, seed: u64) -> (Vec<usize>, T, usize) {
    let scale = T::one() / lit(n as f64);
    let objective = |idx: &[usize]| {
        let mut sum = vec![T::zero(); p.ny];
        for &i in idx {
            for (s, &v) in sum.iter_mut().zip(p.row(i)) {
                *s += v;
            }
        }
        p.max_of_sum(&sum, scale)
    };
    (0..restarts.max(1) as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r);
            let mut idx: Vec<usize> = (0..n).map(|_| rng.gen_range(0..p.nx)).collect();
            let mut cur = objective(&idx).0;
            for _ in 0..1000 {
                let mut improved = false;
                for a in 0..n {
                    let mut rest = vec![T::zero(); p.ny];
                    for (b, &i) in idx.iter().enumerate() {
                        if b != a {
                            for (s, &v) in rest.iter_mut().zip(p.row(i)) {
                                *s += v;
                            }
                        }
                    }
                    let mut best = (idx[a], cur);
                    let mut trial = vec![T::zero(); p.ny];
                    for i in 0..p.nx {
                        for ((t, &r), &v) in trial.iter_mut().zip(&rest).zip(p.row(i)) {
                            *t = r + v;
                        }
                        let m = p.max_of_sum(&trial, scale).0;
                        if m < best.1 {
                            best = (i, m);
                        }
                    }
                    if best.0 != idx[a] {
                        idx[a] = best.0;
                        cur = best.1;
                        improved = true;
                    }
                }
                if !improved {
                    break;
                }
            }
            idx.sort_unstable();
            let (m, j) = objective(&idx);
            (idx, m, j)
        })
        .reduce_with(|a, b| if b.1 < a.1 || (b.1 == a.1 && b.0 < a.0) { b } else { a })
        .expect("at least one restart")
}

fn solve<T: Real>(
    p: &Payoff<'_, T>,
    n: usize,
    restarts: usize,
    seed: u64,
    cap: f64,
) -> Result<(Vec<usize>, T, usize, bool)> {
    if n == 0 || n > MAX_ATOMS {
        return Err(Error::InvalidInput(format!("atom count must be in 1..={MAX_ATOMS}, got {n}")));
    }
    let work = multiset_count(p.nx, n) * p.ny as f64;
    if n <= EXHAUSTIVE_MAX_ATOMS && work <= cap * 10.0 {
        let (idx, v, j) = exhaustive(p, n);
        Ok((idx, v, j, false))
    } else {
        let (idx, v, j) = heuristic(p, n, restarts, seed);
        Ok((idx, v, j, true))
    }
}

/// Uniform `N`-atom strategy for the minimizing player.
pub fn augmented_minimax<T: Real>(
    f: &dyn Objective<T>,
    n: usize,
    grid: &GridSpec<T>,
    restarts: usize,
    seed: u64,
) -> Result<AugmentedMinimax<T>> {
    let table = GridTable::build(f, grid)?;
    let p = Payoff {
        v: &table.values,
        nx: table.xs.len(),
        ny: table.ys.len(),
    };
    let (idx, value, j, heuristic) = solve(&p, n, restarts, seed, DEFAULT_GRID_CAP)?;
    Ok(AugmentedMinimax {
        strategy: EmpiricalMixedStrategy {
            atoms: idx.iter().map(|&i| table.xs[i].clone()).collect(),
        },
        value,
        best_response: table.ys[j].clone(),
        heuristic,
        tau_grid: table.tau_grid,
    })
}

/// Maximizing player's strategy: the augmented minimax of `−f` with the
/// roles of `x` and `y` exchanged. `value` is reported for `f`, i.e. as
/// `min_x (1/N) Σ f(x, y_i)`; `best_response` is the minimizing `x`.
pub fn augmented_maximin<T: Real>(
    f: &dyn Objective<T>,
    n: usize,
    grid: &GridSpec<T>,
    restarts: usize,
    seed: u64,
) -> Result<AugmentedMinimax<T>> {
    let table = GridTable::build(f, grid)?;
    let (nx, ny) = (table.xs.len(), table.ys.len());
    let mut flipped = vec![T::zero(); nx * ny];
    for i in 0..nx {
        for j in 0..ny {
            flipped[j * nx + i] = -table.values[i * ny + j];
        }
    }
    let p = Payoff { v: &flipped, nx: ny, ny: nx };
    let (idx, value, i, heuristic) = solve(&p, n, restarts, seed, DEFAULT_GRID_CAP)?;
    Ok(AugmentedMinimax {
        strategy: EmpiricalMixedStrategy {
            atoms: idx.iter().map(|&j| table.ys[j].clone()).collect(),
        },
        value: -value,
        best_response: table.xs[i].clone(),
        heuristic,
        tau_grid: table.tau_grid,
    })
}

/// Exploitability of `(mu, nu)` against pure grid deviations (and the
/// opponent's own atoms).
pub fn mixed_gap<T: Real>(
    f: &dyn Objective<T>,
    mu: &EmpiricalMixedStrategy<T>,
    nu: &EmpiricalMixedStrategy<T>,
    grid: &GridSpec<T>,
) -> Result<MixedGap<T>> {
    if mu.is_empty() || nu.is_empty() {
        return Err(Error::InvalidInput("strategies need at least one atom".into()));
    }
    let dx = f.dim_x();
    let x_box = grid.bounds.slice(0..dx);
    let y_box = grid.bounds.slice(dx..grid.bounds.dim());
    if mu.atoms.iter().any(|x| x.len() != dx || !x_box.contains(x))
        || nu.atoms.iter().any(|y| y.len() != f.dim_y() || !y_box.contains(y))
    {
        return Err(Error::InvalidInput("strategy atoms must lie in the grid box".into()));
    }
    let table = GridTable::build(f, grid)?;
    let mean = |vals: &mut dyn Iterator<Item = T>, n: usize| vals.fold(T::zero(), |a, v| a + v) / lit(n as f64);
    let e_mu = |y: &[T]| mean(&mut mu.atoms.iter().map(|x| f.value(x, y)), mu.len());
    let e_nu = |x: &[T]| mean(&mut nu.atoms.iter().map(|y| f.value(x, y)), nu.len());
    let value = mean(&mut nu.atoms.iter().map(|y| e_mu(y)), nu.len());
    let best_y = table
        .ys
        .par_iter()
        .chain(nu.atoms.par_iter())
        .map(|y| e_mu(y))
        .reduce(|| T::neg_infinity(), T::max);
    let best_x = table
        .xs
        .par_iter()
        .chain(mu.atoms.par_iter())
        .map(|x| e_nu(x))
        .reduce(|| T::infinity(), T::min);
    Ok(MixedGap {
        value,
        upper_player_gap: best_y - value,
        lower_player_gap: value - best_x,
    })
}

/// `min_μ max_y 𝔼_μ f` over distributions on a coarse sub-lattice of the
/// x-grid (`support` points per axis) with weights in multiples of
/// `1/denominator`.
pub fn simplex_minimax_value<T: Real>(
    f: &dyn Objective<T>,
    grid: &GridSpec<T>,
    support: usize,
    denominator: usize,
) -> Result<T> {
    if support < 2 || denominator == 0 {
        return Err(Error::InvalidInput("simplex needs support >= 2 and denominator >= 1".into()));
    }
    let dx = f.dim_x();
    let sub = GridSpec::new(grid.bounds.slice(0..dx), support)?;
    let xs = sub.points(0..dx);
    let ys = grid.points(dx..grid.bounds.dim());
    let cells = multiset_count(xs.len(), denominator) * ys.len() as f64;
    if cells > DEFAULT_GRID_CAP * 10.0 {
        return Err(Error::GridCapExceeded {
            cells,
            cap: DEFAULT_GRID_CAP * 10.0,
        });
    }
    let v: Vec<T> = xs.iter().flat_map(|x| ys.iter().map(move |y| f.value(x, y))).collect();
    let p = Payoff {
        v: &v,
        nx: xs.len(),
        ny: ys.len(),
    };
    Ok(exhaustive(&p, denominator).1)
}
