//! Brute-force reference solver for small instances: exhaustive grid search
//! over attempt probabilities followed by cyclic coordinate descent.
//!
//! Shares nothing with the dual optimizer beyond the network type; the
//! primal objective `Σ_e w_e / (γ_e f_e)` is evaluated directly.

use rayon::prelude::*;

use crate::analytics::closed_form_age;
use crate::error::{Error, Result};
use crate::network::Network;
use crate::sim::Policy;

/// Default cap on `|E|` for [`grid_search`].
pub const MAX_GRID_LINKS: usize = 4;

/// Grid points whose objective is within this relative distance of the best
/// are reported as ties.
const TIE_TOLERANCE: f64 = 1e-12;
const MAX_TIES: usize = 64;
const KEEP_NEAR: usize = 1024;

/// Coordinate bounds for refinement.
const REFINE_EPSILON: f64 = 1e-9;
const GOLDEN_TOLERANCE: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub policy: Policy,
    /// Network age at `policy`, as computed by `closed_form_age`.
    pub objective: f64,
    pub resolution: f64,
    /// Coordinate-descent sweeps performed (0 for a bare grid search).
    pub refinement_iterations: usize,
    /// Grid search: the resolution. Refinement: largest coordinate move in
    /// the final sweep.
    pub tolerance_bound: f64,
    /// Other grid points within tie tolerance of the best, lexicographic.
    pub ties: Vec<Policy>,
}

/// Links nobody else can hear are best served by always attempting.
fn pinned(net: &Network, e: usize) -> bool {
    net.reverse_neighbors(e).is_empty()
}

fn objective(net: &Network, p: &[f64]) -> f64 {
    let mut total = 0.0;
    for e in 0..net.len() {
        let mut f = p[e];
        for &k in net.neighbors(e) {
            f *= 1.0 - p[k];
        }
        total += net.weight(e) / (net.gamma(e) * f);
    }
    total
}

/// Minimizes the primal objective over `{r, 2r, …} ∩ (0, 1)` in every free
/// coordinate. Refuses more than [`MAX_GRID_LINKS`] links.
pub fn grid_search(net: &Network, resolution: f64) -> Result<OracleResult> {
    grid_search_limited(net, resolution, MAX_GRID_LINKS)
}

/// [`grid_search`] with an explicit size cap.
pub fn grid_search_limited(net: &Network, resolution: f64, max_links: usize) -> Result<OracleResult> {
    if !(resolution > 0.0 && resolution < 0.5) {
        return Err(Error::Parameter(format!(
            "grid resolution must lie in (0, 0.5), got {resolution}"
        )));
    }
    if net.len() > max_links {
        return Err(Error::InstanceTooLarge {
            links: net.len(),
            limit: max_links,
        });
    }
    let free: Vec<usize> = (0..net.len()).filter(|&e| !pinned(net, e)).collect();
    let grid: Vec<f64> = (1..)
        .map(|i| i as f64 * resolution)
        .take_while(|&x| x < 1.0 - 1e-12)
        .collect();
    let mut base = vec![1.0; net.len()];

    let best = if free.is_empty() {
        let mut scan = Scan::empty();
        scan.offer(objective(net, &base), 0);
        scan
    } else {
        let rest = grid.len().pow(free.len() as u32 - 1);
        let chunks: Vec<Scan> = (0..grid.len())
            .into_par_iter()
            .map(|lead| {
                let mut p = base.clone();
                let mut scan = Scan::empty();
                for offset in 0..rest {
                    let index = lead * rest + offset;
                    place(&mut p, &free, &grid, index);
                    scan.offer(objective(net, &p), index);
                }
                scan
            })
            .collect();
        chunks.into_iter().fold(Scan::empty(), Scan::merge)
    };

    let to_policy = |index: usize, p: &mut Vec<f64>| {
        if !free.is_empty() {
            place(p, &free, &grid, index);
        }
        Policy::new(p.clone())
    };
    let indices = best.tied_indices();
    // lexicographically smallest among the (near-)optimal points
    let chosen = to_policy(indices[0], &mut base)?;
    let ties = indices[1..]
        .iter()
        .take(MAX_TIES)
        .map(|&i| to_policy(i, &mut base))
        .collect::<Result<Vec<_>>>()?;
    let objective = closed_form_age(net, &chosen)?.network_age;
    Ok(OracleResult {
        policy: chosen,
        objective,
        resolution,
        refinement_iterations: 0,
        tolerance_bound: resolution,
        ties,
    })
}

/// Writes grid point `index` into the free coordinates, first free link most
/// significant.
fn place(p: &mut [f64], free: &[usize], grid: &[f64], mut index: usize) {
    for &e in free.iter().rev() {
        p[e] = grid[index % grid.len()];
        index /= grid.len();
    }
}

#[derive(Debug)]
struct Scan {
    best: f64,
    /// `(value, index)` of every point within tie tolerance of `best`,
    /// including the best one.
    near: Vec<(f64, usize)>,
}

impl Scan {
    fn empty() -> Self {
        Self {
            best: f64::INFINITY,
            near: Vec::new(),
        }
    }

    fn is_near(&self, value: f64) -> bool {
        value <= self.best * (1.0 + TIE_TOLERANCE)
    }

    fn offer(&mut self, value: f64, index: usize) {
        if value < self.best {
            self.best = value;
            let best = self.best;
            self.near.retain(|&(v, _)| v <= best * (1.0 + TIE_TOLERANCE));
            self.near.push((value, index));
        } else if self.is_near(value) && self.near.len() < KEEP_NEAR {
            self.near.push((value, index));
        }
    }

    fn merge(mut self, other: Scan) -> Scan {
        self.best = self.best.min(other.best);
        self.near.extend(other.near);
        let best = self.best;
        self.near.retain(|&(v, _)| v <= best * (1.0 + TIE_TOLERANCE));
        self
    }

    /// Grid indices of the tied optimum, ascending.
    fn tied_indices(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = self.near.iter().map(|&(_, i)| i).collect();
        idx.sort_unstable();
        idx.dedup();
        idx
    }
}

/// Cyclic coordinate descent from `p0`: each free coordinate is minimized by
/// golden-section search on `[ε, 1−ε]` with the others held fixed. A move is
/// kept only if it does not increase the objective.
pub fn refine(net: &Network, p0: &Policy, iters: usize) -> Result<OracleResult> {
    p0.check_len(net)?;
    let mut p = p0.as_slice().to_vec();
    let free: Vec<usize> = (0..net.len()).filter(|&e| !pinned(net, e)).collect();
    for e in 0..net.len() {
        if pinned(net, e) {
            p[e] = 1.0;
        } else if !(p[e] > 0.0 && p[e] < 1.0) {
            return Err(Error::OutOfRange {
                what: "starting attempt probability",
                range: "(0, 1)",
                value: p[e],
                link: e,
            });
        }
    }

    let mut current = objective(net, &p);
    let mut sweeps = 0;
    let mut last_move = 0.0;
    while sweeps < iters && !free.is_empty() {
        sweeps += 1;
        last_move = 0.0f64;
        for &e in &free {
            let old = p[e];
            let x = golden_section(REFINE_EPSILON, 1.0 - REFINE_EPSILON, |x| {
                p[e] = x;
                objective(net, &p)
            });
            p[e] = x;
            let value = objective(net, &p);
            if value <= current {
                current = value;
                last_move = last_move.max((x - old).abs());
            } else {
                p[e] = old;
            }
        }
        if last_move < GOLDEN_TOLERANCE {
            break;
        }
    }

    let policy = Policy::new(p)?;
    let objective = closed_form_age(net, &policy)?.network_age;
    Ok(OracleResult {
        policy,
        objective,
        resolution: 0.0,
        refinement_iterations: sweeps,
        tolerance_bound: last_move,
        ties: Vec::new(),
    })
}

fn golden_section(mut a: f64, mut b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > GOLDEN_TOLERANCE {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Grid search at `resolution`, then `iters` refinement sweeps from the grid
/// optimum. Keeps the grid point if refinement somehow does worse.
pub fn solve(net: &Network, resolution: f64, iters: usize) -> Result<OracleResult> {
    solve_limited(net, resolution, iters, MAX_GRID_LINKS)
}

/// [`solve`] with an explicit size cap.
pub fn solve_limited(net: &Network, resolution: f64, iters: usize, max_links: usize) -> Result<OracleResult> {
    let coarse = grid_search_limited(net, resolution, max_links)?;
    let mut fine = refine(net, &coarse.policy, iters)?;
    if fine.objective > coarse.objective {
        return Ok(coarse);
    }
    fine.resolution = resolution;
    fine.ties = coarse.ties;
    Ok(fine)
}
