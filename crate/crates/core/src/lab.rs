//! Ensemble simulation: trajectories, first-hit statistics, divergence
//! counts and the occupancy decay exponent of critical systems.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::system::{Dynamics, TargetBall, TrajectorySeed};

/// Any coordinate beyond this magnitude ends a trajectory as overflowed.
pub const OVERFLOW_GUARD: f64 = 1e300;

pub const DEFAULT_DIVERGENCE_FACTOR: f64 = 1e6;

pub const HITTING_QUANTILES: [f64; 3] = [0.5, 0.9, 0.99];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<Vec<f64>>,
    pub overflowed: bool,
}

fn check_x0<D: Dynamics + ?Sized>(system: &D, x0: &[f64]) -> Result<()> {
    if x0.len() != system.state_dim() {
        return Err(Error::DimensionMismatch {
            context: "initial state",
            expected: system.state_dim(),
            found: x0.len(),
        });
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("initial state".into()));
    }
    Ok(())
}

fn overflowed(x: &[f64]) -> bool {
    x.iter().any(|v| !(v.abs() <= OVERFLOW_GUARD))
}

/// Drive one trajectory for `horizon` steps, calling `visit(k, x_k)` for
/// `k = 0..=horizon`. Returns `false` if the trajectory overflowed.
fn run<D, F>(system: &D, x0: &[f64], horizon: usize, seed: TrajectorySeed, mut visit: F) -> bool
where
    D: Dynamics + ?Sized,
    F: FnMut(usize, &[f64]) -> bool,
{
    let noise = system.noise();
    let mut rng = seed.rng();
    let mut x = x0.to_vec();
    let mut next = vec![0.0; x.len()];
    let mut w = vec![0.0; noise.dim()];
    if !visit(0, &x) {
        return true;
    }
    for k in 1..=horizon {
        noise.sample_into(&mut rng, &mut w);
        system.step_into(&x, &w, &mut next);
        std::mem::swap(&mut x, &mut next);
        if overflowed(&x) {
            return false;
        }
        if !visit(k, &x) {
            return true;
        }
    }
    true
}

pub fn simulate<D: Dynamics + ?Sized>(
    system: &D,
    x0: &[f64],
    horizon: usize,
    seed: TrajectorySeed,
) -> Result<Trajectory> {
    check_x0(system, x0)?;
    let mut states = Vec::with_capacity(horizon.min(1 << 20) + 1);
    let ok = run(system, x0, horizon, seed, |_, x| {
        states.push(x.to_vec());
        true
    });
    Ok(Trajectory {
        states,
        overflowed: !ok,
    })
}

/// `n_traj` trajectories with seeds `(base_seed, 0..n_traj)`.
pub fn ensemble<D: Dynamics + ?Sized>(
    system: &D,
    x0: &[f64],
    n_traj: usize,
    horizon: usize,
    base_seed: u64,
) -> Result<Vec<Trajectory>> {
    check_x0(system, x0)?;
    (0..n_traj)
        .into_par_iter()
        .map(|i| simulate(system, x0, horizon, TrajectorySeed::new(base_seed, i as u64)))
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HitOptions {
    /// Defaults to `10⁶·(1 + ‖x0‖)`.
    pub divergence_threshold: Option<f64>,
    /// Radii of origin-centred Euclidean balls whose occupancy is counted.
    pub occupancy_radii: Vec<f64>,
    /// Steps at which occupancy is recorded.
    pub occupancy_steps: Vec<usize>,
}


#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HittingQuantile {
    pub q: f64,
    /// `None` when fewer than `⌈q·N⌉` trajectories hit.
    pub k: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Occupancy {
    pub radius: f64,
    pub k: usize,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub trajectories: usize,
    pub horizon: usize,
    pub base_seed: u64,
    pub hits: usize,
    pub hit_fraction: f64,
    pub hitting_time_quantiles: Vec<HittingQuantile>,
    pub divergence_threshold: f64,
    pub divergent: usize,
    pub divergence_fraction: f64,
    pub overflowed: usize,
    pub occupancy: Vec<Occupancy>,
}

struct PathSummary {
    first_hit: Option<usize>,
    divergent: bool,
    overflowed: bool,
    occupancy: Vec<usize>,
}

/// Quantile `q` of the hitting times when misses count as `+∞`.
pub fn hitting_quantile(sorted_hits: &[usize], total: usize, q: f64) -> Option<usize> {
    let need = (q * total as f64).ceil().max(1.0) as usize;
    (sorted_hits.len() >= need).then(|| sorted_hits[need - 1])
}

pub fn hitting_stats<D: Dynamics + ?Sized>(
    system: &D,
    target: &TargetBall,
    x0: &[f64],
    n_traj: usize,
    horizon: usize,
    base_seed: u64,
    opts: &HitOptions,
) -> Result<EnsembleStats> {
    check_x0(system, x0)?;
    if n_traj == 0 {
        return Err(Error::Precondition("need at least one trajectory".into()));
    }
    if target.dim() != x0.len() {
        return Err(Error::DimensionMismatch {
            context: "target center",
            expected: x0.len(),
            found: target.dim(),
        });
    }
    let x0_norm = x0.iter().map(|v| v * v).sum::<f64>().sqrt();
    let threshold = opts
        .divergence_threshold
        .unwrap_or(DEFAULT_DIVERGENCE_FACTOR * (1.0 + x0_norm));
    let radii_sq: Vec<f64> = opts.occupancy_radii.iter().map(|r| r * r).collect();
    let n_occ = radii_sq.len() * opts.occupancy_steps.len();

    let summaries: Vec<PathSummary> = (0..n_traj)
        .into_par_iter()
        .map(|i| {
            let mut first_hit = None;
            let mut last_norm_sq = 0.0;
            let mut occupancy = vec![0usize; n_occ];
            let ok = run(system, x0, horizon, TrajectorySeed::new(base_seed, i as u64), |k, x| {
                if first_hit.is_none() && target.contains(x) {
                    first_hit = Some(k);
                }
                let norm_sq: f64 = x.iter().map(|v| v * v).sum();
                if n_occ > 0 {
                    if let Ok(slot) = opts.occupancy_steps.binary_search(&k) {
                        for (ri, r2) in radii_sq.iter().enumerate() {
                            if norm_sq < *r2 {
                                occupancy[ri * opts.occupancy_steps.len() + slot] += 1;
                            }
                        }
                    }
                }
                last_norm_sq = norm_sq;
                true
            });
            PathSummary {
                first_hit,
                divergent: !ok || last_norm_sq.sqrt() > threshold,
                overflowed: !ok,
                occupancy,
            }
        })
        .collect();

    let mut hit_times: Vec<usize> = summaries.iter().filter_map(|s| s.first_hit).collect();
    hit_times.sort_unstable();
    let hits = hit_times.len();
    let divergent = summaries.iter().filter(|s| s.divergent).count();
    let mut occupancy = Vec::with_capacity(n_occ);
    for (ri, r) in opts.occupancy_radii.iter().enumerate() {
        for (slot, &k) in opts.occupancy_steps.iter().enumerate() {
            let idx = ri * opts.occupancy_steps.len() + slot;
            occupancy.push(Occupancy {
                radius: *r,
                k,
                count: summaries.iter().map(|s| s.occupancy[idx]).sum(),
            });
        }
    }
    Ok(EnsembleStats {
        trajectories: n_traj,
        horizon,
        base_seed,
        hits,
        hit_fraction: hits as f64 / n_traj as f64,
        hitting_time_quantiles: HITTING_QUANTILES
            .iter()
            .map(|&q| HittingQuantile {
                q,
                k: hitting_quantile(&hit_times, n_traj, q),
            })
            .collect(),
        divergence_threshold: threshold,
        divergent,
        divergence_fraction: divergent as f64 / n_traj as f64,
        overflowed: summaries.iter().filter(|s| s.overflowed).count(),
        occupancy,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub k_grid: Vec<usize>,
    pub p_hat: Vec<f64>,
    /// Grid points kept in the fit (`p̂ > 0`).
    pub used: Vec<bool>,
    pub slope: f64,
    pub slope_std_error: f64,
    pub intercept: f64,
    pub trajectories: usize,
    pub base_seed: u64,
}

pub const MIN_DECAY_POINTS: usize = 4;

/// `2^lo, …, 2^hi`.
pub fn log2_grid(lo: u32, hi: u32) -> Vec<usize> {
    (lo..=hi).map(|e| 1usize << e).collect()
}

/// Weighted least squares of `ln p̂_k` on `ln k`, weights `N p̂ / (1 − p̂)`
/// (inverse delta-method variance of `ln p̂`).
pub fn fit_decay(k_grid: &[usize], p_hat: &[f64], n_traj: usize) -> Result<(f64, f64, f64)> {
    let pts: Vec<(f64, f64, f64)> = k_grid
        .iter()
        .zip(p_hat)
        .filter(|(_, &p)| p > 0.0)
        .map(|(&k, &p)| {
            let w = n_traj as f64 * p / (1.0 - p).max(1e-12);
            ((k as f64).ln(), p.ln(), w)
        })
        .collect();
    if pts.len() < MIN_DECAY_POINTS {
        return Err(Error::InsufficientData {
            usable: pts.len(),
            required: MIN_DECAY_POINTS,
        });
    }
    let sw: f64 = pts.iter().map(|p| p.2).sum();
    let mx = pts.iter().map(|p| p.2 * p.0).sum::<f64>() / sw;
    let my = pts.iter().map(|p| p.2 * p.1).sum::<f64>() / sw;
    let sxx: f64 = pts.iter().map(|p| p.2 * (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| p.2 * (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let dof = (pts.len() - 2) as f64;
    let rss: f64 = pts
        .iter()
        .map(|p| p.2 * (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    // Scale by the residual variance so the error reflects misfit as well
    // as sampling noise; never below the pure sampling error.
    let scale = (rss / dof).max(1.0);
    let se = (scale / sxx).sqrt();
    if !slope.is_finite() {
        return Err(Error::InsufficientData {
            usable: pts.len(),
            required: MIN_DECAY_POINTS,
        });
    }
    Ok((slope, se, intercept))
}

/// Occupancy `P̂(x_k ∈ ball)` from `x0 = 0` on the grid, and its power-law fit.
pub fn decay_exponent<D: Dynamics + ?Sized>(
    system: &D,
    ball: &TargetBall,
    k_grid: &[usize],
    n_traj: usize,
    base_seed: u64,
) -> Result<DecayFit> {
    let n = system.state_dim();
    if ball.dim() != n {
        return Err(Error::DimensionMismatch {
            context: "occupancy ball",
            expected: n,
            found: ball.dim(),
        });
    }
    let mut grid = k_grid.to_vec();
    grid.sort_unstable();
    grid.dedup();
    let horizon = *grid.last().ok_or_else(|| Error::Precondition("empty k grid".into()))?;
    let x0 = vec![0.0; n];
    let counts = (0..n_traj)
        .into_par_iter()
        .map(|i| {
            let mut inside = vec![0usize; grid.len()];
            let mut slot = 0;
            run(system, &x0, horizon, TrajectorySeed::new(base_seed, i as u64), |k, x| {
                if slot < grid.len() && grid[slot] == k {
                    if ball.contains(x) {
                        inside[slot] = 1;
                    }
                    slot += 1;
                }
                true
            });
            inside
        })
        .reduce(
            || vec![0usize; grid.len()],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    let p_hat: Vec<f64> = counts.iter().map(|&c| c as f64 / n_traj as f64).collect();
    let (slope, slope_std_error, intercept) = fit_decay(&grid, &p_hat, n_traj)?;
    Ok(DecayFit {
        used: p_hat.iter().map(|&p| p > 0.0).collect(),
        k_grid: grid,
        p_hat,
        slope,
        slope_std_error,
        intercept,
        trajectories: n_traj,
        base_seed,
    })
}
