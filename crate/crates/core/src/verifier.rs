//! Sampling-based checks of the drift (V1) and variant (V2) conditions.
//!
//! Quadratic drifts on linear systems are evaluated in closed form; anything
//! else goes through seeded, antithetic Monte Carlo. Every estimate carries a
//! 3σ half-width, and per-point work uses its own seed so results do not
//! depend on thread scheduling.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{quadratic_form, Matrix, Vector};
use crate::system::{Dynamics, LinearSystem, TargetBall, TrajectorySeed};

/// A drift/variant pair `(V, U)` with its supporting constants.
pub trait Certificate: Sync {
    fn kind(&self) -> &'static str;

    fn dim(&self) -> usize;

    /// Drift function `V`.
    fn drift(&self, x: &[f64]) -> f64;

    /// `V(next) − V(x)`; certificates may override this for accuracy.
    fn drift_increment(&self, x: &[f64], next: &[f64]) -> f64 {
        self.drift(next) - self.drift(x)
    }

    /// Variant `U`.
    fn variant(&self, x: &[f64]) -> f64;

    /// `H(r)`, an upper bound on `U` over `{V ≤ r}`.
    fn h_bound(&self, r: f64) -> f64;

    fn delta(&self) -> f64;

    /// Radius of the compact set `C` in the metric used by [`Certificate::shell_point`].
    fn compact_radius(&self) -> f64;

    /// The point at the given radius along a Euclidean unit direction.
    fn shell_point(&self, direction: &[f64], radius: f64) -> Vec<f64>;

    /// Bounding box of `{V ≤ r}`, or `None` if the sublevel set is empty.
    fn sublevel_box(&self, r: f64) -> Option<(Vec<f64>, Vec<f64>)>;

    /// A point of `{U = 0}` along the direction, if the ray meets it.
    fn variant_boundary_point(&self, direction: &[f64]) -> Option<Vec<f64>>;

    /// `Q` when `V(x) = xᵀQx`, enabling exact drift on linear systems.
    fn quadratic_form(&self) -> Option<&Matrix> {
        None
    }

    /// Levels used by the variant check when none are requested.
    fn default_levels(&self) -> Vec<f64>;
}

/// `xᵀ(AᵀQA − Q)x + tr(BᵀQBΣ_w)`, the exact drift of `V = xᵀQx`.
pub fn exact_quadratic_drift(system: &LinearSystem, q: &Matrix, x: &[f64]) -> Result<f64> {
    let n = system.state_dim();
    if x.len() != n || q.nrows() != n || q.ncols() != n {
        return Err(Error::DimensionMismatch {
            context: "exact quadratic drift",
            expected: n,
            found: if x.len() != n { x.len() } else { q.nrows() },
        });
    }
    let a = system.a();
    let b = system.b();
    let m = a.transpose() * q * a - q;
    let trace = (b.transpose() * q * b * system.noise().covariance()).trace();
    Ok(quadratic_form(&Vector::from_column_slice(x), &m) + trace)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    /// 3σ/√N half-width of the mean.
    pub half_width: f64,
    pub samples: usize,
}

impl McEstimate {
    pub fn upper(&self) -> f64 {
        self.mean + self.half_width
    }

    pub fn lower(&self) -> f64 {
        self.mean - self.half_width
    }
}

pub const MIN_MC_SAMPLES: usize = 100;

/// Monte-Carlo estimate of `E[V(f(x, w))] − V(x)`.
///
/// Noise is drawn in antithetic pairs `(w, −w)` (all supported laws are
/// symmetric); the half-width is computed from the pair means.
pub fn mc_drift<D, C>(
    system: &D,
    cert: &C,
    x: &[f64],
    samples: usize,
    seed: TrajectorySeed,
) -> Result<McEstimate>
where
    D: Dynamics + ?Sized,
    C: Certificate + ?Sized,
{
    if samples < MIN_MC_SAMPLES {
        return Err(Error::Precondition(format!(
            "Monte-Carlo drift needs at least {MIN_MC_SAMPLES} samples, got {samples}"
        )));
    }
    let n = system.state_dim();
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            context: "state",
            expected: n,
            found: x.len(),
        });
    }
    let v0 = cert.drift(x);
    if !v0.is_finite() {
        return Err(Error::NonFinite(format!("V at {x:?}")));
    }
    let noise = system.noise();
    let antithetic = noise.is_symmetric();
    let mut rng = seed.rng();
    let mut w = vec![0.0; noise.dim()];
    let mut next = vec![0.0; n];
    let count = if antithetic { samples / 2 } else { samples };
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..count {
        noise.sample_into(&mut rng, &mut w);
        system.step_into(x, &w, &mut next);
        let mut inc = cert.drift_increment(x, &next);
        if !inc.is_finite() {
            return Err(Error::NonFinite(format!("V at successor {next:?}")));
        }
        if antithetic {
            for v in w.iter_mut() {
                *v = -*v;
            }
            system.step_into(x, &w, &mut next);
            let other = cert.drift_increment(x, &next);
            if !other.is_finite() {
                return Err(Error::NonFinite(format!("V at successor {next:?}")));
            }
            inc = 0.5 * (inc + other);
        }
        sum += inc;
        sum_sq += inc * inc;
    }
    let k = count as f64;
    let mean = sum / k;
    let var = ((sum_sq - k * mean * mean) / (k - 1.0)).max(0.0);
    Ok(McEstimate {
        mean,
        half_width: 3.0 * (var / k).sqrt(),
        samples,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftPlan {
    pub radii: Vec<f64>,
    pub points_per_shell: usize,
    pub noise_samples: usize,
    pub seed: u64,
}

pub const DRIFT_SHELLS: u32 = 7;

impl DriftPlan {
    /// Shells at `ρ_C · 2^j`, `j = 0..6`; 64 points per shell for `n ≤ 3`, else 256.
    pub fn standard(compact_radius: f64, dim: usize, noise_samples: usize, seed: u64) -> Self {
        Self {
            radii: (0..DRIFT_SHELLS)
                .map(|j| compact_radius * 2f64.powi(j as i32))
                .collect(),
            points_per_shell: if dim <= 3 { 64 } else { 256 },
            noise_samples,
            seed,
        }
    }
}

/// Deterministic directions on the unit sphere: `±1` in 1D, evenly spaced
/// angles in 2D, seeded Gaussian directions otherwise.
pub fn shell_directions(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    match dim {
        1 => (0..count)
            .map(|k| vec![if k % 2 == 0 { 1.0 } else { -1.0 }])
            .collect(),
        2 => (0..count)
            .map(|k| {
                let t = std::f64::consts::TAU * (k as f64 + 0.5) / count as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        _ => {
            let mut rng = TrajectorySeed::new(seed, u64::MAX).rng();
            (0..count)
                .map(|_| loop {
                    let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
                    let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
                    if norm > 1e-12 {
                        break v.into_iter().map(|c| c / norm).collect();
                    }
                })
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftViolation {
    pub x: Vec<f64>,
    pub estimate: f64,
    pub half_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShellSummary {
    pub radius: f64,
    /// Largest drift estimate on the shell.
    pub worst_estimate: f64,
    pub worst_half_width: f64,
    pub worst_point: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub plan: DriftPlan,
    /// `"exact"` or `"monte-carlo"`.
    pub method: String,
    pub shells: Vec<ShellSummary>,
    pub violations: Vec<DriftViolation>,
    pub points_checked: usize,
    pub pass: bool,
}

/// Relative tolerance for calling a drift estimate positive.
pub const DRIFT_TOL: f64 = 1e-9;

pub fn verify_drift<D, C>(system: &D, cert: &C, plan: &DriftPlan) -> Result<DriftReport>
where
    D: Dynamics + ?Sized,
    C: Certificate + ?Sized,
{
    let n = system.state_dim();
    if cert.dim() != n {
        return Err(Error::DimensionMismatch {
            context: "certificate dimension",
            expected: n,
            found: cert.dim(),
        });
    }
    if plan.radii.is_empty() || plan.points_per_shell == 0 {
        return Err(Error::Precondition("drift plan has no points".into()));
    }
    let rc = cert.compact_radius();
    if let Some(r) = plan.radii.iter().find(|r| !(**r >= rc * (1.0 - 1e-12))) {
        return Err(Error::Precondition(format!(
            "shell radius {r} lies inside the compact set (radius {rc})"
        )));
    }
    let exact_q = match (system.as_linear(), cert.quadratic_form()) {
        (Some(lin), Some(q)) => Some((lin, q)),
        _ => None,
    };
    let directions = shell_directions(n, plan.points_per_shell, plan.seed);
    let tasks: Vec<(usize, usize)> = (0..plan.radii.len())
        .flat_map(|s| (0..plan.points_per_shell).map(move |p| (s, p)))
        .collect();
    let results = tasks
        .par_iter()
        .map(|&(s, p)| {
            let x = cert.shell_point(&directions[p], plan.radii[s]);
            let est = match exact_q {
                Some((lin, q)) => McEstimate {
                    mean: exact_quadratic_drift(lin, q, &x)?,
                    half_width: 0.0,
                    samples: 0,
                },
                None => {
                    let idx = (s * plan.points_per_shell + p) as u64;
                    mc_drift(
                        system,
                        cert,
                        &x,
                        plan.noise_samples,
                        TrajectorySeed::new(plan.seed, idx),
                    )?
                }
            };
            Ok((s, x, est))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut shells: Vec<ShellSummary> = plan
        .radii
        .iter()
        .map(|&radius| ShellSummary {
            radius,
            worst_estimate: f64::NEG_INFINITY,
            worst_half_width: 0.0,
            worst_point: Vec::new(),
        })
        .collect();
    let mut violations = Vec::new();
    for (s, x, est) in results {
        let sh = &mut shells[s];
        if est.mean > sh.worst_estimate {
            sh.worst_estimate = est.mean;
            sh.worst_half_width = est.half_width;
            sh.worst_point = x.clone();
        }
        let tol = DRIFT_TOL * (1.0 + cert.drift(&x).abs());
        if est.lower() > tol {
            violations.push(DriftViolation {
                x,
                estimate: est.mean,
                half_width: est.half_width,
            });
        }
    }
    Ok(DriftReport {
        plan: plan.clone(),
        method: if exact_q.is_some() { "exact" } else { "monte-carlo" }.into(),
        shells,
        pass: violations.is_empty(),
        points_checked: tasks.len(),
        violations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub level: f64,
    pub delta: f64,
    pub epsilon_hat: f64,
    pub epsilon_half_width: f64,
    pub samples: usize,
    pub acceptance_rate: f64,
    pub h_bound: f64,
    pub max_variant: f64,
    pub h_bound_violations: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantReport {
    pub levels: Vec<LevelReport>,
    pub inclusion_points: usize,
    pub inclusion_violations: Vec<Vec<f64>>,
    pub inclusion_pass: bool,
    pub pass: bool,
}

/// Rejection attempts allowed per accepted sample (acceptance floor 10⁻⁶).
const MAX_REJECTIONS: u64 = 1_000_000;

pub const INCLUSION_POINTS: usize = 256;

pub fn verify_variant<D, C>(
    system: &D,
    cert: &C,
    target: &TargetBall,
    levels: &[f64],
    samples: usize,
    seed: u64,
) -> Result<VariantReport>
where
    D: Dynamics + ?Sized,
    C: Certificate + ?Sized,
{
    let n = system.state_dim();
    if levels.is_empty() {
        return Err(Error::Precondition("no variant levels requested".into()));
    }
    if samples == 0 {
        return Err(Error::Precondition("variant check needs samples".into()));
    }
    if cert.dim() != n || target.dim() != n {
        return Err(Error::DimensionMismatch {
            context: "certificate/target dimension",
            expected: n,
            found: if cert.dim() != n { cert.dim() } else { target.dim() },
        });
    }
    let delta = cert.delta();
    let noise = system.noise();
    let mut reports = Vec::with_capacity(levels.len());
    for (li, &r) in levels.iter().enumerate() {
        let (lo, hi) = cert.sublevel_box(r).ok_or(Error::EmptyRegion { level: r })?;
        let h = cert.h_bound(r);
        let outcomes = (0..samples)
            .into_par_iter()
            .map(|i| {
                let mut rng = TrajectorySeed::new(seed, ((li as u64) << 40) | i as u64).rng();
                let mut x = vec![0.0; n];
                let mut attempts = 0u64;
                loop {
                    attempts += 1;
                    if attempts > MAX_REJECTIONS {
                        return Err(Error::LowAcceptance {
                            rate: 1.0 / MAX_REJECTIONS as f64,
                        });
                    }
                    for (k, v) in x.iter_mut().enumerate() {
                        *v = lo[k] + (hi[k] - lo[k]) * rng.random::<f64>();
                    }
                    if cert.drift(&x) <= r && cert.variant(&x) > 0.0 {
                        break;
                    }
                }
                let u = cert.variant(&x);
                let mut w = vec![0.0; noise.dim()];
                noise.sample_into(&mut rng, &mut w);
                let mut next = vec![0.0; n];
                system.step_into(&x, &w, &mut next);
                let decreased = cert.variant(&next) - u <= -delta;
                Ok((attempts, decreased, u))
            })
            .collect::<Result<Vec<_>>>();
        let outcomes = match outcomes {
            Ok(o) => o,
            Err(Error::LowAcceptance { .. }) => {
                return Err(Error::LowAcceptance {
                    rate: 1.0 / MAX_REJECTIONS as f64,
                })
            }
            Err(e) => return Err(e),
        };
        let attempts: u64 = outcomes.iter().map(|o| o.0).sum();
        let hits = outcomes.iter().filter(|o| o.1).count();
        let max_variant = outcomes.iter().map(|o| o.2).fold(f64::NEG_INFINITY, f64::max);
        let h_viol = outcomes.iter().filter(|o| o.2 > h).count();
        let eps = hits as f64 / samples as f64;
        let hw = 3.0 * (eps * (1.0 - eps) / samples as f64).sqrt();
        reports.push(LevelReport {
            level: r,
            delta,
            epsilon_hat: eps,
            epsilon_half_width: hw,
            samples,
            acceptance_rate: samples as f64 / attempts as f64,
            h_bound: h,
            max_variant,
            h_bound_violations: h_viol,
            pass: delta > 0.0 && eps - hw > 0.0 && h_viol == 0,
        });
    }

    let directions = shell_directions(n, INCLUSION_POINTS, seed ^ 0x5EED);
    let mut inclusion_violations = Vec::new();
    let mut inclusion_points = 0;
    for d in &directions {
        if let Some(p) = cert.variant_boundary_point(d) {
            inclusion_points += 1;
            if !target.contains(&p) {
                inclusion_violations.push(p);
            }
        }
    }
    let inclusion_pass = inclusion_violations.is_empty() && inclusion_points > 0;
    Ok(VariantReport {
        pass: inclusion_pass && reports.iter().all(|l| l.pass),
        levels: reports,
        inclusion_points,
        inclusion_violations,
        inclusion_pass,
    })
}
