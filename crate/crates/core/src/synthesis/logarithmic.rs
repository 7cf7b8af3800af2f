use std::f64::consts::E;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{delta_ladder, LadderOptions};
use crate::error::{Error, Result};
use crate::linalg::{check_spd, quadratic_form, Matrix, Vector};
use crate::spectral::{analyze_with, unit_plane_basis, Tolerances};
use crate::system::{Dynamics, LinearSystem, TargetBall, TrajectorySeed};
use crate::verifier::{mc_drift, shell_directions, Certificate};

/// `V(x) = √(ln max(‖x‖⋆, ρ_min))`, `U(x) = ‖x‖⋆² − b`, `H(r) = exp(2r²) − b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogCertificate {
    #[serde(with = "crate::linalg::serde_rows")]
    pub q_star: Matrix,
    /// `ρ_min`; below it `V` is held at `√(ln ρ_min)`.
    pub domain_threshold: f64,
    /// Radius in `‖·‖⋆` of the compact set outside which the drift is claimed.
    pub compact_radius_star: f64,
    pub variant_b: f64,
    pub delta: f64,
    /// Decrease probability estimated at the `{U = 0}` boundary for `delta`.
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scan: Vec<ScanStep>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanStep {
    pub radius: f64,
    /// Largest second-order drift value over the shell.
    pub second_order_max: f64,
    /// Largest Monte-Carlo drift mean over the shell, if it was computed.
    pub mc_max: Option<f64>,
    pub mc_half_width: Option<f64>,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogOptions {
    pub tols: Tolerances,
    pub seed: u64,
    pub scan_points: usize,
    pub scan_samples: usize,
    pub radius_cap: f64,
    /// Drift must be at most `−margin·|V|` on an accepted shell.
    pub margin: f64,
    pub ladder: LadderOptions,
}

impl Default for LogOptions {
    fn default() -> Self {
        Self {
            tols: Tolerances::default(),
            seed: 0,
            scan_points: 64,
            scan_samples: 20_000,
            radius_cap: 1e8,
            margin: 1e-6,
            ladder: LadderOptions::default(),
        }
    }
}

/// Second-order Taylor value of the drift of `√(ln ‖x‖⋆)` for `x⁺ = Ax + Bw`:
/// with `s = ‖x‖⋆²`, `g = √(½ ln s)`, `T₁ = tr(BᵀQ⋆BΣ)` and
/// `T₂ = (Ax)ᵀQ⋆BΣBᵀQ⋆(Ax)`, it is `(T₁ − 2T₂/s)/(4sg) − T₂/(8s²g³)`.
pub fn log_drift_second_order(system: &LinearSystem, q_star: &Matrix, x: &[f64]) -> f64 {
    let xv = Vector::from_column_slice(x);
    let s = quadratic_form(&xv, q_star);
    let g = (0.5 * s.ln()).sqrt();
    let b = system.b();
    let cov = system.noise().covariance();
    let t1 = (b.transpose() * q_star * b * &cov).trace();
    let y = b.transpose() * q_star * (system.a() * &xv);
    let t2 = quadratic_form(&y, &cov);
    (t1 - 2.0 * t2 / s) / (4.0 * s * g) - t2 / (8.0 * s * s * g * g * g)
}

impl LogCertificate {
    pub fn validate(&self) -> Result<()> {
        check_spd(&self.q_star, "certificate Q_star")?;
        if !(self.domain_threshold >= E * (1.0 - 1e-12)) {
            return Err(Error::Config(format!(
                "certificate domain_threshold must be at least e, got {}",
                self.domain_threshold
            )));
        }
        if !(self.compact_radius_star >= self.domain_threshold * (1.0 - 1e-12))
            || !self.compact_radius_star.is_finite()
        {
            return Err(Error::Config(format!(
                "certificate compact_radius_star must be at least domain_threshold, got {}",
                self.compact_radius_star
            )));
        }
        if !(self.variant_b > 0.0 && self.variant_b.is_finite()) {
            return Err(Error::Config("certificate variant_b must be positive".into()));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::Config("certificate delta must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::Config("certificate epsilon must lie in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn norm_sq(&self, x: &[f64]) -> f64 {
        quadratic_form(&Vector::from_column_slice(x), &self.q_star).max(0.0)
    }

    fn floor_sq(&self) -> f64 {
        self.domain_threshold * self.domain_threshold
    }

    fn radius_bounds(&self, radius: f64) -> Vec<f64> {
        let inv = self
            .q_star
            .clone()
            .try_inverse()
            .expect("validated Q_star is invertible");
        (0..inv.nrows())
            .map(|i| radius * inv[(i, i)].max(0.0).sqrt())
            .collect()
    }
}

pub(crate) struct LogCore {
    pub q_star: Matrix,
    pub compact_radius_star: f64,
    pub scan: Vec<ScanStep>,
}

/// Outward doubling scan from `ρ_min = e` for the first shell on which both
/// the second-order drift and the Monte-Carlo drift are at most `−margin·|V|`.
pub(crate) fn log_core(system: &LinearSystem, opts: &LogOptions) -> Result<LogCore> {
    let a = system.a();
    let report = analyze_with(a, &opts.tols)?;
    let basis = unit_plane_basis(a, &report)?;
    let n = system.state_dim();
    let mut probe = LogCertificate {
        q_star: basis.q_star.clone(),
        domain_threshold: E,
        compact_radius_star: E,
        variant_b: 1.0,
        delta: 1.0,
        epsilon: 0.0,
        scan: Vec::new(),
    };
    let directions = shell_directions(n, opts.scan_points, opts.seed);
    let mut scan = Vec::new();
    let mut radius = E;
    let mut shell_index = 0u64;
    while radius <= opts.radius_cap {
        let points: Vec<Vec<f64>> = directions
            .iter()
            .map(|d| probe.shell_point(d, radius))
            .collect();
        let second_order_max = points
            .iter()
            .map(|x| log_drift_second_order(system, &probe.q_star, x) + opts.margin * probe.drift(x))
            .fold(f64::NEG_INFINITY, f64::max);
        let mut step = ScanStep {
            radius,
            second_order_max,
            mc_max: None,
            mc_half_width: None,
            accepted: false,
        };
        if second_order_max <= 0.0 {
            probe.compact_radius_star = radius;
            let estimates = points
                .par_iter()
                .enumerate()
                .map(|(p, x)| {
                    let seed = TrajectorySeed::new(opts.seed, (shell_index << 32) | p as u64);
                    Ok((mc_drift(system, &probe, x, opts.scan_samples, seed)?, probe.drift(x)))
                })
                .collect::<Result<Vec<_>>>()?;
            let mut worst = (f64::NEG_INFINITY, 0.0);
            let mut ok = true;
            for (est, v) in estimates {
                if est.mean > worst.0 {
                    worst = (est.mean, est.half_width);
                }
                if est.mean > -opts.margin * v {
                    ok = false;
                }
            }
            step.mc_max = Some(worst.0);
            step.mc_half_width = Some(worst.1);
            step.accepted = ok;
        }
        let accepted = step.accepted;
        scan.push(step);
        if accepted {
            return Ok(LogCore {
                q_star: basis.q_star,
                compact_radius_star: radius,
                scan,
            });
        }
        radius *= 2.0;
        shell_index += 1;
    }
    Err(Error::ScanFailed {
        cap: opts.radius_cap,
    })
}

/// Logarithmic certificate for a critical system whose unit part is the
/// whole state space (`n ≤ 2`, diagonalizable, full-rank noise).
pub fn synthesize_logarithmic(
    system: &LinearSystem,
    target: &TargetBall,
    opts: &LogOptions,
) -> Result<LogCertificate> {
    let n = system.state_dim();
    if target.dim() != n {
        return Err(Error::DimensionMismatch {
            context: "target center",
            expected: n,
            found: target.dim(),
        });
    }
    let rank_b = crate::linalg::numerical_rank(system.b(), opts.tols.rank_tol)?;
    if rank_b != n || system.noise_dim() != n {
        return Err(Error::Precondition(
            "logarithmic certificate needs square full-rank B".into(),
        ));
    }
    let core = log_core(system, opts)?;
    let b = target.quadratic_level_inside(&core.q_star)? / 2.0;
    let mut cert = LogCertificate {
        q_star: core.q_star,
        domain_threshold: E,
        compact_radius_star: core.compact_radius_star,
        variant_b: b,
        delta: b,
        epsilon: 0.0,
        scan: core.scan,
    };
    let (delta, epsilon) = delta_ladder(system, &cert, b, &opts.ladder)?;
    cert.delta = delta;
    cert.epsilon = epsilon;
    Ok(cert)
}

impl Certificate for LogCertificate {
    fn kind(&self) -> &'static str {
        "logarithmic"
    }

    fn dim(&self) -> usize {
        self.q_star.nrows()
    }

    fn drift(&self, x: &[f64]) -> f64 {
        (0.5 * self.norm_sq(x).max(self.floor_sq()).ln()).sqrt()
    }

    /// `√L' − √L` as `(L' − L)/(√L' + √L)` with `L' − L = ½ ln(1 + Δs/s)`,
    /// which keeps the tiny increments far from the origin accurate.
    fn drift_increment(&self, x: &[f64], next: &[f64]) -> f64 {
        let s = self.norm_sq(x);
        let s_next = self.norm_sq(next);
        let floor = self.floor_sq();
        if s <= floor || s_next <= floor {
            return self.drift(next) - self.drift(x);
        }
        let diff = Vector::from_iterator(x.len(), next.iter().zip(x).map(|(a, b)| a - b));
        let sum = Vector::from_iterator(x.len(), next.iter().zip(x).map(|(a, b)| a + b));
        let ds = diff.dot(&(&self.q_star * sum));
        let l = 0.5 * s.ln();
        let dl = 0.5 * (ds / s).ln_1p();
        let l_next = l + dl;
        dl / (l_next.sqrt() + l.sqrt())
    }

    fn variant(&self, x: &[f64]) -> f64 {
        self.norm_sq(x) - self.variant_b
    }

    fn h_bound(&self, r: f64) -> f64 {
        (2.0 * r * r).exp() - self.variant_b
    }

    fn delta(&self) -> f64 {
        self.delta
    }

    fn compact_radius(&self) -> f64 {
        self.compact_radius_star
    }

    fn shell_point(&self, direction: &[f64], radius: f64) -> Vec<f64> {
        let norm = self.norm_sq(direction).sqrt();
        direction.iter().map(|c| c * radius / norm).collect()
    }

    fn sublevel_box(&self, r: f64) -> Option<(Vec<f64>, Vec<f64>)> {
        if !(r >= self.domain_threshold.ln().sqrt()) {
            return None;
        }
        let hi = self.radius_bounds((r * r).exp());
        let lo = hi.iter().map(|h| -h).collect();
        Some((lo, hi))
    }

    fn variant_boundary_point(&self, direction: &[f64]) -> Option<Vec<f64>> {
        let s = self.norm_sq(direction);
        (s > 0.0).then(|| {
            let k = (self.variant_b / s).sqrt();
            direction.iter().map(|c| c * k).collect()
        })
    }

    fn default_levels(&self) -> Vec<f64> {
        vec![2.0, 3.0, 4.0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::from_rows;
    use crate::system::NoiseModel;

    fn walk(a: f64) -> LinearSystem {
        LinearSystem::new(
            from_rows(&[vec![a]]).unwrap(),
            from_rows(&[vec![1.0]]).unwrap(),
            NoiseModel::uniform_intervals(vec![1.0]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn random_walk_certificate() {
        let c = synthesize_logarithmic(
            &walk(1.0),
            &TargetBall::centered(1, 2.0).unwrap(),
            &LogOptions::default(),
        )
        .unwrap();
        assert_eq!(c.q_star, Matrix::identity(1, 1));
        assert!((c.variant_b - 2.0).abs() < 1e-15);
        assert!((c.h_bound(1.5) - ((4.5f64).exp() - 2.0)).abs() < 1e-9);
        assert!(c.compact_radius_star >= E);
        assert!(c.delta > 0.0 && c.epsilon > 0.0);
        c.validate().unwrap();
    }

    #[test]
    fn flip_matches_walk() {
        let opts = LogOptions::default();
        let target = TargetBall::centered(1, 2.0).unwrap();
        let a = synthesize_logarithmic(&walk(1.0), &target, &opts).unwrap();
        let b = synthesize_logarithmic(&walk(-1.0), &target, &opts).unwrap();
        assert_eq!(a.q_star, b.q_star);
        assert_eq!(a.variant_b, b.variant_b);
    }

    #[test]
    fn increment_matches_plain_difference() {
        let c = LogCertificate {
            q_star: Matrix::identity(2, 2),
            domain_threshold: E,
            compact_radius_star: E,
            variant_b: 1.0,
            delta: 0.5,
            epsilon: 0.1,
            scan: vec![],
        };
        let x = [30.0, -4.0];
        let y = [29.5, -3.2];
        let plain = c.drift(&y) - c.drift(&x);
        assert!((c.drift_increment(&x, &y) - plain).abs() < 1e-13);
        let inside = [1.0, 0.5];
        assert!((c.drift_increment(&inside, &y) - (c.drift(&y) - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn second_order_drift_is_negative_in_one_dimension() {
        let q = Matrix::identity(1, 1);
        for x in [5.0, 50.0, 5e4] {
            assert!(log_drift_second_order(&walk(1.0), &q, &[x]) < 0.0);
        }
    }

    #[test]
    fn rejects_bad_files() {
        let mut c = LogCertificate {
            q_star: Matrix::identity(1, 1),
            domain_threshold: E,
            compact_radius_star: 2.0 * E,
            variant_b: 2.0,
            delta: 1.0,
            epsilon: 0.2,
            scan: vec![],
        };
        c.validate().unwrap();
        c.domain_threshold = 1.0;
        assert!(c.validate().is_err());
    }
}
