use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    check_spd, generalized_eigen_range, quadratic_form, solve_discrete_lyapunov,
    symmetric_eigen_range, Matrix, Vector,
};
use crate::system::{Dynamics, LinearSystem, TargetBall};
use crate::verifier::Certificate;

/// `V(x) = xᵀQx` with `AᵀQA = Q − I`, variant `U = V − b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticCertificate {
    #[serde(with = "crate::linalg::serde_rows")]
    pub q: Matrix,
    pub alpha: f64,
    /// Squared Euclidean radius of `C = {xᵀx ≤ tr(BᵀQBΣ_w)/α}`.
    pub compact_radius_sq: f64,
    pub variant_b: f64,
    /// `λ_max(Q⁻¹AᵀQA)`.
    pub r0: f64,
    pub delta: f64,
    /// `(1 − r0)·b / λ_max(BᵀQB)`.
    pub noise_set_bound: f64,
}

/// Lyapunov data for `(A, B, Σ_w)` without any target-dependent constant.
pub(crate) struct QuadraticCore {
    pub q: Matrix,
    pub trace: f64,
    pub r0: f64,
    pub b_norm_sq: f64,
}

pub(crate) fn quadratic_core(a: &Matrix, b: &Matrix, cov: &Matrix) -> Result<QuadraticCore> {
    let q = solve_discrete_lyapunov(a)?;
    let bqb = b.transpose() * &q * b;
    let trace = (&bqb * cov).trace();
    let (_, r0) = generalized_eigen_range(&(a.transpose() * &q * a), &q)?;
    let (_, b_norm_sq) = symmetric_eigen_range(&bqb);
    Ok(QuadraticCore {
        q,
        trace,
        r0: r0.max(0.0),
        b_norm_sq,
    })
}

impl QuadraticCertificate {
    pub(crate) fn from_core(core: QuadraticCore, variant_b: f64) -> Self {
        let alpha = 1.0;
        let delta = (1.0 - core.r0) * variant_b;
        Self {
            q: core.q,
            alpha,
            compact_radius_sq: core.trace / alpha,
            variant_b,
            r0: core.r0,
            delta,
            noise_set_bound: if core.b_norm_sq > 0.0 {
                delta / core.b_norm_sq
            } else {
                f64::INFINITY
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_spd(&self.q, "certificate Q")?;
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("certificate {name} must be positive, got {v}")))
            }
        };
        positive("alpha", self.alpha)?;
        positive("variant_b", self.variant_b)?;
        positive("delta", self.delta)?;
        if !(self.compact_radius_sq >= 0.0 && self.compact_radius_sq.is_finite()) {
            return Err(Error::Config(format!(
                "certificate compact_radius_sq must be non-negative, got {}",
                self.compact_radius_sq
            )));
        }
        Ok(())
    }

    fn inverse_diagonal(&self) -> Vec<f64> {
        match self.q.clone().try_inverse() {
            Some(inv) => (0..inv.nrows()).map(|i| inv[(i, i)].max(0.0)).collect(),
            None => {
                let (min, _) = symmetric_eigen_range(&self.q);
                vec![1.0 / min; self.q.nrows()]
            }
        }
    }
}

pub fn synthesize_quadratic(system: &LinearSystem, target: &TargetBall) -> Result<QuadraticCertificate> {
    if target.dim() != system.state_dim() {
        return Err(Error::DimensionMismatch {
            context: "target center",
            expected: system.state_dim(),
            found: target.dim(),
        });
    }
    let core = quadratic_core(system.a(), system.b(), &system.noise().covariance())?;
    let b = target.quadratic_level_inside(&core.q)? / 2.0;
    let cert = QuadraticCertificate::from_core(core, b);
    if !(cert.r0 < 1.0) {
        return Err(Error::Precondition(format!(
            "contraction factor r0 = {} is not below 1",
            cert.r0
        )));
    }
    Ok(cert)
}

impl Certificate for QuadraticCertificate {
    fn kind(&self) -> &'static str {
        "quadratic"
    }

    fn dim(&self) -> usize {
        self.q.nrows()
    }

    fn drift(&self, x: &[f64]) -> f64 {
        quadratic_form(&Vector::from_column_slice(x), &self.q)
    }

    fn variant(&self, x: &[f64]) -> f64 {
        self.drift(x) - self.variant_b
    }

    fn h_bound(&self, r: f64) -> f64 {
        r - self.variant_b
    }

    fn delta(&self) -> f64 {
        self.delta
    }

    fn compact_radius(&self) -> f64 {
        self.compact_radius_sq.sqrt()
    }

    fn shell_point(&self, direction: &[f64], radius: f64) -> Vec<f64> {
        let norm = direction.iter().map(|c| c * c).sum::<f64>().sqrt();
        direction.iter().map(|c| c * radius / norm).collect()
    }

    fn sublevel_box(&self, r: f64) -> Option<(Vec<f64>, Vec<f64>)> {
        if !(r > 0.0) {
            return None;
        }
        let hi: Vec<f64> = self.inverse_diagonal().iter().map(|d| (r * d).sqrt()).collect();
        let lo = hi.iter().map(|h| -h).collect();
        Some((lo, hi))
    }

    fn variant_boundary_point(&self, direction: &[f64]) -> Option<Vec<f64>> {
        let v = self.drift(direction);
        (v > 0.0).then(|| {
            let s = (self.variant_b / v).sqrt();
            direction.iter().map(|c| c * s).collect()
        })
    }

    fn quadratic_form(&self) -> Option<&Matrix> {
        Some(&self.q)
    }

    fn default_levels(&self) -> Vec<f64> {
        vec![2.0 * self.variant_b, 4.0 * self.variant_b, 8.0 * self.variant_b]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::from_rows;
    use crate::system::NoiseModel;

    fn scalar(a: f64) -> LinearSystem {
        LinearSystem::new(
            from_rows(&[vec![a]]).unwrap(),
            from_rows(&[vec![1.0]]).unwrap(),
            NoiseModel::uniform_intervals(vec![1.0]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn zero_dynamics() {
        let c = synthesize_quadratic(&scalar(0.0), &TargetBall::centered(1, 2.0).unwrap()).unwrap();
        assert!((c.q[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((c.compact_radius_sq - 1.0 / 3.0).abs() < 1e-15);
        assert!((c.variant_b - 2.0).abs() < 1e-15);
        assert!(c.r0.abs() < 1e-15);
        assert!((c.delta - 2.0).abs() < 1e-15);
    }

    #[test]
    fn half_contraction() {
        let c = synthesize_quadratic(&scalar(0.5), &TargetBall::centered(1, 2.0).unwrap()).unwrap();
        assert!((c.q[(0, 0)] - 4.0 / 3.0).abs() < 1e-14);
        assert!((c.compact_radius_sq - 4.0 / 9.0).abs() < 1e-14);
        assert!((c.r0 - 0.25).abs() < 1e-14);
        assert!((c.variant_b - 8.0 / 3.0).abs() < 1e-14);
        assert!((c.delta - 2.0).abs() < 1e-14);
        assert!((c.noise_set_bound - 2.0 / (4.0 / 3.0)).abs() < 1e-14);
    }

    #[test]
    fn unstable_system_has_no_quadratic_certificate() {
        let err = synthesize_quadratic(&scalar(2.0), &TargetBall::centered(1, 2.0).unwrap());
        assert!(matches!(err, Err(Error::LyapunovUnstable { .. })));
    }

    #[test]
    fn h_bound_and_boundary() {
        let c = synthesize_quadratic(&scalar(0.5), &TargetBall::centered(1, 2.0).unwrap()).unwrap();
        let p = c.variant_boundary_point(&[-1.0]).unwrap();
        assert!(c.variant(&p).abs() < 1e-12);
        assert!(TargetBall::centered(1, 2.0).unwrap().contains(&p));
        let (lo, hi) = c.sublevel_box(4.0).unwrap();
        assert!((hi[0] - (4.0f64 * 0.75).sqrt()).abs() < 1e-12);
        assert_eq!(lo[0], -hi[0]);
        assert!(c.sublevel_box(0.0).is_none());
    }

    #[test]
    fn invalid_certificates_rejected() {
        let mut c =
            synthesize_quadratic(&scalar(0.5), &TargetBall::centered(1, 2.0).unwrap()).unwrap();
        c.q = from_rows(&[vec![-1.0]]).unwrap();
        assert!(c.validate().is_err());
    }
}
