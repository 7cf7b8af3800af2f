use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, check_spd, Matrix, Vector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetNorm {
    Euclidean,
    /// Sup norm; the ball is an axis-aligned open box.
    Max,
    Weighted(#[serde(with = "crate::linalg::serde_rows")] Matrix),
}

/// Open ball `{x : ‖x − center‖ < radius}` in the Euclidean or a weighted norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetBall {
    #[serde(with = "crate::linalg::serde_vector")]
    pub center: Vector,
    pub radius: f64,
    pub norm: TargetNorm,
}

impl TargetBall {
    pub fn new(center: Vector, radius: f64, norm: TargetNorm) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Config(format!("target radius must be positive, got {radius}")));
        }
        if center.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("target center".into()));
        }
        if let TargetNorm::Weighted(q) = &norm {
            check_spd(q, "target weight")?;
            if q.nrows() != center.len() {
                return Err(Error::DimensionMismatch {
                    context: "target weight",
                    expected: center.len(),
                    found: q.nrows(),
                });
            }
        }
        Ok(Self {
            center,
            radius,
            norm,
        })
    }

    pub fn centered(dim: usize, radius: f64) -> Result<Self> {
        Self::new(Vector::zeros(dim), radius, TargetNorm::Euclidean)
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Norm of `v` (a displacement, not a point) in the ball's metric.
    pub fn norm_of(&self, v: &[f64]) -> f64 {
        let v = Vector::from_column_slice(v);
        match &self.norm {
            TargetNorm::Euclidean => v.norm(),
            TargetNorm::Max => v.amax(),
            TargetNorm::Weighted(q) => linalg::quadratic_form(&v, q).max(0.0).sqrt(),
        }
    }

    /// Strict membership; a point of the wrong dimension is never inside.
    pub fn contains(&self, x: &[f64]) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        match &self.norm {
            TargetNorm::Euclidean => {
                let d2: f64 = x
                    .iter()
                    .zip(self.center.iter())
                    .map(|(a, c)| (a - c) * (a - c))
                    .sum();
                d2 < self.radius * self.radius
            }
            TargetNorm::Max | TargetNorm::Weighted(_) => {
                let d: Vec<f64> = x.iter().zip(self.center.iter()).map(|(a, c)| a - c).collect();
                self.norm_of(&d) < self.radius
            }
        }
    }

    pub fn contains_origin(&self) -> bool {
        self.contains(&vec![0.0; self.dim()])
    }

    /// Radius of the largest origin-centred ball (same metric) inside the target.
    pub fn inscribed_radius_at_origin(&self) -> Result<f64> {
        let r = self.radius - self.norm_of(self.center.as_slice());
        if r > 0.0 {
            Ok(r)
        } else {
            Err(Error::TargetExcludesOrigin)
        }
    }

    /// Largest `c` with `{xᵀQx < c} ⊆ target`, for SPD `Q`.
    pub fn quadratic_level_inside(&self, q: &Matrix) -> Result<f64> {
        let r = self.inscribed_radius_at_origin()?;
        let min = match &self.norm {
            TargetNorm::Euclidean => linalg::symmetric_eigen_range(q).0,
            TargetNorm::Max => {
                let inv = q.clone().try_inverse().ok_or_else(|| {
                    Error::NotPositiveDefinite("quadratic form is singular".into())
                })?;
                1.0 / (0..inv.nrows()).map(|i| inv[(i, i)]).fold(0.0, f64::max)
            }
            TargetNorm::Weighted(w) => linalg::generalized_eigen_range(q, w)?.0,
        };
        Ok(min * r * r)
    }
}
