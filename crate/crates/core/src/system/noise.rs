//! Zero-mean noise laws and counter-based seeding.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{check_spd, ensure_finite, Matrix, Vector};

/// Per-trajectory seed. The random stream is a pure function of
/// `(base, index)`: ChaCha seeded from `base`, stream number `index`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TrajectorySeed {
    pub base: u64,
    pub index: u64,
}

impl TrajectorySeed {
    pub fn new(base: u64, index: u64) -> Self {
        Self { base, index }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.base);
        rng.set_stream(self.index);
        rng
    }

    /// A child seed for a sub-task; keeps the base and mixes the index so
    /// nested task families do not collide.
    pub fn child(&self, sub: u64) -> Self {
        Self {
            base: self.base ^ self.index.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17),
            index: sub,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NoiseModel {
    Gaussian { cov: Matrix, chol: Matrix },
    /// Uniform on the cube `[-h, h]^dim`.
    UniformBox { dim: usize, half_width: f64 },
    /// Uniform on `∏ [-h_i, h_i]`.
    UniformIntervals { half_widths: Vec<f64> },
}

impl NoiseModel {
    pub fn gaussian(cov: Matrix) -> Result<Self> {
        ensure_finite(&cov, "noise covariance").map_err(|e| Error::InvalidNoise(e.to_string()))?;
        check_spd(&cov, "noise covariance").map_err(|e| Error::InvalidNoise(e.to_string()))?;
        let chol = cov
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidNoise("covariance has no Cholesky factor".into()))?
            .l();
        Ok(NoiseModel::Gaussian { cov, chol })
    }

    pub fn standard_gaussian(dim: usize) -> Self {
        Self::gaussian(Matrix::identity(dim, dim)).expect("identity is SPD")
    }

    pub fn uniform_box(dim: usize, half_width: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidNoise("noise dimension must be positive".into()));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::InvalidNoise(format!(
                "half width must be positive and finite, got {half_width}"
            )));
        }
        Ok(NoiseModel::UniformBox { dim, half_width })
    }

    pub fn uniform_intervals(half_widths: Vec<f64>) -> Result<Self> {
        if half_widths.is_empty() {
            return Err(Error::InvalidNoise("no half widths given".into()));
        }
        if let Some(h) = half_widths.iter().find(|h| !(**h > 0.0 && h.is_finite())) {
            return Err(Error::InvalidNoise(format!(
                "half width must be positive and finite, got {h}"
            )));
        }
        Ok(NoiseModel::UniformIntervals { half_widths })
    }

    pub fn dim(&self) -> usize {
        match self {
            NoiseModel::Gaussian { cov, .. } => cov.nrows(),
            NoiseModel::UniformBox { dim, .. } => *dim,
            NoiseModel::UniformIntervals { half_widths } => half_widths.len(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            NoiseModel::Gaussian { .. } => "gaussian",
            NoiseModel::UniformBox { .. } => "uniform-box",
            NoiseModel::UniformIntervals { .. } => "uniform-interval-product",
        }
    }

    /// Σ_w. For uniform laws this is `diag(h²/3)`.
    pub fn covariance(&self) -> Matrix {
        match self {
            NoiseModel::Gaussian { cov, .. } => cov.clone(),
            NoiseModel::UniformBox { dim, half_width } => {
                Matrix::identity(*dim, *dim) * (half_width * half_width / 3.0)
            }
            NoiseModel::UniformIntervals { half_widths } => Matrix::from_diagonal(
                &Vector::from_iterator(half_widths.len(), half_widths.iter().map(|h| h * h / 3.0)),
            ),
        }
    }

    pub fn has_finite_third_moment(&self) -> bool {
        true
    }

    /// All supported laws are invariant under `w ↦ −w`.
    pub fn is_symmetric(&self) -> bool {
        true
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            NoiseModel::Gaussian { chol, .. } => {
                let m = chol.nrows();
                let mut z = [0.0f64; 8];
                let mut heap;
                let z: &mut [f64] = if m <= z.len() {
                    &mut z[..m]
                } else {
                    heap = vec![0.0; m];
                    &mut heap
                };
                for v in z.iter_mut() {
                    *v = rng.sample(StandardNormal);
                }
                for i in 0..m {
                    let mut acc = 0.0;
                    for (j, zj) in z.iter().enumerate().take(i + 1) {
                        acc += chol[(i, j)] * zj;
                    }
                    out[i] = acc;
                }
            }
            NoiseModel::UniformBox { half_width, .. } => {
                for v in out.iter_mut() {
                    *v = half_width * (2.0 * rng.random::<f64>() - 1.0);
                }
            }
            NoiseModel::UniformIntervals { half_widths } => {
                for (v, h) in out.iter_mut().zip(half_widths) {
                    *v = h * (2.0 * rng.random::<f64>() - 1.0);
                }
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector {
        let mut out = Vector::zeros(self.dim());
        self.sample_into(rng, out.as_mut_slice());
        out
    }
}

/// `count` i.i.d. draws from the seed's stream.
pub fn sample_noise(noise: &NoiseModel, seed: TrajectorySeed, count: usize) -> Vec<Vector> {
    let mut rng = seed.rng();
    (0..count).map(|_| noise.sample(&mut rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_moments(samples: &[Vector]) -> (Vector, Matrix) {
        let n = samples.len() as f64;
        let m = samples[0].len();
        let mut mean = Vector::zeros(m);
        for s in samples {
            mean += s;
        }
        mean /= n;
        let mut cov = Matrix::zeros(m, m);
        for s in samples {
            let d = s - &mean;
            cov += &d * d.transpose();
        }
        (mean, cov / n)
    }

    #[test]
    fn uniform_second_moment_is_one_third() {
        let noise = NoiseModel::uniform_intervals(vec![1.0]).unwrap();
        let draws = sample_noise(&noise, TrajectorySeed::new(11, 0), 1_000_000);
        let m2: f64 = draws.iter().map(|w| w[0] * w[0]).sum::<f64>() / draws.len() as f64;
        assert!((m2 - 1.0 / 3.0).abs() < 0.01 / 3.0, "second moment {m2}");
        let mean: f64 = draws.iter().map(|w| w[0]).sum::<f64>() / draws.len() as f64;
        // 5σ/√N with σ² = 1/3
        assert!(mean.abs() < 5.0 * (1.0f64 / 3.0).sqrt() / 1000.0);
    }

    #[test]
    fn zero_count_is_empty() {
        let noise = NoiseModel::standard_gaussian(2);
        assert!(sample_noise(&noise, TrajectorySeed::new(1, 2), 0).is_empty());
    }

    #[test]
    fn gaussian_identity_covariance() {
        let noise = NoiseModel::standard_gaussian(2);
        let draws = sample_noise(&noise, TrajectorySeed::new(5, 3), 1_000_000);
        let (mean, cov) = sample_moments(&draws);
        assert!((cov - Matrix::identity(2, 2)).norm() < 0.02 * 2f64.sqrt());
        for i in 0..2 {
            assert!(mean[i].abs() < 5.0 / 1000.0);
        }
    }

    #[test]
    fn correlated_gaussian_covariance_converges() {
        let cov = Matrix::from_row_slice(2, 2, &[2.0, 0.6, 0.6, 0.5]);
        let noise = NoiseModel::gaussian(cov.clone()).unwrap();
        let n = 200_000;
        let draws = sample_noise(&noise, TrajectorySeed::new(99, 0), n);
        let (_, emp) = sample_moments(&draws);
        assert!((emp - cov).norm() <= 5.0 / (n as f64).sqrt() * 2.0);
    }

    #[test]
    fn uniform_box_covariance_is_derived() {
        let noise = NoiseModel::uniform_box(3, 2.0).unwrap();
        let cov = noise.covariance();
        assert_eq!(cov, Matrix::identity(3, 3) * (4.0 / 3.0));
    }

    #[test]
    fn identical_seeds_reproduce_bitwise() {
        let noise = NoiseModel::uniform_box(2, 1.0).unwrap();
        let a = sample_noise(&noise, TrajectorySeed::new(7, 4), 100);
        let b = sample_noise(&noise, TrajectorySeed::new(7, 4), 100);
        assert_eq!(a, b);
        let c = sample_noise(&noise, TrajectorySeed::new(7, 5), 100);
        assert_ne!(a, c);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(NoiseModel::uniform_intervals(vec![1.0, -1.0]).is_err());
        assert!(NoiseModel::uniform_box(0, 1.0).is_err());
        assert!(NoiseModel::gaussian(Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).is_err());
    }
}
