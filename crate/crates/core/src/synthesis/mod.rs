//! Explicit certificates: quadratic for stable systems, logarithmic for
//! critical ones, and an additive composite candidate for mixed spectra.

pub mod composite;
pub mod logarithmic;
pub mod quadratic;

pub use composite::{invariant_split, synthesize_composite, CompositeCertificate, SubspaceSplit};
pub use logarithmic::{
    log_drift_second_order, synthesize_logarithmic, LogCertificate, LogOptions, ScanStep,
};
pub use quadratic::{synthesize_quadratic, QuadraticCertificate};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::system::{Dynamics, TrajectorySeed};
use crate::verifier::{shell_directions, Certificate};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderOptions {
    pub points: usize,
    pub samples: usize,
    pub max_steps: u32,
    pub seed: u64,
}

impl Default for LadderOptions {
    fn default() -> Self {
        Self {
            points: 16,
            samples: 4096,
            max_steps: 30,
            seed: 0x0DE1,
        }
    }
}

/// Largest `δ = b·2^{-j}` whose decrease event `U(f(x,w)) − U(x) ≤ −δ` has
/// probability bounded away from zero (3σ) at every sampled point just
/// outside `{U ≤ 0}`. Returns `(δ, ε)` with `ε` the smallest point estimate.
pub fn delta_ladder<D, C>(system: &D, cert: &C, b: f64, opts: &LadderOptions) -> Result<(f64, f64)>
where
    D: Dynamics + ?Sized,
    C: Certificate + ?Sized,
{
    let n = system.state_dim();
    let noise = system.noise();
    let points: Vec<Vec<f64>> = shell_directions(n, opts.points, opts.seed)
        .iter()
        .filter_map(|d| cert.variant_boundary_point(d))
        .map(|p| p.into_iter().map(|c| c * (1.0 + 1e-9)).collect())
        .collect();
    if points.is_empty() {
        return Err(Error::Precondition("variant boundary is empty".into()));
    }
    let increments: Vec<Vec<f64>> = points
        .par_iter()
        .enumerate()
        .map(|(p, x)| {
            let mut rng = TrajectorySeed::new(opts.seed, p as u64).rng();
            let u = cert.variant(x);
            let mut w = vec![0.0; noise.dim()];
            let mut next = vec![0.0; n];
            (0..opts.samples)
                .map(|_| {
                    noise.sample_into(&mut rng, &mut w);
                    system.step_into(x, &w, &mut next);
                    cert.variant(&next) - u
                })
                .collect()
        })
        .collect();
    let m = opts.samples as f64;
    for j in 0..=opts.max_steps {
        let delta = b * 0.5f64.powi(j as i32);
        let eps = increments
            .iter()
            .map(|inc| inc.iter().filter(|&&d| d <= -delta).count() as f64 / m)
            .fold(1.0, f64::min);
        if eps - 3.0 * (eps * (1.0 - eps) / m).sqrt() > 0.0 {
            return Ok((delta, eps));
        }
    }
    Err(Error::Precondition(format!(
        "no decrease level found down to b·2^-{}",
        opts.max_steps
    )))
}

/// On-disk certificate, tagged by `kind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CertificateFile {
    Quadratic(QuadraticCertificate),
    Logarithmic(LogCertificate),
    Composite(Box<CompositeCertificate>),
}

impl CertificateFile {
    pub fn certificate(&self) -> &dyn Certificate {
        match self {
            CertificateFile::Quadratic(c) => c,
            CertificateFile::Logarithmic(c) => c,
            CertificateFile::Composite(c) => c.as_ref(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            CertificateFile::Quadratic(c) => c.validate(),
            CertificateFile::Logarithmic(c) => c.validate(),
            CertificateFile::Composite(c) => c.validate(),
        }
    }

    /// Parse and validate; every failure is a configuration error.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: Self =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("certificate file: {e}")))?;
        file.validate()
            .map_err(|e| Error::Config(format!("certificate file: {e}")))?;
        Ok(file)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }
}
