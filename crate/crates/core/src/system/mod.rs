//! Stochastic system models `x⁺ = f(x, w)`: the linear case `Ax + Bw` and
//! general polynomial transitions, plus noise laws and target sets.

pub mod config;
pub mod noise;
pub mod poly;
pub mod target;

pub use config::{Model, NoiseSpec, SystemDescription, SystemFile, TargetSpec};
pub use noise::{sample_noise, NoiseModel, TrajectorySeed};
pub use poly::{parse_polynomial, Expr};
pub use target::{TargetBall, TargetNorm};

use crate::error::{Error, Result};
use crate::linalg::{ensure_finite, ensure_square, Matrix, Vector};

/// One-step transition map driven by i.i.d. noise.
pub trait Dynamics: Sync {
    fn state_dim(&self) -> usize;

    fn noise(&self) -> &NoiseModel;

    /// Unchecked step on raw slices; `out` has length `state_dim()`.
    fn step_into(&self, x: &[f64], w: &[f64], out: &mut [f64]);

    fn step(&self, x: &Vector, w: &Vector) -> Result<Vector> {
        if x.len() != self.state_dim() {
            return Err(Error::DimensionMismatch {
                context: "state",
                expected: self.state_dim(),
                found: x.len(),
            });
        }
        if w.len() != self.noise().dim() {
            return Err(Error::DimensionMismatch {
                context: "noise",
                expected: self.noise().dim(),
                found: w.len(),
            });
        }
        let mut out = Vector::zeros(self.state_dim());
        self.step_into(x.as_slice(), w.as_slice(), out.as_mut_slice());
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Overflow { step: 1 });
        }
        Ok(out)
    }

    fn as_linear(&self) -> Option<&LinearSystem> {
        None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    a: Matrix,
    b: Matrix,
    noise: NoiseModel,
}

impl LinearSystem {
    pub fn new(a: Matrix, b: Matrix, noise: NoiseModel) -> Result<Self> {
        let n = ensure_square(&a)?;
        ensure_finite(&a, "A")?;
        ensure_finite(&b, "B")?;
        if b.nrows() != n {
            return Err(Error::DimensionMismatch {
                context: "rows of B",
                expected: n,
                found: b.nrows(),
            });
        }
        if b.ncols() != noise.dim() {
            return Err(Error::DimensionMismatch {
                context: "columns of B vs noise dimension",
                expected: b.ncols(),
                found: noise.dim(),
            });
        }
        Ok(Self { a, b, noise })
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn noise_dim(&self) -> usize {
        self.b.ncols()
    }

    /// `B Σ_w Bᵀ`, the per-step state covariance injected by the noise.
    pub fn injected_covariance(&self) -> Matrix {
        &self.b * self.noise.covariance() * self.b.transpose()
    }

    /// The same dynamics in coordinates `z = T⁻¹x`.
    pub fn transformed(&self, t: &Matrix) -> Result<Self> {
        let t_inv = t
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Precondition("similarity transform is singular".into()))?;
        Self::new(&t_inv * &self.a * t, &t_inv * &self.b, self.noise.clone())
    }
}

impl Dynamics for LinearSystem {
    fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    fn step_into(&self, x: &[f64], w: &[f64], out: &mut [f64]) {
        let n = self.a.nrows();
        let m = self.b.ncols();
        for (i, o) in out.iter_mut().enumerate().take(n) {
            let mut acc = 0.0;
            for (j, xj) in x.iter().enumerate().take(n) {
                acc += self.a[(i, j)] * xj;
            }
            for (j, wj) in w.iter().enumerate().take(m) {
                acc += self.b[(i, j)] * wj;
            }
            *o = acc;
        }
    }

    fn as_linear(&self) -> Option<&LinearSystem> {
        Some(self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialSystem {
    transition: Vec<Expr>,
    sources: Vec<String>,
    noise: NoiseModel,
}

impl PolynomialSystem {
    pub fn new(transition: Vec<Expr>, noise: NoiseModel) -> Result<Self> {
        let sources = transition.iter().map(|e| format!("{e:?}")).collect();
        Self::with_sources(transition, sources, noise)
    }

    fn with_sources(transition: Vec<Expr>, sources: Vec<String>, noise: NoiseModel) -> Result<Self> {
        let n = transition.len();
        if n == 0 {
            return Err(Error::Config("transition has no coordinates".into()));
        }
        for e in &transition {
            let (xs, ws) = e.max_indices();
            if xs > n {
                return Err(Error::DimensionMismatch {
                    context: "state variable index",
                    expected: n,
                    found: xs,
                });
            }
            if ws > noise.dim() {
                return Err(Error::DimensionMismatch {
                    context: "noise variable index",
                    expected: noise.dim(),
                    found: ws,
                });
            }
        }
        Ok(Self {
            transition,
            sources,
            noise,
        })
    }

    /// Parse one polynomial string per state coordinate.
    pub fn parse<S: AsRef<str>>(transition: &[S], noise: NoiseModel) -> Result<Self> {
        let exprs = transition
            .iter()
            .map(|s| parse_polynomial(s.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        let sources = transition.iter().map(|s| s.as_ref().to_string()).collect();
        Self::with_sources(exprs, sources, noise)
    }

    pub fn sources(&self) -> &[String] {
        &self.sources
    }
}

impl Dynamics for PolynomialSystem {
    fn state_dim(&self) -> usize {
        self.transition.len()
    }

    fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    fn step_into(&self, x: &[f64], w: &[f64], out: &mut [f64]) {
        for (o, e) in out.iter_mut().zip(&self.transition) {
            *o = e.eval(x, w);
        }
    }
}
