//! JSON system description files.
//!
//! ```json
//! {
//!   "A": [[1.0]], "B": [[1.0]],
//!   "noise": {"kind": "uniform-interval-product", "half_widths": [1.0]},
//!   "target": {"center": [0.0], "radius": 2.0, "norm": "euclidean"}
//! }
//! ```
//!
//! Polynomial systems replace `A`/`B` with `"transition": ["0.5*x1*(1+x2+w1)", ...]`.

use serde::{Deserialize, Serialize};

use super::{LinearSystem, NoiseModel, PolynomialSystem, TargetBall, TargetNorm};
use crate::error::{Error, Result};
use crate::linalg::{from_rows, to_rows, Vector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemFile {
    #[serde(rename = "A", default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<Vec<f64>>>,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transition: Option<Vec<String>>,
    pub noise: NoiseSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<TargetSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cov: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_widths: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    pub center: Vec<f64>,
    pub radius: f64,
    #[serde(default)]
    pub norm: NormSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NormSpec {
    Named(String),
    Weighted { weighted: Vec<Vec<f64>> },
}

impl Default for NormSpec {
    fn default() -> Self {
        NormSpec::Named("euclidean".into())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Linear(LinearSystem),
    Polynomial(PolynomialSystem),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemDescription {
    pub model: Model,
    pub target: Option<TargetBall>,
}

impl NoiseSpec {
    /// `dim_hint` resolves the dimension of a `uniform-box` given by a single half width.
    pub fn build(&self, dim_hint: usize) -> Result<NoiseModel> {
        match self.kind.as_str() {
            "gaussian" => {
                let cov = self
                    .cov
                    .as_ref()
                    .ok_or_else(|| Error::Config("noise.cov is required for gaussian noise".into()))?;
                NoiseModel::gaussian(from_rows(cov)?)
            }
            "uniform-box" => {
                let hw = self.half_widths.as_ref().ok_or_else(|| {
                    Error::Config("noise.half_widths is required for uniform-box noise".into())
                })?;
                match hw.as_slice() {
                    [h] => NoiseModel::uniform_box(dim_hint, *h),
                    [h, rest @ ..] if rest.iter().all(|r| r == h) => {
                        NoiseModel::uniform_box(hw.len(), *h)
                    }
                    _ => Err(Error::Config(
                        "uniform-box noise needs a single common half width".into(),
                    )),
                }
            }
            "uniform-interval-product" => {
                let hw = self.half_widths.as_ref().ok_or_else(|| {
                    Error::Config(
                        "noise.half_widths is required for uniform-interval-product noise".into(),
                    )
                })?;
                NoiseModel::uniform_intervals(hw.clone())
            }
            other => Err(Error::Config(format!(
                "noise.kind must be one of gaussian, uniform-box, uniform-interval-product; got '{other}'"
            ))),
        }
    }

    pub fn from_model(noise: &NoiseModel) -> Self {
        match noise {
            NoiseModel::Gaussian { cov, .. } => NoiseSpec {
                kind: "gaussian".into(),
                cov: Some(to_rows(cov)),
                half_widths: None,
            },
            NoiseModel::UniformBox { dim, half_width } => NoiseSpec {
                kind: "uniform-box".into(),
                cov: None,
                half_widths: Some(vec![*half_width; *dim]),
            },
            NoiseModel::UniformIntervals { half_widths } => NoiseSpec {
                kind: "uniform-interval-product".into(),
                cov: None,
                half_widths: Some(half_widths.clone()),
            },
        }
    }
}

impl TargetSpec {
    pub fn build(&self) -> Result<TargetBall> {
        let norm = match &self.norm {
            NormSpec::Named(name) if name == "euclidean" => TargetNorm::Euclidean,
            NormSpec::Named(name) if name == "max" => TargetNorm::Max,
            NormSpec::Named(other) => {
                return Err(Error::Config(format!(
                    "target.norm must be \"euclidean\", \"max\" or {{\"weighted\": Q}}, got '{other}'"
                )))
            }
            NormSpec::Weighted { weighted } => TargetNorm::Weighted(from_rows(weighted)?),
        };
        TargetBall::new(Vector::from_vec(self.center.clone()), self.radius, norm)
    }

    pub fn from_target(target: &TargetBall) -> Self {
        TargetSpec {
            center: target.center.as_slice().to_vec(),
            radius: target.radius,
            norm: match &target.norm {
                TargetNorm::Euclidean => NormSpec::default(),
                TargetNorm::Max => NormSpec::Named("max".into()),
                TargetNorm::Weighted(q) => NormSpec::Weighted {
                    weighted: to_rows(q),
                },
            },
        }
    }
}

impl SystemFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("system file: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("system file serializes")
    }

    pub fn from_linear(system: &LinearSystem, target: Option<&TargetBall>) -> Self {
        SystemFile {
            a: Some(to_rows(system.a())),
            b: Some(to_rows(system.b())),
            transition: None,
            noise: NoiseSpec::from_model(&system.noise),
            target: target.map(TargetSpec::from_target),
        }
    }

    pub fn build(&self) -> Result<SystemDescription> {
        let model = match (&self.a, &self.b, &self.transition) {
            (Some(a), Some(b), None) => {
                let a = from_rows(a)?;
                let b = from_rows(b)?;
                let noise = self.noise.build(b.ncols())?;
                Model::Linear(LinearSystem::new(a, b, noise)?)
            }
            (None, None, Some(transition)) => {
                let exprs = transition
                    .iter()
                    .map(|s| super::parse_polynomial(s))
                    .collect::<Result<Vec<_>>>()?;
                let noise_dim = exprs
                    .iter()
                    .map(|e| e.max_indices().1)
                    .max()
                    .unwrap_or(0)
                    .max(1);
                let noise = self.noise.build(noise_dim)?;
                Model::Polynomial(PolynomialSystem::parse(transition, noise)?)
            }
            _ => {
                return Err(Error::Config(
                    "system file needs either both \"A\" and \"B\" or a \"transition\" list".into(),
                ))
            }
        };
        let target = self.target.as_ref().map(TargetSpec::build).transpose()?;
        let dim = match &model {
            Model::Linear(s) => s.a().nrows(),
            Model::Polynomial(s) => super::Dynamics::state_dim(s),
        };
        if let Some(t) = &target {
            if t.dim() != dim {
                return Err(Error::DimensionMismatch {
                    context: "target center",
                    expected: dim,
                    found: t.dim(),
                });
            }
        }
        Ok(SystemDescription { model, target })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_walk_file() {
        let text = r#"{"A": [[1]], "B": [[1]],
            "noise": {"kind": "uniform-interval-product", "half_widths": [1]},
            "target": {"center": [0], "radius": 2, "norm": "euclidean"}}"#;
        let desc = SystemFile::from_json(text).unwrap().build().unwrap();
        let Model::Linear(sys) = desc.model else { panic!() };
        assert_eq!(sys.noise_dim(), 1);
        assert!(desc.target.unwrap().contains(&[1.999]));
    }

    #[test]
    fn polynomial_file_with_uniform_box() {
        let text = r#"{"transition": ["0.5*x1*(1+x2+w1)", "0.5*x2"],
            "noise": {"kind": "uniform-box", "half_widths": [1]}}"#;
        let desc = SystemFile::from_json(text).unwrap().build().unwrap();
        assert!(matches!(desc.model, Model::Polynomial(_)));
        assert!(desc.target.is_none());
    }

    #[test]
    fn weighted_target() {
        let text = r#"{"A": [[1,0],[0,1]], "B": [[1,0],[0,1]],
            "noise": {"kind": "gaussian", "cov": [[1,0],[0,1]]},
            "target": {"center": [0,0], "radius": 1, "norm": {"weighted": [[4,0],[0,1]]}}}"#;
        let desc = SystemFile::from_json(text).unwrap().build().unwrap();
        assert!(matches!(desc.target.unwrap().norm, TargetNorm::Weighted(_)));
    }

    #[test]
    fn schema_violations_are_named() {
        let unknown = r#"{"A": [[1]], "B": [[1]], "nois": {}}"#;
        let err = SystemFile::from_json(unknown).unwrap_err().to_string();
        assert!(err.contains("nois"), "{err}");

        let bad_kind = r#"{"A": [[1]], "B": [[1]], "noise": {"kind": "cauchy"}}"#;
        let err = SystemFile::from_json(bad_kind).unwrap().build().unwrap_err();
        assert!(err.to_string().contains("noise.kind"));

        let both = r#"{"A": [[1]], "B": [[1]], "transition": ["x1"],
            "noise": {"kind": "uniform-box", "half_widths": [1]}}"#;
        assert!(SystemFile::from_json(both).unwrap().build().is_err());

        let bad_cov = r#"{"A": [[1]], "B": [[1]], "noise": {"kind": "gaussian", "cov": [[-1]]}}"#;
        assert!(SystemFile::from_json(bad_cov).unwrap().build().is_err());
    }

    #[test]
    fn linear_round_trip() {
        let sys = LinearSystem::new(
            from_rows(&[vec![0.5, 0.1], vec![0.0, 0.9]]).unwrap(),
            from_rows(&[vec![1.0], vec![1.0]]).unwrap(),
            NoiseModel::uniform_intervals(vec![0.5]).unwrap(),
        )
        .unwrap();
        let target = TargetBall::centered(2, 1.5).unwrap();
        let file = SystemFile::from_linear(&sys, Some(&target));
        let back = SystemFile::from_json(&file.to_json()).unwrap().build().unwrap();
        assert_eq!(back.model, Model::Linear(sys));
        assert_eq!(back.target, Some(target));
    }
}
