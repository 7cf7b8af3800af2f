//! The decision tree for linear systems: spectral radius, unit-circle Jordan
//! structure, the full-rank noise assumption, and `dim(E_A)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::numerical_rank;
use crate::spectral::{analyze_with, SpectralReport, Tolerances};
use crate::system::{Dynamics, LinearSystem, TargetBall};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Outcome {
    ReachableStable,
    ReachableCritical,
    NotReachableUnstable,
    NotReachableJordan,
    NotReachableDimension,
    InconclusiveAssumption,
}

impl Outcome {
    pub fn is_reachable(&self) -> bool {
        matches!(self, Outcome::ReachableStable | Outcome::ReachableCritical)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::ReachableStable => "ReachableStable",
            Outcome::ReachableCritical => "ReachableCritical",
            Outcome::NotReachableUnstable => "NotReachableUnstable",
            Outcome::NotReachableJordan => "NotReachableJordan",
            Outcome::NotReachableDimension => "NotReachableDimension",
            Outcome::InconclusiveAssumption => "InconclusiveAssumption",
        }
    }
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CertificateAdvice {
    Quadratic,
    Logarithmic,
    Composite,
    None,
}

/// One decision: `value` compared against `threshold` by `test`, with its result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchStep {
    pub test: String,
    pub value: f64,
    pub threshold: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub outcome: Outcome,
    pub branch_trace: Vec<BranchStep>,
    pub certificate_advice: CertificateAdvice,
    pub warnings: Vec<String>,
    pub spectral: SpectralReport,
}

impl Verdict {
    /// Replay the trace through the decision tree.
    pub fn rederive(&self) -> Option<Outcome> {
        let step = |name: &str| self.branch_trace.iter().find(|s| s.test.starts_with(name));
        if step("rho < 1 - unit_tol")?.holds {
            return Some(Outcome::ReachableStable);
        }
        if step("rho > 1 + unit_tol")?.holds {
            return Some(Outcome::NotReachableUnstable);
        }
        if step("largest unit Jordan block >= 2")?.holds {
            return Some(Outcome::NotReachableJordan);
        }
        let assumption = ["rank(B) = n", "m = n", "noise third moment finite"]
            .iter()
            .map(|t| step(t).map(|s| s.holds))
            .try_fold(true, |acc, h| h.map(|h| acc && h))?;
        if !assumption {
            return Some(Outcome::InconclusiveAssumption);
        }
        if step("dim(E_A) <= 2")?.holds {
            Some(Outcome::ReachableCritical)
        } else {
            Some(Outcome::NotReachableDimension)
        }
    }
}

pub fn classify(system: &LinearSystem, target: &TargetBall, tols: &Tolerances) -> Result<Verdict> {
    let n = system.state_dim();
    if target.dim() != n {
        return Err(Error::DimensionMismatch {
            context: "target center",
            expected: n,
            found: target.dim(),
        });
    }
    if !target.contains_origin() {
        return Err(Error::TargetExcludesOrigin);
    }
    let spectral = analyze_with(system.a(), tols)?;
    let rho = spectral.rho;
    let tol = tols.unit_tol;
    let mut trace = Vec::new();
    let mut warnings = spectral.warnings.clone();
    if (rho - 1.0).abs() <= 10.0 * tol {
        warnings.push(format!(
            "near-critical: rho = {rho:.17} is within 10 * unit_tol of 1; \
             the branch taken depends on the tolerance"
        ));
    }

    let mut push = |test: &str, value: f64, threshold: f64, holds: bool| {
        trace.push(BranchStep {
            test: test.to_string(),
            value,
            threshold,
            holds,
        });
        holds
    };

    let (outcome, advice) = if push("rho < 1 - unit_tol", rho, 1.0 - tol, rho < 1.0 - tol) {
        (Outcome::ReachableStable, CertificateAdvice::Quadratic)
    } else if push("rho > 1 + unit_tol", rho, 1.0 + tol, rho > 1.0 + tol) {
        (Outcome::NotReachableUnstable, CertificateAdvice::None)
    } else {
        let d = spectral.d_max_unit;
        if push("largest unit Jordan block >= 2", d as f64, 2.0, d >= 2) {
            (Outcome::NotReachableJordan, CertificateAdvice::None)
        } else {
            let rank_b = numerical_rank(system.b(), tols.rank_tol)?;
            let m = system.noise_dim();
            let full_rank = push("rank(B) = n", rank_b as f64, n as f64, rank_b == n);
            let square = push("m = n", m as f64, n as f64, m == n);
            let moment = system.noise().has_finite_third_moment();
            let moment = push("noise third moment finite", moment as u8 as f64, 1.0, moment);
            if !(full_rank && square && moment) {
                (Outcome::InconclusiveAssumption, CertificateAdvice::None)
            } else if push("dim(E_A) <= 2", spectral.dim_ea as f64, 2.0, spectral.dim_ea <= 2) {
                if spectral.has_stable_part() {
                    warnings.push(
                        "mixed spectrum: the composite certificate is a candidate and must be \
                         verified numerically"
                            .into(),
                    );
                    (Outcome::ReachableCritical, CertificateAdvice::Composite)
                } else {
                    (Outcome::ReachableCritical, CertificateAdvice::Logarithmic)
                }
            } else {
                (Outcome::NotReachableDimension, CertificateAdvice::None)
            }
        }
    };

    Ok(Verdict {
        outcome,
        branch_trace: trace,
        certificate_advice: advice,
        warnings,
        spectral,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{from_rows, Matrix};
    use crate::system::NoiseModel;

    fn m(rows: &[&[f64]]) -> Matrix {
        from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn verdict(a: Matrix, b: Matrix) -> Verdict {
        let n = a.nrows();
        let noise = NoiseModel::standard_gaussian(b.ncols());
        let sys = LinearSystem::new(a, b, noise).unwrap();
        classify(&sys, &TargetBall::centered(n, 1.0).unwrap(), &Tolerances::default()).unwrap()
    }

    #[test]
    fn random_walk_is_critical() {
        let sys = LinearSystem::new(
            m(&[&[1.0]]),
            m(&[&[1.0]]),
            NoiseModel::uniform_intervals(vec![1.0]).unwrap(),
        )
        .unwrap();
        let v = classify(&sys, &TargetBall::centered(1, 2.0).unwrap(), &Tolerances::default())
            .unwrap();
        assert_eq!(v.outcome, Outcome::ReachableCritical);
        assert_eq!(v.certificate_advice, CertificateAdvice::Logarithmic);
        assert!(v.warnings.iter().any(|w| w.contains("near-critical")));
        assert_eq!(v.rederive(), Some(v.outcome));
    }

    #[test]
    fn branch_examples() {
        let i3 = Matrix::identity(3, 3);
        assert_eq!(verdict(i3.clone(), i3).outcome, Outcome::NotReachableDimension);
        let shear = m(&[&[1.0, 1.0], &[0.0, 1.0]]);
        assert_eq!(
            verdict(shear, Matrix::identity(2, 2)).outcome,
            Outcome::NotReachableJordan
        );
        let v = verdict(Matrix::identity(2, 2), m(&[&[1.0], &[1.0]]));
        assert_eq!(v.outcome, Outcome::InconclusiveAssumption);
        assert!(!v.branch_trace.iter().find(|s| s.test == "rank(B) = n").unwrap().holds);
        let v = verdict(m(&[&[0.5, 0.0], &[0.0, 0.9]]), m(&[&[1.0, 2.0], &[0.0, 1.0]]));
        assert_eq!(v.outcome, Outcome::ReachableStable);
        assert_eq!(v.certificate_advice, CertificateAdvice::Quadratic);
        assert_eq!(verdict(m(&[&[2.0]]), m(&[&[1.0]])).outcome, Outcome::NotReachableUnstable);
        let v = verdict(m(&[&[1.0, 0.0], &[0.0, 0.5]]), Matrix::identity(2, 2));
        assert_eq!(v.outcome, Outcome::ReachableCritical);
        assert_eq!(v.certificate_advice, CertificateAdvice::Composite);
    }

    #[test]
    fn every_trace_replays() {
        let cases = [
            (m(&[&[0.3]]), m(&[&[1.0]])),
            (m(&[&[1.5]]), m(&[&[1.0]])),
            (m(&[&[1.0, 1.0], &[0.0, 1.0]]), Matrix::identity(2, 2)),
            (Matrix::identity(2, 2), m(&[&[1.0], &[1.0]])),
            (Matrix::identity(3, 3), Matrix::identity(3, 3)),
            (m(&[&[0.0, -1.0], &[1.0, 0.0]]), Matrix::identity(2, 2)),
        ];
        for (a, b) in cases {
            let v = verdict(a, b);
            assert_eq!(v.rederive(), Some(v.outcome), "{v:?}");
        }
    }

    #[test]
    fn target_must_contain_origin() {
        let sys =
            LinearSystem::new(m(&[&[0.5]]), m(&[&[1.0]]), NoiseModel::standard_gaussian(1))
                .unwrap();
        let far = TargetBall::new(
            crate::linalg::Vector::from_vec(vec![5.0]),
            1.0,
            crate::system::TargetNorm::Euclidean,
        )
        .unwrap();
        assert_eq!(
            classify(&sys, &far, &Tolerances::default()).unwrap_err(),
            Error::TargetExcludesOrigin
        );
    }
}
