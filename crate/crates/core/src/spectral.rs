//! Structural spectral facts: unit-circle clusters, Jordan block sizes from
//! rank sequences, `dim(E_A)`, and the real basis that turns a critical
//! 2×2 system into a rotation-like block.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    self, cluster_eigenvalues, ensure_finite, ensure_square,
    numerical_rank_complex_scaled, raw_eigenvalues, sort_clusters, EigenCluster, Matrix, DEFAULT_CLUSTER_TOL, DEFAULT_RANK_TOL,
};

pub const DEFAULT_UNIT_TOL: f64 = 1e-9;

/// Coarse radius used to regroup eigenvalues split by a defective block.
const DEFECT_MERGE_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub unit_tol: f64,
    pub rank_tol: f64,
    pub cluster_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            unit_tol: DEFAULT_UNIT_TOL,
            rank_tol: DEFAULT_RANK_TOL,
            cluster_tol: DEFAULT_CLUSTER_TOL,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("unit_tol", self.unit_tol),
            ("rank_tol", self.rank_tol),
            ("cluster_tol", self.cluster_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Jordan data for one eigenvalue cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterStructure {
    pub value: Complex64,
    pub algebraic: usize,
    pub geometric: usize,
    /// Largest Jordan block size.
    pub block_size: usize,
    /// `rank((A − λI)^k)` for `k = 0, 1, …` up to the first repeat.
    pub rank_sequence: Vec<usize>,
    pub on_unit_circle: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub n: usize,
    pub rho: f64,
    pub unit_tol: f64,
    pub clusters: Vec<ClusterStructure>,
    pub dim_ea: usize,
    pub d_max_unit: usize,
    pub stable_part_rho: f64,
    pub warnings: Vec<String>,
}

impl SpectralReport {
    pub fn unit_eigs(&self) -> impl Iterator<Item = &ClusterStructure> {
        self.clusters.iter().filter(|c| c.on_unit_circle)
    }

    pub fn has_stable_part(&self) -> bool {
        self.dim_ea < self.n
    }
}

fn shifted(a: &Matrix, lambda: Complex64) -> DMatrix<Complex64> {
    let n = a.nrows();
    DMatrix::from_fn(n, n, |i, j| {
        let v = Complex64::new(a[(i, j)], 0.0);
        if i == j {
            v - lambda
        } else {
            v
        }
    })
}

/// `r_k = rank((A − λI)^k)` for `k = 0..`, stopping once `r_k = r_{k+1}`.
///
/// Each power is judged against `‖A − λI‖₂^k` as well as its own norm, so
/// the rounding residue of a nilpotent power does not read as full rank.
fn rank_sequence(a: &Matrix, lambda: Complex64, rank_tol: f64) -> Result<Vec<usize>> {
    let n = a.nrows();
    let s = shifted(a, lambda);
    let s_norm = s.clone().svd(false, false).singular_values.max();
    let mut seq = vec![n];
    let mut power = DMatrix::<Complex64>::identity(n, n);
    let mut scale = 1.0;
    for _ in 0..=n {
        power = &power * &s;
        scale *= s_norm;
        let last = *seq.last().expect("nonempty");
        let r = numerical_rank_complex_scaled(&power, rank_tol, scale)?.min(last);
        seq.push(r);
        if r == last {
            break;
        }
    }
    Ok(seq)
}

fn structure(
    a: &Matrix,
    cluster: EigenCluster,
    rank_tol: f64,
    unit_tol: f64,
) -> Result<ClusterStructure> {
    let n = a.nrows();
    let seq = rank_sequence(a, cluster.value, rank_tol)?;
    let block_size = seq
        .windows(2)
        .position(|w| w[0] == w[1])
        .unwrap_or(seq.len() - 1);
    Ok(ClusterStructure {
        value: cluster.value,
        algebraic: cluster.multiplicity,
        geometric: n - seq[1],
        block_size,
        rank_sequence: seq,
        on_unit_circle: (cluster.value.norm() - 1.0).abs() <= unit_tol,
    })
}

/// Regroup tight clusters that a defective Jordan block has split apart.
///
/// Tight clusters within `DEFECT_MERGE_TOL` of each other form a candidate
/// group of total multiplicity `a` and centroid `λ̄`; the group is accepted
/// as one eigenvalue iff `(A − λ̄I)` is singular and `(A − λ̄I)^a` has
/// nullity exactly `a`.
fn merge_defective(
    a: &Matrix,
    tight: Vec<EigenCluster>,
    rank_tol: f64,
) -> Result<(Vec<EigenCluster>, Vec<String>)> {
    let m = tight.len();
    let n = a.nrows();
    let scale = tight
        .iter()
        .map(|c| c.value.norm())
        .fold(1.0f64, f64::max);
    let tol = DEFECT_MERGE_TOL * scale;

    let mut group: Vec<usize> = (0..m).collect();
    loop {
        let mut changed = false;
        for i in 0..m {
            for j in 0..m {
                if group[i] != group[j] && (tight[i].value - tight[j].value).norm() <= tol {
                    let g = group[i].min(group[j]);
                    let (gi, gj) = (group[i], group[j]);
                    for k in group.iter_mut() {
                        if *k == gi || *k == gj {
                            *k = g;
                        }
                    }
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let conj_of = |i: usize| -> usize {
        let target = tight[i].value.conj();
        (0..m)
            .min_by(|&p, &q| {
                (tight[p].value - target)
                    .norm()
                    .total_cmp(&(tight[q].value - target).norm())
            })
            .unwrap_or(i)
    };

    let mut out = Vec::new();
    let mut warnings = Vec::new();
    let mut done = vec![false; m];
    for g in 0..m {
        let members: Vec<usize> = (0..m).filter(|&i| group[i] == g).collect();
        if members.is_empty() || done[g] {
            continue;
        }
        let mirror = group[conj_of(members[0])];
        done[g] = true;
        done[mirror] = true;
        if members.len() == 1 {
            out.push(tight[members[0]]);
            if mirror != g {
                out.push(tight[conj_of(members[0])]);
            }
            continue;
        }
        let mult: usize = members.iter().map(|&i| tight[i].multiplicity).sum();
        let centroid = members
            .iter()
            .map(|&i| tight[i].value * tight[i].multiplicity as f64)
            .sum::<Complex64>()
            / mult as f64;
        let centroid = if mirror == g {
            Complex64::new(centroid.re, 0.0)
        } else {
            centroid
        };
        let seq = rank_sequence(a, centroid, rank_tol)?;
        let nullity_at = |k: usize| n - seq[k.min(seq.len() - 1)];
        if nullity_at(1) >= 1 && nullity_at(mult) == mult {
            let merged = EigenCluster {
                value: centroid,
                multiplicity: mult,
            };
            out.push(merged);
            if mirror != g {
                out.push(EigenCluster {
                    value: centroid.conj(),
                    multiplicity: mult,
                });
            }
        } else {
            let near: Vec<String> = members
                .iter()
                .map(|&i| format!("{:.6}", tight[i].value))
                .collect();
            warnings.push(format!(
                "eigenvalues {} are close but kept distinct by the rank test",
                near.join(", ")
            ));
            for &i in &members {
                out.push(tight[i]);
                if mirror != g {
                    out.push(tight[conj_of(i)]);
                }
            }
        }
    }
    sort_clusters(&mut out);
    Ok((out, warnings))
}

pub fn analyze(a: &Matrix, unit_tol: f64, rank_tol: f64) -> Result<SpectralReport> {
    analyze_with(
        a,
        &Tolerances {
            unit_tol,
            rank_tol,
            cluster_tol: DEFAULT_CLUSTER_TOL,
        },
    )
}

pub fn analyze_with(a: &Matrix, tols: &Tolerances) -> Result<SpectralReport> {
    tols.validate()?;
    let n = ensure_square(a)?;
    ensure_finite(a, "A")?;
    let raw = raw_eigenvalues(a)?;
    let tight = cluster_eigenvalues(&raw, tols.cluster_tol);
    let (clusters, mut warnings) = merge_defective(a, tight, tols.rank_tol)?;

    for (i, p) in clusters.iter().enumerate() {
        for q in &clusters[i + 1..] {
            let gap = (p.value - q.value).norm();
            if gap < 10.0 * tols.cluster_tol {
                warnings.push(format!(
                    "ambiguous clustering: {:.12} and {:.12} are {gap:.3e} apart",
                    p.value, q.value
                ));
            }
        }
    }

    let clusters = clusters
        .into_iter()
        .map(|c| structure(a, c, tols.rank_tol, tols.unit_tol))
        .collect::<Result<Vec<_>>>()?;
    for c in &clusters {
        if c.geometric == 0 || c.geometric > c.algebraic {
            warnings.push(format!(
                "rank test inconsistent at {:.12}: algebraic {}, geometric {}",
                c.value, c.algebraic, c.geometric
            ));
        }
    }

    let rho = clusters.iter().map(|c| c.value.norm()).fold(0.0, f64::max);
    let unit: Vec<&ClusterStructure> = clusters.iter().filter(|c| c.on_unit_circle).collect();
    let dim_ea = unit.iter().map(|c| c.algebraic).sum();
    let d_max_unit = unit.iter().map(|c| c.block_size).max().unwrap_or(0);
    let stable_part_rho = clusters
        .iter()
        .filter(|c| !c.on_unit_circle)
        .map(|c| c.value.norm())
        .fold(0.0, f64::max);

    Ok(SpectralReport {
        n,
        rho,
        unit_tol: tols.unit_tol,
        clusters,
        dim_ea,
        d_max_unit,
        stable_part_rho,
        warnings,
    })
}

/// Real basis `P` of a critical system with `A = P R P⁻¹`, `R` orthogonal,
/// and the invariant weight `Q⋆ = (PPᵀ)⁻¹`, scaled so that `λ_max(Q⋆) = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealPlaneBasis {
    #[serde(with = "crate::linalg::serde_rows")]
    pub p: Matrix,
    #[serde(with = "crate::linalg::serde_rows")]
    pub q_star: Matrix,
}

/// A real null vector of the 2×2 matrix `A − λI` for a real eigenvalue,
/// or a complex one for a non-real eigenvalue.
fn eigvec_2x2(a: &Matrix, lambda: Complex64) -> Option<[Complex64; 2]> {
    let c = |v: f64| Complex64::new(v, 0.0);
    let first = [c(a[(0, 1)]), lambda - a[(0, 0)]];
    let second = [lambda - a[(1, 1)], c(a[(1, 0)])];
    let norm = |v: &[Complex64; 2]| (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
    let best = if norm(&first) >= norm(&second) {
        first
    } else {
        second
    };
    let scale = norm(&best);
    if scale <= 1e-12 * (1.0 + a.norm()) {
        None
    } else {
        Some([best[0] / scale, best[1] / scale])
    }
}

pub fn unit_plane_basis(a: &Matrix, report: &SpectralReport) -> Result<RealPlaneBasis> {
    let n = ensure_square(a)?;
    if report.n != n || report.dim_ea != n || n > 2 || report.d_max_unit != 1 {
        return Err(Error::Precondition(format!(
            "unit plane basis needs a diagonalizable critical system of dimension 1 or 2 \
             (n = {n}, dim_EA = {}, largest unit block = {})",
            report.dim_ea, report.d_max_unit
        )));
    }
    let degenerate = || Error::Precondition("eigenvector degeneracy in unit plane basis".into());
    let p = if n == 1 {
        Matrix::identity(1, 1)
    } else {
        let unit: Vec<&ClusterStructure> = report.unit_eigs().collect();
        if let Some(pair) = unit.iter().find(|c| c.value.im > 0.0) {
            let v = eigvec_2x2(a, pair.value).ok_or_else(degenerate)?;
            Matrix::from_row_slice(2, 2, &[v[0].re, v[0].im, v[1].re, v[1].im])
        } else if unit.len() == 1 {
            // Diagonalizable with a double real eigenvalue: A = ±I.
            Matrix::identity(2, 2)
        } else {
            let v1 = eigvec_2x2(a, unit[0].value).ok_or_else(degenerate)?;
            let v2 = eigvec_2x2(a, unit[1].value).ok_or_else(degenerate)?;
            Matrix::from_row_slice(2, 2, &[v1[0].re, v2[0].re, v1[1].re, v2[1].re])
        }
    };
    let ppt = &p * p.transpose();
    let q = ppt.try_inverse().ok_or_else(degenerate)?;
    let q = (&q + q.transpose()) * 0.5;
    let (_, lmax) = linalg::symmetric_eigen_range(&q);
    if !(lmax > 0.0 && lmax.is_finite()) {
        return Err(degenerate());
    }
    let q_star = q / lmax;
    let p = p * lmax.sqrt();
    let drift = (a.transpose() * &q_star * a - &q_star).norm();
    if drift > 1e-8 * (1.0 + q_star.norm()) {
        return Err(Error::IllConditioned {
            residual: drift,
            bound: 1e-8 * (1.0 + q_star.norm()),
        });
    }
    Ok(RealPlaneBasis { p, q_star })
}
