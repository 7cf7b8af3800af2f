//! Dense real-matrix primitives: eigenvalues with clustering, numerical rank,
//! weighted norms and the discrete Lyapunov solve.
//!
//! Everything here is small-dimensional (a handful of states), so the
//! routines favour checkable direct methods over iterative ones.

use nalgebra::{ComplexField, DMatrix, DVector, Schur, SymmetricEigen, SVD};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

pub const DEFAULT_CLUSTER_TOL: f64 = 1e-8;
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Margin below 1 that the Lyapunov solve requires of the spectral radius.
pub const LYAPUNOV_RHO_MARGIN: f64 = 1e-9;

const SCHUR_MAX_SWEEPS: usize = 1000;

/// Build a matrix from row vectors, rejecting ragged or non-finite input.
pub fn from_rows(rows: &[Vec<f64>]) -> Result<Matrix> {
    let nrows = rows.len();
    if nrows == 0 {
        return Err(Error::Config("matrix has no rows".into()));
    }
    let ncols = rows[0].len();
    if ncols == 0 {
        return Err(Error::Config("matrix has no columns".into()));
    }
    for row in rows {
        if row.len() != ncols {
            return Err(Error::DimensionMismatch {
                context: "matrix row length",
                expected: ncols,
                found: row.len(),
            });
        }
    }
    let m = Matrix::from_fn(nrows, ncols, |i, j| rows[i][j]);
    ensure_finite(&m, "matrix entries")?;
    Ok(m)
}

pub fn to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn ensure_finite(m: &Matrix, context: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(context.to_string()))
    }
}

pub fn ensure_square(m: &Matrix) -> Result<usize> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::NonSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

/// One eigenvalue cluster with its algebraic multiplicity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenCluster {
    pub value: Complex64,
    pub multiplicity: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexSpectrum {
    pub clusters: Vec<EigenCluster>,
}

impl ComplexSpectrum {
    pub fn dimension(&self) -> usize {
        self.clusters.iter().map(|c| c.multiplicity).sum()
    }

    pub fn spectral_radius(&self) -> f64 {
        self.clusters
            .iter()
            .map(|c| c.value.norm())
            .fold(0.0, f64::max)
    }
}

/// Raw eigenvalues of a real square matrix, read off its real Schur form.
///
/// Conjugate pairs are produced exactly conjugate (same real part, negated
/// imaginary part), real eigenvalues have an exactly zero imaginary part.
pub fn raw_eigenvalues(m: &Matrix) -> Result<Vec<Complex64>> {
    let n = ensure_square(m)?;
    ensure_finite(m, "eigenvalue input")?;
    if n == 1 {
        return Ok(vec![Complex64::new(m[(0, 0)], 0.0)]);
    }
    let schur = Schur::try_new(m.clone(), f64::EPSILON, SCHUR_MAX_SWEEPS * n)
        .ok_or(Error::EigenNonConvergence)?;
    let (_, t) = schur.unpack();
    let mut out = Vec::with_capacity(n);
    let mut k = 0;
    while k < n {
        if k + 1 < n && t[(k + 1, k)] != 0.0 {
            let (a, b, c, d) = (t[(k, k)], t[(k, k + 1)], t[(k + 1, k)], t[(k + 1, k + 1)]);
            let half_trace = 0.5 * (a + d);
            let half_diff = 0.5 * (a - d);
            let discr = half_diff * half_diff + b * c;
            if discr >= 0.0 {
                let s = discr.sqrt();
                out.push(Complex64::new(half_trace + s, 0.0));
                out.push(Complex64::new(half_trace - s, 0.0));
            } else {
                let s = (-discr).sqrt();
                out.push(Complex64::new(half_trace, s));
                out.push(Complex64::new(half_trace, -s));
            }
            k += 2;
        } else {
            out.push(Complex64::new(t[(k, k)], 0.0));
            k += 1;
        }
    }
    if out.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::EigenNonConvergence);
    }
    Ok(out)
}

/// Single-linkage clustering of a conjugation-symmetric eigenvalue list.
///
/// Cluster representatives are centroids; a cluster that contains its own
/// conjugate gets a real representative, and the representatives of mirror
/// clusters are exact conjugates of each other.
pub fn cluster_eigenvalues(raw: &[Complex64], cluster_tol: f64) -> Vec<EigenCluster> {
    let n = raw.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while parent[r] != r {
            r = parent[r];
        }
        let mut j = i;
        while parent[j] != r {
            let next = parent[j];
            parent[j] = r;
            j = next;
        }
        r
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (raw[i] - raw[j]).norm() <= cluster_tol {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let roots: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut root_to_group = vec![usize::MAX; n];
    for (i, &r) in roots.iter().enumerate() {
        if root_to_group[r] == usize::MAX {
            root_to_group[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[root_to_group[r]].push(i);
    }

    // The group holding the conjugate partner of each group's first member.
    let partner = |i: usize| -> usize {
        let target = raw[i].conj();
        (0..n)
            .min_by(|&a, &b| {
                (raw[a] - target)
                    .norm()
                    .total_cmp(&(raw[b] - target).norm())
            })
            .unwrap_or(i)
    };
    let mut values: Vec<Option<Complex64>> = vec![None; groups.len()];
    for g in 0..groups.len() {
        if values[g].is_some() {
            continue;
        }
        let members = &groups[g];
        let mirror = root_to_group[roots[partner(members[0])]];
        let centroid = members.iter().map(|&i| raw[i]).sum::<Complex64>() / members.len() as f64;
        if mirror == g || groups[mirror].len() != members.len() {
            values[g] = Some(Complex64::new(centroid.re, 0.0));
        } else {
            let upper = if centroid.im >= 0.0 {
                centroid
            } else {
                centroid.conj()
            };
            let (mine, theirs) = if centroid.im >= 0.0 {
                (upper, upper.conj())
            } else {
                (upper.conj(), upper)
            };
            values[g] = Some(mine);
            values[mirror] = Some(theirs);
        }
    }
    let mut clusters: Vec<EigenCluster> = groups
        .iter()
        .zip(values)
        .map(|(members, v)| EigenCluster {
            value: v.expect("every group assigned"),
            multiplicity: members.len(),
        })
        .collect();
    sort_clusters(&mut clusters);
    clusters
}

/// Order clusters by decreasing modulus, then decreasing real and imaginary part.
pub fn sort_clusters(clusters: &mut [EigenCluster]) {
    clusters.sort_by(|a, b| {
        b.value
            .norm()
            .total_cmp(&a.value.norm())
            .then(b.value.re.total_cmp(&a.value.re))
            .then(b.value.im.total_cmp(&a.value.im))
    });
}

pub fn eigen_decompose(m: &Matrix, cluster_tol: f64) -> Result<ComplexSpectrum> {
    if !(cluster_tol > 0.0) {
        return Err(Error::Precondition("cluster_tol must be positive".into()));
    }
    let raw = raw_eigenvalues(m)?;
    Ok(ComplexSpectrum {
        clusters: cluster_eigenvalues(&raw, cluster_tol),
    })
}

pub fn spectral_radius(m: &Matrix) -> Result<f64> {
    Ok(eigen_decompose(m, DEFAULT_CLUSTER_TOL)?.spectral_radius())
}

/// Solve `AᵀQA = Q − I` for symmetric positive definite `Q`.
///
/// The equation is vectorized as `(I − Aᵀ⊗Aᵀ) vec(Q) = vec(I)` and solved
/// directly; the result is symmetrized and its residual checked.
pub fn solve_discrete_lyapunov(a: &Matrix) -> Result<Matrix> {
    let n = ensure_square(a)?;
    ensure_finite(a, "Lyapunov input")?;
    let rho = spectral_radius(a)?;
    if rho >= 1.0 - LYAPUNOV_RHO_MARGIN {
        return Err(Error::LyapunovUnstable { rho });
    }
    let at = a.transpose();
    let lhs = Matrix::identity(n * n, n * n) - at.kronecker(&at);
    let rhs = Vector::from_iterator(
        n * n,
        (0..n * n).map(|k| if k % n == k / n { 1.0 } else { 0.0 }),
    );
    let vec_q = lhs
        .full_piv_lu()
        .solve(&rhs)
        .ok_or(Error::LyapunovUnstable { rho })?;
    let q = Matrix::from_column_slice(n, n, vec_q.as_slice());
    let q = (&q + q.transpose()) * 0.5;
    ensure_finite(&q, "Lyapunov solution")?;

    let residual = lyapunov_residual(a, &q);
    let bound = 1e-9 * (1.0 + q.norm());
    if !(residual <= bound) {
        return Err(Error::IllConditioned { residual, bound });
    }
    if !is_positive_definite(&q) {
        return Err(Error::NotPositiveDefinite(
            "Lyapunov solution has a non-positive eigenvalue".into(),
        ));
    }
    Ok(q)
}

/// `‖AᵀQA − Q + I‖_F`.
pub fn lyapunov_residual(a: &Matrix, q: &Matrix) -> f64 {
    let n = a.nrows();
    (a.transpose() * q * a - q + Matrix::identity(n, n)).norm()
}

fn rank_of<T>(m: &DMatrix<T>, rank_tol: f64, scale: f64) -> Result<usize>
where
    T: ComplexField<RealField = f64>,
{
    if m.iter().any(|v| !v.clone().is_finite()) {
        return Err(Error::NonFinite("rank input".into()));
    }
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(0);
    }
    let svd = SVD::try_new(m.clone(), false, false, f64::EPSILON, 0)
        .ok_or(Error::EigenNonConvergence)?;
    let sv = svd.singular_values;
    let largest = sv.iter().copied().fold(0.0, f64::max).max(scale);
    if largest == 0.0 {
        return Ok(0);
    }
    Ok(sv.iter().filter(|&&s| s > rank_tol * largest).count())
}

/// Number of singular values above `rank_tol` times the largest one.
pub fn numerical_rank(m: &Matrix, rank_tol: f64) -> Result<usize> {
    rank_of(m, rank_tol, 0.0)
}

pub fn numerical_rank_complex(m: &DMatrix<Complex64>, rank_tol: f64) -> Result<usize> {
    rank_of(m, rank_tol, 0.0)
}

/// Like [`numerical_rank_complex`], but singular values are also compared
/// against `rank_tol · scale`, so a matrix that is pure rounding noise
/// relative to `scale` has rank 0.
pub fn numerical_rank_complex_scaled(
    m: &DMatrix<Complex64>,
    rank_tol: f64,
    scale: f64,
) -> Result<usize> {
    rank_of(m, rank_tol, scale)
}

/// `√(xᵀQx)`; tiny negative rounding of the quadratic form is clamped to 0.
pub fn weighted_norm(x: &Vector, q: &Matrix) -> Result<f64> {
    if q.nrows() != x.len() || q.ncols() != x.len() {
        return Err(Error::DimensionMismatch {
            context: "weighted norm",
            expected: q.nrows(),
            found: x.len(),
        });
    }
    Ok(quadratic_form(x, q).max(0.0).sqrt())
}

pub(crate) fn quadratic_form(x: &Vector, q: &Matrix) -> f64 {
    let n = x.len();
    let mut acc = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            row += q[(i, j)] * x[j];
        }
        acc += x[i] * row;
    }
    acc
}

pub fn is_symmetric(q: &Matrix, tol: f64) -> bool {
    q.is_square() && (q - q.transpose()).norm() <= tol * (1.0 + q.norm())
}

pub fn is_positive_definite(q: &Matrix) -> bool {
    q.is_square()
        && is_symmetric(q, 1e-10)
        && q.clone().cholesky().is_some()
        && symmetric_eigen_range(q).0 > 0.0
}

/// Reject matrices that are not symmetric positive definite.
pub fn check_spd(q: &Matrix, what: &str) -> Result<()> {
    ensure_square(q)?;
    ensure_finite(q, what)?;
    if !is_symmetric(q, 1e-10) {
        return Err(Error::NotPositiveDefinite(format!("{what} is not symmetric")));
    }
    if !is_positive_definite(q) {
        return Err(Error::NotPositiveDefinite(format!(
            "{what} has a non-positive eigenvalue"
        )));
    }
    Ok(())
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn symmetric_eigen_range(q: &Matrix) -> (f64, f64) {
    let eig = SymmetricEigen::new((q + q.transpose()) * 0.5);
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let max = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    (min, max)
}

/// Extreme eigenvalues of the pencil `M − μW` for symmetric `M` and SPD `W`,
/// i.e. of `W⁻¹M`.
pub fn generalized_eigen_range(m: &Matrix, w: &Matrix) -> Result<(f64, f64)> {
    let chol = w
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("pencil weight".into()))?;
    let l_inv = chol
        .l()
        .try_inverse()
        .ok_or_else(|| Error::NotPositiveDefinite("pencil weight".into()))?;
    let reduced = &l_inv * m * l_inv.transpose();
    Ok(symmetric_eigen_range(&reduced))
}

/// Symmetric PD square root.
pub fn spd_sqrt(q: &Matrix) -> Matrix {
    let eig = SymmetricEigen::new((q + q.transpose()) * 0.5);
    let d = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * Matrix::from_diagonal(&d) * eig.eigenvectors.transpose()
}

/// Serde adapters that write matrices as arrays of rows and vectors as arrays.
pub mod serde_rows {
    use super::{from_rows, to_rows, Matrix};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &Matrix, s: S) -> Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Matrix, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

pub mod serde_vector {
    use super::Vector;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Vector, s: S) -> Result<S::Ok, S::Error> {
        v.as_slice().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vector, D::Error> {
        let data = Vec::<f64>::deserialize(d)?;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(serde::de::Error::custom("non-finite vector entry"));
        }
        Ok(Vector::from_vec(data))
    }
}
