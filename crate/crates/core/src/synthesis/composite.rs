use std::f64::consts::E;

use nalgebra::SVD;
use serde::{Deserialize, Serialize};

use super::logarithmic::{log_core, LogCertificate, LogOptions};
use super::quadratic::{quadratic_core, QuadraticCertificate};
use super::delta_ladder;
use crate::error::{Error, Result};
use crate::linalg::{check_spd, quadratic_form, symmetric_eigen_range, Matrix, Vector};
use crate::spectral::{analyze_with, SpectralReport};
use crate::system::{Dynamics, LinearSystem, TargetBall};
use crate::verifier::Certificate;

/// Largest condition number accepted for the unit/stable change of basis.
pub const MAX_SPLIT_CONDITION: f64 = 1e8;

/// Real change of basis `T = [T_u | T_s]` separating the unit-circle
/// invariant subspace from the stable one, so `T⁻¹AT = diag(A_u, A_s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceSplit {
    pub t: Matrix,
    pub t_inv: Matrix,
    pub unit_dim: usize,
    pub projector: Matrix,
    pub a_unit: Matrix,
    pub a_stable: Matrix,
    pub condition: f64,
}

/// `p_u(A) = ∏ (A − λI)^a` over unit clusters, with conjugate pairs folded
/// into the real quadratic `A² − 2 Re λ A + |λ|² I`.
fn unit_polynomial(a: &Matrix, report: &SpectralReport) -> Matrix {
    let n = a.nrows();
    let id = Matrix::identity(n, n);
    let mut m = id.clone();
    for c in report.unit_eigs() {
        let factor = if c.value.im == 0.0 {
            a - &id * c.value.re
        } else if c.value.im > 0.0 {
            a * a - a * (2.0 * c.value.re) + &id * c.value.norm_sqr()
        } else {
            continue;
        };
        for _ in 0..c.algebraic {
            m = &m * &factor;
        }
    }
    m
}

pub fn invariant_split(a: &Matrix, report: &SpectralReport) -> Result<SubspaceSplit> {
    let n = a.nrows();
    let d = report.dim_ea;
    if d == 0 || d >= n {
        return Err(Error::Precondition(format!(
            "invariant split needs both a unit and a stable part (dim_EA = {d}, n = {n})"
        )));
    }
    let p = unit_polynomial(a, report);
    let svd = SVD::new(p, true, true);
    let u = svd.u.expect("requested U");
    let v = svd.v_t.expect("requested Vᵀ").transpose();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let sigma_max = svd.singular_values[order[0]];
    let keep = n - d;
    let gap_low = svd.singular_values[order[keep - 1]];
    let gap_high = if keep < n {
        svd.singular_values[order[keep]]
    } else {
        0.0
    };
    if !(gap_low > 1e-8 * sigma_max) || gap_high > 1e-6 * gap_low {
        return Err(Error::SubspaceSplit {
            condition: if gap_high > 0.0 {
                gap_low / gap_high
            } else {
                f64::INFINITY
            },
        });
    }
    let mut t = Matrix::zeros(n, n);
    for (col, &k) in order[keep..].iter().enumerate() {
        t.set_column(col, &v.column(k));
    }
    for (col, &k) in order[..keep].iter().enumerate() {
        t.set_column(d + col, &u.column(k));
    }
    let sv = t.singular_values();
    let condition = sv.max() / sv.min();
    if !(condition <= MAX_SPLIT_CONDITION) {
        return Err(Error::SubspaceSplit { condition });
    }
    let t_inv = t
        .clone()
        .try_inverse()
        .ok_or(Error::SubspaceSplit { condition })?;
    let block = &t_inv * a * &t;
    let off = block.view((0, d), (d, keep)).norm() + block.view((d, 0), (keep, d)).norm();
    if off > 1e-8 * (1.0 + a.norm()) * condition {
        return Err(Error::SubspaceSplit { condition });
    }
    let mut selector = Matrix::zeros(n, n);
    for i in 0..d {
        selector[(i, i)] = 1.0;
    }
    let projector = &t * selector * &t_inv;
    let idem = (&projector * &projector - &projector).norm();
    if idem > 1e-8 * (1.0 + projector.norm()) {
        return Err(Error::SubspaceSplit { condition });
    }
    Ok(SubspaceSplit {
        a_unit: block.view((0, 0), (d, d)).into_owned(),
        a_stable: block.view((d, d), (keep, keep)).into_owned(),
        t,
        t_inv,
        unit_dim: d,
        projector,
        condition,
    })
}

/// Additive candidate `V(x) = V_log(z_u) + V_quad(z_s)` in split coordinates
/// `z = T⁻¹x`, with variant `U(x) = ‖z_u‖⋆² + z_sᵀQz_s − b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositeCertificate {
    #[serde(with = "crate::linalg::serde_rows")]
    pub split: Matrix,
    #[serde(with = "crate::linalg::serde_rows")]
    pub split_inverse: Matrix,
    pub unit_dim: usize,
    pub log_part: LogCertificate,
    pub quadratic_part: QuadraticCertificate,
    /// `T⁻ᵀ diag(Q⋆, Q) T⁻¹`, the variant's quadratic form in `x`.
    #[serde(with = "crate::linalg::serde_rows")]
    pub weight: Matrix,
    pub variant_b: f64,
    pub delta: f64,
    pub epsilon: f64,
    /// Radius in the `weight` norm.
    pub compact_radius: f64,
    pub verified: bool,
}

fn combined_weight(t_inv: &Matrix, q_star: &Matrix, q: &Matrix) -> Matrix {
    let d = q_star.nrows();
    let n = d + q.nrows();
    let mut blocks = Matrix::zeros(n, n);
    blocks.view_mut((0, 0), (d, d)).copy_from(q_star);
    blocks.view_mut((d, d), (n - d, n - d)).copy_from(q);
    let w = t_inv.transpose() * blocks * t_inv;
    (&w + w.transpose()) * 0.5
}

impl CompositeCertificate {
    pub fn validate(&self) -> Result<()> {
        self.log_part.validate()?;
        self.quadratic_part.validate()?;
        let n = self.split.nrows();
        if self.unit_dim + self.quadratic_part.q.nrows() != n
            || self.log_part.q_star.nrows() != self.unit_dim
        {
            return Err(Error::Config("composite part dimensions do not add up".into()));
        }
        let prod = &self.split * &self.split_inverse - Matrix::identity(n, n);
        if prod.norm() > 1e-8 * (1.0 + self.split.norm() * self.split_inverse.norm()) {
            return Err(Error::Config("split_inverse is not the inverse of split".into()));
        }
        check_spd(&self.weight, "composite weight")?;
        if !(self.variant_b > 0.0 && self.delta > 0.0 && self.compact_radius.is_finite()) {
            return Err(Error::Config("composite constants must be positive".into()));
        }
        Ok(())
    }

    fn parts(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let z = &self.split_inverse * Vector::from_column_slice(x);
        let (u, s) = z.as_slice().split_at(self.unit_dim);
        (u.to_vec(), s.to_vec())
    }

    fn weight_sq(&self, x: &[f64]) -> f64 {
        quadratic_form(&Vector::from_column_slice(x), &self.weight).max(0.0)
    }
}

pub fn synthesize_composite(
    system: &LinearSystem,
    target: &TargetBall,
    opts: &LogOptions,
) -> Result<CompositeCertificate> {
    let n = system.state_dim();
    if target.dim() != n {
        return Err(Error::DimensionMismatch {
            context: "target center",
            expected: n,
            found: target.dim(),
        });
    }
    let report = analyze_with(system.a(), &opts.tols)?;
    if report.dim_ea == 0 || report.dim_ea > 2 || report.d_max_unit != 1 {
        return Err(Error::Precondition(format!(
            "composite certificate needs a diagonalizable unit part of dimension 1 or 2 \
             (dim_EA = {}, largest unit block = {})",
            report.dim_ea, report.d_max_unit
        )));
    }
    if !report.has_stable_part() {
        return Err(Error::Precondition(
            "no stable part; use the logarithmic certificate".into(),
        ));
    }
    let split = invariant_split(system.a(), &report)?;
    let d = split.unit_dim;
    let bt = &split.t_inv * system.b();
    let b_unit = bt.rows(0, d).into_owned();
    let b_stable = bt.rows(d, n - d).into_owned();
    let unit_sys = LinearSystem::new(split.a_unit.clone(), b_unit.clone(), system.noise().clone())?;
    let log = log_core(&unit_sys, opts)?;
    let cov = system.noise().covariance();
    let quad = quadratic_core(&split.a_stable, &b_stable, &cov)?;

    let weight = combined_weight(&split.t_inv, &log.q_star, &quad.q);
    let b = target.quadratic_level_inside(&weight)? / 2.0;
    let t1_unit = (b_unit.transpose() * &log.q_star * &b_unit * &cov).trace();
    let (_, q_max) = symmetric_eigen_range(&quad.q);
    let compact_radius =
        (log.compact_radius_star.powi(2) + q_max * (quad.trace + t1_unit)).sqrt();

    let mut cert = CompositeCertificate {
        split: split.t,
        split_inverse: split.t_inv,
        unit_dim: d,
        log_part: LogCertificate {
            q_star: log.q_star,
            domain_threshold: E,
            compact_radius_star: log.compact_radius_star,
            variant_b: b,
            delta: b,
            epsilon: 0.0,
            scan: log.scan,
        },
        quadratic_part: QuadraticCertificate::from_core(quad, b),
        weight,
        variant_b: b,
        delta: b,
        epsilon: 0.0,
        compact_radius,
        verified: false,
    };
    let (delta, epsilon) = delta_ladder(system, &cert, b, &opts.ladder)?;
    cert.delta = delta;
    cert.epsilon = epsilon;
    cert.log_part.delta = delta;
    cert.log_part.epsilon = epsilon;
    Ok(cert)
}

impl Certificate for CompositeCertificate {
    fn kind(&self) -> &'static str {
        "composite"
    }

    fn dim(&self) -> usize {
        self.split.nrows()
    }

    fn drift(&self, x: &[f64]) -> f64 {
        let (u, s) = self.parts(x);
        self.log_part.drift(&u) + self.quadratic_part.drift(&s)
    }

    fn drift_increment(&self, x: &[f64], next: &[f64]) -> f64 {
        let (u, s) = self.parts(x);
        let (u1, s1) = self.parts(next);
        self.log_part.drift_increment(&u, &u1) + self.quadratic_part.drift(&s1)
            - self.quadratic_part.drift(&s)
    }

    fn variant(&self, x: &[f64]) -> f64 {
        self.weight_sq(x) - self.variant_b
    }

    fn h_bound(&self, r: f64) -> f64 {
        (2.0 * r * r).exp() + r - self.variant_b
    }

    fn delta(&self) -> f64 {
        self.delta
    }

    fn compact_radius(&self) -> f64 {
        self.compact_radius
    }

    fn shell_point(&self, direction: &[f64], radius: f64) -> Vec<f64> {
        let norm = self.weight_sq(direction).sqrt();
        direction.iter().map(|c| c * radius / norm).collect()
    }

    fn sublevel_box(&self, r: f64) -> Option<(Vec<f64>, Vec<f64>)> {
        let (_, unit_hi) = self.log_part.sublevel_box(r)?;
        let (_, stable_hi) = self.quadratic_part.sublevel_box(r)?;
        let z_hi: Vec<f64> = unit_hi.into_iter().chain(stable_hi).collect();
        let n = self.dim();
        let hi: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|j| self.split[(i, j)].abs() * z_hi[j]).sum())
            .collect();
        let lo = hi.iter().map(|h| -h).collect();
        Some((lo, hi))
    }

    fn variant_boundary_point(&self, direction: &[f64]) -> Option<Vec<f64>> {
        let s = self.weight_sq(direction);
        (s > 0.0).then(|| {
            let k = (self.variant_b / s).sqrt();
            direction.iter().map(|c| c * k).collect()
        })
    }

    fn default_levels(&self) -> Vec<f64> {
        vec![2.0, 3.0, 4.0]
    }
}
