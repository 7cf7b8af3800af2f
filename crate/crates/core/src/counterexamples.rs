//! The two template counterexamples: a planar polynomial system that reaches
//! `G = (0,1)²` almost surely yet admits no polynomial drift function, and
//! the scalar random walk, which admits no quadratic one.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::synthesis::{delta_ladder, LadderOptions};
use crate::system::{
    Dynamics, LinearSystem, NoiseModel, PolynomialSystem, TargetBall, TargetNorm, TrajectorySeed,
};
use crate::verifier::{
    mc_drift, shell_directions, verify_drift, verify_variant, Certificate, DriftPlan, DriftReport,
    VariantReport,
};

/// `ξ⁺ = ½ξ(1 + η + w)`, `η⁺ = ½η`, `w ~ U[−1, 1]`.
pub fn example1_system() -> PolynomialSystem {
    PolynomialSystem::parse(
        &["0.5*x1*(1 + x2 + w1)", "0.5*x2"],
        NoiseModel::uniform_intervals(vec![1.0]).expect("unit interval"),
    )
    .expect("fixed transition parses")
}

/// `G = {0 < ξ < 1, 0 < η < 1}`.
pub fn example1_target() -> TargetBall {
    TargetBall::new(Vector::from_vec(vec![0.5, 0.5]), 0.5, TargetNorm::Max).expect("unit box")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example1Instance {
    pub i: u32,
    pub u: f64,
    pub x0: [f64; 2],
    /// Step at which `η` reaches `u`.
    pub crossing_time: u32,
    /// `log₂` bounds on `ξ` at the crossing time.
    pub lower: f64,
    pub upper: f64,
}

impl Example1Instance {
    pub fn new(i: u32, u: f64) -> Result<Self> {
        if i == 0 {
            return Err(Error::Precondition("initial exponent i must be positive".into()));
        }
        if !(u >= 1.0 && u.is_finite()) {
            return Err(Error::Precondition(format!("u must be at least 1, got {u}")));
        }
        let fi = i as f64;
        let p = 2f64.powi(i as i32);
        Ok(Self {
            i,
            u,
            x0: [p, p * u],
            crossing_time: i,
            lower: fi * u.log2() + fi * (fi + 1.0) / 2.0,
            upper: fi * u.log2() + fi * (fi + 3.0) / 2.0,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Example1Point {
    pub k: u32,
    pub log2_xi: f64,
    pub eta: f64,
}

fn check_noise(noise: &[f64], needed: u32) -> Result<()> {
    if noise.len() < needed as usize {
        return Err(Error::DimensionMismatch {
            context: "noise sequence",
            expected: needed as usize,
            found: noise.len(),
        });
    }
    if let Some(w) = noise.iter().find(|w| !(w.abs() <= 1.0)) {
        return Err(Error::Precondition(format!("noise value {w} outside [-1, 1]")));
    }
    Ok(())
}

/// Closed-form `(log₂ ξ_k, η_k)` for `k = 0..=k*`.
pub fn example1_closed_form(inst: &Example1Instance, noise: &[f64]) -> Result<Vec<Example1Point>> {
    check_noise(noise, inst.crossing_time)?;
    let i = inst.i as i32;
    let mut log2_xi = inst.i as f64;
    let mut out = Vec::with_capacity(inst.crossing_time as usize + 1);
    for k in 0..=inst.crossing_time {
        out.push(Example1Point {
            k,
            log2_xi,
            eta: inst.u * 2f64.powi(i - k as i32),
        });
        if k < inst.crossing_time {
            let arg = 0.5 * (1.0 + inst.u * 2f64.powi(i - k as i32) + noise[k as usize]);
            if !(arg > 0.0) {
                return Err(Error::Precondition(format!(
                    "nonpositive factor {arg} at step {k}"
                )));
            }
            log2_xi += arg.log2();
        }
    }
    Ok(out)
}

/// `log₂ ξ_k` from iterating the transition map directly.
pub fn example1_simulated_log2(inst: &Example1Instance, noise: &[f64]) -> Result<Vec<f64>> {
    check_noise(noise, inst.crossing_time)?;
    let sys = example1_system();
    let mut x = inst.x0.to_vec();
    let mut next = vec![0.0; 2];
    let mut out = vec![x[0].log2()];
    for k in 0..inst.crossing_time as usize {
        sys.step_into(&x, &noise[k..k + 1], &mut next);
        std::mem::swap(&mut x, &mut next);
        if !x[0].is_finite() {
            return Err(Error::Overflow { step: k + 1 });
        }
        out.push(x[0].log2());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub instance: Example1Instance,
    pub sequences: usize,
    pub seed: u64,
    pub min_log2_xi: f64,
    pub max_log2_xi: f64,
    pub violations: usize,
}

impl BoundCheck {
    pub fn pass(&self) -> bool {
        self.violations == 0
    }
}

/// `log₂ ξ_{k*}` over `sequences` i.i.d. noise sequences against the bounds.
pub fn example1_bound_check(i: u32, u: f64, sequences: usize, seed: u64) -> Result<BoundCheck> {
    let inst = Example1Instance::new(i, u)?;
    let noise = NoiseModel::uniform_intervals(vec![1.0])?;
    let values = (0..sequences)
        .into_par_iter()
        .map(|s| {
            let mut rng = TrajectorySeed::new(seed, s as u64).rng();
            let mut w = vec![0.0; i as usize];
            for v in w.iter_mut() {
                noise.sample_into(&mut rng, std::slice::from_mut(v));
            }
            let path = example1_closed_form(&inst, &w)?;
            Ok(path.last().expect("nonempty path").log2_xi)
        })
        .collect::<Result<Vec<f64>>>()?;
    let violations = values
        .iter()
        .filter(|&&v| v < inst.lower || v > inst.upper)
        .count();
    Ok(BoundCheck {
        sequences,
        seed,
        min_log2_xi: values.iter().copied().fold(f64::INFINITY, f64::min),
        max_log2_xi: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        violations,
        instance: inst,
    })
}

/// `V(ξ, η) = Σ_{ℓ+j ≤ d} a_{ℓj} ξ^ℓ η^j`, stored as `coefficients[ℓ][j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyCandidate {
    pub degree: u32,
    pub coefficients: Vec<Vec<f64>>,
}

impl PolyCandidate {
    pub fn new(degree: u32, coefficients: Vec<Vec<f64>>) -> Result<Self> {
        let d = degree as usize;
        if coefficients.len() != d + 1
            || coefficients.iter().enumerate().any(|(l, row)| row.len() != d + 1 - l)
        {
            return Err(Error::Config(format!(
                "coefficient rows must have lengths {}..1 for degree {degree}",
                d + 1
            )));
        }
        if coefficients.iter().flatten().any(|a| !a.is_finite()) {
            return Err(Error::NonFinite("polynomial coefficient".into()));
        }
        Ok(Self {
            degree,
            coefficients,
        })
    }

    /// From the `(d+1)(d+2)/2` coefficients in `(ℓ, j)` lexicographic order.
    pub fn from_flat(degree: u32, flat: &[f64]) -> Result<Self> {
        let d = degree as usize;
        if flat.len() != (d + 1) * (d + 2) / 2 {
            return Err(Error::Config(format!(
                "degree {degree} needs {} coefficients, got {}",
                (d + 1) * (d + 2) / 2,
                flat.len()
            )));
        }
        let mut rows = Vec::with_capacity(d + 1);
        let mut at = 0;
        for l in 0..=d {
            rows.push(flat[at..at + d + 1 - l].to_vec());
            at += d + 1 - l;
        }
        Self::new(degree, rows)
    }

    /// Some `a_{ℓj} ≠ 0` with `ℓ > 0`.
    pub fn radially_unbounded_flag(&self) -> bool {
        self.coefficients.iter().skip(1).flatten().any(|&a| a != 0.0)
    }

    pub fn eval(&self, xi: f64, eta: f64) -> f64 {
        let mut total = 0.0;
        for (l, row) in self.coefficients.iter().enumerate() {
            for (j, a) in row.iter().enumerate() {
                total += a * xi.powi(l as i32) * eta.powi(j as i32);
            }
        }
        total
    }

    /// Coefficients of `ξ ↦ V(ξ, u)`.
    fn ray_coefficients(&self, u: f64) -> Vec<f64> {
        self.coefficients
            .iter()
            .map(|row| row.iter().enumerate().map(|(j, a)| a * u.powi(j as i32)).sum())
            .collect()
    }
}

/// A real number as `sign · 2^log2`; `sign = 0` is zero.
#[derive(Debug, Clone, Copy, PartialEq)]
struct SignedLog {
    sign: f64,
    log2: f64,
}

fn signed_log_sum(terms: &[SignedLog]) -> SignedLog {
    let top = terms
        .iter()
        .filter(|t| t.sign != 0.0)
        .map(|t| t.log2)
        .fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return SignedLog {
            sign: 0.0,
            log2: f64::NEG_INFINITY,
        };
    }
    let mut live: Vec<&SignedLog> = terms.iter().filter(|t| t.sign != 0.0).collect();
    live.sort_by(|a, b| b.log2.total_cmp(&a.log2));
    let s: f64 = live.iter().map(|t| t.sign * (t.log2 - top).exp2()).sum();
    if s == 0.0 {
        SignedLog {
            sign: 0.0,
            log2: f64::NEG_INFINITY,
        }
    } else {
        SignedLog {
            sign: s.signum(),
            log2: top + s.abs().log2(),
        }
    }
}

/// Relative margin a violation must clear.
pub const REFUTATION_MARGIN: f64 = 1e-12;

/// Both sides of `V(u^i 2^{i(i+1)/2}, u) ≤ V(2^i, 2^i u)` as signed log₂ values.
///
/// Terms are first combined by power of `ξ` on the left and by total degree
/// on the right, so exact cancellations happen before the log-domain sum.
fn refutation_sides(c: &PolyCandidate, u: f64, i: u32) -> (SignedLog, SignedLog) {
    let fi = i as f64;
    let lu = u.log2();
    let signed = |coef: f64, log2_power: f64| SignedLog {
        sign: coef.signum(),
        log2: coef.abs().log2() + log2_power,
    };
    let left: Vec<SignedLog> = c
        .ray_coefficients(u)
        .iter()
        .enumerate()
        .filter(|(_, &a)| a != 0.0)
        .map(|(l, &a)| signed(a, l as f64 * (fi * lu + fi * (fi + 1.0) / 2.0)))
        .collect();
    let d = c.degree as usize;
    let mut by_degree = vec![0.0; d + 1];
    for (l, row) in c.coefficients.iter().enumerate() {
        for (j, a) in row.iter().enumerate() {
            by_degree[l + j] += a * u.powi(j as i32);
        }
    }
    let right: Vec<SignedLog> = by_degree
        .iter()
        .enumerate()
        .filter(|(_, &a)| a != 0.0)
        .map(|(t, &a)| signed(a, t as f64 * fi))
        .collect();
    (signed_log_sum(&left), signed_log_sum(&right))
}

fn strictly_exceeds(left: SignedLog, right: SignedLog) -> bool {
    let diff = signed_log_sum(&[left, SignedLog { sign: -right.sign, ..right }]);
    let scale = left.log2.max(right.log2);
    diff.sign > 0.0 && (scale == f64::NEG_INFINITY || diff.log2 > scale + REFUTATION_MARGIN.log2())
}

/// Smallest `i ≤ i_max` at which the candidate violates the inequality every
/// polynomial drift function must satisfy, if any.
///
/// Rejects candidates without an `ℓ > 0` term, and candidates for which
/// `V(ξ, u)` does not tend to `+∞` with `ξ`: such a `V` is not radially
/// unbounded along the ray `η = u`.
pub fn refute_polynomial_drift(candidate: &PolyCandidate, u: f64, i_max: u32) -> Result<Option<u32>> {
    if !(u >= 1.0 && u.is_finite()) {
        return Err(Error::Precondition(format!("u must be at least 1, got {u}")));
    }
    if !candidate.radially_unbounded_flag() {
        return Err(Error::NotRadiallyUnbounded(
            "every coefficient with a positive power of xi is zero".into(),
        ));
    }
    let ray = candidate.ray_coefficients(u);
    match ray.iter().rposition(|&c| c != 0.0) {
        Some(top) if top > 0 && ray[top] > 0.0 => {}
        _ => {
            return Err(Error::NotRadiallyUnbounded(format!(
                "V(xi, {u}) does not grow to +infinity in xi"
            )))
        }
    }
    Ok((1..=i_max).find(|&i| {
        let (l, r) = refutation_sides(candidate, u, i);
        strictly_exceeds(l, r)
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefutationSweep {
    pub u: f64,
    pub i_max: u32,
    pub exhaustive_degree: u32,
    pub sampled_degree: u32,
    pub sampled: usize,
    pub seed: u64,
    pub candidates: usize,
    /// Flagged candidates that do not grow along `η = u`.
    pub not_unbounded: usize,
    pub refuted: usize,
    pub max_witness: u32,
    pub unrefuted: Vec<PolyCandidate>,
}

impl RefutationSweep {
    pub fn pass(&self) -> bool {
        self.unrefuted.is_empty() && self.refuted > 0
    }
}

pub const COEFFICIENT_RANGE: [f64; 5] = [-2.0, -1.0, 0.0, 1.0, 2.0];

/// Every flagged candidate of degree `≤ exhaustive_degree` with coefficients
/// in `{−2, …, 2}`, plus `sampled` random ones of degree `sampled_degree`.
pub fn refutation_sweep(
    exhaustive_degree: u32,
    sampled_degree: u32,
    sampled: usize,
    u: f64,
    i_max: u32,
    seed: u64,
) -> Result<RefutationSweep> {
    let d = exhaustive_degree as usize;
    let m = (d + 1) * (d + 2) / 2;
    let total = COEFFICIENT_RANGE.len().pow(m as u32);
    let exhaustive = (0..total).into_par_iter().map(|code| {
        let mut c = code;
        let flat: Vec<f64> = (0..m)
            .map(|_| {
                let v = COEFFICIENT_RANGE[c % 5];
                c /= 5;
                v
            })
            .collect();
        PolyCandidate::from_flat(exhaustive_degree, &flat)
    });
    let sd = sampled_degree as usize;
    let sm = (sd + 1) * (sd + 2) / 2;
    let random = (0..sampled).into_par_iter().map(|s| {
        let mut rng = TrajectorySeed::new(seed, s as u64).rng();
        let flat: Vec<f64> = (0..sm)
            .map(|_| COEFFICIENT_RANGE[rng.random_range(0..5)])
            .collect();
        PolyCandidate::from_flat(sampled_degree, &flat)
    });
    let outcomes = exhaustive
        .chain(random)
        .map(|c| {
            let c = c?;
            if !c.radially_unbounded_flag() {
                return Ok(None);
            }
            Ok(Some(match refute_polynomial_drift(&c, u, i_max) {
                Ok(w) => (c, Some(w)),
                Err(Error::NotRadiallyUnbounded(_)) => (c, None),
                Err(e) => return Err(e),
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut sweep = RefutationSweep {
        u,
        i_max,
        exhaustive_degree,
        sampled_degree,
        sampled,
        seed,
        candidates: 0,
        not_unbounded: 0,
        refuted: 0,
        max_witness: 0,
        unrefuted: Vec::new(),
    };
    for (c, outcome) in outcomes.into_iter().flatten() {
        sweep.candidates += 1;
        match outcome {
            None => sweep.not_unbounded += 1,
            Some(Some(i)) => {
                sweep.refuted += 1;
                sweep.max_witness = sweep.max_witness.max(i);
            }
            Some(None) => sweep.unrefuted.push(c),
        }
    }
    Ok(sweep)
}

/// `V = ln(1 + ξ) + η²`, `U = V − 2`, on the open positive quadrant.
///
/// Shell points fold every direction into the quadrant by quartering its angle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example1Certificate {
    pub compact_radius: f64,
    pub delta: f64,
    pub epsilon: f64,
    pub scan: Vec<Example1ScanStep>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example1ScanStep {
    pub radius: f64,
    pub mc_max: f64,
    pub mc_half_width: f64,
    pub accepted: bool,
}

pub const EXAMPLE1_VARIANT_OFFSET: f64 = 2.0;

fn quadrant_direction(d: &[f64]) -> (f64, f64) {
    let t = d[1].atan2(d[0]).rem_euclid(std::f64::consts::TAU) / 4.0;
    (t.cos(), t.sin())
}

impl Example1Certificate {
    fn unscanned() -> Self {
        Self {
            compact_radius: 0.0,
            delta: EXAMPLE1_VARIANT_OFFSET,
            epsilon: 0.0,
            scan: Vec::new(),
        }
    }
}

impl Certificate for Example1Certificate {
    fn kind(&self) -> &'static str {
        "example1-logarithmic"
    }

    fn dim(&self) -> usize {
        2
    }

    fn drift(&self, x: &[f64]) -> f64 {
        x[0].ln_1p() + x[1] * x[1]
    }

    fn drift_increment(&self, x: &[f64], next: &[f64]) -> f64 {
        ((next[0] - x[0]) / (1.0 + x[0])).ln_1p() + (next[1] - x[1]) * (next[1] + x[1])
    }

    fn variant(&self, x: &[f64]) -> f64 {
        self.drift(x) - EXAMPLE1_VARIANT_OFFSET
    }

    fn h_bound(&self, r: f64) -> f64 {
        r - EXAMPLE1_VARIANT_OFFSET
    }

    fn delta(&self) -> f64 {
        self.delta
    }

    fn compact_radius(&self) -> f64 {
        self.compact_radius
    }

    fn shell_point(&self, direction: &[f64], radius: f64) -> Vec<f64> {
        let (c, s) = quadrant_direction(direction);
        vec![radius * c, radius * s]
    }

    fn sublevel_box(&self, r: f64) -> Option<(Vec<f64>, Vec<f64>)> {
        (r > 0.0).then(|| (vec![0.0, 0.0], vec![r.exp_m1(), r.sqrt()]))
    }

    fn variant_boundary_point(&self, direction: &[f64]) -> Option<Vec<f64>> {
        let (c, s) = quadrant_direction(direction);
        let g = |t: f64| self.variant(&[t * c, t * s]);
        let mut hi = 1.0;
        while g(hi) < 0.0 {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(vec![hi * c, hi * s])
    }

    fn default_levels(&self) -> Vec<f64> {
        vec![3.0, 4.0, 6.0]
    }
}

pub const EXAMPLE1_SCAN_POINTS: usize = 64;
pub const EXAMPLE1_SCAN_CAP: f64 = 1e6;

/// Doubling scan from radius 1 for the first quadrant shell on which every
/// Monte-Carlo drift interval lies strictly below zero, then the `δ` ladder.
pub fn example1_certificate(samples: usize, seed: u64) -> Result<Example1Certificate> {
    let sys = example1_system();
    let mut cert = Example1Certificate::unscanned();
    let directions = shell_directions(2, EXAMPLE1_SCAN_POINTS, seed);
    let mut radius = 1.0;
    let mut shell = 0u64;
    while radius <= EXAMPLE1_SCAN_CAP {
        let estimates = directions
            .par_iter()
            .enumerate()
            .map(|(p, d)| {
                let x = cert.shell_point(d, radius);
                mc_drift(&sys, &cert, &x, samples, TrajectorySeed::new(seed, (shell << 32) | p as u64))
            })
            .collect::<Result<Vec<_>>>()?;
        let worst = estimates
            .iter()
            .max_by(|a, b| a.upper().total_cmp(&b.upper()))
            .expect("nonempty shell");
        let accepted = estimates.iter().all(|e| e.upper() < 0.0);
        cert.scan.push(Example1ScanStep {
            radius,
            mc_max: worst.mean,
            mc_half_width: worst.half_width,
            accepted,
        });
        if accepted {
            cert.compact_radius = radius;
            let ladder = LadderOptions {
                seed,
                ..LadderOptions::default()
            };
            let (delta, epsilon) = delta_ladder(&sys, &cert, EXAMPLE1_VARIANT_OFFSET, &ladder)?;
            cert.delta = delta;
            cert.epsilon = epsilon;
            return Ok(cert);
        }
        radius *= 2.0;
        shell += 1;
    }
    Err(Error::ScanFailed {
        cap: EXAMPLE1_SCAN_CAP,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example1Verification {
    pub certificate: Example1Certificate,
    pub drift: DriftReport,
    pub variant: VariantReport,
}

pub fn example1_verify_log_certificate(samples: usize, seed: u64) -> Result<Example1Verification> {
    let sys = example1_system();
    let certificate = example1_certificate(samples, seed)?;
    let plan = DriftPlan::standard(certificate.compact_radius, 2, samples, seed);
    let drift = verify_drift(&sys, &certificate, &plan)?;
    let variant = verify_variant(
        &sys,
        &certificate,
        &example1_target(),
        &certificate.default_levels(),
        samples,
        seed,
    )?;
    Ok(Example1Verification {
        certificate,
        drift,
        variant,
    })
}

/// `V = |x|`, `U = |x| − 1` for the scalar random walk, `C = [−1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbsValueCertificate {
    pub delta: f64,
}

impl Certificate for AbsValueCertificate {
    fn kind(&self) -> &'static str {
        "absolute-value"
    }

    fn dim(&self) -> usize {
        1
    }

    fn drift(&self, x: &[f64]) -> f64 {
        x[0].abs()
    }

    fn variant(&self, x: &[f64]) -> f64 {
        x[0].abs() - 1.0
    }

    fn h_bound(&self, r: f64) -> f64 {
        r - 1.0
    }

    fn delta(&self) -> f64 {
        self.delta
    }

    fn compact_radius(&self) -> f64 {
        1.0
    }

    fn shell_point(&self, direction: &[f64], radius: f64) -> Vec<f64> {
        vec![direction[0].signum() * radius]
    }

    fn sublevel_box(&self, r: f64) -> Option<(Vec<f64>, Vec<f64>)> {
        (r >= 0.0).then(|| (vec![-r], vec![r]))
    }

    fn variant_boundary_point(&self, direction: &[f64]) -> Option<Vec<f64>> {
        (direction[0] != 0.0).then(|| vec![direction[0].signum()])
    }

    fn default_levels(&self) -> Vec<f64> {
        vec![2.0, 4.0, 8.0]
    }
}

pub fn random_walk() -> LinearSystem {
    LinearSystem::new(
        crate::linalg::Matrix::identity(1, 1),
        crate::linalg::Matrix::identity(1, 1),
        NoiseModel::uniform_intervals(vec![1.0]).expect("unit interval"),
    )
    .expect("scalar system")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticDriftRow {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub x: f64,
    /// `a·E[w²] + (2ax + b)·E[w]`.
    pub symbolic: f64,
    /// Simpson's rule on `[x − 1, x + 1]`, exact for quadratics.
    pub quadrature: f64,
}

/// `E[V(x + w)] − V(x)` for `V = ax² + bx + c` under `w ~ U[−1, 1]`.
pub fn random_walk_quadratic_drift(a: f64, b: f64, c: f64, x: f64) -> QuadraticDriftRow {
    let v = |y: f64| a * y * y + b * y + c;
    let (mean_w, mean_w2) = (0.0, 1.0 / 3.0);
    QuadraticDriftRow {
        a,
        b,
        c,
        x,
        symbolic: a * mean_w2 + (2.0 * a * x + b) * mean_w,
        quadrature: (v(x - 1.0) + 4.0 * v(x) + v(x + 1.0)) / 6.0 - v(x),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example2Report {
    pub rows: Vec<QuadraticDriftRow>,
    /// Every row has `ΔV > 0`.
    pub quadratic_always_increases: bool,
    pub delta: f64,
    pub epsilon_expected: f64,
    pub abs_drift: DriftReport,
    pub abs_variant: VariantReport,
    pub pass: bool,
}

pub const EXAMPLE2_EPSILON_TOL: f64 = 0.03;

pub fn example2_quadratic_failure(delta: f64, samples: usize, seed: u64) -> Result<Example2Report> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Precondition(format!("delta must lie in (0, 1), got {delta}")));
    }
    let mut rows = Vec::new();
    for a in [0.5, 1.0, 2.0] {
        for b in [-5.0, 0.0, 3.0] {
            for c in [-1.0, 0.0, 7.0] {
                for x in [-10.0, -1.0, 0.0, 0.5, 3.0, 10.0] {
                    rows.push(random_walk_quadratic_drift(a, b, c, x));
                }
            }
        }
    }
    let quadratic_always_increases = rows.iter().all(|r| r.symbolic > 0.0 && r.quadrature > 0.0);
    let sys = random_walk();
    let cert = AbsValueCertificate { delta };
    let abs_drift = verify_drift(&sys, &cert, &DriftPlan::standard(1.0, 1, samples, seed))?;
    let abs_variant = verify_variant(
        &sys,
        &cert,
        &TargetBall::centered(1, 2.0)?,
        &cert.default_levels(),
        samples,
        seed,
    )?;
    let epsilon_expected = (1.0 - delta) / 2.0;
    let eps_ok = abs_variant
        .levels
        .iter()
        .all(|l| (l.epsilon_hat - epsilon_expected).abs() <= EXAMPLE2_EPSILON_TOL);
    Ok(Example2Report {
        pass: quadratic_always_increases && abs_drift.pass && abs_variant.pass && eps_ok,
        rows,
        quadratic_always_increases,
        delta,
        epsilon_expected,
        abs_drift,
        abs_variant,
    })
}
