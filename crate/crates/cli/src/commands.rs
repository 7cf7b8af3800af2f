use std::fs;
use std::path::Path;

use reachcert::classifier::{classify as run_classifier, CertificateAdvice, Verdict};
use reachcert::counterexamples::{
    example1_bound_check, example1_closed_form, example1_simulated_log2,
    example1_verify_log_certificate, example2_quadratic_failure, refutation_sweep, BoundCheck,
    Example1Instance,
};
use reachcert::lab::{decay_exponent, hitting_stats, log2_grid, simulate as run_trajectory, HitOptions};
use reachcert::spectral::Tolerances;
use reachcert::synthesis::{
    synthesize_composite, synthesize_logarithmic, synthesize_quadratic, CertificateFile, LogOptions,
};
use reachcert::system::{
    Dynamics, LinearSystem, Model, NoiseModel, SystemDescription, SystemFile, TargetBall,
    TargetSpec, TrajectorySeed,
};
use reachcert::verifier::{verify_drift, verify_variant, DriftPlan};
use reachcert::Error;
use serde::Serialize;

use crate::report::{csv_failure, sha256_hex, Output, Report, SeedRecord, Timings, Verification};
use crate::{Common, Example};

#[derive(Debug)]
pub enum Failure {
    /// Bad arguments, unreadable input or a schema violation: exit 2.
    Usage(String),
    /// A computation that could not complete: exit 1.
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_)
            | Error::Parse { .. }
            | Error::NonSquare { .. }
            | Error::DimensionMismatch { .. }
            | Error::NonFinite(_)
            | Error::InvalidNoise(_)
            | Error::TargetExcludesOrigin
            | Error::NotPositiveDefinite(_) => Failure::Usage(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        csv_failure(e)
    }
}

const VERIFY_SAMPLES: usize = 10_000;
const SIMULATE_TRAJECTORIES: usize = 1000;
const SIMULATE_HORIZON: usize = 1000;
const BOUND_SEQUENCES: usize = 100_000;
const EXAMPLE1_SAMPLES: usize = 20_000;
const REFUTE_SAMPLED: usize = 200_000;
const EXAMPLE2_SAMPLES: usize = 100_000;
const CLOSED_FORM_TOL: f64 = 1e-8;

struct Loaded {
    description: SystemDescription,
    file_target: Option<TargetSpec>,
    sha256: String,
}

impl Loaded {
    fn dynamics(&self) -> &dyn Dynamics {
        match &self.description.model {
            Model::Linear(s) => s,
            Model::Polynomial(s) => s,
        }
    }

    fn linear(&self, command: &str) -> Result<&LinearSystem, Failure> {
        match &self.description.model {
            Model::Linear(s) => Ok(s),
            Model::Polynomial(_) => Err(Failure::Usage(format!(
                "{command} needs a linear system (A, B); the file gives a polynomial transition"
            ))),
        }
    }
}

fn read_input(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn load_system(common: &Common) -> Result<Loaded, Failure> {
    let path = common
        .system
        .as_deref()
        .ok_or_else(|| Failure::Usage("--system <path> is required".into()))?;
    let bytes = read_input(path)?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| Failure::Usage(format!("{}: not UTF-8", path.display())))?;
    let file = SystemFile::from_json(&text)?;
    Ok(Loaded {
        description: file.build()?,
        file_target: file.target,
        sha256: sha256_hex(&bytes),
    })
}

/// Flags override the file; the fallback is the Euclidean unit ball at the origin.
fn resolve_target(common: &Common, loaded: &Loaded) -> Result<(TargetBall, TargetSpec), Failure> {
    let n = loaded.dynamics().state_dim();
    let mut spec = loaded.file_target.clone().unwrap_or(TargetSpec {
        center: vec![0.0; n],
        radius: 1.0,
        norm: Default::default(),
    });
    if let Some(c) = &common.target_center {
        spec.center = c.clone();
    }
    if let Some(r) = common.target_radius {
        spec.radius = r;
    }
    Ok((spec.build()?, spec))
}

fn tolerances(common: &Common) -> Result<Tolerances, Failure> {
    let mut tols = Tolerances::default();
    if let Some(t) = common.unit_tol {
        tols.unit_tol = t;
    }
    if let Some(t) = common.rank_tol {
        tols.rank_tol = t;
    }
    tols.validate()?;
    Ok(tols)
}

fn positive(name: &str, value: Option<usize>, default: usize) -> Result<usize, Failure> {
    match value.unwrap_or(default) {
        0 => Err(Failure::Usage(format!("--{name} must be positive"))),
        v => Ok(v),
    }
}

fn write_branch_trace(out: &Output, verdict: &Verdict) -> Result<(), Failure> {
    if let Some(mut w) = out.csv("branch_trace.csv")? {
        w.write_record(["test", "value", "threshold", "holds"])?;
        for s in &verdict.branch_trace {
            w.serialize((&s.test, s.value, s.threshold, s.holds))?;
        }
        w.flush().map_err(|e| Failure::Runtime(e.to_string()))?;
    }
    Ok(())
}

pub fn classify(common: &Common) -> Result<bool, Failure> {
    let out = Output::new(common.out.as_deref(), common.csv)?;
    let mut timings = Timings::start("classify");
    let loaded = load_system(common)?;
    let system = loaded.linear("classify")?;
    let (target, spec) = resolve_target(common, &loaded)?;
    let tols = tolerances(common)?;
    let verdict = timings.time("classify", || run_classifier(system, &target, &tols))?;
    eprintln!(
        "classify: {} (certificate advice: {:?})",
        verdict.outcome, verdict.certificate_advice
    );
    for w in &verdict.warnings {
        eprintln!("warning: {w}");
    }
    write_branch_trace(&out, &verdict)?;

    let mut report = Report::new("classify", SeedRecord { seed: common.seed, ..Default::default() });
    report.input.system_sha256 = Some(loaded.sha256.clone());
    report.tolerances = Some(tols);
    report.target = Some(spec);
    report.verdict = Some(verdict);
    report.pass = true;
    out.finish(&report, timings)?;
    Ok(true)
}

pub fn certify(common: &Common, certificate_path: Option<&Path>) -> Result<bool, Failure> {
    let out = Output::new(common.out.as_deref(), common.csv)?;
    let mut timings = Timings::start("certify");
    let loaded = load_system(common)?;
    let system = loaded.linear("certify")?;
    let (target, spec) = resolve_target(common, &loaded)?;
    let tols = tolerances(common)?;
    let verdict = timings.time("classify", || run_classifier(system, &target, &tols))?;
    let mut opts = LogOptions {
        tols,
        seed: common.seed,
        ..LogOptions::default()
    };
    if let Some(s) = common.samples {
        opts.scan_samples = positive("samples", Some(s), s)?;
    }
    let certificate = timings
        .time("synthesize", || match verdict.certificate_advice {
            CertificateAdvice::Quadratic => {
                Some(synthesize_quadratic(system, &target).map(CertificateFile::Quadratic))
            }
            CertificateAdvice::Logarithmic => {
                Some(synthesize_logarithmic(system, &target, &opts).map(CertificateFile::Logarithmic))
            }
            CertificateAdvice::Composite => {
                Some(synthesize_composite(system, &target, &opts).map(|c| CertificateFile::Composite(Box::new(c))))
            }
            CertificateAdvice::None => None,
        })
        .ok_or_else(|| Failure::Usage(format!("no certificate exists for {}", verdict.outcome)))??;
    eprintln!("certify: {} certificate for {}", certificate.certificate().kind(), verdict.outcome);
    if let CertificateFile::Composite(c) = &certificate {
        if !c.verified {
            eprintln!("warning: composite certificate is a candidate; check it with `reachcert verify`");
        }
    }
    write_branch_trace(&out, &verdict)?;

    let path = certificate_path
        .map(Path::to_path_buf)
        .or_else(|| out.dir().map(|d| d.join("certificate.json")));
    if let Some(p) = &path {
        let mut text = certificate.to_json();
        text.push('\n');
        fs::write(p, text).map_err(|e| Failure::Runtime(format!("{}: {e}", p.display())))?;
    }

    let seeds = SeedRecord {
        seed: common.seed,
        samples: Some(opts.scan_samples),
        ..Default::default()
    };
    let mut report = Report::new("certify", seeds);
    report.input.system_sha256 = Some(loaded.sha256.clone());
    report.tolerances = Some(tols);
    report.target = Some(spec);
    report.verdict = Some(verdict);
    report.certificate = Some(certificate);
    report.pass = true;
    out.finish(&report, timings)?;
    Ok(true)
}

pub fn verify(common: &Common, certificate_path: &Path) -> Result<bool, Failure> {
    let out = Output::new(common.out.as_deref(), common.csv)?;
    let mut timings = Timings::start("verify");
    let loaded = load_system(common)?;
    let system = loaded.dynamics();
    let (target, spec) = resolve_target(common, &loaded)?;
    let cert_bytes = read_input(certificate_path)?;
    let cert_text = String::from_utf8(cert_bytes.clone())
        .map_err(|_| Failure::Usage(format!("{}: not UTF-8", certificate_path.display())))?;
    let file = CertificateFile::from_json(&cert_text)?;
    let cert = file.certificate();
    let samples = positive("samples", common.samples, VERIFY_SAMPLES)?;

    let plan = DriftPlan::standard(cert.compact_radius(), system.state_dim(), samples, common.seed);
    let drift = timings.time("drift", || verify_drift(system, cert, &plan))?;
    let levels = cert.default_levels();
    let variant = timings.time("variant", || {
        verify_variant(system, cert, &target, &levels, samples, common.seed)
    })?;
    let pass = drift.pass && variant.pass;
    eprintln!(
        "verify: {} certificate, drift {} ({} points, {}), variant {}",
        cert.kind(),
        if drift.pass { "pass" } else { "FAIL" },
        drift.points_checked,
        drift.method,
        if variant.pass { "pass" } else { "FAIL" }
    );

    if let Some(mut w) = out.csv("drift_shells.csv")? {
        w.write_record(["radius", "worst_estimate", "worst_half_width"])?;
        for s in &drift.shells {
            w.serialize((s.radius, s.worst_estimate, s.worst_half_width))?;
        }
        w.flush().map_err(|e| Failure::Runtime(e.to_string()))?;
    }
    if let Some(mut w) = out.csv("variant_levels.csv")? {
        w.write_record([
            "level", "delta", "epsilon_hat", "epsilon_half_width", "samples", "acceptance_rate",
            "h_bound", "max_variant", "pass",
        ])?;
        for l in &variant.levels {
            w.serialize((
                l.level, l.delta, l.epsilon_hat, l.epsilon_half_width, l.samples,
                l.acceptance_rate, l.h_bound, l.max_variant, l.pass,
            ))?;
        }
        w.flush().map_err(|e| Failure::Runtime(e.to_string()))?;
    }

    let seeds = SeedRecord {
        seed: common.seed,
        samples: Some(samples),
        ..Default::default()
    };
    let mut report = Report::new("verify", seeds);
    report.input.system_sha256 = Some(loaded.sha256.clone());
    report.input.certificate_sha256 = Some(sha256_hex(&cert_bytes));
    report.target = Some(spec);
    report.certificate = Some(file.clone());
    report.verification = Some(Verification { drift, variant });
    report.pass = pass;
    out.finish(&report, timings)?;
    Ok(pass)
}

pub fn simulate(common: &Common, x0: Option<&[f64]>, decay: bool) -> Result<bool, Failure> {
    let out = Output::new(common.out.as_deref(), common.csv)?;
    let mut timings = Timings::start("simulate");
    let loaded = load_system(common)?;
    let system = loaded.dynamics();
    let n = system.state_dim();
    let (target, spec) = resolve_target(common, &loaded)?;
    let trajectories = positive("trajectories", common.trajectories, SIMULATE_TRAJECTORIES)?;
    let horizon = positive("horizon", common.horizon, SIMULATE_HORIZON)?;
    let x0 = x0.map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; n]);

    let stats = timings.time("hitting", || {
        hitting_stats(system, &target, &x0, trajectories, horizon, common.seed, &HitOptions::default())
    })?;
    eprintln!(
        "simulate: {}/{} trajectories hit the target within {} steps",
        stats.hits, stats.trajectories, stats.horizon
    );

    let fit = if decay {
        let top = horizon.ilog2();
        if top < 4 {
            return Err(Failure::Usage("--decay needs --horizon of at least 16".into()));
        }
        let fit = timings.time("decay", || {
            decay_exponent(system, &target, &log2_grid(4, top), trajectories, common.seed)
        })?;
        eprintln!("simulate: occupancy decay slope {:.3} ± {:.3}", fit.slope, fit.slope_std_error);
        Some(fit)
    } else {
        None
    };

    if let Some(mut w) = out.csv("trajectories.csv")? {
        let mut header = vec!["trajectory_id".to_string(), "k".to_string()];
        header.extend((1..=n).map(|i| format!("x{i}")));
        w.write_record(&header)?;
        timings.time("csv", || -> Result<(), Failure> {
            for t in 0..trajectories {
                let path = run_trajectory(system, &x0, horizon, TrajectorySeed::new(common.seed, t as u64))?;
                for (k, x) in path.states.iter().enumerate() {
                    let mut row = vec![t.to_string(), k.to_string()];
                    row.extend(x.iter().map(|v| v.to_string()));
                    w.write_record(&row)?;
                }
            }
            Ok(())
        })?;
        w.flush().map_err(|e| Failure::Runtime(e.to_string()))?;
    }
    if let Some(fit) = &fit {
        if let Some(mut w) = out.csv("occupancy.csv")? {
            w.write_record(["k", "p_hat", "used"])?;
            for ((k, p), u) in fit.k_grid.iter().zip(&fit.p_hat).zip(&fit.used) {
                w.serialize((k, p, u))?;
            }
            w.flush().map_err(|e| Failure::Runtime(e.to_string()))?;
        }
    }

    let seeds = SeedRecord {
        seed: common.seed,
        samples: None,
        trajectories: Some(trajectories),
        horizon: Some(horizon),
    };
    let mut report = Report::new("simulate", seeds);
    report.input.system_sha256 = Some(loaded.sha256.clone());
    report.target = Some(spec);
    report.ensemble = Some(stats);
    report.decay = fit;
    report.pass = true;
    out.finish(&report, timings)?;
    Ok(true)
}

#[derive(Debug, Serialize)]
struct Example1Bounds {
    closed_form_max_gap: f64,
    closed_form_tolerance: f64,
    checks: Vec<BoundCheck>,
}

/// Largest gap between closed-form and simulated `log₂ ξ` over `i ≤ 10`.
fn closed_form_gap(seed: u64) -> Result<f64, Error> {
    let noise = NoiseModel::uniform_intervals(vec![1.0])?;
    let mut gap: f64 = 0.0;
    let mut stream = 0;
    for i in 1..=10 {
        for u in [1.0, 1.5, 2.0, 3.0] {
            let inst = Example1Instance::new(i, u)?;
            for _ in 0..20 {
                let mut rng = TrajectorySeed::new(seed, stream).rng();
                stream += 1;
                let w: Vec<f64> = (0..i).map(|_| noise.sample(&mut rng)[0]).collect();
                let cf = example1_closed_form(&inst, &w)?;
                let sim = example1_simulated_log2(&inst, &w)?;
                for (a, b) in cf.iter().zip(&sim) {
                    gap = gap.max((a.log2_xi - b).abs());
                }
            }
        }
    }
    Ok(gap)
}

pub fn repro(common: &Common, example: Example) -> Result<bool, Failure> {
    let out = Output::new(common.out.as_deref(), common.csv)?;
    let mut timings = Timings::start("repro");
    let seed = common.seed;
    let (samples, pass, value) = match example {
        Example::Example1Bounds => {
            let samples = positive("samples", common.samples, BOUND_SEQUENCES)?;
            let gap = timings.time("closed-form", || closed_form_gap(seed))?;
            let checks = timings.time("bounds", || {
                [3, 4, 5]
                    .into_iter()
                    .flat_map(|i| [1.0, 2.0].map(|u| (i, u)))
                    .map(|(i, u)| example1_bound_check(i, u, samples, seed))
                    .collect::<Result<Vec<_>, _>>()
            })?;
            if let Some(mut w) = out.csv("example1_bounds.csv")? {
                w.write_record([
                    "i", "u", "sequences", "lower", "upper", "min_log2_xi", "max_log2_xi", "violations",
                ])?;
                for c in &checks {
                    w.serialize((
                        c.instance.i, c.instance.u, c.sequences, c.instance.lower, c.instance.upper,
                        c.min_log2_xi, c.max_log2_xi, c.violations,
                    ))?;
                }
                w.flush().map_err(|e| Failure::Runtime(e.to_string()))?;
            }
            let pass = gap <= CLOSED_FORM_TOL && checks.iter().all(BoundCheck::pass);
            eprintln!(
                "repro example1-bounds: closed-form gap {gap:.1e}, {} bound violations",
                checks.iter().map(|c| c.violations).sum::<usize>()
            );
            let body = Example1Bounds {
                closed_form_max_gap: gap,
                closed_form_tolerance: CLOSED_FORM_TOL,
                checks,
            };
            (samples, pass, section(&body))
        }
        Example::Example1Certificate => {
            let samples = positive("samples", common.samples, EXAMPLE1_SAMPLES)?;
            let v = timings.time("certificate", || example1_verify_log_certificate(samples, seed))?;
            if let Some(mut w) = out.csv("example1_scan.csv")? {
                w.write_record(["radius", "mc_max", "mc_half_width", "accepted"])?;
                for s in &v.certificate.scan {
                    w.serialize((s.radius, s.mc_max, s.mc_half_width, s.accepted))?;
                }
                w.flush().map_err(|e| Failure::Runtime(e.to_string()))?;
            }
            // {U ≤ 0} is not inside G for this certificate, so inclusion is
            // reported but does not decide the outcome.
            let levels = v.variant.levels.iter().all(|l| l.pass);
            eprintln!(
                "repro example1-certificate: drift {} from radius {}, variant levels {}, \
                 {}/{} boundary points outside G",
                if v.drift.pass { "pass" } else { "FAIL" },
                v.certificate.compact_radius,
                if levels { "pass" } else { "FAIL" },
                v.variant.inclusion_violations.len(),
                v.variant.inclusion_points
            );
            (samples, v.drift.pass && levels, section(&v))
        }
        Example::Example1Refute => {
            let samples = positive("samples", common.samples, REFUTE_SAMPLED)?;
            let sweep = timings.time("refute", || refutation_sweep(2, 4, samples, 2.0, 30, seed))?;
            eprintln!(
                "repro example1-refute: {} candidates, {} refuted (max witness {}), \
                 {} not growing along eta = u, {} unrefuted",
                sweep.candidates,
                sweep.refuted,
                sweep.max_witness,
                sweep.not_unbounded,
                sweep.unrefuted.len()
            );
            (samples, sweep.pass(), section(&sweep))
        }
        Example::Example2 => {
            let samples = positive("samples", common.samples, EXAMPLE2_SAMPLES)?;
            let r = timings.time("example2", || example2_quadratic_failure(0.5, samples, seed))?;
            if let Some(mut w) = out.csv("example2_quadratic.csv")? {
                w.write_record(["a", "b", "c", "x", "symbolic", "quadrature"])?;
                for row in &r.rows {
                    w.serialize((row.a, row.b, row.c, row.x, row.symbolic, row.quadrature))?;
                }
                w.flush().map_err(|e| Failure::Runtime(e.to_string()))?;
            }
            eprintln!(
                "repro example2: quadratic drift always positive {}, |x| drift {}, variant {}",
                r.quadratic_always_increases,
                if r.abs_drift.pass { "pass" } else { "FAIL" },
                if r.abs_variant.pass { "pass" } else { "FAIL" }
            );
            (samples, r.pass, section(&r))
        }
    };

    let seeds = SeedRecord {
        seed,
        samples: Some(samples),
        ..Default::default()
    };
    let mut report = Report::new("repro", seeds);
    report.repro = Some(value);
    report.pass = pass;
    out.finish(&report, timings)?;
    Ok(pass)
}

fn section<T: Serialize>(value: &T) -> serde_json::Value {
    serde_json::to_value(value).expect("report section serializes")
}
