use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::time::Instant;

use reachcert::classifier::Verdict;
use reachcert::lab::{DecayFit, EnsembleStats};
use reachcert::spectral::Tolerances;
use reachcert::synthesis::CertificateFile;
use reachcert::system::TargetSpec;
use reachcert::verifier::{DriftReport, VariantReport};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::commands::Failure;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Default, Serialize)]
pub struct Input {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub system_sha256: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate_sha256: Option<String>,
}

/// Everything a numeric claim in the report depends on besides the input files.
#[derive(Debug, Default, Serialize)]
pub struct SeedRecord {
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectories: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
}

#[derive(Debug, Serialize)]
pub struct Verification {
    pub drift: DriftReport,
    pub variant: VariantReport,
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub input: Input,
    pub seeds: SeedRecord,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<Tolerances>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<TargetSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateFile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verification: Option<Verification>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decay: Option<DecayFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub repro: Option<serde_json::Value>,
    pub pass: bool,
}

impl Report {
    pub fn new(command: &'static str, seeds: SeedRecord) -> Self {
        Report {
            tool: "reachcert",
            version: env!("CARGO_PKG_VERSION"),
            command,
            input: Input::default(),
            seeds,
            tolerances: None,
            target: None,
            verdict: None,
            certificate: None,
            verification: None,
            ensemble: None,
            decay: None,
            repro: None,
            pass: false,
        }
    }
}

#[derive(Debug, Serialize)]
struct Phase {
    name: String,
    seconds: f64,
}

/// Wall-clock timings, kept out of the report so equal seeds give equal reports.
#[derive(Debug, Serialize)]
pub struct Timings {
    command: &'static str,
    phases: Vec<Phase>,
    total_seconds: f64,
    #[serde(skip)]
    started: Option<Instant>,
}

impl Timings {
    pub fn start(command: &'static str) -> Self {
        Timings {
            command,
            phases: Vec::new(),
            total_seconds: 0.0,
            started: Some(Instant::now()),
        }
    }

    pub fn time<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.phases.push(Phase {
            name: name.to_string(),
            seconds: t.elapsed().as_secs_f64(),
        });
        out
    }

    fn finish(&mut self) {
        if let Some(t) = self.started {
            self.total_seconds = t.elapsed().as_secs_f64();
        }
    }
}

pub struct Output {
    dir: Option<PathBuf>,
    csv: bool,
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(format!("{}: {e}", path.display()))
}

impl Output {
    pub fn new(dir: Option<&Path>, csv: bool) -> Result<Self, Failure> {
        if csv && dir.is_none() {
            return Err(Failure::Usage("--csv needs --out <dir>".into()));
        }
        if let Some(d) = dir {
            fs::create_dir_all(d).map_err(|e| Failure::Usage(format!("{}: {e}", d.display())))?;
        }
        Ok(Output {
            dir: dir.map(Path::to_path_buf),
            csv,
        })
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
        let mut text = serde_json::to_string_pretty(value).expect("report serializes");
        text.push('\n');
        fs::write(path, text).map_err(|e| io_failure(path, e))
    }

    /// A CSV writer for `name` when `--csv` was given.
    pub fn csv(&self, name: &str) -> Result<Option<csv::Writer<File>>, Failure> {
        match (&self.dir, self.csv) {
            (Some(d), true) => {
                let path = d.join(name);
                csv::Writer::from_path(&path)
                    .map(Some)
                    .map_err(|e| io_failure(&path, e))
            }
            _ => Ok(None),
        }
    }

    /// Writes report.json and timings.json, or prints the report to stdout.
    pub fn finish(&self, report: &Report, mut timings: Timings) -> Result<(), Failure> {
        timings.finish();
        match &self.dir {
            Some(d) => {
                Self::write_json(&d.join("report.json"), report)?;
                Self::write_json(&d.join("timings.json"), &timings)
            }
            None => {
                println!("{}", serde_json::to_string_pretty(report).expect("report serializes"));
                Ok(())
            }
        }
    }
}

pub fn csv_failure(e: csv::Error) -> Failure {
    Failure::Runtime(format!("csv: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_abc() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn csv_needs_an_output_directory() {
        assert!(matches!(Output::new(None, true), Err(Failure::Usage(_))));
        assert!(Output::new(None, false).unwrap().csv("x.csv").unwrap().is_none());
    }

    #[test]
    fn empty_sections_are_omitted() {
        let report = Report::new("classify", SeedRecord { seed: 4, ..Default::default() });
        let text = serde_json::to_string(&report).unwrap();
        assert!(!text.contains("verdict"));
        assert!(text.contains(r#""seeds":{"seed":4}"#));
    }
}
