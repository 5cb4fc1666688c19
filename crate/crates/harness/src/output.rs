//! Result records and their on-disk forms: report.json, results.csv, plot.svg.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::Format;
use crate::error::Result;
use crate::plot::Plot;

/// One statistic at one time (and particle count, for chaos runs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub t: Option<f64>,
    pub n: Option<usize>,
    pub stat: String,
    pub value: f64,
    pub stderr: f64,
    pub replicas: usize,
}

impl Row {
    pub fn new(
        t: Option<f64>,
        stat: impl Into<String>,
        value: f64,
        stderr: f64,
        replicas: usize,
    ) -> Self {
        Self {
            t,
            n: None,
            stat: stat.into(),
            value,
            stderr,
            replicas,
        }
    }

    pub fn exact(stat: impl Into<String>, value: f64) -> Self {
        Self::new(None, stat, value, 0.0, 0)
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = Some(n);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckLine {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl CheckLine {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub experiment: String,
    pub config_sha256: String,
    pub constants_sha256: String,
    pub version: String,
    pub seed: u64,
    pub workers: usize,
    pub wall_clock_seconds: f64,
}

impl Provenance {
    /// Lines that go into CSV comments and the SVG footer. Wall-clock time and
    /// worker count are left out so single-worker outputs are byte-stable.
    pub fn stable_lines(&self) -> Vec<String> {
        vec![
            format!(
                "experiment={} version={} seed={}",
                self.experiment, self.version, self.seed
            ),
            format!("config_sha256={}", self.config_sha256),
            format!("constants_sha256={}", self.constants_sha256),
        ]
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub id: &'static str,
    /// experiment-specific payload for report.json
    pub report: serde_json::Value,
    pub rows: Vec<Row>,
    pub checks: Vec<CheckLine>,
    pub plot: Plot,
    /// human-readable summary printed to stdout
    pub text: String,
}

impl ExperimentOutput {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub provenance: Provenance,
    pub rows: Vec<Row>,
    pub checks: Vec<CheckLine>,
    pub report: serde_json::Value,
}

pub fn csv_bytes(prov: &Provenance, rows: &[Row]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for line in prov.stable_lines() {
        out.extend_from_slice(format!("# {line}\n").as_bytes());
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["t", "n", "stat", "value", "stderr", "replicas"])
        .map_err(std::io::Error::from)?;
    for r in rows {
        w.write_record([
            r.t.map(|t| t.to_string()).unwrap_or_default(),
            r.n.map(|n| n.to_string()).unwrap_or_default(),
            r.stat.clone(),
            r.value.to_string(),
            r.stderr.to_string(),
            r.replicas.to_string(),
        ])
        .map_err(std::io::Error::from)?;
    }
    w.into_inner()
        .map_err(|e| std::io::Error::other(e.to_string()).into())
}

/// Writes the requested formats into `dir/<experiment>/` and returns the paths.
pub fn write_outputs(
    dir: &Path,
    formats: &[Format],
    prov: &Provenance,
    out: &ExperimentOutput,
) -> Result<Vec<PathBuf>> {
    let dir = dir.join(out.id);
    fs::create_dir_all(&dir)?;
    let mut written = Vec::new();
    for f in formats {
        let path = match f {
            Format::Json => {
                let rec = ResultRecord {
                    provenance: prov.clone(),
                    rows: out.rows.clone(),
                    checks: out.checks.clone(),
                    report: out.report.clone(),
                };
                let p = dir.join("report.json");
                fs::write(
                    &p,
                    serde_json::to_string_pretty(&rec).expect("serialisable"),
                )?;
                p
            }
            Format::Csv => {
                let p = dir.join("results.csv");
                fs::write(&p, csv_bytes(prov, &out.rows)?)?;
                p
            }
            Format::Svg => {
                let mut plot = out.plot.clone();
                plot.footer = prov.stable_lines();
                let p = dir.join("plot.svg");
                fs::write(&p, plot.render())?;
                p
            }
        };
        written.push(path);
    }
    Ok(written)
}
