//! Experiment harness for `levy-mkv-core`: configuration, orchestration and
//! result files for the constants, contraction, chaos, moments and fidelity
//! experiments.

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod plot;
pub mod snapshot;

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use config::RunConfig;
use error::{HarnessError, Result};
use experiments::Context;
use output::{write_outputs, ExperimentOutput, Provenance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Constants,
    Contraction,
    Chaos,
    Moments,
    Fidelity,
}

pub struct RunOutcome {
    pub output: ExperimentOutput,
    pub provenance: Provenance,
    pub files: Vec<PathBuf>,
}

/// Runs one experiment and writes its files under `out_dir/<experiment>/`.
/// With `check`, failed checks turn into an error after the files are written.
pub fn run(exp: Experiment, cfg: &RunConfig, out_dir: &Path, check: bool) -> Result<RunOutcome> {
    let start = Instant::now();
    let ctx = Context::prepare(cfg)?;
    let output = match exp {
        Experiment::Constants => experiments::constants(&ctx)?,
        Experiment::Contraction => experiments::contraction(&ctx)?,
        Experiment::Chaos => experiments::chaos(&ctx)?,
        Experiment::Moments => {
            let dir = cfg
                .output
                .snapshots
                .then(|| out_dir.join("moments").join("snapshots"));
            experiments::moments(&ctx, dir.as_deref())?
        }
        Experiment::Fidelity => experiments::fidelity(&ctx)?,
    };
    let provenance = Provenance {
        experiment: output.id.to_string(),
        config_sha256: cfg.hash(),
        constants_sha256: ctx.constants_hash(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cfg.seed,
        workers: rayon::current_num_threads(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    };
    let files = write_outputs(out_dir, &cfg.output.formats, &provenance, &output)?;
    if check && !output.all_pass() {
        let failed: Vec<String> = output
            .checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| format!("{}: {}", c.name, c.detail))
            .collect();
        return Err(HarnessError::Check(failed.join("; ")));
    }
    Ok(RunOutcome {
        output,
        provenance,
        files,
    })
}
