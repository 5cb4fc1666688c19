//! Binary snapshots: a little-endian f64 array file plus a JSON sidecar
//! describing its shape and origin.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use levy_mkv_core::dynamics::Snapshot;

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub t: f64,
    pub seed: u64,
    pub particles: usize,
    pub dim: usize,
    /// arrays stored back to back, each `particles * dim` values
    pub arrays: Vec<String>,
    pub dtype: String,
    pub jumps: u64,
}

/// Writes `<stem>.bin` (x then y) and `<stem>.json`.
pub fn write_snapshot(
    dir: &Path,
    stem: &str,
    snap: &Snapshot,
    dim: usize,
    seed: u64,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut bytes = Vec::with_capacity(8 * (snap.x.len() + snap.y.len()));
    for v in snap.x.iter().chain(&snap.y) {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(dir.join(format!("{stem}.bin")), bytes)?;
    let side = Sidecar {
        t: snap.t,
        seed,
        particles: snap.x.len() / dim,
        dim,
        arrays: vec!["x".into(), "y".into()],
        dtype: "f64-le".into(),
        jumps: snap.jumps,
    };
    fs::write(
        dir.join(format!("{stem}.json")),
        serde_json::to_string_pretty(&side).expect("serialisable"),
    )?;
    Ok(())
}

pub fn read_snapshot(dir: &Path, stem: &str) -> Result<(Sidecar, Snapshot)> {
    let side: Sidecar = serde_json::from_slice(&fs::read(dir.join(format!("{stem}.json")))?)
        .map_err(|e| HarnessError::Config(format!("snapshot sidecar: {e}")))?;
    let bytes = fs::read(dir.join(format!("{stem}.bin")))?;
    let len = side.particles * side.dim;
    if bytes.len() != 16 * len {
        return Err(HarnessError::Config(format!(
            "snapshot holds {} bytes, sidecar promises {}",
            bytes.len(),
            16 * len
        )));
    }
    let vals: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let snap = Snapshot {
        t: side.t,
        x: vals[..len].to_vec(),
        y: vals[len..].to_vec(),
        jumps: side.jumps,
    };
    Ok((side, snap))
}
