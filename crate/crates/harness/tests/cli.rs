//! End-to-end runs of the `levy-mkv` binary and the library entry point on
//! small configurations.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use levy_mkv::config::RunConfig;
use levy_mkv::output::ResultRecord;
use levy_mkv::{run, Experiment};

const BIN: &str = env!("CARGO_BIN_EXE_levy-mkv");

fn small(interaction: &str, eta: &str, trunc_delta: f64) -> String {
    format!(
        r#"
seed = 17

[model]
gamma = 2.0
drift = {{ kind = "linear", strength = 1.0, r0 = 1.0 }}
interaction = "{interaction}"
eta = {eta}

[levy]
family = "bounded-stable-like"
beta = 0.5
c0 = 1.0
kappa = 0.5
trunc_delta = {trunc_delta}

[metrics]
grid = 401
validation_samples = 2000

[simulation]
dt_max = 1e-2
t_end = 1.0
record_times = [0.0, 0.5, 1.0]
cloud_size = 128
replicas = 200
n_list = [4, 16]

[contraction]
bound_times = [0.5, 1.0]
fit_window = [0.5, 1.0]

[chaos]
cloud_size = 256
min_replicas = 4
particle_budget = 64
fit_time = 0.5
probe_time = 1.0
probe_n = 16

[moments]
cloud_size = 256
n_list = [4, 16]
groups = 20

[fidelity]
replicas = 400
times = [0.5, 1.0]
"#
    )
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn cli(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(BIN).args(args).output().expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn config_path(name: &str) -> String {
    format!("{}/../../configs/{name}", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn constants_command_prints_the_reference_values() {
    let dir = tempfile::tempdir().unwrap();
    let (code, stdout, stderr) = cli(&[
        "constants",
        "--config",
        &config_path("reference.toml"),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{stderr}");
    assert!(stdout.contains("0.125"), "{stdout}");
    let rec: ResultRecord =
        serde_json::from_slice(&fs::read(dir.path().join("constants/report.json")).unwrap())
            .unwrap();
    let tau = rec.rows.iter().find(|r| r.stat == "tau").unwrap();
    assert_eq!(tau.value, 0.125);
    assert!(dir.path().join("constants/results.csv").exists());
    assert!(dir.path().join("constants/plot.svg").exists());
}

#[test]
fn weak_dissipation_exits_with_the_assumption_code() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, stderr) = cli(&[
        "constants",
        "--config",
        &config_path("weak_dissipation.toml"),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code, 3, "{stderr}");
    assert!(stderr.contains("friction"), "{stderr}");
}

#[test]
fn bad_configs_exit_with_the_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = small("zero", "0.0", 1e-3).replace("[levy]", "[levy]\nbogus = 1");
    let negative = small("zero", "0.0", 1e-3).replace("beta = 0.5", "beta = -0.5");
    for (name, text) in [("unknown.toml", unknown), ("negative.toml", negative)] {
        let p = write_config(dir.path(), name, &text);
        let (code, _, stderr) = cli(&["constants", "--config", p.to_str().unwrap()]);
        assert_eq!(code, 2, "{name}: {stderr}");
    }
    let (code, _, _) = cli(&["constants", "--config", "/nonexistent/config.toml"]);
    assert_eq!(code, 2);
}

#[test]
fn failed_checks_exit_with_code_five_under_check() {
    let dir = tempfile::tempdir().unwrap();
    let text = small("zero", "0.0", 1e-3)
        .replace("[fidelity]\n", "[fidelity]\nmode = \"skip-minus-branch\"\n");
    let text = text.replace("replicas = 400", "replicas = 4000");
    let p = write_config(dir.path(), "mutant.toml", &text);
    let out = dir.path().join("out");
    let (code, stdout, stderr) = cli(&[
        "fidelity",
        "--config",
        p.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--check",
    ]);
    assert_eq!(code, 5, "{stdout}{stderr}");
    assert!(out.join("fidelity/report.json").exists());
}

#[test]
fn single_worker_csv_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(dir.path(), "c.toml", &small("sine", "0.2", 1e-2));
    let mut bytes = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("run{k}"));
        let (code, _, stderr) = cli(&[
            "contraction",
            "--config",
            p.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--workers",
            "1",
        ]);
        assert_eq!(code, 0, "{stderr}");
        bytes.push((
            fs::read(out.join("contraction/results.csv")).unwrap(),
            fs::read(out.join("contraction/plot.svg")).unwrap(),
        ));
    }
    assert_eq!(bytes[0], bytes[1]);
    let csv = String::from_utf8(bytes[0].0.clone()).unwrap();
    assert!(csv.starts_with("# experiment=contraction"));
    assert!(csv.contains("# config_sha256="));
}

#[test]
fn report_json_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::from_toml(&small("sine", "0.2", 1e-2)).unwrap();
    let r = run(Experiment::Contraction, &cfg, dir.path(), false).unwrap();
    let text = fs::read_to_string(dir.path().join("contraction/report.json")).unwrap();
    let rec: ResultRecord = serde_json::from_str(&text).unwrap();
    assert_eq!(rec.rows, r.output.rows);
    assert_eq!(rec.checks, r.output.checks);
    assert_eq!(rec.provenance, r.provenance);
    let again: ResultRecord = serde_json::from_str(&serde_json::to_string(&rec).unwrap()).unwrap();
    assert_eq!(again, rec);
}

#[test]
fn zero_interaction_chaos_is_an_exact_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::from_toml(&small("zero", "0.0", 1e-2)).unwrap();
    let r = run(Experiment::Chaos, &cfg, dir.path(), true).unwrap();
    let l1: Vec<_> = r
        .output
        .rows
        .iter()
        .filter(|row| row.stat == "l1_scaled")
        .collect();
    assert!(!l1.is_empty());
    assert!(l1.iter().all(|row| row.value == 0.0 && row.stderr == 0.0));
    let slope = r.output.checks.iter().find(|c| c.name == "slope").unwrap();
    assert!(slope.pass && slope.detail.contains("exactly zero"));
}

#[test]
fn zero_rate_fidelity_passes_trivially() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::from_toml(&small("sine", "0.2", 1.0)).unwrap();
    let r = run(Experiment::Fidelity, &cfg, dir.path(), true).unwrap();
    assert_eq!(r.output.checks.len(), 8);
    assert!(r.output.all_pass());
}

#[test]
fn local_kernel_has_no_discrepancy() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::from_toml(&small("local", "0.5", 1e-2)).unwrap();
    let r = run(Experiment::Moments, &cfg, dir.path(), false).unwrap();
    let disc: Vec<_> = r
        .output
        .rows
        .iter()
        .filter(|row| row.stat == "discrepancy")
        .collect();
    assert!(!disc.is_empty());
    assert!(disc.iter().all(|row| row.value == 0.0), "{disc:?}");
}

#[test]
fn snapshots_are_written_on_request() {
    let dir = tempfile::tempdir().unwrap();
    let text = small("sine", "0.2", 1e-2) + "\n[output]\nformats = [\"json\"]\nsnapshots = true\n";
    let cfg = RunConfig::from_toml(&text).unwrap();
    run(Experiment::Moments, &cfg, dir.path(), false).unwrap();
    let snaps = dir.path().join("moments/snapshots");
    let bins = fs::read_dir(&snaps)
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .path()
                .extension()
                .is_some_and(|x| x == "bin")
        })
        .count();
    assert_eq!(bins, 3);
    assert!(!dir.path().join("moments/results.csv").exists());
}
