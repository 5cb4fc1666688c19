//! Run configuration. One TOML file per run; every section except `model`
//! and `levy` has defaults, and unknown keys anywhere are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use levy_mkv_core::coupling::{CouplingMode, InitialCoupling};
use levy_mkv_core::dynamics::{InitialLaw, SimulationParams, DEFAULT_RECORD_TIMES};
use levy_mkv_core::levy::LevyModel;
use levy_mkv_core::metrics::{
    derive_constants_with, ConstantsReport, Drift, DynamicsModel, Interaction, KernelKind,
    PipelineOptions,
};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub model: ModelSection,
    pub levy: LevySection,
    #[serde(default)]
    pub metrics: MetricsSection,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub initial: InitialSection,
    #[serde(default)]
    pub contraction: ContractionSection,
    #[serde(default)]
    pub chaos: ChaosSection,
    #[serde(default)]
    pub moments: MomentsSection,
    #[serde(default)]
    pub fidelity: FidelitySection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedEta {
    /// the interaction threshold produced by the constants pipeline
    CBTilde,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EtaSpec {
    Value(f64),
    Named(NamedEta),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub gamma: f64,
    pub drift: Drift,
    #[serde(default = "zero_kernel")]
    pub interaction: KernelKind,
    #[serde(default = "default_eta")]
    pub eta: EtaSpec,
    /// multiplies a named eta, e.g. 0.5 for half the threshold
    #[serde(default = "one")]
    pub eta_factor: f64,
}

fn zero_kernel() -> KernelKind {
    KernelKind::Zero
}

fn default_eta() -> EtaSpec {
    EtaSpec::Value(0.0)
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyName {
    BoundedStableLike,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevySection {
    pub family: FamilyName,
    pub beta: f64,
    pub c0: f64,
    pub kappa: f64,
    pub trunc_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsSection {
    pub k0: f64,
    /// grid points per axis of the comparison-constant search
    pub grid: usize,
    pub refine_tol: f64,
    pub validation_samples: usize,
}

impl Default for MetricsSection {
    fn default() -> Self {
        let p = PipelineOptions::default();
        Self {
            k0: 8.0,
            grid: p.grid,
            refine_tol: p.refine_tol,
            validation_samples: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    pub dt_max: f64,
    pub t_end: f64,
    pub record_times: Vec<f64>,
    /// law-proxy cloud size M
    pub cloud_size: usize,
    pub replicas: usize,
    pub n_list: Vec<usize>,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            dt_max: 1e-3,
            t_end: 8.0,
            record_times: DEFAULT_RECORD_TIMES.to_vec(),
            cloud_size: 1024,
            replicas: 2000,
            n_list: vec![16, 32, 64, 128, 256, 512],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialSection {
    pub first: InitialLaw,
    pub second: InitialLaw,
}

impl Default for InitialSection {
    fn default() -> Self {
        Self {
            first: InitialLaw::Point { x: 0.0, y: 0.0 },
            second: InitialLaw::Point { x: 1.0, y: 0.0 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContractionSection {
    /// overrides simulation.t_end; later record times are dropped
    pub t_end: Option<f64>,
    pub initial_coupling: InitialCoupling,
    pub shared_proxy: bool,
    /// record times for the assignment W1 feasibility check; empty means all after 0
    pub w1_times: Vec<f64>,
    /// times checked against the e^(-λt) bound
    pub bound_times: Vec<f64>,
    pub fit_window: [f64; 2],
}

impl Default for ContractionSection {
    fn default() -> Self {
        Self {
            t_end: Some(4.0),
            initial_coupling: InitialCoupling::Product,
            shared_proxy: false,
            w1_times: Vec::new(),
            bound_times: vec![1.0, 2.0, 4.0],
            fit_window: [0.5, 4.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChaosSection {
    /// cloud for the independent copies; large so its own error stays below N^(-1/2)
    pub cloud_size: usize,
    pub min_replicas: usize,
    pub particle_budget: usize,
    pub fit_time: f64,
    pub slope_range: [f64; 2],
    pub probe_time: f64,
    pub probe_n: usize,
}

impl Default for ChaosSection {
    fn default() -> Self {
        Self {
            cloud_size: 65_536,
            min_replicas: 20,
            particle_budget: 10_240,
            fit_time: 2.0,
            slope_range: [-0.65, -0.35],
            probe_time: 8.0,
            probe_n: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MomentsSection {
    /// cloud standing in for the law
    pub cloud_size: usize,
    pub n_list: Vec<usize>,
    /// independent groups of N copies per N
    pub groups: usize,
}

impl Default for MomentsSection {
    fn default() -> Self {
        Self {
            cloud_size: 16_384,
            n_list: vec![16, 64, 256],
            groups: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FidelitySection {
    pub replicas: usize,
    pub times: Vec<f64>,
    /// family-wise level before the Bonferroni split
    pub alpha: f64,
    pub mode: CouplingMode,
}

impl Default for FidelitySection {
    fn default() -> Self {
        Self {
            replicas: 20_000,
            times: vec![0.5, 1.0, 2.0],
            alpha: 0.01,
            mode: CouplingMode::Faithful,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Svg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub directory: String,
    pub formats: Vec<Format>,
    /// write binary cloud snapshots next to the moments report
    pub snapshots: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: "out".into(),
            formats: vec![Format::Json, Format::Csv, Format::Svg],
            snapshots: false,
        }
    }
}

/// Everything an experiment needs, resolved from a config.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub model: DynamicsModel,
    pub levy: LevyModel,
    pub constants: ConstantsReport,
    pub warnings: Vec<String>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    fn check(&self) -> Result<()> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if let EtaSpec::Value(eta) = self.model.eta {
            if !(eta >= 0.0 && eta.is_finite()) {
                return bad(format!("model.eta = {eta} must be a nonnegative number"));
            }
        }
        if !(self.model.eta_factor > 0.0 && self.model.eta_factor.is_finite()) {
            return bad("model.eta_factor must be positive".into());
        }
        if self.model.interaction == KernelKind::Zero && self.model.eta != EtaSpec::Value(0.0) {
            return bad("model.eta is set but model.interaction is zero".into());
        }
        if self.output.formats.is_empty() {
            return bad("output.formats is empty".into());
        }
        if !(self.fidelity.alpha > 0.0 && self.fidelity.alpha < 1.0) {
            return bad("fidelity.alpha must lie in (0, 1)".into());
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, so formatting and key order in the
    /// file do not change it.
    pub fn hash(&self) -> String {
        sha256_json(self)
    }

    pub fn pipeline_options(&self) -> PipelineOptions {
        PipelineOptions {
            grid: self.metrics.grid,
            refine_tol: self.metrics.refine_tol,
        }
    }

    pub fn levy_model(&self) -> Result<LevyModel> {
        let l = &self.levy;
        match l.family {
            FamilyName::BoundedStableLike => Ok(LevyModel::bounded_stable_like(
                l.beta,
                l.c0,
                l.kappa,
                l.trunc_delta,
            )?),
        }
    }

    /// Builds the model and runs the constants pipeline. A named eta is
    /// resolved from a first pass with unit strength; the threshold does not
    /// depend on the interaction strength.
    pub fn resolve(&self) -> Result<Resolved> {
        let levy = self.levy_model()?;
        let m = &self.model;
        let opts = self.pipeline_options();
        let interaction = match m.eta {
            EtaSpec::Value(eta) => Interaction::new(m.interaction, eta),
            EtaSpec::Named(NamedEta::CBTilde) => {
                let probe =
                    DynamicsModel::new(1, m.gamma, m.drift, Interaction::new(m.interaction, 1.0))?;
                let c = derive_constants_with(&probe, &levy, self.metrics.k0, &opts)?;
                Interaction::with_ln_eta(m.interaction, c.c_b_tilde.ln() + m.eta_factor.ln())
            }
        };
        let model = DynamicsModel::new(1, m.gamma, m.drift, interaction)?;
        let mut constants = derive_constants_with(&model, &levy, self.metrics.k0, &opts)?;
        constants.bind_initial_moment(&model, &levy, self.initial.first.second_moment(1));
        let mut warnings = Vec::new();
        if !constants.interaction_within_threshold {
            warnings.push(format!(
                "interaction Lipschitz constant exceeds C_b~ = {:.6e} x e^({}); contraction is not guaranteed",
                constants.c_b_tilde.mantissa, constants.c_b_tilde.exponent
            ));
        }
        Ok(Resolved {
            model,
            levy,
            constants,
            warnings,
        })
    }

    /// Simulation parameters cut at `t_end` (record times beyond it are dropped).
    pub fn params(&self, t_end: Option<f64>) -> Result<SimulationParams> {
        let s = &self.simulation;
        let t_end = t_end.unwrap_or(s.t_end);
        let record: Vec<f64> = s
            .record_times
            .iter()
            .copied()
            .filter(|&t| t <= t_end)
            .collect();
        Ok(SimulationParams::new(s.dt_max, t_end, record, self.seed)?)
    }
}

pub fn sha256_json<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("serialisable");
    hex::encode(Sha256::digest(&bytes))
}
