//! JSON run configuration. Lengths are in the units of the initial data,
//! times in the same units divided by velocity; see
//! `schemas/config.schema.json` for the documented layout.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use axivort_core::dynamics::SimConfig;
use axivort_core::field::{DipoleParams, RingParams};
use axivort_core::kernels::{Dimension, KernelMode};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentName {
    DipoleGrowth,
    SingleRing,
    InequalityCorpus,
    KernelBounds,
    HighdStatic,
}

/// Registered experiments in listing order.
pub const REGISTRY: [(ExperimentName, &str); 5] = [
    (ExperimentName::DipoleGrowth, "eroding dipole run: conservation, monotonicity, pathwise bounds, growth fit of R(t)"),
    (ExperimentName::SingleRing, "single ring self-propagation with conservation and claim-bound diagnostics"),
    (ExperimentName::InequalityCorpus, "velocity inequalities over a random multi-ring corpus, with scaling checks"),
    (ExperimentName::KernelBounds, "decay constants of the elliptic kernel derivatives on a log grid"),
    (ExperimentName::HighdStatic, "high-dimensional key estimate over a corpus and the predicted growth table"),
];

impl ExperimentName {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentName::DipoleGrowth => "dipole_growth",
            ExperimentName::SingleRing => "single_ring",
            ExperimentName::InequalityCorpus => "inequality_corpus",
            ExperimentName::KernelBounds => "kernel_bounds",
            ExperimentName::HighdStatic => "highd_static",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    Dipole(DipoleParams),
    Ring(RingParams),
}

pub const DEFAULT_SEED: u64 = 20261014;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSettings {
    /// Fields per corpus; stability is checked against a corpus of twice
    /// this size.
    pub n_fields: Option<usize>,
    #[serde(default = "default_corpus_resolution")]
    pub resolution: u32,
    #[serde(default = "default_max_rings")]
    pub max_rings: u32,
    pub dims: Option<Vec<Dimension>>,
    #[serde(default = "default_corpus_kernel")]
    pub kernel: KernelMode,
}

fn default_corpus_resolution() -> u32 {
    10
}

fn default_max_rings() -> u32 {
    5
}

fn default_corpus_kernel() -> KernelMode {
    KernelMode::Tabulated
}

impl Default for CorpusSettings {
    fn default() -> Self {
        Self {
            n_fields: None,
            resolution: default_corpus_resolution(),
            max_rings: default_max_rings(),
            dims: None,
            kernel: default_corpus_kernel(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelBoundsSettings {
    #[serde(default = "default_kernel_dims")]
    pub dims: Vec<Dimension>,
    #[serde(default = "default_ells")]
    pub ells: Vec<u32>,
    #[serde(default = "default_s_min")]
    pub s_min: f64,
    #[serde(default = "default_s_max")]
    pub s_max: f64,
    #[serde(default = "default_grid")]
    pub grid_points: usize,
}

fn default_kernel_dims() -> Vec<Dimension> {
    (3..=6).map(|d| Dimension::new(d).expect("3..=6")).collect()
}

fn default_ells() -> Vec<u32> {
    vec![0, 1, 2]
}

fn default_s_min() -> f64 {
    1e-6
}

fn default_s_max() -> f64 {
    1e6
}

fn default_grid() -> usize {
    200
}

impl Default for KernelBoundsSettings {
    fn default() -> Self {
        Self {
            dims: default_kernel_dims(),
            ells: default_ells(),
            s_min: default_s_min(),
            s_max: default_s_max(),
            grid_points: default_grid(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: ExperimentName,
    #[serde(default)]
    pub sim: Option<SimConfig>,
    #[serde(default)]
    pub initial: Option<InitialData>,
    #[serde(default = "default_seed")]
    pub corpus_seed: u64,
    #[serde(default)]
    pub corpus: CorpusSettings,
    #[serde(default)]
    pub kernel_bounds: KernelBoundsSettings,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

impl RunConfig {
    pub fn from_json(text: &str) -> anyhow::Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).context("invalid configuration")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let needs_sim = matches!(self.experiment, ExperimentName::DipoleGrowth | ExperimentName::SingleRing);
        if needs_sim {
            let Some(sim) = &self.sim else {
                bail!("experiment {} needs a \"sim\" block", self.experiment.as_str());
            };
            sim.validate()?;
        }
        match (self.experiment, &self.initial) {
            (ExperimentName::DipoleGrowth, Some(InitialData::Dipole(_))) => {}
            (ExperimentName::SingleRing, Some(InitialData::Ring(_))) => {}
            (ExperimentName::DipoleGrowth, _) => bail!("dipole_growth needs \"initial\": {{\"dipole\": {{...}}}}"),
            (ExperimentName::SingleRing, _) => bail!("single_ring needs \"initial\": {{\"ring\": {{...}}}}"),
            _ => {}
        }
        if self.corpus.n_fields == Some(0) {
            bail!("corpus.n_fields must be >= 1");
        }
        let kb = &self.kernel_bounds;
        if !(kb.s_min > 0.0 && kb.s_min < kb.s_max) || kb.grid_points < 2 {
            bail!("kernel_bounds needs 0 < s_min < s_max and grid_points >= 2");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_kernel_bounds_config() {
        let cfg = RunConfig::from_json(r#"{"experiment": "kernel_bounds"}"#).unwrap();
        assert_eq!(cfg.kernel_bounds.grid_points, 200);
        assert_eq!(cfg.corpus_seed, DEFAULT_SEED);
    }

    #[test]
    fn unknown_experiment_lists_valid_names() {
        let err = RunConfig::from_json(r#"{"experiment": "nope"}"#).unwrap_err();
        let msg = format!("{err:#}");
        for (name, _) in REGISTRY {
            assert!(msg.contains(name.as_str()), "{msg}");
        }
    }

    #[test]
    fn dynamic_experiments_need_their_blocks() {
        assert!(RunConfig::from_json(r#"{"experiment": "dipole_growth"}"#).is_err());
        let ok = r#"{"experiment": "single_ring",
            "sim": {"dt": 0.1, "t_end": 1.0, "d": 3},
            "initial": {"ring": {"center": {"r": 1.0, "z": 0.0}, "radius": 0.2, "amplitude": 1.0, "resolution": 8}}}"#;
        assert!(RunConfig::from_json(ok).is_ok());
        let bad_d = ok.replace("\"d\": 3", "\"d\": 9");
        assert!(RunConfig::from_json(&bad_d).is_err());
    }
}
