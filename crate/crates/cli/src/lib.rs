//! Configuration-driven runner for the `axivort` experiments.

pub mod config;
pub mod runner;

use std::path::{Path, PathBuf};

pub use config::{ExperimentName, RunConfig, REGISTRY};
pub use runner::{run, Outcome, Report};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_BOUND_FAILURE: i32 = 2;

/// Worker-count override; the only environment variable read.
pub const THREADS_ENV: &str = "AXIVORT_THREADS";

/// One line per registered experiment.
pub fn list() -> String {
    REGISTRY.iter().map(|(name, desc)| format!("{:<18} {desc}\n", name.as_str())).collect()
}

/// Load, run and write one configuration. Returns the outcome and the
/// directory written to.
pub fn run_config_file(path: &Path, out: Option<PathBuf>, seed: Option<u64>) -> anyhow::Result<(Outcome, PathBuf)> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = seed {
        cfg.corpus_seed = seed;
    }
    let dir = out
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("axivort-out").join(cfg.experiment.as_str()));
    let outcome = run(&cfg)?;
    outcome.write(&dir)?;
    Ok((outcome, dir))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn listing_is_in_registry_order() {
        let text = list();
        let names: Vec<&str> = text.lines().map(|l| l.split_whitespace().next().unwrap()).collect();
        assert_eq!(names, ["dipole_growth", "single_ring", "inequality_corpus", "kernel_bounds", "highd_static"]);
        assert_eq!(text, list());
    }
}
