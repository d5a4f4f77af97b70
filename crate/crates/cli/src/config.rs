//! Experiment configuration: one flat JSON document per run.

use std::path::{Path, PathBuf};

use mrgg_core::experiments::{Scenario, SparsityRule};
use mrgg_core::inference::{TestSettings, DEFAULT_BINS};
use mrgg_core::{LatitudeSpec, NamedEnvelope};
use serde::Deserialize;

use crate::CliError;

/// Every field is optional here; each command checks the ones it needs.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Preset: `bimodal-heaviside` or `forward-heaviside`. Explicit model
    /// fields override the preset.
    pub scenario: Option<String>,
    pub n: Option<usize>,
    pub n_list: Option<Vec<usize>>,
    pub d: Option<usize>,
    pub envelope: Option<NamedEnvelope>,
    pub latitude: Option<LatitudeSpec>,
    pub sparsity: Option<SparsityRule>,
    /// Master seed. `--seed` overrides it.
    pub seed: Option<u64>,
    /// Number of replicates.
    pub seeds: Option<usize>,
    pub out: Option<PathBuf>,
    /// Input graph for `estimate`; relative paths start at the config file.
    pub graph: Option<PathBuf>,
    pub alpha: Option<f64>,
    pub bins: Option<usize>,
    pub calibration_trials: Option<usize>,
    pub trials: Option<usize>,
    pub reuse_distances: Option<bool>,
}

fn input(msg: impl Into<String>) -> CliError {
    CliError::Input(msg.into())
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| input(format!("config: {e}")))?;
        cfg.check_common()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<(Self, PathBuf), CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| input(format!("cannot read {}: {e}", path.display())))?;
        let cfg = Self::parse(&text)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((cfg, base))
    }

    /// Checks that do not depend on the command.
    fn check_common(&self) -> Result<(), CliError> {
        if let Some(name) = &self.scenario {
            preset(name)?;
        }
        if self.n == Some(0) {
            return Err(input("n must be positive"));
        }
        if let Some(list) = &self.n_list {
            if list.contains(&0) {
                return Err(input("n_list entries must be positive"));
            }
        }
        if self.seeds == Some(0) {
            return Err(input("seeds must be positive"));
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0 && a < 1.0) {
                return Err(input(format!("alpha {a} outside (0, 1)")));
            }
        }
        if let Some(b) = self.bins {
            if b < 2 {
                return Err(input("bins must be at least 2"));
            }
        }
        if self.trials == Some(0) {
            return Err(input("trials must be positive"));
        }
        if self.calibration_trials == Some(0) {
            return Err(input("calibration_trials must be positive"));
        }
        if self.n.is_some() && self.n_list.is_some() {
            return Err(input("give either n or n_list, not both"));
        }
        if self.has_model() {
            self.scenario()?;
        }
        Ok(())
    }

    fn has_model(&self) -> bool {
        self.scenario.is_some() || self.envelope.is_some() || self.latitude.is_some()
    }

    /// Generative model, if the config describes one.
    pub fn truth(&self) -> Result<Option<Scenario>, CliError> {
        if self.has_model() {
            self.scenario().map(Some)
        } else {
            Ok(None)
        }
    }

    pub fn scenario(&self) -> Result<Scenario, CliError> {
        let base = self.scenario.as_deref().map(preset).transpose()?;
        let pick = |field: &str| input(format!("config needs `{field}` or a `scenario` preset"));
        let d = self.d.or(base.as_ref().map(|s| s.d)).ok_or_else(|| pick("d"))?;
        let envelope =
            self.envelope.clone().or(base.as_ref().map(|s| s.envelope.clone())).ok_or_else(|| pick("envelope"))?;
        let latitude =
            self.latitude.clone().or(base.as_ref().map(|s| s.latitude.clone())).ok_or_else(|| pick("latitude"))?;
        let sparsity = self.sparsity.or(base.as_ref().map(|s| s.sparsity)).unwrap_or_default();
        let s = Scenario { d, envelope, latitude, sparsity };
        s.validate().map_err(|e| input(format!("scenario: {e}")))?;
        Ok(s)
    }

    pub fn single_n(&self) -> Result<usize, CliError> {
        match (self.n, &self.n_list) {
            (Some(n), _) => Ok(n),
            (None, Some(list)) if list.len() == 1 => Ok(list[0]),
            _ => Err(input("config needs a single `n`")),
        }
    }

    pub fn sizes(&self) -> Result<Vec<usize>, CliError> {
        match (self.n, &self.n_list) {
            (Some(n), None) => Ok(vec![n]),
            (None, Some(list)) if !list.is_empty() => Ok(list.clone()),
            _ => Err(input("config needs `n` or a non-empty `n_list`")),
        }
    }

    pub fn replicates(&self, default: usize) -> usize {
        self.seeds.unwrap_or(default)
    }

    pub fn test_settings(&self) -> TestSettings {
        let d = TestSettings::default();
        TestSettings {
            alpha: self.alpha.unwrap_or(d.alpha),
            bins: self.bins.unwrap_or(DEFAULT_BINS),
            reuse_distances: self.reuse_distances.unwrap_or(d.reuse_distances),
        }
    }
}

fn preset(name: &str) -> Result<Scenario, CliError> {
    match name {
        "bimodal-heaviside" => Ok(Scenario::bimodal_heaviside()),
        "forward-heaviside" => Ok(Scenario::forward_heaviside()),
        other => Err(input(format!(
            "unknown scenario `{other}` (expected bimodal-heaviside or forward-heaviside)"
        ))),
    }
}
