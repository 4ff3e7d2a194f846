use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use radcom::config::SignalConfig;
use radcom::dataset::{DatasetKind, DatasetSpec};
use radcom::experiment::{default_density_configs, default_weight_grid, WEIGHT_SWEEP_SNR_DB};
use radcom::model::ModelConfig;
use radcom::train::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::exit::Usage;

fn default_dataset() -> DatasetSpec {
    DatasetSpec::new(DatasetKind::Awgn, 600, 0)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    /// SNR for the confusion matrices; all SNRs pooled when absent.
    #[serde(default)]
    pub confusion_snr: Option<i32>,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection { confusion_snr: Some(10) }
    }
}

fn d_grid() -> Vec<f64> {
    default_weight_grid()
}
fn d_snr() -> i32 {
    WEIGHT_SWEEP_SNR_DB
}
fn d_density() -> Vec<ModelConfig> {
    default_density_configs()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default = "d_grid")]
    pub weight_grid: Vec<f64>,
    #[serde(default = "d_snr")]
    pub weight_snr: i32,
    #[serde(default = "d_density")]
    pub density: Vec<ModelConfig>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            weight_grid: d_grid(),
            weight_snr: d_snr(),
            density: d_density(),
        }
    }
}

/// Everything a command needs. A copy is written next to every output.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Default output directory.
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Container to read; generated in memory from `dataset` when absent.
    #[serde(default)]
    pub dataset_path: Option<PathBuf>,
    /// Signal and channel parameters; built-in defaults when absent.
    #[serde(default)]
    pub signals_path: Option<PathBuf>,
    #[serde(default = "default_dataset")]
    pub dataset: DatasetSpec,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub evaluate: EvalSection,
    #[serde(default)]
    pub sweep: SweepSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            out: None,
            dataset_path: None,
            signals_path: None,
            dataset: default_dataset(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            evaluate: EvalSection::default(),
            sweep: SweepSection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let cfg: ExperimentConfig = toml::from_str(&text)
            .map_err(|e| Usage(format!("invalid config {}: {e}", path.display())))?;
        // Relative paths in the file are relative to the file itself.
        let base = path.parent().unwrap_or(Path::new("."));
        Ok(cfg.rebase(base))
    }

    fn rebase(mut self, base: &Path) -> Self {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(q) = p.as_mut() {
                if q.is_relative() {
                    *q = base.join(&*q);
                }
            }
        };
        fix(&mut self.out);
        fix(&mut self.dataset_path);
        fix(&mut self.signals_path);
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.dataset.snr_levels().map_err(|e| Usage(e.to_string()))?;
        self.model.validate().map_err(|e| Usage(e.to_string()))?;
        self.train.validate().map_err(|e| Usage(e.to_string()))?;
        for m in &self.sweep.density {
            m.validate().map_err(|e| Usage(e.to_string()))?;
        }
        Ok(())
    }

    pub fn signals(&self) -> Result<SignalConfig> {
        match &self.signals_path {
            Some(p) => SignalConfig::load(p).map_err(|e| Usage(format!("signal config {}: {e}", p.display())).into()),
            None => Ok(SignalConfig::default()),
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let c = ExperimentConfig::default();
        let text = c.to_toml().unwrap();
        let back: ExperimentConfig = toml::from_str(&text).unwrap();
        assert_eq!(back.to_toml().unwrap(), text);
        assert_eq!(back.sweep.weight_grid.len(), 11);
    }

    #[test]
    fn partial_file_fills_defaults() {
        let c: ExperimentConfig = toml::from_str("[dataset]\nkind = \"RadComAWGN\"\nframes_per_stratum = 10\n").unwrap();
        assert_eq!(c.dataset.frames_per_stratum, 10);
        assert_eq!(c.train.epochs, 30);
        assert!(toml::from_str::<ExperimentConfig>("bogus = 1").is_err());
    }
}
