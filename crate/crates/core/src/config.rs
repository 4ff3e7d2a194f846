//! The signal configuration file: generator parameters plus the dynamic
//! channel settings, as shipped in `config/signals.toml`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::DynamicConfig;
use crate::error::{Error, Result};
use crate::signal::SynthParams;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalConfig {
    #[serde(default)]
    pub synth: SynthParams,
    #[serde(default)]
    pub dynamic: DynamicConfig,
}

impl SignalConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: SignalConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.synth.validate()?;
        self.dynamic.validate()
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }
}
