use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::container::{DatasetContainer, Provenance, RecordSeedRule, SeedRegistry};
use super::key::{mix_seed, record_seed, WaveformKey};
use super::split::{make_splits, SplitRatios, MIN_STRATUM};
use super::vectorize::normalize_vectorize;
use crate::channel::{apply_awgn, apply_dynamic, SnrLevel};
use crate::config::SignalConfig;
use crate::error::{Error, Result};
use crate::signal::{synth_frame, ModSigPair};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DatasetKind {
    #[serde(rename = "RadComAWGN", alias = "awgn")]
    Awgn,
    #[serde(rename = "RadComDynamic", alias = "dynamic")]
    Dynamic,
}

impl DatasetKind {
    pub fn name(self) -> &'static str {
        match self {
            DatasetKind::Awgn => "RadComAWGN",
            DatasetKind::Dynamic => "RadComDynamic",
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "radcomawgn" | "awgn" => Ok(DatasetKind::Awgn),
            "radcomdynamic" | "dynamic" => Ok(DatasetKind::Dynamic),
            _ => Err(Error::InvalidArgument(format!(
                "unknown dataset kind {s:?} (expected RadComAWGN or RadComDynamic)"
            ))),
        }
    }
}

fn default_frames() -> usize {
    600
}

fn default_snrs() -> Vec<i32> {
    SnrLevel::all().map(|s| s.db()).collect()
}

/// Everything that determines a generated container.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub kind: DatasetKind,
    #[serde(default = "default_frames")]
    pub frames_per_stratum: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_snrs")]
    pub snrs: Vec<i32>,
    /// Drop the three interference-capture classes from dynamic datasets.
    #[serde(default)]
    pub exclude_interference: bool,
}

impl DatasetSpec {
    pub fn new(kind: DatasetKind, frames_per_stratum: usize, master_seed: u64) -> Self {
        DatasetSpec {
            kind,
            frames_per_stratum,
            master_seed,
            snrs: default_snrs(),
            exclude_interference: false,
        }
    }

    pub fn pairs(&self) -> Vec<ModSigPair> {
        ModSigPair::ALL
            .into_iter()
            .filter(|p| !(self.kind == DatasetKind::Dynamic && self.exclude_interference && p.signal().is_interference_class()))
            .collect()
    }

    pub fn snr_levels(&self) -> Result<Vec<SnrLevel>> {
        let mut v = self.snrs.iter().map(|&d| SnrLevel::new(d)).collect::<Result<Vec<_>>>()?;
        v.sort();
        v.dedup();
        if v.is_empty() {
            return Err(Error::Config("at least one SNR level is required".into()));
        }
        Ok(v)
    }

    pub fn record_count(&self) -> Result<usize> {
        Ok(self.pairs().len() * self.snr_levels()?.len() * self.frames_per_stratum)
    }
}

/// Synthesises, impairs, normalises and stores one record per key.
/// Record `key` uses seed `record_seed(master_seed, key)`; the clean frame,
/// dynamic channel and noise draw sub-seeds 1, 2 and 3 from it.
pub fn generate_record(spec: &DatasetSpec, signals: &SignalConfig, key: &WaveformKey) -> Result<super::VectorizedFrame> {
    let seed = record_seed(spec.master_seed, key);
    let mut frame = synth_frame(key.pair, &signals.synth, mix_seed(seed, 1))?;
    if spec.kind == DatasetKind::Dynamic {
        frame = apply_dynamic(&frame, &signals.dynamic, mix_seed(seed, 2))?;
    }
    let noisy = apply_awgn(&frame, key.snr.db() as f64, mix_seed(seed, 3))?;
    normalize_vectorize(&noisy)
}

pub fn generate_dataset(spec: &DatasetSpec, signals: &SignalConfig) -> Result<DatasetContainer> {
    if spec.frames_per_stratum < MIN_STRATUM {
        return Err(Error::InvalidArgument(format!(
            "frames_per_stratum must be at least {MIN_STRATUM}, got {}",
            spec.frames_per_stratum
        )));
    }
    signals.validate()?;
    let snrs = spec.snr_levels()?;
    let pairs = spec.pairs();
    let mut c = DatasetContainer::with_capacity(spec.record_count()?);
    for &pair in &pairs {
        for &snr in &snrs {
            for sample in 0..spec.frames_per_stratum as u32 {
                let key = WaveformKey::new(pair, snr, sample);
                c.put(key, &generate_record(spec, signals, &key)?)?;
            }
        }
    }
    let split_seed = mix_seed(spec.master_seed, 0x5_9117);
    let splits = make_splits(&c, SplitRatios::default(), split_seed)?;
    c.set_splits(splits)?;
    c.set_provenance(Provenance {
        kind: spec.kind.name().to_string(),
        frames_per_stratum: spec.frames_per_stratum,
        snrs: snrs.iter().map(|s| s.db()).collect(),
        exclude_interference: spec.exclude_interference,
        seeds: SeedRegistry {
            master: spec.master_seed,
            splits: split_seed,
            record_rule: RecordSeedRule::SplitmixKey,
        },
        signal_config: signals.to_toml()?,
    });
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::SignalClass;

    #[test]
    fn record_counts() {
        let awgn = DatasetSpec::new(DatasetKind::Awgn, 10, 0);
        assert_eq!(awgn.record_count().unwrap(), 2400);
        let mut dynamic = DatasetSpec::new(DatasetKind::Dynamic, 10, 0);
        assert_eq!(dynamic.record_count().unwrap(), 2400);
        dynamic.exclude_interference = true;
        assert_eq!(dynamic.record_count().unwrap(), 1800);
        assert!(dynamic.pairs().iter().all(|p| p.signal() != SignalClass::Bluetooth));
    }

    #[test]
    fn small_generation_is_unit_energy_and_split() {
        let mut spec = DatasetSpec::new(DatasetKind::Dynamic, 10, 77);
        spec.snrs = vec![-10, 10];
        let c = generate_dataset(&spec, &SignalConfig::default()).unwrap();
        assert_eq!(c.len(), 12 * 2 * 10);
        for k in c.keys() {
            let v = c.get(k).unwrap();
            assert!((v.energy() - 1.0).abs() < 1e-6);
        }
        let s = c.splits().unwrap();
        assert_eq!(s.len(), c.len());
        assert_eq!(s.test.len(), 24);
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("RadComAWGN".parse::<DatasetKind>().unwrap(), DatasetKind::Awgn);
        assert_eq!("dynamic".parse::<DatasetKind>().unwrap(), DatasetKind::Dynamic);
        assert!("hdf5".parse::<DatasetKind>().is_err());
        let spec: DatasetSpec = toml::from_str("kind = \"RadComDynamic\"\nframes_per_stratum = 20").unwrap();
        assert_eq!(spec.snrs.len(), 20);
        assert_eq!(spec.kind, DatasetKind::Dynamic);
    }

    #[test]
    fn too_few_frames_rejected() {
        assert!(generate_dataset(&DatasetSpec::new(DatasetKind::Awgn, 9, 0), &SignalConfig::default()).is_err());
    }
}
