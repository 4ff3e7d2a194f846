use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::container::DatasetContainer;
use super::key::{mix_seed, WaveformKey};
use crate::error::{Error, Result};

/// Smallest stratum for which the ratios can be honoured.
pub const MIN_STRATUM: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.7,
            val: 0.2,
            test: 0.1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
}

/// Train/validation/test key lists.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<WaveformKey>,
    pub val: Vec<WaveformKey>,
    pub test: Vec<WaveformKey>,
}

impl Splits {
    pub fn get(&self, which: Split) -> &[WaveformKey] {
        match which {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Splits every (pair, SNR) stratum independently: validation and test
/// sizes are `round(ratio · n)`, training takes the rest. Each manifest is
/// sorted by key.
pub fn make_splits(container: &DatasetContainer, ratios: SplitRatios, seed: u64) -> Result<Splits> {
    let SplitRatios { train, val, test } = ratios;
    if [train, val, test].iter().any(|r| !(0.0..=1.0).contains(r)) || ((train + val + test) - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "split ratios must be in [0, 1] and sum to 1, got {train}/{val}/{test}"
        )));
    }
    let mut strata: BTreeMap<_, Vec<WaveformKey>> = BTreeMap::new();
    for k in container.keys() {
        strata.entry((k.pair, k.snr)).or_default().push(*k);
    }
    let mut out = Splits::default();
    for ((pair, snr), mut keys) in strata {
        let n = keys.len();
        if n < MIN_STRATUM {
            return Err(Error::InvalidArgument(format!(
                "stratum {pair} at {snr} has {n} records; at least {MIN_STRATUM} are needed"
            )));
        }
        keys.sort();
        let stratum_id = ((pair.index() as u64) << 8) | snr.index() as u64;
        keys.shuffle(&mut ChaCha8Rng::seed_from_u64(mix_seed(seed, stratum_id)));
        let n_val = (val * n as f64).round() as usize;
        let n_test = (test * n as f64).round() as usize;
        let n_train = n - n_val - n_test;
        out.train.extend_from_slice(&keys[..n_train]);
        out.val.extend_from_slice(&keys[n_train..n_train + n_val]);
        out.test.extend_from_slice(&keys[n_train + n_val..]);
    }
    out.train.sort();
    out.val.sort();
    out.test.sort();
    Ok(out)
}
