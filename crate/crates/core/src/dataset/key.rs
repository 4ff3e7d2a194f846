use std::fmt;

use serde::{Deserialize, Serialize};

use crate::channel::SnrLevel;
use crate::error::{Error, Result};
use crate::signal::{ModSigPair, Modulation, SignalClass};

/// Address of one record: both labels, the SNR and a sample number.
///
/// Serialises compactly as `[modulation index, signal index, snr dB, sample]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "(u8, u8, i32, u32)", into = "(u8, u8, i32, u32)")]
pub struct WaveformKey {
    pub pair: ModSigPair,
    pub snr: SnrLevel,
    pub sample: u32,
}

impl WaveformKey {
    pub fn new(pair: ModSigPair, snr: SnrLevel, sample: u32) -> Self {
        WaveformKey { pair, snr, sample }
    }

    pub fn modulation(&self) -> Modulation {
        self.pair.modulation()
    }

    pub fn signal(&self) -> SignalClass {
        self.pair.signal()
    }

    /// Injective 64-bit packing used for seed derivation.
    pub fn packed(&self) -> u64 {
        ((self.modulation().index() as u64) << 56)
            | ((self.signal().index() as u64) << 48)
            | (((self.snr.db() as i8) as u8 as u64) << 40)
            | self.sample as u64
    }
}

impl TryFrom<(u8, u8, i32, u32)> for WaveformKey {
    type Error = Error;

    fn try_from((m, s, snr, sample): (u8, u8, i32, u32)) -> Result<Self> {
        let modulation = Modulation::from_index(m as usize)
            .ok_or_else(|| Error::Format(format!("modulation index {m} out of range")))?;
        let signal =
            SignalClass::from_index(s as usize).ok_or_else(|| Error::Format(format!("signal index {s} out of range")))?;
        Ok(WaveformKey {
            pair: ModSigPair::new(modulation, signal)?,
            snr: SnrLevel::new(snr)?,
            sample,
        })
    }
}

impl From<WaveformKey> for (u8, u8, i32, u32) {
    fn from(k: WaveformKey) -> Self {
        (k.modulation().index() as u8, k.signal().index() as u8, k.snr.db(), k.sample)
    }
}

impl fmt::Display for WaveformKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.pair, self.snr.db(), self.sample)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes two 64-bit values into a well-spread seed.
pub fn mix_seed(a: u64, b: u64) -> u64 {
    splitmix64(splitmix64(a) ^ b.rotate_left(17) ^ 0x5851_F42D_4C95_7F2D)
}

/// Per-record seed: a hash of the master seed and the key.
pub fn record_seed(master_seed: u64, key: &WaveformKey) -> u64 {
    mix_seed(master_seed, key.packed())
}
