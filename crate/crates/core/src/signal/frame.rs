use num_complex::Complex64;

use crate::error::{Error, Result};

/// Samples per capture.
pub const FRAME_LEN: usize = 128;

/// One 128-sample complex baseband capture.
#[derive(Clone, Debug, PartialEq)]
pub struct IqFrame {
    samples: Vec<Complex64>,
}

impl IqFrame {
    pub fn new(samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != FRAME_LEN {
            return Err(Error::InvalidArgument(format!(
                "IQ frame must hold {FRAME_LEN} samples, got {}",
                samples.len()
            )));
        }
        if samples.iter().any(|s| !s.re.is_finite() || !s.im.is_finite()) {
            return Err(Error::NonFinite("IQ frame"));
        }
        Ok(IqFrame { samples })
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum()
    }

    /// Mean power per sample.
    pub fn power(&self) -> f64 {
        self.energy() / FRAME_LEN as f64
    }

    pub fn scaled(&self, k: f64) -> IqFrame {
        IqFrame {
            samples: self.samples.iter().map(|s| s * k).collect(),
        }
    }
}
