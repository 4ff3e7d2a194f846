use crate::error::{Error, Result};
use crate::signal::{IqFrame, FRAME_LEN};

/// Values per stored frame: 128 I followed by 128 Q.
pub const VECTOR_LEN: usize = 2 * FRAME_LEN;
/// Side of the square image the model sees.
pub const IMAGE_SIDE: usize = 16;

/// A unit-energy frame flattened to `[I; Q]`.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorizedFrame {
    values: Vec<f32>,
}

impl VectorizedFrame {
    pub fn from_values(values: Vec<f32>) -> Result<Self> {
        if values.len() != VECTOR_LEN {
            return Err(Error::InvalidArgument(format!(
                "vectorized frame must hold {VECTOR_LEN} values, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("vectorized frame"));
        }
        Ok(VectorizedFrame { values })
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f32> {
        self.values
    }

    pub fn energy(&self) -> f64 {
        self.values.iter().map(|&v| (v as f64) * (v as f64)).sum()
    }
}

/// Scales the frame to unit energy and stacks the real parts over the
/// imaginary parts. The 16×16 model input is this vector read row-major.
pub fn normalize_vectorize(frame: &IqFrame) -> Result<VectorizedFrame> {
    let energy = frame.energy();
    if !(energy > 0.0) {
        return Err(Error::InvalidArgument("cannot normalise a zero-energy frame".into()));
    }
    let k = 1.0 / energy.sqrt();
    let s = frame.samples();
    let mut values = Vec::with_capacity(VECTOR_LEN);
    values.extend(s.iter().map(|c| (c.re * k) as f32));
    values.extend(s.iter().map(|c| (c.im * k) as f32));
    VectorizedFrame::from_values(values)
}
