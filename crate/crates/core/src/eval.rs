//! Per-SNR accuracy, confusion matrices and rank correlation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::channel::SnrLevel;
use crate::dataset::{DatasetContainer, WaveformKey, VECTOR_LEN};
use crate::error::{Error, Result};
use crate::model::MtlModel;
use crate::scalar::Scalar;
use crate::signal::{Modulation, SignalClass};
use crate::train::predict_values;

/// Anything that labels records with `(modulation, signal)` class indices.
pub trait Predictor {
    fn predict(&self, data: &DatasetContainer, keys: &[WaveformKey]) -> Result<Vec<(usize, usize)>>;
}

impl<T: Scalar> Predictor for MtlModel<T> {
    fn predict(&self, data: &DatasetContainer, keys: &[WaveformKey]) -> Result<Vec<(usize, usize)>> {
        let mut out = Vec::with_capacity(keys.len());
        for chunk in keys.chunks(4096) {
            let mut values = Vec::with_capacity(chunk.len() * VECTOR_LEN);
            for k in chunk {
                values.extend_from_slice(data.values(k)?);
            }
            let (m, s) = predict_values(self, &values)?;
            out.extend(m.into_iter().zip(s));
        }
        Ok(out)
    }
}

/// Reads the answer off the key. Used to check the evaluation plumbing.
#[derive(Clone, Copy, Debug, Default)]
pub struct OraclePredictor;

impl Predictor for OraclePredictor {
    fn predict(&self, _data: &DatasetContainer, keys: &[WaveformKey]) -> Result<Vec<(usize, usize)>> {
        Ok(keys.iter().map(|k| (k.modulation().index(), k.signal().index())).collect())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub n: usize,
    pub mod_correct: usize,
    pub sig_correct: usize,
    pub both_correct: usize,
}

impl Counts {
    fn add(&mut self, o: &Counts) {
        self.n += o.n;
        self.mod_correct += o.mod_correct;
        self.sig_correct += o.sig_correct;
        self.both_correct += o.both_correct;
    }

    fn ratio(c: usize, n: usize) -> f64 {
        if n == 0 {
            f64::NAN
        } else {
            c as f64 / n as f64
        }
    }

    pub fn mod_acc(&self) -> f64 {
        Self::ratio(self.mod_correct, self.n)
    }

    pub fn sig_acc(&self) -> f64 {
        Self::ratio(self.sig_correct, self.n)
    }

    pub fn both_acc(&self) -> f64 {
        Self::ratio(self.both_correct, self.n)
    }
}

pub type Confusion = Vec<Vec<u64>>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Keyed by SNR in dB; only levels present in the evaluated keys.
    pub per_snr: BTreeMap<i32, Counts>,
    /// `None` means the matrices pool every SNR.
    pub confusion_snr: Option<i32>,
    /// Rows are true classes, columns predictions.
    pub mod_confusion: Confusion,
    pub sig_confusion: Confusion,
}

impl EvalReport {
    pub fn from_predictions(
        keys: &[WaveformKey],
        preds: &[(usize, usize)],
        confusion_snr: Option<i32>,
    ) -> Result<Self> {
        if keys.len() != preds.len() {
            return Err(Error::shape(
                "evaluate",
                format!("{} keys but {} predictions", keys.len(), preds.len()),
            ));
        }
        if keys.is_empty() {
            return Err(Error::EmptySplit("test"));
        }
        if let Some(s) = confusion_snr {
            SnrLevel::new(s)?;
            if !keys.iter().any(|k| k.snr.db() == s) {
                return Err(Error::NotFound(format!("no evaluation records at {s} dB")));
            }
        }
        let mut per_snr: BTreeMap<i32, Counts> = BTreeMap::new();
        let mut mod_confusion = vec![vec![0u64; Modulation::COUNT]; Modulation::COUNT];
        let mut sig_confusion = vec![vec![0u64; SignalClass::COUNT]; SignalClass::COUNT];
        for (k, &(pm, ps)) in keys.iter().zip(preds) {
            if pm >= Modulation::COUNT || ps >= SignalClass::COUNT {
                return Err(Error::InvalidArgument(format!("prediction ({pm}, {ps}) out of range")));
            }
            let (tm, ts) = (k.modulation().index(), k.signal().index());
            let c = per_snr.entry(k.snr.db()).or_default();
            c.n += 1;
            c.mod_correct += (pm == tm) as usize;
            c.sig_correct += (ps == ts) as usize;
            c.both_correct += (pm == tm && ps == ts) as usize;
            if confusion_snr.map_or(true, |s| s == k.snr.db()) {
                mod_confusion[tm][pm] += 1;
                sig_confusion[ts][ps] += 1;
            }
        }
        Ok(EvalReport {
            per_snr,
            confusion_snr,
            mod_confusion,
            sig_confusion,
        })
    }

    pub fn snrs(&self) -> Vec<i32> {
        self.per_snr.keys().copied().collect()
    }

    pub fn at(&self, snr: i32) -> Option<&Counts> {
        self.per_snr.get(&snr)
    }

    /// Counts pooled over every SNR accepted by `keep`.
    pub fn pooled(&self, keep: impl Fn(i32) -> bool) -> Counts {
        let mut c = Counts::default();
        for (_, v) in self.per_snr.iter().filter(|(s, _)| keep(**s)) {
            c.add(v);
        }
        c
    }

    pub fn overall(&self) -> Counts {
        self.pooled(|_| true)
    }
}

/// Runs `predictor` over `keys` and tallies the results.
pub fn evaluate<P: Predictor + ?Sized>(
    predictor: &P,
    data: &DatasetContainer,
    keys: &[WaveformKey],
    confusion_snr: Option<i32>,
) -> Result<EvalReport> {
    if let Some(s) = confusion_snr {
        SnrLevel::new(s)?;
        if !keys.iter().any(|k| k.snr.db() == s) {
            return Err(Error::NotFound(format!("no evaluation records at {s} dB")));
        }
    }
    let preds = predictor.predict(data, keys)?;
    EvalReport::from_predictions(keys, &preds, confusion_snr)
}

/// Average ranks, ties sharing the mean of their positions (1-based).
pub fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut r = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    sab / (saa * sbb).sqrt()
}

/// Spearman rank correlation. NaN when either input is constant.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "spearman needs two equal-length inputs of at least 2, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(pearson(&ranks(a), &ranks(b)))
}
