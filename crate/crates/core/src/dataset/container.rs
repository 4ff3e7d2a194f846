//! `RCDS` dataset container.
//!
//! All integers are little-endian.
//!
//! ```text
//! 0       4     magic "RCDS"
//! 4       2     format version (u16) = 1
//! 6       4     header length H (u32)
//! 10      H     header, UTF-8 JSON (see `Header`)
//! 10+H    *     records, 1032 bytes each, in index order:
//!                 1    modulation index (u8)
//!                 1    signal index (u8)
//!                 1    SNR in dB (i8)
//!                 1    zero padding
//!                 4    sample number (u32)
//!                 1024 256 × f32: 128 I values then 128 Q values
//! ```
//!
//! Index offsets in the header are relative to the first record byte.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::key::WaveformKey;
use super::split::Splits;
use super::vectorize::{VectorizedFrame, VECTOR_LEN};
use crate::channel::SnrLevel;
use crate::error::{Error, Result};
use crate::signal::{ModSigPair, Modulation, SignalClass, FRAME_LEN, SAMPLE_RATE_HZ};

pub const MAGIC: &[u8; 4] = b"RCDS";
pub const VERSION: u16 = 1;
pub const RECORD_BYTES: usize = 8 + 4 * VECTOR_LEN;
const PREAMBLE_BYTES: u64 = 10;

/// How a container was produced; enough to regenerate it bit-exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub kind: String,
    pub frames_per_stratum: usize,
    pub snrs: Vec<i32>,
    pub exclude_interference: bool,
    pub seeds: SeedRegistry,
    /// The signal configuration used, as TOML text.
    pub signal_config: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedRegistry {
    pub master: u64,
    /// Seed of the stratified split shuffle.
    pub splits: u64,
    /// Rule deriving each record's seed from `master` and its key.
    pub record_rule: RecordSeedRule,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordSeedRule {
    /// `splitmix64(splitmix64(master) ^ rotl(packed_key, 17) ^ c)`.
    SplitmixKey,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub format_version: u16,
    pub sample_rate_hz: f64,
    pub frame_len: usize,
    pub record_bytes: usize,
    pub modulations: Vec<String>,
    pub signals: Vec<String>,
    pub provenance: Option<Provenance>,
    pub record_count: usize,
    pub index: Vec<(WaveformKey, u64)>,
    pub splits: Option<Splits>,
}

/// In-memory key-value store of vectorized frames.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DatasetContainer {
    keys: Vec<WaveformKey>,
    values: Vec<f32>,
    index: HashMap<WaveformKey, usize>,
    provenance: Option<Provenance>,
    splits: Option<Splits>,
}

fn class_names() -> (Vec<String>, Vec<String>) {
    (
        Modulation::ALL.iter().map(|m| m.name().to_string()).collect(),
        SignalClass::ALL.iter().map(|s| s.name().to_string()).collect(),
    )
}

impl DatasetContainer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(records: usize) -> Self {
        DatasetContainer {
            keys: Vec::with_capacity(records),
            values: Vec::with_capacity(records * VECTOR_LEN),
            index: HashMap::with_capacity(records),
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// Keys in storage order.
    pub fn keys(&self) -> &[WaveformKey] {
        &self.keys
    }

    pub fn contains(&self, key: &WaveformKey) -> bool {
        self.index.contains_key(key)
    }

    pub fn put(&mut self, key: WaveformKey, v: &VectorizedFrame) -> Result<()> {
        if self.index.contains_key(&key) {
            return Err(Error::Conflict(format!("key {key} already stored")));
        }
        self.index.insert(key, self.keys.len());
        self.keys.push(key);
        self.values.extend_from_slice(v.values());
        Ok(())
    }

    /// Borrowed values of a stored record.
    pub fn values(&self, key: &WaveformKey) -> Result<&[f32]> {
        let i = *self.index.get(key).ok_or_else(|| Error::NotFound(format!("key {key}")))?;
        Ok(&self.values[i * VECTOR_LEN..(i + 1) * VECTOR_LEN])
    }

    pub fn get(&self, key: &WaveformKey) -> Result<VectorizedFrame> {
        VectorizedFrame::from_values(self.values(key)?.to_vec())
    }

    pub fn provenance(&self) -> Option<&Provenance> {
        self.provenance.as_ref()
    }

    pub fn set_provenance(&mut self, p: Provenance) {
        self.provenance = Some(p);
    }

    pub fn splits(&self) -> Option<&Splits> {
        self.splits.as_ref()
    }

    /// Attaches split manifests; every listed key must be stored.
    pub fn set_splits(&mut self, splits: Splits) -> Result<()> {
        for k in splits.train.iter().chain(&splits.val).chain(&splits.test) {
            if !self.contains(k) {
                return Err(Error::NotFound(format!("split key {k} is not stored")));
            }
        }
        self.splits = Some(splits);
        Ok(())
    }

    /// Record counts per (pair, SNR) stratum.
    pub fn strata(&self) -> BTreeMap<(ModSigPair, SnrLevel), usize> {
        let mut out = BTreeMap::new();
        for k in &self.keys {
            *out.entry((k.pair, k.snr)).or_insert(0) += 1;
        }
        out
    }

    pub fn header(&self) -> Header {
        let (modulations, signals) = class_names();
        Header {
            format_version: VERSION,
            sample_rate_hz: SAMPLE_RATE_HZ,
            frame_len: FRAME_LEN,
            record_bytes: RECORD_BYTES,
            modulations,
            signals,
            provenance: self.provenance.clone(),
            record_count: self.keys.len(),
            index: self
                .keys
                .iter()
                .enumerate()
                .map(|(i, k)| (*k, (i * RECORD_BYTES) as u64))
                .collect(),
            splits: self.splits.clone(),
        }
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let header = serde_json::to_vec(&self.header())?;
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        let len = u32::try_from(header.len()).map_err(|_| Error::Format("header exceeds 4 GiB".into()))?;
        w.write_all(&len.to_le_bytes())?;
        w.write_all(&header)?;
        let mut rec = Vec::with_capacity(RECORD_BYTES);
        for (i, k) in self.keys.iter().enumerate() {
            rec.clear();
            encode_key(k, &mut rec);
            for v in &self.values[i * VECTOR_LEN..(i + 1) * VECTOR_LEN] {
                rec.extend_from_slice(&v.to_le_bytes());
            }
            w.write_all(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let header = read_header(&mut r)?;
        let mut c = DatasetContainer::with_capacity(header.record_count);
        let mut rec = vec![0u8; RECORD_BYTES];
        for (i, (key, offset)) in header.index.iter().enumerate() {
            if *offset != (i * RECORD_BYTES) as u64 {
                return Err(Error::Format(format!("record {i}: offset {offset} breaks the fixed-width layout")));
            }
            r.read_exact(&mut rec).map_err(|_| Error::Format("truncated record block".into()))?;
            let (stored, values) = decode_record(&rec)?;
            if stored != *key {
                return Err(Error::Format(format!("record {i}: index says {key}, record says {stored}")));
            }
            c.put(stored, &VectorizedFrame::from_values(values)?)
                .map_err(|e| Error::Format(format!("record {i}: {e}")))?;
        }
        c.provenance = header.provenance;
        if let Some(s) = header.splits {
            c.set_splits(s).map_err(|e| Error::Format(e.to_string()))?;
        }
        Ok(c)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

fn encode_key(k: &WaveformKey, out: &mut Vec<u8>) {
    out.push(k.modulation().index() as u8);
    out.push(k.signal().index() as u8);
    out.push((k.snr.db() as i8) as u8);
    out.push(0);
    out.extend_from_slice(&k.sample.to_le_bytes());
}

fn decode_record(rec: &[u8]) -> Result<(WaveformKey, Vec<f32>)> {
    let key = WaveformKey::try_from((
        rec[0],
        rec[1],
        rec[2] as i8 as i32,
        u32::from_le_bytes([rec[4], rec[5], rec[6], rec[7]]),
    ))
    .map_err(|e| Error::Format(format!("bad record key: {e}")))?;
    let values = rec[8..]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    Ok((key, values))
}

fn read_header<R: Read>(r: &mut R) -> Result<Header> {
    let mut pre = [0u8; PREAMBLE_BYTES as usize];
    r.read_exact(&mut pre).map_err(|_| Error::Format("file too short for a dataset container".into()))?;
    if &pre[0..4] != MAGIC {
        return Err(Error::Format(format!("bad container magic {:?}, expected \"RCDS\"", &pre[0..4])));
    }
    let version = u16::from_le_bytes([pre[4], pre[5]]);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported container version {version}")));
    }
    let len = u32::from_le_bytes([pre[6], pre[7], pre[8], pre[9]]) as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf).map_err(|_| Error::Format("truncated container header".into()))?;
    let header: Header =
        serde_json::from_slice(&buf).map_err(|e| Error::Format(format!("container header: {e}")))?;
    let (modulations, signals) = class_names();
    if header.modulations != modulations || header.signals != signals {
        return Err(Error::Format("container class lists differ from this build".into()));
    }
    if header.record_bytes != RECORD_BYTES || header.frame_len != FRAME_LEN {
        return Err(Error::Format("container record layout differs from this build".into()));
    }
    if header.index.len() != header.record_count {
        return Err(Error::Format("index length differs from record count".into()));
    }
    Ok(header)
}

/// Random-access reader that seeks to single records without loading the
/// whole record block.
pub struct ContainerReader<R> {
    inner: R,
    header: Header,
    records_start: u64,
    offsets: HashMap<WaveformKey, u64>,
}

impl ContainerReader<BufReader<File>> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        Self::new(BufReader::new(File::open(path)?))
    }
}

impl<R: Read + Seek> ContainerReader<R> {
    pub fn new(mut inner: R) -> Result<Self> {
        inner.seek(SeekFrom::Start(0))?;
        let header = read_header(&mut inner)?;
        let records_start = inner.stream_position()?;
        let offsets = header.index.iter().copied().collect();
        Ok(ContainerReader {
            inner,
            header,
            records_start,
            offsets,
        })
    }

    pub fn header(&self) -> &Header {
        &self.header
    }

    pub fn get(&mut self, key: &WaveformKey) -> Result<VectorizedFrame> {
        let off = *self.offsets.get(key).ok_or_else(|| Error::NotFound(format!("key {key}")))?;
        self.inner.seek(SeekFrom::Start(self.records_start + off))?;
        let mut rec = vec![0u8; RECORD_BYTES];
        self.inner.read_exact(&mut rec).map_err(|_| Error::Format("truncated record".into()))?;
        let (stored, values) = decode_record(&rec)?;
        if stored != *key {
            return Err(Error::Format(format!("index points {key} at record {stored}")));
        }
        VectorizedFrame::from_values(values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::io::Cursor;

    fn key(pair: usize, snr: i32, sample: u32) -> WaveformKey {
        WaveformKey::new(ModSigPair::ALL[pair], SnrLevel::new(snr).unwrap(), sample)
    }

    fn frame(rng: &mut ChaCha8Rng) -> VectorizedFrame {
        VectorizedFrame::from_values((0..VECTOR_LEN).map(|_| rng.gen_range(-1.0f32..1.0)).collect()).unwrap()
    }

    #[test]
    fn put_get_round_trip_and_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut c = DatasetContainer::new();
        let v = frame(&mut rng);
        c.put(key(0, 0, 0), &v).unwrap();
        assert_eq!(c.get(&key(0, 0, 0)).unwrap(), v);
        assert!(matches!(c.get(&key(0, 0, 1)), Err(Error::NotFound(_))));
        assert!(matches!(c.put(key(0, 0, 0), &v), Err(Error::Conflict(_))));
    }

    #[test]
    fn randomized_against_map_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut c = DatasetContainer::new();
        let mut oracle: HashMap<WaveformKey, Vec<u32>> = HashMap::new();
        for _ in 0..10_000 {
            let k = key(rng.gen_range(0..12), -20 + 2 * rng.gen_range(0..20), rng.gen_range(0..50));
            if rng.gen_bool(0.6) {
                let v = frame(&mut rng);
                let r = c.put(k, &v);
                if oracle.contains_key(&k) {
                    assert!(matches!(r, Err(Error::Conflict(_))));
                } else {
                    r.unwrap();
                    oracle.insert(k, v.values().iter().map(|x| x.to_bits()).collect());
                }
            } else {
                match (c.get(&k), oracle.get(&k)) {
                    (Ok(v), Some(bits)) => {
                        assert_eq!(&v.values().iter().map(|x| x.to_bits()).collect::<Vec<_>>(), bits)
                    }
                    (Err(Error::NotFound(_)), None) => {}
                    other => panic!("mismatch for {k}: {:?}", other.0.map(|_| ())),
                }
            }
        }
        assert_eq!(c.len(), oracle.len());
        let back = DatasetContainer::read_from(Cursor::new({
            let mut b = Vec::new();
            c.write_to(&mut b).unwrap();
            b
        }))
        .unwrap();
        for (k, bits) in &oracle {
            let v = back.get(k).unwrap();
            assert_eq!(&v.values().iter().map(|x| x.to_bits()).collect::<Vec<_>>(), bits);
        }
    }

    #[test]
    fn file_round_trip_is_byte_exact_and_seekable() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut c = DatasetContainer::new();
        for s in 0..20 {
            c.put(key(s % 12, -4, s as u32), &frame(&mut rng)).unwrap();
        }
        let mut a = Vec::new();
        c.write_to(&mut a).unwrap();
        let back = DatasetContainer::read_from(a.as_slice()).unwrap();
        assert_eq!(back, c);
        let mut b = Vec::new();
        back.write_to(&mut b).unwrap();
        assert_eq!(a, b);

        let mut reader = ContainerReader::new(Cursor::new(a)).unwrap();
        assert_eq!(reader.header().record_count, 20);
        let offsets: Vec<u64> = reader.header().index.iter().map(|e| e.1).collect();
        assert!(offsets.windows(2).all(|w| w[0] < w[1]));
        for k in c.keys().iter().rev() {
            assert_eq!(reader.get(k).unwrap(), c.get(k).unwrap());
        }
        assert!(matches!(reader.get(&key(0, 18, 999)), Err(Error::NotFound(_))));
    }

    #[test]
    fn record_layout_is_fixed() {
        let mut c = DatasetContainer::new();
        let mut vals = vec![0.0f32; VECTOR_LEN];
        vals[0] = 1.0;
        c.put(key(11, -6, 7), &VectorizedFrame::from_values(vals).unwrap()).unwrap();
        let mut buf = Vec::new();
        c.write_to(&mut buf).unwrap();
        assert_eq!(&buf[0..4], b"RCDS");
        let h = u32::from_le_bytes([buf[6], buf[7], buf[8], buf[9]]) as usize;
        let rec = &buf[10 + h..];
        assert_eq!(rec.len(), RECORD_BYTES);
        assert_eq!(&rec[0..8], &[8, 10, (-6i8) as u8, 0, 7, 0, 0, 0]);
        assert_eq!(&rec[8..12], &1.0f32.to_le_bytes());
    }

    #[test]
    fn corrupt_files_are_rejected() {
        assert!(matches!(DatasetContainer::read_from(&b"RCMW\x01\x00\x00\x00\x00\x00"[..]), Err(Error::Format(_))));
        assert!(matches!(DatasetContainer::read_from(&b"RC"[..]), Err(Error::Format(_))));
        let mut c = DatasetContainer::new();
        c.put(key(0, 0, 0), &VectorizedFrame::from_values(vec![0.5; VECTOR_LEN]).unwrap()).unwrap();
        let mut buf = Vec::new();
        c.write_to(&mut buf).unwrap();
        buf.truncate(buf.len() - 4);
        assert!(matches!(DatasetContainer::read_from(buf.as_slice()), Err(Error::Format(_))));
    }
}
