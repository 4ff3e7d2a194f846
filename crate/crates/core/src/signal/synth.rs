//! Clean baseband generators.
//!
//! Every generator is a pure function of its parameters and a 64-bit seed.
//! Random draws come from a ChaCha8 stream in a fixed, documented order so
//! that demodulation checks can regenerate the transmitted symbols.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;

use super::classes::{ModSigPair, Modulation};
use super::frame::{IqFrame, FRAME_LEN};
use super::params::{AmParams, ChipParams, FmcwParams, GfskParams, LinearParams, OqpskParams, PulseParams, PulseShape, SynthParams};
use crate::error::{Error, Result};

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Synthesises one clean 128-sample capture of `pair`.
pub fn synth_frame(pair: ModSigPair, params: &SynthParams, seed: u64) -> Result<IqFrame> {
    params.validate()?;
    IqFrame::new(synthesize(pair, params, seed, FRAME_LEN)?)
}

/// Same as [`synth_frame`] but for an arbitrary number of samples; the first
/// 128 samples equal the capture returned by `synth_frame`.
pub fn synthesize(pair: ModSigPair, params: &SynthParams, seed: u64, len: usize) -> Result<Vec<Complex64>> {
    let fs = params.sample_rate_hz;
    let signal = pair.signal();
    match pair.modulation() {
        Modulation::Pcw => {
            let p = params.pulse(signal).ok_or_else(|| Error::InvalidPairing {
                modulation: "PCW".into(),
                signal: signal.to_string(),
            })?;
            gen_pcw(p, fs, seed, len)
        }
        Modulation::Fmcw => gen_fmcw(&params.altimeter, fs, seed, len),
        Modulation::Bpsk => gen_bpsk(&params.satcom, fs, seed, len),
        Modulation::AmDsb => gen_am_dsb(&params.am, fs, seed, len),
        Modulation::AmSsb => gen_am_ssb(&params.am, fs, seed, len),
        Modulation::Ask => gen_ask(&params.short_range, fs, seed, len),
        Modulation::Gfsk => gen_gfsk(&params.bluetooth, fs, seed, len),
        Modulation::DsssCck => gen_dsss_cck(&params.wlan, fs, seed, len),
        Modulation::DsssOqpsk => gen_dsss_oqpsk(&params.zigbee, fs, seed, len),
    }
}

fn nyquist(name: &str, edge_hz: f64, fs: f64) -> Result<()> {
    if !(edge_hz < fs / 2.0) {
        return Err(Error::Nyquist(format!("{name}: {edge_hz} Hz at fs = {fs} Hz")));
    }
    Ok(())
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Raised-cosine impulse response at `t` symbol periods from its centre.
pub fn raised_cosine(t: f64, rolloff: f64) -> f64 {
    let d = 2.0 * rolloff * t;
    let denom = 1.0 - d * d;
    if denom.abs() < 1e-9 {
        PI / 4.0 * sinc(1.0 / (2.0 * rolloff))
    } else {
        sinc(t) * (PI * rolloff * t).cos() / denom
    }
}

/// Pulse value at `t` symbol periods after the start of symbol 0, for a
/// symbol sequence whose first element has index `first`.
fn shaped_sum<S>(symbols: &[S], first: i64, t: f64, shape: &PulseShape) -> S
where
    S: Copy + Default + std::ops::Add<Output = S> + std::ops::Mul<f64, Output = S>,
{
    let at = |k: i64| symbols.get((k - first) as usize).copied().unwrap_or_default();
    match *shape {
        PulseShape::Rectangular => at(t.floor() as i64),
        PulseShape::RaisedCosine { rolloff, span } => {
            let span = span as i64;
            let mut acc = S::default();
            let centre = t.round() as i64;
            for k in (centre - span)..=(centre + span) {
                if k < first {
                    continue;
                }
                acc = acc + at(k) * raised_cosine(t - k as f64, rolloff);
            }
            acc
        }
    }
}

/// Index range of symbols that can touch `len` samples at `sps`
/// samples per symbol.
fn symbol_range(shape: &PulseShape, len: usize, sps: f64) -> (i64, i64) {
    let last = (len as f64 / sps).ceil() as i64;
    match *shape {
        PulseShape::Rectangular => (0, last),
        PulseShape::RaisedCosine { span, .. } => (-(span as i64) - 1, last + span as i64 + 1),
    }
}

/// Pulsed CW. Draws: carrier phase, then the pulse start within the first
/// 128 samples (so the capture always holds one whole pulse). Further
/// pulses repeat every PRI.
pub fn gen_pcw(p: &PulseParams, fs: f64, seed: u64, len: usize) -> Result<Vec<Complex64>> {
    nyquist("pcw carrier offset", p.carrier_offset_hz.abs(), fs)?;
    let pw = (p.pulse_width_s * fs).round() as usize;
    let pri = ((p.pri_s * fs).round() as usize).max(pw);
    if pw == 0 || pw > FRAME_LEN {
        return Err(Error::InvalidArgument(format!("pulse of {pw} samples cannot be captured")));
    }
    let mut rng = seeded_rng(seed);
    let phase = rng.gen_range(0.0..TAU);
    let start = rng.gen_range(0..=FRAME_LEN - pw);
    let w = TAU * p.carrier_offset_hz / fs;
    Ok((0..len)
        .map(|n| {
            if n >= start && (n - start) % pri < pw {
                Complex64::from_polar(1.0, phase + w * n as f64)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect())
}

/// Sawtooth linear FM sweeping `[-B/2, B/2)` once per period. Draws:
/// carrier phase, then the sweep position at sample 0.
pub fn gen_fmcw(p: &FmcwParams, fs: f64, seed: u64, len: usize) -> Result<Vec<Complex64>> {
    nyquist("fmcw sweep", p.sweep_bandwidth_hz / 2.0, fs)?;
    let mut rng = seeded_rng(seed);
    let mut phase = rng.gen_range(0.0..TAU);
    let t0 = rng.gen_range(0.0..p.sweep_period_s);
    let mut out = Vec::with_capacity(len);
    for n in 0..len {
        out.push(Complex64::from_polar(1.0, phase));
        let t = t0 + n as f64 / fs;
        let frac = (t / p.sweep_period_s).fract();
        let f = -p.sweep_bandwidth_hz / 2.0 + p.sweep_bandwidth_hz * frac;
        phase = (phase + TAU * f / fs).rem_euclid(TAU);
    }
    Ok(out)
}

fn linear_real(p: &LinearParams, fs: f64, symbols: &[f64], first: i64, len: usize) -> Vec<Complex64> {
    let sps = fs / p.symbol_rate_hz;
    (0..len)
        .map(|n| Complex64::new(shaped_sum(symbols, first, n as f64 / sps, &p.shaping), 0.0))
        .collect()
}

/// BPSK symbols `+1` (bit 1) / `-1` (bit 0). Draws one `bool` per symbol in
/// increasing symbol index starting at the first symbol that touches the
/// capture (`-(span+1)` for raised cosine, `0` for rectangular). Raised
/// cosine symbol `k` peaks at `t = k·T`; rectangular symbol `k` fills
/// `[k·T, (k+1)·T)`.
pub fn gen_bpsk(p: &LinearParams, fs: f64, seed: u64, len: usize) -> Result<Vec<Complex64>> {
    nyquist("bpsk", p.symbol_rate_hz / 2.0, fs)?;
    let (first, last) = symbol_range(&p.shaping, len, fs / p.symbol_rate_hz);
    let mut rng = seeded_rng(seed);
    let symbols: Vec<f64> = (first..=last).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect();
    Ok(linear_real(p, fs, &symbols, first, len))
}

/// On-off keying with the same symbol layout as [`gen_bpsk`]. If no
/// symbol inside the capture is "on", every bit is complemented.
pub fn gen_ask(p: &LinearParams, fs: f64, seed: u64, len: usize) -> Result<Vec<Complex64>> {
    nyquist("ask", p.symbol_rate_hz / 2.0, fs)?;
    let sps = fs / p.symbol_rate_hz;
    let (first, last) = symbol_range(&p.shaping, len, sps);
    let mut rng = seeded_rng(seed);
    let mut bits: Vec<bool> = (first..=last).map(|_| rng.gen::<bool>()).collect();
    let visible = ((len as f64 / sps).ceil() as i64).max(1);
    let any_on = (0..visible).any(|k| bits[(k - first) as usize]);
    if !any_on {
        bits.iter_mut().for_each(|b| *b = !*b);
    }
    let symbols: Vec<f64> = bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    Ok(linear_real(p, fs, &symbols, first, len))
}

/// Frequency pulse of Gaussian-filtered rectangular NRZ, centred on the
/// symbol, `t` in symbol periods.
fn gaussian_frequency_pulse(t: f64, bt: f64) -> f64 {
    let sigma = (2f64.ln()).sqrt() / (TAU * bt);
    let k = 1.0 / (sigma * 2f64.sqrt());
    0.5 * (libm::erf(k * (t + 0.5)) - libm::erf(k * (t - 0.5)))
}

/// Continuous-phase GFSK. Draws one `bool` per symbol (`+deviation` for
/// 1) starting at symbol index `-3`. Symbol `k` fills `[k·T, (k+1)·T)`
/// before Gaussian filtering. Phase starts at zero.
pub fn gen_gfsk(p: &GfskParams, fs: f64, seed: u64, len: usize) -> Result<Vec<Complex64>> {
    nyquist("gfsk", p.deviation_hz + p.symbol_rate_hz / 2.0, fs)?;
    const GUARD: i64 = 3;
    let sps = fs / p.symbol_rate_hz;
    let last = (len as f64 / sps).ceil() as i64 + GUARD;
    let mut rng = seeded_rng(seed);
    let nrz: Vec<f64> = (-GUARD..=last).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect();
    let mut phase = 0.0f64;
    let mut out = Vec::with_capacity(len);
    for n in 0..len {
        out.push(Complex64::from_polar(1.0, phase));
        let t = n as f64 / sps;
        let centre = t.floor() as i64;
        let mut f = 0.0;
        for k in (centre - GUARD)..=(centre + GUARD) {
            let a = nrz[(k + GUARD) as usize];
            f += a * gaussian_frequency_pulse(t - (k as f64 + 0.5), p.bt);
        }
        phase = (phase + TAU * p.deviation_hz * f / fs).rem_euclid(TAU);
    }
    Ok(out)
}

/// The eight CCK chips for QPSK phases `(φ1, φ2, φ3, φ4)`, in
/// transmission order.
pub fn cck_codeword(phi: [f64; 4]) -> [Complex64; 8] {
    let [p1, p2, p3, p4] = phi;
    let e = |a: f64| Complex64::from_polar(1.0, a);
    [
        e(p1 + p2 + p3 + p4),
        e(p1 + p3 + p4),
        e(p1 + p2 + p4),
        -e(p1 + p4),
        e(p1 + p2 + p3),
        e(p1 + p3),
        -e(p1 + p2),
        e(p1),
    ]
}

/// CCK-spread chips with raised-cosine or rectangular shaping. Chip `c`
/// of codeword `j` has index `8j + c` and peaks at `t = (8j + c)·Tc`
/// (raised cosine) or fills `[(8j+c)·Tc, (8j+c+1)·Tc)` (rectangular).
/// Draws four phase indices in `0..4` per codeword, starting at the first
/// codeword that touches the capture.
pub fn gen_dsss_cck(p: &ChipParams, fs: f64, seed: u64, len: usize) -> Result<Vec<Complex64>> {
    nyquist("cck", p.chip_rate_hz / 2.0, fs)?;
    let spc = fs / p.chip_rate_hz;
    let (first_chip, last_chip) = symbol_range(&p.shaping, len, spc);
    let first_word = first_chip.div_euclid(8);
    let last_word = last_chip.div_euclid(8);
    let mut rng = seeded_rng(seed);
    let mut chips = Vec::with_capacity(((last_word - first_word + 1) * 8) as usize);
    for _ in first_word..=last_word {
        let phi = [0; 4].map(|_: i32| rng.gen_range(0..4u8) as f64 * PI / 2.0);
        chips.extend_from_slice(&cck_codeword(phi));
    }
    let first = first_word * 8;
    Ok((0..len).map(|n| shaped_sum(&chips, first, n as f64 / spc, &p.shaping)).collect())
}

const ZIGBEE_SYMBOL0: [u8; 32] = [
    1, 1, 0, 1, 1, 0, 0, 1, 1, 1, 0, 0, 0, 0, 1, 1, 0, 1, 0, 1, 0, 0, 1, 0, 0, 0, 1, 0, 1, 1, 1, 0,
];

/// 32-chip spreading sequence for a 4-bit symbol: symbols 1–7 rotate the
/// base sequence right by 4 chips per step, symbols 8–15 additionally
/// invert every odd-indexed chip.
pub fn zigbee_chips(symbol: u8) -> [u8; 32] {
    let s = (symbol & 0x0f) as usize;
    let shift = 4 * (s % 8);
    let mut out = [0u8; 32];
    for (i, c) in out.iter_mut().enumerate() {
        *c = ZIGBEE_SYMBOL0[(i + 32 - shift) % 32];
        if s >= 8 && i % 2 == 1 {
            *c ^= 1;
        }
    }
    out
}

/// Half-sine O-QPSK. Even chips ride on I, odd chips on Q; chip `c`
/// occupies `[c·Tc, (c+2)·Tc)`, so Q lags I by one chip. Symbols (four
/// bits, drawn as `0..16`) start at symbol index `-1`; chip `c` of symbol
/// `m` has index `32m + c`.
pub fn gen_dsss_oqpsk(p: &OqpskParams, fs: f64, seed: u64, len: usize) -> Result<Vec<Complex64>> {
    nyquist("oqpsk", 0.75 * p.chip_rate_hz, fs)?;
    let spc = fs / p.chip_rate_hz;
    let last_chip = (len as f64 / spc).ceil() as i64 + 2;
    let n_symbols = (last_chip.div_euclid(32) + 2) as usize;
    let mut rng = seeded_rng(seed);
    let mut chips: Vec<f64> = Vec::with_capacity(32 * n_symbols);
    for _ in 0..n_symbols {
        let sym = rng.gen_range(0..16u8);
        chips.extend(zigbee_chips(sym).iter().map(|&c| if c == 1 { 1.0 } else { -1.0 }));
    }
    let first = -32i64;
    let chip = |c: i64| chips[(c - first) as usize];
    Ok((0..len)
        .map(|n| {
            let t = n as f64 / spc;
            let c = t.floor() as i64;
            // The two chips active at t: c and c-1, one on each rail.
            let mut acc = Complex64::new(0.0, 0.0);
            for k in [c - 1, c] {
                let v = chip(k) * (PI * (t - k as f64) / 2.0).sin();
                if k.rem_euclid(2) == 0 {
                    acc.re += v;
                } else {
                    acc.im += v;
                }
            }
            acc
        })
        .collect())
}

struct Tones {
    freqs: Vec<f64>,
    amps: Vec<f64>,
    phases: Vec<f64>,
}

/// Draws: carrier phase, speed-up factor, then per tone frequency,
/// relative amplitude and phase. Amplitudes sum to one so `|msg| ≤ 1`.
fn draw_message(p: &AmParams, rng: &mut ChaCha8Rng) -> (f64, Tones) {
    let carrier_phase = rng.gen_range(0.0..TAU);
    let speedup = if p.speedup_max > p.speedup_min {
        rng.gen_range(p.speedup_min..p.speedup_max)
    } else {
        p.speedup_min
    };
    let mut tones = Tones {
        freqs: Vec::new(),
        amps: Vec::new(),
        phases: Vec::new(),
    };
    for _ in 0..p.n_tones {
        let f = if p.tone_max_hz > p.tone_min_hz {
            rng.gen_range(p.tone_min_hz..p.tone_max_hz)
        } else {
            p.tone_min_hz
        };
        tones.freqs.push(f * speedup);
        tones.amps.push(rng.gen_range(0.2..1.0));
        tones.phases.push(rng.gen_range(0.0..TAU));
    }
    let total: f64 = tones.amps.iter().sum();
    tones.amps.iter_mut().for_each(|a| *a /= total);
    (carrier_phase, tones)
}

fn message(t: &Tones, time: f64) -> f64 {
    t.freqs
        .iter()
        .zip(&t.amps)
        .zip(&t.phases)
        .map(|((f, a), ph)| a * (TAU * f * time + ph).cos())
        .sum()
}

/// Double-sideband full-carrier AM, `(1 + m·msg(t))·e^{jφ}`.
pub fn gen_am_dsb(p: &AmParams, fs: f64, seed: u64, len: usize) -> Result<Vec<Complex64>> {
    nyquist("am", p.tone_max_hz * p.speedup_max, fs)?;
    let mut rng = seeded_rng(seed);
    let (phase, tones) = draw_message(p, &mut rng);
    let carrier = Complex64::from_polar(1.0, phase);
    Ok((0..len)
        .map(|n| carrier * (1.0 + p.modulation_index * message(&tones, n as f64 / fs)))
        .collect())
}

/// Analytic signal of a real sequence: negative-frequency bins removed,
/// positive bins doubled.
pub fn analytic_signal(x: &[f64]) -> Vec<Complex64> {
    let n = x.len();
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, v) in buf.iter_mut().enumerate() {
        if k == 0 || (n % 2 == 0 && k == n / 2) {
            continue;
        } else if k < n.div_ceil(2) {
            *v *= 2.0;
        } else {
            *v = Complex64::new(0.0, 0.0);
        }
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    buf.iter_mut().for_each(|v| *v *= scale);
    buf
}

/// Upper-sideband suppressed-carrier AM: the message is Hilbert-filtered
/// over a 4× longer buffer and the centre `len` samples are kept.
pub fn gen_am_ssb(p: &AmParams, fs: f64, seed: u64, len: usize) -> Result<Vec<Complex64>> {
    nyquist("am", p.tone_max_hz * p.speedup_max, fs)?;
    let mut rng = seeded_rng(seed);
    let (phase, tones) = draw_message(p, &mut rng);
    let carrier = Complex64::from_polar(1.0, phase);
    let n_ext = (4 * len).next_power_of_two().max(512);
    let lead = (n_ext - len) / 2;
    let msg: Vec<f64> = (0..n_ext)
        .map(|i| message(&tones, (i as f64 - lead as f64) / fs))
        .collect();
    let analytic = analytic_signal(&msg);
    Ok(analytic[lead..lead + len].iter().map(|v| carrier * v).collect())
}
