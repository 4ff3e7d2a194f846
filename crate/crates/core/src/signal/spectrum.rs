//! Periodogram helpers used by the spectral sanity checks.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

/// Hann-windowed power per FFT bin, in natural (0, 1, …, -1) bin order.
pub fn power_spectrum(x: &[Complex64]) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let mut buf: Vec<Complex64> = x
        .iter()
        .enumerate()
        .map(|(i, v)| v * (0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos()))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    buf.iter().map(|v| v.norm_sqr()).collect()
}

/// Width (Hz) of the band holding `fraction` of the energy, trimming
/// `(1 - fraction) / 2` from each spectral edge.
pub fn occupied_bandwidth(x: &[Complex64], fs: f64, fraction: f64) -> f64 {
    let spec = power_spectrum(x);
    let n = spec.len();
    if n == 0 {
        return 0.0;
    }
    // Reorder to ascending frequency: -n/2 … n/2-1.
    let half = n / 2;
    let ordered: Vec<f64> = (0..n).map(|i| spec[(i + half) % n]).collect();
    let total: f64 = ordered.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let tail = (1.0 - fraction) / 2.0 * total;
    let mut acc = 0.0;
    let mut lo = 0;
    for (i, e) in ordered.iter().enumerate() {
        acc += e;
        if acc > tail {
            lo = i;
            break;
        }
    }
    acc = 0.0;
    let mut hi = n - 1;
    for (i, e) in ordered.iter().enumerate().rev() {
        acc += e;
        if acc > tail {
            hi = i;
            break;
        }
    }
    (hi.saturating_sub(lo) + 1) as f64 * fs / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_tone_is_narrow() {
        let fs = 1e6;
        let x: Vec<Complex64> = (0..1024)
            .map(|i| Complex64::from_polar(1.0, 2.0 * PI * 100e3 * i as f64 / fs))
            .collect();
        let bw = occupied_bandwidth(&x, fs, 0.99);
        assert!(bw < 10e3, "{bw}");
        let spec = power_spectrum(&x);
        let peak = spec.iter().enumerate().max_by(|a, b| a.1.partial_cmp(b.1).unwrap()).unwrap().0;
        assert!((peak as f64 * fs / 1024.0 - 100e3).abs() < 1e3);
    }
}
