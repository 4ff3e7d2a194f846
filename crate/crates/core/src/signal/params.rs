//! Per-class transmission parameters.
//!
//! The numeric values are stand-ins chosen so that every class is
//! distinguishable inside a 12.8 µs capture; see `config/signals.toml`
//! for the shipped, editable copy of [`SynthParams::default`].

use serde::{Deserialize, Serialize};

use super::classes::SignalClass;
use crate::error::{Error, Result};

pub const SAMPLE_RATE_HZ: f64 = 10e6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PulseShape {
    Rectangular,
    /// Nyquist raised-cosine pulse truncated to `±span` symbols.
    RaisedCosine { rolloff: f64, span: usize },
}

impl PulseShape {
    /// Two-sided occupied bandwidth factor relative to the symbol rate.
    fn bandwidth_factor(&self) -> f64 {
        match *self {
            PulseShape::Rectangular => 1.0,
            PulseShape::RaisedCosine { rolloff, .. } => 1.0 + rolloff,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseParams {
    pub pulse_width_s: f64,
    pub pri_s: f64,
    pub carrier_offset_hz: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FmcwParams {
    pub sweep_bandwidth_hz: f64,
    pub sweep_period_s: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearParams {
    pub symbol_rate_hz: f64,
    pub shaping: PulseShape,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmParams {
    pub modulation_index: f64,
    pub n_tones: usize,
    pub tone_min_hz: f64,
    pub tone_max_hz: f64,
    /// Per-frame factor applied to the audio tones, drawn uniformly.
    pub speedup_min: f64,
    pub speedup_max: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GfskParams {
    pub symbol_rate_hz: f64,
    pub bt: f64,
    pub deviation_hz: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChipParams {
    pub chip_rate_hz: f64,
    pub shaping: PulseShape,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OqpskParams {
    pub chip_rate_hz: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadarTable {
    pub airborne_detection: PulseParams,
    pub airborne_range: PulseParams,
    pub air_ground_mti: PulseParams,
    pub ground_mapping: PulseParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthParams {
    pub sample_rate_hz: f64,
    pub pcw: RadarTable,
    pub altimeter: FmcwParams,
    pub satcom: LinearParams,
    pub am: AmParams,
    pub short_range: LinearParams,
    pub bluetooth: GfskParams,
    pub wlan: ChipParams,
    pub zigbee: OqpskParams,
}

const RC: PulseShape = PulseShape::RaisedCosine { rolloff: 0.35, span: 6 };

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            sample_rate_hz: SAMPLE_RATE_HZ,
            pcw: RadarTable {
                airborne_detection: PulseParams {
                    pulse_width_s: 1e-6,
                    pri_s: 40e-6,
                    carrier_offset_hz: 1.0e6,
                },
                airborne_range: PulseParams {
                    pulse_width_s: 2e-6,
                    pri_s: 20e-6,
                    carrier_offset_hz: -0.5e6,
                },
                air_ground_mti: PulseParams {
                    pulse_width_s: 3e-6,
                    pri_s: 60e-6,
                    carrier_offset_hz: 0.25e6,
                },
                ground_mapping: PulseParams {
                    pulse_width_s: 5e-6,
                    pri_s: 100e-6,
                    carrier_offset_hz: -0.75e6,
                },
            },
            altimeter: FmcwParams {
                sweep_bandwidth_hz: 4e6,
                sweep_period_s: 25.6e-6,
            },
            satcom: LinearParams {
                symbol_rate_hz: 1e6,
                shaping: RC,
            },
            am: AmParams {
                modulation_index: 0.5,
                n_tones: 3,
                tone_min_hz: 300.0,
                tone_max_hz: 5e3,
                speedup_min: 60.0,
                speedup_max: 100.0,
            },
            short_range: LinearParams {
                symbol_rate_hz: 0.5e6,
                shaping: RC,
            },
            bluetooth: GfskParams {
                symbol_rate_hz: 1e6,
                bt: 0.5,
                deviation_hz: 250e3,
            },
            wlan: ChipParams {
                chip_rate_hz: 5.5e6,
                shaping: RC,
            },
            zigbee: OqpskParams { chip_rate_hz: 2e6 },
        }
    }
}

impl SynthParams {
    pub fn from_toml(text: &str) -> Result<Self> {
        let p: SynthParams = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn pulse(&self, class: SignalClass) -> Option<&PulseParams> {
        match class {
            SignalClass::AirborneDetection => Some(&self.pcw.airborne_detection),
            SignalClass::AirborneRange => Some(&self.pcw.airborne_range),
            SignalClass::AirGroundMti => Some(&self.pcw.air_ground_mti),
            SignalClass::GroundMapping => Some(&self.pcw.ground_mapping),
            _ => None,
        }
    }

    /// Nominal two-sided occupied bandwidth (Hz) implied by the configured
    /// rate of a class, or `None` where no rate sets the bandwidth: pulsed
    /// radar (spectrum fixed by the pulse gate) and AM (message tones are
    /// drawn per frame).
    pub fn nominal_bandwidth(&self, class: SignalClass) -> Option<f64> {
        match class {
            SignalClass::RadarAltimeter => Some(self.altimeter.sweep_bandwidth_hz),
            SignalClass::Satcom => Some(self.satcom.symbol_rate_hz * self.satcom.shaping.bandwidth_factor()),
            SignalClass::ShortRange => Some(self.short_range.symbol_rate_hz * self.short_range.shaping.bandwidth_factor()),
            SignalClass::Bluetooth => Some(self.bluetooth.symbol_rate_hz),
            SignalClass::Ieee80211bg => Some(self.wlan.chip_rate_hz * self.wlan.shaping.bandwidth_factor()),
            SignalClass::Ieee802154 => Some(self.zigbee.chip_rate_hz),
            _ => None,
        }
    }

    /// Rejects non-positive values and anything whose occupied band does not
    /// fit inside the complex sampling band `[-fs/2, fs/2]`.
    pub fn validate(&self) -> Result<()> {
        let fs = self.sample_rate_hz;
        let half = fs / 2.0;
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        let fits = |name: &str, edge: f64| {
            if edge < half {
                Ok(())
            } else {
                Err(Error::Nyquist(format!("{name}: band edge {edge} Hz ≥ fs/2 = {half} Hz")))
            }
        };
        positive("sample_rate_hz", fs)?;
        for (name, p) in [
            ("pcw.airborne_detection", &self.pcw.airborne_detection),
            ("pcw.airborne_range", &self.pcw.airborne_range),
            ("pcw.air_ground_mti", &self.pcw.air_ground_mti),
            ("pcw.ground_mapping", &self.pcw.ground_mapping),
        ] {
            positive(name, p.pulse_width_s)?;
            positive(name, p.pri_s)?;
            fits(name, p.carrier_offset_hz.abs())?;
            if p.pulse_width_s > p.pri_s {
                return Err(Error::Config(format!("{name}: pulse width exceeds PRI")));
            }
            let pw_samples = (p.pulse_width_s * fs).round();
            if pw_samples < 1.0 || pw_samples > super::FRAME_LEN as f64 {
                return Err(Error::Config(format!(
                    "{name}: pulse of {pw_samples} samples does not fit a {}-sample capture",
                    super::FRAME_LEN
                )));
            }
        }
        positive("altimeter.sweep_bandwidth_hz", self.altimeter.sweep_bandwidth_hz)?;
        positive("altimeter.sweep_period_s", self.altimeter.sweep_period_s)?;
        fits("altimeter", self.altimeter.sweep_bandwidth_hz / 2.0)?;

        for (name, p) in [("satcom", &self.satcom), ("short_range", &self.short_range)] {
            positive(name, p.symbol_rate_hz)?;
            check_shape(name, &p.shaping)?;
            fits(name, p.symbol_rate_hz * p.shaping.bandwidth_factor() / 2.0)?;
        }
        positive("wlan.chip_rate_hz", self.wlan.chip_rate_hz)?;
        check_shape("wlan", &self.wlan.shaping)?;
        fits("wlan", self.wlan.chip_rate_hz * self.wlan.shaping.bandwidth_factor() / 2.0)?;

        let g = &self.bluetooth;
        positive("bluetooth.symbol_rate_hz", g.symbol_rate_hz)?;
        positive("bluetooth.bt", g.bt)?;
        positive("bluetooth.deviation_hz", g.deviation_hz)?;
        fits("bluetooth", g.deviation_hz + g.symbol_rate_hz / 2.0)?;

        positive("zigbee.chip_rate_hz", self.zigbee.chip_rate_hz)?;
        // Half-sine O-QPSK main lobe spans ±0.75 × chip rate.
        fits("zigbee", 0.75 * self.zigbee.chip_rate_hz)?;

        let am = &self.am;
        if !(0.0..=1.0).contains(&am.modulation_index) {
            return Err(Error::Config(format!("am.modulation_index {} outside [0, 1]", am.modulation_index)));
        }
        if am.n_tones == 0 {
            return Err(Error::Config("am.n_tones must be at least 1".into()));
        }
        positive("am.tone_min_hz", am.tone_min_hz)?;
        positive("am.speedup_min", am.speedup_min)?;
        if am.tone_max_hz < am.tone_min_hz || am.speedup_max < am.speedup_min {
            return Err(Error::Config("am: max below min".into()));
        }
        fits("am", am.tone_max_hz * am.speedup_max)?;
        Ok(())
    }
}

fn check_shape(name: &str, shape: &PulseShape) -> Result<()> {
    if let PulseShape::RaisedCosine { rolloff, span } = *shape {
        if !(0.0..=1.0).contains(&rolloff) || span == 0 {
            return Err(Error::Config(format!("{name}: raised cosine rolloff {rolloff}, span {span}")));
        }
    }
    Ok(())
}
