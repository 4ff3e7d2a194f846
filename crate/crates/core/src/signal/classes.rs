use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Modulation format label (first task).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Modulation {
    #[serde(rename = "PCW")]
    Pcw,
    #[serde(rename = "FMCW")]
    Fmcw,
    #[serde(rename = "BPSK")]
    Bpsk,
    #[serde(rename = "AM-DSB")]
    AmDsb,
    #[serde(rename = "AM-SSB")]
    AmSsb,
    #[serde(rename = "ASK")]
    Ask,
    #[serde(rename = "GFSK")]
    Gfsk,
    #[serde(rename = "DSSS-CCK")]
    DsssCck,
    #[serde(rename = "DSSS-OQPSK")]
    DsssOqpsk,
}

/// Emitter / standard label (second task).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SignalClass {
    #[serde(rename = "Airborne-detection")]
    AirborneDetection,
    #[serde(rename = "Airborne-range")]
    AirborneRange,
    #[serde(rename = "Air-Ground-MTI")]
    AirGroundMti,
    #[serde(rename = "Ground-mapping")]
    GroundMapping,
    #[serde(rename = "Radar-Altimeter")]
    RadarAltimeter,
    #[serde(rename = "Satcom")]
    Satcom,
    #[serde(rename = "AM-Radio")]
    AmRadio,
    #[serde(rename = "Short-Range")]
    ShortRange,
    #[serde(rename = "Bluetooth")]
    Bluetooth,
    #[serde(rename = "IEEE802.11bg")]
    Ieee80211bg,
    #[serde(rename = "IEEE802.15.4")]
    Ieee802154,
}

impl Modulation {
    pub const ALL: [Modulation; 9] = [
        Modulation::Pcw,
        Modulation::Fmcw,
        Modulation::Bpsk,
        Modulation::AmDsb,
        Modulation::AmSsb,
        Modulation::Ask,
        Modulation::Gfsk,
        Modulation::DsssCck,
        Modulation::DsssOqpsk,
    ];
    pub const COUNT: usize = 9;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Modulation::Pcw => "PCW",
            Modulation::Fmcw => "FMCW",
            Modulation::Bpsk => "BPSK",
            Modulation::AmDsb => "AM-DSB",
            Modulation::AmSsb => "AM-SSB",
            Modulation::Ask => "ASK",
            Modulation::Gfsk => "GFSK",
            Modulation::DsssCck => "DSSS-CCK",
            Modulation::DsssOqpsk => "DSSS-OQPSK",
        }
    }
}

impl SignalClass {
    pub const ALL: [SignalClass; 11] = [
        SignalClass::AirborneDetection,
        SignalClass::AirborneRange,
        SignalClass::AirGroundMti,
        SignalClass::GroundMapping,
        SignalClass::RadarAltimeter,
        SignalClass::Satcom,
        SignalClass::AmRadio,
        SignalClass::ShortRange,
        SignalClass::Bluetooth,
        SignalClass::Ieee80211bg,
        SignalClass::Ieee802154,
    ];
    pub const COUNT: usize = 11;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            SignalClass::AirborneDetection => "Airborne-detection",
            SignalClass::AirborneRange => "Airborne-range",
            SignalClass::AirGroundMti => "Air-Ground-MTI",
            SignalClass::GroundMapping => "Ground-mapping",
            SignalClass::RadarAltimeter => "Radar-Altimeter",
            SignalClass::Satcom => "Satcom",
            SignalClass::AmRadio => "AM-Radio",
            SignalClass::ShortRange => "Short-Range",
            SignalClass::Bluetooth => "Bluetooth",
            SignalClass::Ieee80211bg => "IEEE802.11bg",
            SignalClass::Ieee802154 => "IEEE802.15.4",
        }
    }

    pub fn is_radar(self) -> bool {
        self.index() <= SignalClass::RadarAltimeter.index()
    }

    /// Classes whose real-world captures come from a third-party
    /// interference recording rather than a generator.
    pub fn is_interference_class(self) -> bool {
        matches!(self, SignalClass::Bluetooth | SignalClass::Ieee80211bg | SignalClass::Ieee802154)
    }
}

impl fmt::Display for Modulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl fmt::Display for SignalClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Modulation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown modulation {s:?}")))
    }
}

impl FromStr for SignalClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown signal class {s:?}")))
    }
}

/// A valid (modulation, signal class) label pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "(Modulation, SignalClass)", into = "(Modulation, SignalClass)")]
pub struct ModSigPair {
    modulation: Modulation,
    signal: SignalClass,
}

impl ModSigPair {
    /// The twelve label pairs present in the dataset, in canonical order.
    pub const ALL: [ModSigPair; 12] = [
        ModSigPair::of(Modulation::Pcw, SignalClass::AirborneDetection),
        ModSigPair::of(Modulation::Pcw, SignalClass::AirborneRange),
        ModSigPair::of(Modulation::Pcw, SignalClass::AirGroundMti),
        ModSigPair::of(Modulation::Pcw, SignalClass::GroundMapping),
        ModSigPair::of(Modulation::Fmcw, SignalClass::RadarAltimeter),
        ModSigPair::of(Modulation::Bpsk, SignalClass::Satcom),
        ModSigPair::of(Modulation::AmDsb, SignalClass::AmRadio),
        ModSigPair::of(Modulation::AmSsb, SignalClass::AmRadio),
        ModSigPair::of(Modulation::Ask, SignalClass::ShortRange),
        ModSigPair::of(Modulation::Gfsk, SignalClass::Bluetooth),
        ModSigPair::of(Modulation::DsssCck, SignalClass::Ieee80211bg),
        ModSigPair::of(Modulation::DsssOqpsk, SignalClass::Ieee802154),
    ];

    const fn of(modulation: Modulation, signal: SignalClass) -> Self {
        ModSigPair { modulation, signal }
    }

    pub fn new(modulation: Modulation, signal: SignalClass) -> Result<Self> {
        let pair = ModSigPair { modulation, signal };
        if Self::ALL.contains(&pair) {
            Ok(pair)
        } else {
            Err(Error::InvalidPairing {
                modulation: modulation.to_string(),
                signal: signal.to_string(),
            })
        }
    }

    pub fn modulation(self) -> Modulation {
        self.modulation
    }

    pub fn signal(self) -> SignalClass {
        self.signal
    }

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|p| *p == self).expect("pairs are always valid")
    }
}

impl TryFrom<(Modulation, SignalClass)> for ModSigPair {
    type Error = Error;

    fn try_from((m, s): (Modulation, SignalClass)) -> Result<Self> {
        ModSigPair::new(m, s)
    }
}

impl From<ModSigPair> for (Modulation, SignalClass) {
    fn from(p: ModSigPair) -> Self {
        (p.modulation, p.signal)
    }
}

impl fmt::Display for ModSigPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.modulation, self.signal)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exactly_twelve_pairings_are_valid() {
        let mut valid = 0;
        for m in Modulation::ALL {
            for s in SignalClass::ALL {
                if ModSigPair::new(m, s).is_ok() {
                    valid += 1;
                }
            }
        }
        assert_eq!(valid, 12);
        assert!(ModSigPair::new(Modulation::Bpsk, SignalClass::Bluetooth).is_err());
        assert!(ModSigPair::new(Modulation::AmSsb, SignalClass::AmRadio).is_ok());
    }

    #[test]
    fn names_round_trip() {
        for m in Modulation::ALL {
            assert_eq!(m.name().parse::<Modulation>().unwrap(), m);
            assert_eq!(Modulation::from_index(m.index()), Some(m));
        }
        for s in SignalClass::ALL {
            assert_eq!(s.name().parse::<SignalClass>().unwrap(), s);
            assert_eq!(SignalClass::from_index(s.index()), Some(s));
        }
        let radar = SignalClass::ALL.iter().filter(|s| s.is_radar()).count();
        assert_eq!(radar, 5);
    }

    #[test]
    fn invalid_pair_cannot_be_deserialized() {
        let ok: ModSigPair = serde_json::from_str(r#"["PCW","Ground-mapping"]"#).unwrap();
        assert_eq!(ok.signal(), SignalClass::GroundMapping);
        assert!(serde_json::from_str::<ModSigPair>(r#"["PCW","Satcom"]"#).is_err());
    }
}
