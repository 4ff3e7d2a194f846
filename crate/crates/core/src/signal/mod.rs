//! Baseband waveform generation for the twelve label pairs.

pub mod classes;
pub mod frame;
pub mod params;
pub mod spectrum;
pub mod synth;

pub use classes::{ModSigPair, Modulation, SignalClass};
pub use frame::{IqFrame, FRAME_LEN};
pub use params::{
    AmParams, ChipParams, FmcwParams, GfskParams, LinearParams, OqpskParams, PulseParams, PulseShape, RadarTable,
    SynthParams, SAMPLE_RATE_HZ,
};
pub use synth::{
    gen_am_dsb, gen_am_ssb, gen_ask, gen_bpsk, gen_dsss_cck, gen_dsss_oqpsk, gen_fmcw, gen_gfsk, gen_pcw, synth_frame,
    synthesize,
};
