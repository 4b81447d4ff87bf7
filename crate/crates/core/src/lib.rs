//! Deterministic end-to-end model of a battery-powered standoff acoustic
//! leak sensor.
//!
//! The signal path runs from a synthetic sound field ([`synth`]) through a
//! Helmholtz chamber, analog high-pass chain and 12-bit converter
//! ([`frontend`]) into a 256-point FFT band-energy stage ([`dsp`]). The
//! [`detector`] state machine trains a baseline and classifies each polling
//! cycle as quiet, leak or noise; [`protocol`] exposes it through a small
//! register-style command set and [`power`] accounts for the duty cycle.

pub mod detector;
pub mod dsp;
pub mod error;
pub mod filter;
pub mod frontend;
pub mod power;
pub mod protocol;
pub mod scenario;
pub mod sim;
pub mod sweep;
pub mod synth;

pub use error::{Error, Result};

/// Converter sample rate, S/s.
pub const SAMPLE_RATE: f64 = 33_333.0;

/// Samples per acquisition.
pub const FRAME_LEN: usize = 256;

/// Duration of one acquisition, seconds.
pub const FRAME_DURATION: f64 = FRAME_LEN as f64 / SAMPLE_RATE;
