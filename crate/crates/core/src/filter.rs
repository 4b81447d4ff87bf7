//! Second-order IIR sections and cascades.
//!
//! Every section is designed in the analog domain and mapped with the
//! bilinear transform, prewarped at the section's characteristic frequency,
//! so the digital magnitude at that frequency equals the analog value.

use std::f64::consts::PI;

use crate::error::{invalid, Result};

/// Stage quality factors of a 4th-order Butterworth alignment.
pub const BUTTERWORTH4_Q: [f64; 2] = [0.541_196_100_146_197, 1.306_562_964_876_376_7];

/// Normalised biquad coefficients (`a0 == 1`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

/// Streaming state for one [`Biquad`] (transposed direct form II).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BiquadState {
    z1: f64,
    z2: f64,
}

impl Biquad {
    fn from_raw(b0: f64, b1: f64, b2: f64, a0: f64, a1: f64, a2: f64) -> Self {
        Self {
            b: [b0 / a0, b1 / a0, b2 / a0],
            a: [a1 / a0, a2 / a0],
        }
    }

    fn check(freq: f64, q: f64, rate: f64) -> Result<f64> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(invalid("rate", format!("{rate} must be positive")));
        }
        if !(q > 0.0 && q.is_finite()) {
            return Err(invalid("q", format!("{q} must be positive")));
        }
        if !(freq > 0.0 && freq < rate / 2.0) {
            return Err(crate::Error::AboveNyquist { f0: freq, rate });
        }
        Ok(2.0 * PI * freq / rate)
    }

    /// Second-order high-pass with cutoff `fc` and pole quality `q`.
    pub fn highpass(fc: f64, q: f64, rate: f64) -> Result<Self> {
        let w0 = Self::check(fc, q, rate)?;
        let (sin, cos) = w0.sin_cos();
        let alpha = sin / (2.0 * q);
        Ok(Self::from_raw(
            (1.0 + cos) / 2.0,
            -(1.0 + cos),
            (1.0 + cos) / 2.0,
            1.0 + alpha,
            -2.0 * cos,
            1.0 - alpha,
        ))
    }

    /// Second-order low-pass with cutoff `fc` and pole quality `q`.
    pub fn lowpass(fc: f64, q: f64, rate: f64) -> Result<Self> {
        let w0 = Self::check(fc, q, rate)?;
        let (sin, cos) = w0.sin_cos();
        let alpha = sin / (2.0 * q);
        Ok(Self::from_raw(
            (1.0 - cos) / 2.0,
            1.0 - cos,
            (1.0 - cos) / 2.0,
            1.0 + alpha,
            -2.0 * cos,
            1.0 - alpha,
        ))
    }

    /// Second-order band-pass centred on `f0` whose magnitude at `f0` is
    /// exactly `peak_gain` and whose digital -3 dB bandwidth is `f0 / q`.
    pub fn bandpass(f0: f64, q: f64, peak_gain: f64, rate: f64) -> Result<Self> {
        let w0 = Self::check(f0, q, rate)?;
        let bw = 2.0 * PI * f0 / q / rate;
        if bw >= PI {
            return Err(invalid("q", format!("bandwidth {} Hz exceeds Nyquist", f0 / q)));
        }
        let cos = w0.cos();
        let alpha = (bw / 2.0).tan();
        Ok(Self::from_raw(
            peak_gain * alpha,
            0.0,
            -peak_gain * alpha,
            1.0 + alpha,
            -2.0 * cos,
            1.0 - alpha,
        ))
    }

    #[inline]
    pub fn process(&self, state: &mut BiquadState, x: f64) -> f64 {
        let y = self.b[0] * x + state.z1;
        state.z1 = self.b[1] * x - self.a[0] * y + state.z2;
        state.z2 = self.b[2] * x - self.a[1] * y;
        y
    }

    /// Complex response at `freq` evaluated on the unit circle, as (re, im).
    pub fn response(&self, freq: f64, rate: f64) -> (f64, f64) {
        let w = 2.0 * PI * freq / rate;
        // z^-1 = e^{-jw}
        let (s1, c1) = (-w).sin_cos();
        let (s2, c2) = (-2.0 * w).sin_cos();
        let num = (
            self.b[0] + self.b[1] * c1 + self.b[2] * c2,
            self.b[1] * s1 + self.b[2] * s2,
        );
        let den = (1.0 + self.a[0] * c1 + self.a[1] * c2, self.a[0] * s1 + self.a[1] * s2);
        let d = den.0 * den.0 + den.1 * den.1;
        (
            (num.0 * den.0 + num.1 * den.1) / d,
            (num.1 * den.0 - num.0 * den.1) / d,
        )
    }

    pub fn magnitude(&self, freq: f64, rate: f64) -> f64 {
        let (re, im) = self.response(freq, rate);
        re.hypot(im)
    }

    /// Largest pole radius. The section is stable iff this is below 1.
    pub fn pole_radius(&self) -> f64 {
        let (a1, a2) = (self.a[0], self.a[1]);
        let disc = a1 * a1 - 4.0 * a2;
        if disc < 0.0 {
            // complex pair, |p|^2 = a2
            a2.sqrt()
        } else {
            let r = disc.sqrt();
            ((-a1 + r) / 2.0).abs().max(((-a1 - r) / 2.0).abs())
        }
    }
}

/// A chain of biquads with an overall linear gain.
#[derive(Debug, Clone, PartialEq)]
pub struct Cascade {
    pub gain: f64,
    pub sections: Vec<Biquad>,
}

impl Cascade {
    pub fn new(gain: f64, sections: Vec<Biquad>) -> Self {
        Self { gain, sections }
    }

    /// 4th-order Butterworth high-pass as two prewarped sections.
    pub fn butterworth4_highpass(fc: f64, rate: f64) -> Result<Self> {
        let sections = BUTTERWORTH4_Q
            .iter()
            .map(|&q| Biquad::highpass(fc, q, rate))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(1.0, sections))
    }

    pub fn butterworth4_lowpass(fc: f64, rate: f64) -> Result<Self> {
        let sections = BUTTERWORTH4_Q
            .iter()
            .map(|&q| Biquad::lowpass(fc, q, rate))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(1.0, sections))
    }

    pub fn fresh_state(&self) -> Vec<BiquadState> {
        vec![BiquadState::default(); self.sections.len()]
    }

    /// Filters `x` in place, carrying `state` across calls.
    pub fn process_in_place(&self, state: &mut [BiquadState], x: &mut [f64]) {
        debug_assert_eq!(state.len(), self.sections.len());
        for v in x.iter_mut() {
            let mut y = *v * self.gain;
            for (sec, st) in self.sections.iter().zip(state.iter_mut()) {
                y = sec.process(st, y);
            }
            *v = y;
        }
    }

    /// Filters a block from rest.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = x.to_vec();
        let mut st = self.fresh_state();
        self.process_in_place(&mut st, &mut out);
        out
    }

    pub fn magnitude(&self, freq: f64, rate: f64) -> f64 {
        self.sections
            .iter()
            .fold(self.gain.abs(), |m, s| m * s.magnitude(freq, rate))
    }

    /// Sum of the squared impulse response: the white-noise power gain.
    pub fn noise_power_gain(&self, len: usize) -> f64 {
        let mut st = self.fresh_state();
        let mut acc = 0.0;
        for i in 0..len {
            let mut y = if i == 0 { self.gain } else { 0.0 };
            for (sec, s) in self.sections.iter().zip(st.iter_mut()) {
                y = sec.process(s, y);
            }
            acc += y * y;
        }
        acc
    }

    pub fn max_pole_radius(&self) -> f64 {
        self.sections
            .iter()
            .map(Biquad::pole_radius)
            .fold(0.0, f64::max)
    }
}

pub fn db(linear: f64) -> f64 {
    20.0 * linear.log10()
}

pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}
