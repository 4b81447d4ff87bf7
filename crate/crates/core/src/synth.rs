//! Synthetic sound field at the microphone.
//!
//! Levels are in dB re the input-referred converter full scale: a source at
//! 0 dB and 1 m has unit RMS pressure, which after the mid-band electronic
//! gain just reaches the converter rails. Absolute SPL is not modelled.
//!
//! Randomness is keyed, not streamed: every source draws from a ChaCha8
//! generator whose key is `(scenario seed, source index, first sample
//! index)`, so a frame is a pure function of the scenario and its start
//! time and frames may be generated in any order or in parallel.

use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::filter::{from_db, Biquad, Cascade};
use crate::SAMPLE_RATE;

/// Distance at which source levels are specified, m.
pub const REFERENCE_DISTANCE: f64 = 1.0;

/// Closest modelled range; nearer is acoustic near field.
pub const MIN_DISTANCE: f64 = 0.1;

/// Leak-to-board spacing used when turning detection distances behind a
/// barrier into insertion losses, m.
pub const SOURCE_SETBACK: f64 = 0.15;

/// Free-space detection range the barrier calibration is anchored to, m.
pub const FREE_SPACE_RANGE: f64 = 11.5;

/// Overall level of the calibrated spray leak at 1 m.
pub const SPRAY_LEVEL_DB: f64 = -17.5;

/// Spray-to-jet detection range ratio the jet level is tuned for.
pub const JET_RANGE_FACTOR: f64 = 3.6;

/// Quiet-room broadband level at the microphone.
pub const AMBIENT_LEVEL_DB: f64 = -35.0;

/// Length of one impulse burst, s.
pub const CLICK_DURATION: f64 = 2.0e-3;

/// Samples run through a shaping filter before the requested span.
const SHAPING_WARMUP: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SourceKind {
    LeakSpray,
    LeakJet,
    Ambient,
    Impulse,
    PersistentNoise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpectralShape {
    /// White above 6 kHz, 12 dB/octave roll-off below.
    FlatAbove6kHz,
    /// Flat below 3 kHz, 24 dB/octave roll-off above.
    LowPassJet,
    Broadband,
    /// 2 ms raised-cosine burst of white noise.
    Click,
}

impl SourceKind {
    pub fn default_shape(self) -> SpectralShape {
        match self {
            SourceKind::LeakSpray => SpectralShape::FlatAbove6kHz,
            SourceKind::LeakJet => SpectralShape::LowPassJet,
            SourceKind::Ambient | SourceKind::PersistentNoise => SpectralShape::Broadband,
            SourceKind::Impulse => SpectralShape::Click,
        }
    }
}

impl SpectralShape {
    fn shaping(self, rate: f64) -> Option<Cascade> {
        match self {
            SpectralShape::FlatAbove6kHz => Some(Cascade::new(
                1.0,
                vec![Biquad::highpass(6000.0, std::f64::consts::FRAC_1_SQRT_2, rate).ok()?],
            )),
            SpectralShape::LowPassJet => Cascade::butterworth4_lowpass(3000.0, rate).ok(),
            SpectralShape::Broadband | SpectralShape::Click => None,
        }
    }

    /// Shaping filter scaled to unit output power for unit white input.
    pub fn normalized_filter(self, rate: f64) -> Option<Cascade> {
        let mut c = self.shaping(rate)?;
        c.gain = 1.0 / c.noise_power_gain(1 << 14).sqrt();
        Some(c)
    }
}

fn cached_filter(shape: SpectralShape, rate: f64) -> Option<Cascade> {
    static SPRAY: OnceLock<Option<Cascade>> = OnceLock::new();
    static JET: OnceLock<Option<Cascade>> = OnceLock::new();
    if rate != SAMPLE_RATE {
        return shape.normalized_filter(rate);
    }
    match shape {
        SpectralShape::FlatAbove6kHz => SPRAY
            .get_or_init(|| shape.normalized_filter(SAMPLE_RATE))
            .clone(),
        SpectralShape::LowPassJet => JET
            .get_or_init(|| shape.normalized_filter(SAMPLE_RATE))
            .clone(),
        _ => None,
    }
}

/// A sound source and when it is on.
#[derive(Debug, Clone, PartialEq)]
pub struct AcousticSource {
    pub kind: SourceKind,
    /// Overall RMS level at 1 m (burst RMS for clicks).
    pub level_db: f64,
    pub shape: SpectralShape,
    pub start_s: f64,
    pub end_s: f64,
    /// Click repetition period; a single click at `start_s` when `None`.
    pub period_s: Option<f64>,
    /// Per-acquisition level swing: each frame is attenuated by a uniform
    /// draw from `[0, fluctuation_db]` dB.
    pub fluctuation_db: f64,
}

impl AcousticSource {
    pub fn new(kind: SourceKind, level_db: f64, start_s: f64, end_s: f64) -> Result<Self> {
        let s = Self {
            kind,
            level_db,
            shape: kind.default_shape(),
            start_s,
            end_s,
            period_s: None,
            fluctuation_db: 0.0,
        };
        s.validate()?;
        Ok(s)
    }

    /// Spray leak at its calibrated level, on for all time.
    pub fn spray() -> Self {
        Self::new(
            SourceKind::LeakSpray,
            SPRAY_LEVEL_DB,
            f64::NEG_INFINITY,
            f64::INFINITY,
        )
        .expect("valid")
    }

    /// Jet leak whose in-band level sits `20 log10(3.3)` dB under the
    /// calibrated spray.
    pub fn jet() -> Self {
        Self::new(
            SourceKind::LeakJet,
            jet_level_db(),
            f64::NEG_INFINITY,
            f64::INFINITY,
        )
        .expect("valid")
    }

    pub fn with_interval(mut self, start_s: f64, end_s: f64) -> Self {
        self.start_s = start_s;
        self.end_s = end_s;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.start_s < self.end_s) {
            return Err(invalid(
                "active_interval",
                format!("start {} must precede end {}", self.start_s, self.end_s),
            ));
        }
        if !self.level_db.is_finite() {
            return Err(invalid("level_db", "must be finite"));
        }
        if let Some(p) = self.period_s {
            if !(p > CLICK_DURATION && p.is_finite()) {
                return Err(invalid("period_s", format!("{p} must exceed the click length")));
            }
        }
        if !(self.fluctuation_db >= 0.0 && self.fluctuation_db.is_finite()) {
            return Err(invalid("fluctuation_db", "must be finite and >= 0"));
        }
        Ok(())
    }

    fn is_active(&self, t: f64) -> bool {
        t >= self.start_s && t < self.end_s
    }
}

/// Straight-line path from a source to the microphone.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationPath {
    pub distance_m: f64,
    pub barrier_losses_db: Vec<f64>,
}

impl PropagationPath {
    pub fn free(distance_m: f64) -> Self {
        Self {
            distance_m,
            barrier_losses_db: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.distance_m >= MIN_DISTANCE && self.distance_m.is_finite()) {
            return Err(invalid(
                "distance_m",
                format!("{} is below the {MIN_DISTANCE} m near-field limit", self.distance_m),
            ));
        }
        if let Some(l) = self.barrier_losses_db.iter().find(|l| !(**l >= 0.0 && l.is_finite())) {
            return Err(invalid("barrier_losses_db", format!("{l} must be finite and >= 0")));
        }
        Ok(())
    }
}

/// Spherical spreading re 1 m plus the sum of barrier insertion losses, dB.
pub fn path_loss(path: &PropagationPath) -> Result<f64> {
    path.validate()?;
    Ok(20.0 * (path.distance_m / REFERENCE_DISTANCE).log10()
        + path.barrier_losses_db.iter().sum::<f64>())
}

/// Insertion loss that moves the detection threshold from the free-space
/// range `free_space_range_m` to `detection_m` from a board whose source
/// sits [`SOURCE_SETBACK`] behind it.
pub fn calibrate_barrier_loss(detection_m: f64, free_space_range_m: f64) -> Result<f64> {
    if !(detection_m > 0.0) {
        return Err(invalid("detection_m", format!("{detection_m} must be positive")));
    }
    let reach = detection_m + SOURCE_SETBACK;
    if reach > free_space_range_m {
        return Err(invalid(
            "detection_m",
            format!("{reach} m exceeds the free-space range {free_space_range_m} m"),
        ));
    }
    Ok(20.0 * (free_space_range_m / reach).log10())
}

/// Wall materials with measured detection distances behind them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Material {
    Gypsum13mm,
    Gypsum13mmInsulated,
    Plywood6mm,
    Plywood13mm,
}

impl Material {
    pub const ALL: [Material; 4] = [
        Material::Gypsum13mm,
        Material::Gypsum13mmInsulated,
        Material::Plywood6mm,
        Material::Plywood13mm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Material::Gypsum13mm => "gypsum_1.3cm",
            Material::Gypsum13mmInsulated => "gypsum_1.3cm_insulated",
            Material::Plywood6mm => "plywood_0.6cm",
            Material::Plywood13mm => "plywood_1.3cm",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }

    /// Measured detection distance from the board surface, m (min, max).
    pub fn detection_range_m(self) -> (f64, f64) {
        match self {
            Material::Gypsum13mm => (0.56, 0.61),
            Material::Gypsum13mmInsulated => (0.43, 0.46),
            Material::Plywood6mm => (0.71, 0.76),
            Material::Plywood13mm => (0.43, 0.46),
        }
    }

    pub fn detection_midpoint_m(self) -> f64 {
        let (a, b) = self.detection_range_m();
        0.5 * (a + b)
    }

    pub fn insertion_loss_db(self, free_space_range_m: f64) -> Result<f64> {
        calibrate_barrier_loss(self.detection_midpoint_m(), free_space_range_m)
    }
}

/// Detector-band power gain of a unit-power source of `shape`, through the
/// reference front end, relative to white noise.
fn band_share(shape: SpectralShape) -> f64 {
    let fe = crate::frontend::Frontend::reference();
    let filt = shape.normalized_filter(SAMPLE_RATE);
    let (lo, hi) = (crate::dsp::BAND_FIRST_BIN, crate::dsp::BAND_LAST_BIN);
    (lo..=hi)
        .map(|k| {
            let f = k as f64 * crate::dsp::bin_hz();
            let s = filt.as_ref().map_or(1.0, |c| c.magnitude(f, SAMPLE_RATE));
            (s * fe.magnitude(crate::frontend::ChainSelect::Full, f)).powi(2)
        })
        .sum()
}

/// Jet level giving `1 / JET_RANGE_FACTOR` of the spray detection range.
pub fn jet_level_db() -> f64 {
    static L: OnceLock<f64> = OnceLock::new();
    *L.get_or_init(|| {
        let offset = 10.0
            * (band_share(SpectralShape::FlatAbove6kHz) / band_share(SpectralShape::LowPassJet))
                .log10();
        SPRAY_LEVEL_DB - 20.0 * JET_RANGE_FACTOR.log10() + offset
    })
}

/// Sources, their paths, a background floor and the seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub sources: Vec<(AcousticSource, PropagationPath)>,
    pub duration_s: f64,
    pub seed: u64,
    /// Broadband level at the microphone; `-inf` for silence.
    pub ambient_level_db: f64,
}

/// Stream index reserved for the ambient floor.
const AMBIENT_STREAM: u64 = u64::MAX;

fn keyed_rng(seed: u64, stream: u64, index: i64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&stream.to_le_bytes());
    key[16..24].copy_from_slice(&index.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

fn sample_index(t: f64, rate: f64) -> i64 {
    (t * rate).round() as i64
}

impl Scenario {
    /// Quiet room with no sources.
    pub fn quiet(seed: u64, duration_s: f64) -> Self {
        Self {
            sources: Vec::new(),
            duration_s,
            seed,
            ambient_level_db: AMBIENT_LEVEL_DB,
        }
    }

    pub fn with_source(mut self, source: AcousticSource, path: PropagationPath) -> Self {
        self.sources.push((source, path));
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (s, p) in &self.sources {
            s.validate()?;
            p.validate()?;
        }
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(invalid("duration_s", "must be positive"));
        }
        if self.ambient_level_db.is_nan() || self.ambient_level_db == f64::INFINITY {
            return Err(Error::Scenario("ambient_level_db must be finite or -inf".into()));
        }
        Ok(())
    }

    /// Pressure at the microphone for `n` samples starting at `t0`.
    pub fn synthesize_frame(&self, t0: f64, n: usize, rate: f64) -> Vec<f64> {
        let s0 = sample_index(t0, rate);
        let mut out = vec![0.0; n];
        let amb = from_db(self.ambient_level_db);
        if amb > 0.0 {
            let mut rng = keyed_rng(self.seed, AMBIENT_STREAM, s0);
            for v in out.iter_mut() {
                *v += amb * rng.sample::<f64, _>(StandardNormal);
            }
        }
        for (idx, (src, path)) in self.sources.iter().enumerate() {
            let loss = path_loss(path).expect("validated path");
            let amp = from_db(src.level_db - loss);
            if src.shape == SpectralShape::Click {
                self.add_clicks(idx as u64, src, amp, s0, rate, &mut out);
            } else {
                self.add_noise(idx as u64, src, amp, s0, rate, &mut out);
            }
        }
        out
    }

    fn add_noise(&self, stream: u64, src: &AcousticSource, amp: f64, s0: i64, rate: f64, out: &mut [f64]) {
        let n = out.len();
        let on = |i: usize| src.is_active((s0 + i as i64) as f64 / rate);
        if !(0..n).any(on) {
            return;
        }
        let mut rng = keyed_rng(self.seed, stream, s0);
        let swing = if src.fluctuation_db > 0.0 {
            from_db(-rng.random_range(0.0..src.fluctuation_db))
        } else {
            1.0
        };
        let filt = cached_filter(src.shape, rate);
        let warm = if filt.is_some() { SHAPING_WARMUP } else { 0 };
        let mut x: Vec<f64> = (0..warm + n).map(|_| rng.sample(StandardNormal)).collect();
        if let Some(c) = &filt {
            let mut st = c.fresh_state();
            c.process_in_place(&mut st, &mut x);
        }
        let g = amp * swing;
        for (i, (o, v)) in out.iter_mut().zip(&x[warm..]).enumerate() {
            if on(i) {
                *o += g * v;
            }
        }
    }

    fn add_clicks(&self, stream: u64, src: &AcousticSource, amp: f64, s0: i64, rate: f64, out: &mut [f64]) {
        let len = (CLICK_DURATION * rate).round() as i64;
        let t_lo = s0 as f64 / rate - CLICK_DURATION;
        let t_hi = (s0 + out.len() as i64) as f64 / rate;
        let (first, last) = match src.period_s {
            None => (0i64, 0i64),
            Some(p) => (
                ((t_lo - src.start_s) / p).floor().max(0.0) as i64,
                ((t_hi - src.start_s) / p).ceil() as i64,
            ),
        };
        // Hann window has mean square 3/8
        let norm = amp / (3.0f64 / 8.0).sqrt();
        for k in first..=last {
            let start = src.start_s + src.period_s.unwrap_or(0.0) * k as f64;
            if !src.is_active(start) {
                continue;
            }
            let b0 = sample_index(start, rate);
            if b0 + len <= s0 || b0 >= s0 + out.len() as i64 {
                continue;
            }
            let mut rng = keyed_rng(self.seed, stream, k);
            for j in 0..len {
                let w = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * j as f64 / len as f64).cos();
                let v = norm * w * rng.sample::<f64, _>(StandardNormal);
                let i = b0 + j - s0;
                if (0..out.len() as i64).contains(&i) {
                    out[i as usize] += v;
                }
            }
        }
    }
}
