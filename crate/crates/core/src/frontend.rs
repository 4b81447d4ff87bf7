//! Mechanical resonator, analog gain/filter chain and the 12-bit ADC.

use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::filter::{db, from_db, Biquad, BiquadState, Cascade};
use crate::SAMPLE_RATE;

/// Speed of sound used by the resonator formulas, m/s.
pub const SPEED_OF_SOUND: f64 = 343.0;

/// Rayleigh end-correction coefficient applied to the hole radius.
pub const END_CORRECTION: f64 = 1.7;

/// Interior geometry of the Helmholtz chamber over the microphone (SI units).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonatorGeometry {
    pub length: f64,
    pub width: f64,
    pub height: f64,
    pub hole_radius: f64,
    pub wall_thickness: f64,
    pub speed_of_sound: f64,
}

impl ResonatorGeometry {
    /// Chamber built over a 3.9 mm x 3.2 mm MEMS microphone footprint,
    /// 3.5 mm tall, with a 1 mm hole through a 1 mm wall.
    pub fn reference() -> Self {
        Self {
            length: 3.9e-3,
            width: 3.2e-3,
            height: 3.5e-3,
            hole_radius: 1.0e-3,
            wall_thickness: 1.0e-3,
            speed_of_sound: SPEED_OF_SOUND,
        }
    }

    pub fn volume(&self) -> f64 {
        self.length * self.width * self.height
    }

    /// Neck length including the end correction, `t + 1.7 a`.
    pub fn effective_neck(&self) -> f64 {
        self.wall_thickness + END_CORRECTION * self.hole_radius
    }

    fn validate(&self) -> Result<()> {
        let fields = [
            ("length", self.length),
            ("width", self.width),
            ("height", self.height),
            ("hole_radius", self.hole_radius),
            ("wall_thickness", self.wall_thickness),
            ("speed_of_sound", self.speed_of_sound),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(name, format!("{v} must be positive")));
            }
        }
        Ok(())
    }
}

/// Lumped band-pass description of the resonator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonatorResponse {
    pub f0: f64,
    pub q: f64,
    pub peak_gain: f64,
}

/// Peak pressure gain of the chamber, the measured sensitivity doubling.
pub const RESONATOR_PEAK_GAIN: f64 = 2.0;

impl ResonatorResponse {
    pub fn new(f0: f64, q: f64, peak_gain: f64) -> Result<Self> {
        if !(f0 > 0.0 && f0.is_finite()) {
            return Err(invalid("f0", format!("{f0} must be positive")));
        }
        if !(q > 0.0 && q.is_finite()) {
            return Err(invalid("q", format!("{q} must be positive")));
        }
        if !(peak_gain >= 1.0 && peak_gain.is_finite()) {
            return Err(invalid("peak_gain", format!("{peak_gain} must be >= 1")));
        }
        Ok(Self { f0, q, peak_gain })
    }

    /// The in-situ response used by the acquisition path: the design
    /// centre frequency with a loaded Q equal to the peak pressure gain.
    ///
    /// For a lumped Helmholtz cavity the pressure gain at resonance equals
    /// its Q, so a chamber that only doubles sensitivity is loaded down to
    /// Q ~ 2 whatever its lossless estimate says.
    pub fn loaded(design: &ResonatorResponse) -> Self {
        Self {
            f0: design.f0,
            q: design.peak_gain,
            peak_gain: design.peak_gain,
        }
    }

    pub fn biquad(&self, rate: f64) -> Result<Biquad> {
        if self.f0 >= rate / 2.0 {
            return Err(Error::AboveNyquist { f0: self.f0, rate });
        }
        Biquad::bandpass(self.f0, self.q, self.peak_gain, rate)
    }
}

/// Computes centre frequency and Q of a chamber from its geometry.
pub fn design_resonator(g: &ResonatorGeometry) -> Result<ResonatorResponse> {
    g.validate()?;
    let v = g.volume();
    let neck = g.effective_neck();
    let a = g.hole_radius;
    let f0 = g.speed_of_sound * a / 2.0 * (1.0 / (PI * v * neck)).sqrt();
    let q = 2.0 * (v / PI * (neck / (a * a)).powi(3)).sqrt();
    ResonatorResponse::new(f0, q, RESONATOR_PEAK_GAIN)
}

/// Applies the resonator band-pass to `x`, starting from rest.
pub fn resonator_filter(r: &ResonatorResponse, x: &[f64], rate: f64) -> Result<Vec<f64>> {
    let bq = r.biquad(rate)?;
    Ok(Cascade::new(1.0, vec![bq]).apply(x))
}

/// Pre-gain, 4th-order Sallen-Key high-pass, post-gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalogChain {
    pub pre_gain_db: f64,
    pub hp_cutoff_hz: f64,
    pub post_gain_db: f64,
}

impl Default for AnalogChain {
    fn default() -> Self {
        Self {
            pre_gain_db: 40.0,
            hp_cutoff_hz: 8000.0,
            post_gain_db: 23.0,
        }
    }
}

impl AnalogChain {
    pub fn midband_gain_db(&self) -> f64 {
        self.pre_gain_db + self.post_gain_db
    }

    pub fn cascade(&self, rate: f64) -> Result<Cascade> {
        let mut c = Cascade::butterworth4_highpass(self.hp_cutoff_hz, rate)?;
        c.gain = from_db(self.midband_gain_db());
        Ok(c)
    }
}

/// Applies the analog chain to `x`, starting from rest.
pub fn analog_chain(c: &AnalogChain, x: &[f64], rate: f64) -> Result<Vec<f64>> {
    Ok(c.cascade(rate)?.apply(x))
}

pub const ADC_BITS: u32 = 12;
pub const ADC_MAX_CODE: u16 = (1 << ADC_BITS) - 1;
pub const ADC_MID_CODE: u16 = 1 << (ADC_BITS - 1);

/// Uniform 12-bit converter around a mid-rail virtual ground.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdcModel {
    /// Chain-output amplitude that maps to the rails (±2048 codes).
    pub full_scale: f64,
    pub rate: f64,
}

impl Default for AdcModel {
    /// Full scale equals the mid-band electronic gain, so a unit-amplitude
    /// in-band input at the microphone just reaches the rails.
    fn default() -> Self {
        Self {
            full_scale: from_db(AnalogChain::default().midband_gain_db()),
            rate: SAMPLE_RATE,
        }
    }
}

/// Quantised frame plus the clip flag.
#[derive(Debug, Clone, PartialEq)]
pub struct AdcFrame {
    pub codes: Vec<u16>,
    pub overload: bool,
}

impl AdcModel {
    pub fn lsb(&self) -> f64 {
        self.full_scale / f64::from(ADC_MID_CODE)
    }

    pub fn quantize(&self, v: f64) -> u16 {
        let code = (f64::from(ADC_MID_CODE) + v / self.lsb()).round();
        code.clamp(0.0, f64::from(ADC_MAX_CODE)) as u16
    }

    pub fn dequantize(&self, code: u16) -> f64 {
        (f64::from(code) - f64::from(ADC_MID_CODE)) * self.lsb()
    }
}

/// Converts a waveform; overload is set iff any code sits on a rail.
pub fn adc_convert(m: &AdcModel, x: &[f64]) -> AdcFrame {
    let codes: Vec<u16> = x.iter().map(|&v| m.quantize(v)).collect();
    let overload = codes.iter().any(|&c| c == 0 || c == ADC_MAX_CODE);
    AdcFrame { codes, overload }
}

/// Resonator, analog chain and converter as one unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Frontend {
    pub resonator: ResonatorResponse,
    pub chain: AnalogChain,
    pub adc: AdcModel,
    cascade: Cascade,
}

/// Which part of the front end a frequency response describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainSelect {
    Full,
    Analog,
    Resonator,
}

impl Frontend {
    pub fn new(resonator: ResonatorResponse, chain: AnalogChain, adc: AdcModel) -> Result<Self> {
        let mut cascade = chain.cascade(adc.rate)?;
        cascade.sections.insert(0, resonator.biquad(adc.rate)?);
        Ok(Self {
            resonator,
            chain,
            adc,
            cascade,
        })
    }

    /// Reference geometry, loaded resonator, default chain and ADC.
    pub fn reference() -> Self {
        let design = design_resonator(&ResonatorGeometry::reference())
            .expect("reference geometry is valid");
        Self::new(
            ResonatorResponse::loaded(&design),
            AnalogChain::default(),
            AdcModel::default(),
        )
        .expect("reference front end is valid")
    }

    pub fn rate(&self) -> f64 {
        self.adc.rate
    }

    pub fn fresh_state(&self) -> Vec<BiquadState> {
        self.cascade.fresh_state()
    }

    /// Runs pressure samples through resonator and analog chain in place.
    pub fn process_in_place(&self, state: &mut [BiquadState], x: &mut [f64]) {
        self.cascade.process_in_place(state, x);
    }

    /// Magnitude (linear) at `freq` for the selected sub-chain.
    pub fn magnitude(&self, which: ChainSelect, freq: f64) -> f64 {
        let rate = self.rate();
        let res = self.cascade.sections[0].magnitude(freq, rate);
        match which {
            ChainSelect::Resonator => res,
            ChainSelect::Full => self.cascade.magnitude(freq, rate),
            ChainSelect::Analog => self.cascade.magnitude(freq, rate) / res,
        }
    }

    pub fn magnitude_db(&self, which: ChainSelect, freq: f64) -> f64 {
        db(self.magnitude(which, freq))
    }

    pub fn max_pole_radius(&self) -> f64 {
        self.cascade.max_pole_radius()
    }
}

/// Writes `frequency_hz,magnitude_db` rows from `step_hz` up to Nyquist.
pub fn write_frequency_response<W: std::io::Write>(
    fe: &Frontend,
    which: ChainSelect,
    step_hz: f64,
    out: W,
) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["frequency_hz", "magnitude_db"])?;
    let nyq = fe.rate() / 2.0;
    let mut k = 1u32;
    loop {
        let f = f64::from(k) * step_hz;
        if f >= nyq {
            break;
        }
        w.write_record([format!("{f:.1}"), format!("{:.4}", fe.magnitude_db(which, f))])?;
        k += 1;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f64, amp: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| amp * (2.0 * PI * freq * i as f64 / SAMPLE_RATE).sin())
            .collect()
    }

    fn steady_peak(y: &[f64]) -> f64 {
        y[y.len() / 2..].iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    #[test]
    fn reference_geometry_golden_values() {
        let r = design_resonator(&ResonatorGeometry::reference()).unwrap();
        assert!((r.f0 - 8900.0).abs() / 8900.0 < 0.01, "f0 = {}", r.f0);
        assert!((r.q - 33.0).abs() / 33.0 < 0.02, "q = {}", r.q);
    }

    /// Evaluates the formulas in millimetres and kHz with explicit unit
    /// conversions, independent of the SI path.
    #[test]
    fn golden_values_in_millimetre_units() {
        let (l, w, h, a, t) = (3.9_f64, 3.2, 3.5, 1.0, 1.0); // mm
        let v_mm3 = l * w * h;
        let tp_mm = t + 1.7 * a;
        let c_mm_per_s = 343.0 * 1000.0;
        // f0 = (c a / 2) sqrt(1/(pi V t')) has units (mm/s * mm) / mm^2 = 1/s
        let f0 = c_mm_per_s * a / 2.0 / (PI * v_mm3 * tp_mm).sqrt();
        // Q is dimensionless: mm^3 * (mm / mm^2)^3
        let q = 2.0 * (v_mm3 / PI * (tp_mm / (a * a)).powi(3)).sqrt();
        let r = design_resonator(&ResonatorGeometry::reference()).unwrap();
        assert!(((r.f0 - f0) / f0).abs() < 1e-6);
        assert!(((r.q - q) / q).abs() < 1e-6);
    }

    #[test]
    fn doubling_radius_at_fixed_neck_doubles_f0() {
        // t' = 2.7 mm in both: (a, t) = (0.5, 1.85) and (1.0, 1.0)
        let small = ResonatorGeometry {
            hole_radius: 0.5e-3,
            wall_thickness: 1.85e-3,
            ..ResonatorGeometry::reference()
        };
        let big = ResonatorGeometry::reference();
        assert!((small.effective_neck() - big.effective_neck()).abs() < 1e-15);
        let r1 = design_resonator(&small).unwrap();
        let r2 = design_resonator(&big).unwrap();
        assert!((r2.f0 / r1.f0 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_nonpositive_dimension() {
        let g = ResonatorGeometry {
            height: 0.0,
            ..ResonatorGeometry::reference()
        };
        assert!(design_resonator(&g).is_err());
        let g = ResonatorGeometry {
            hole_radius: -1e-3,
            ..ResonatorGeometry::reference()
        };
        assert!(design_resonator(&g).is_err());
    }

    #[test]
    fn resonator_doubles_tone_at_f0() {
        let r = ResonatorResponse::new(8900.0, 33.0, 2.0).unwrap();
        let y = resonator_filter(&r, &tone(8900.0, 1.0, 40_000), SAMPLE_RATE).unwrap();
        assert!(db(steady_peak(&y) / 2.0).abs() < 0.2);
    }

    #[test]
    fn resonator_kills_dc() {
        let r = ResonatorResponse::new(8900.0, 33.0, 2.0).unwrap();
        let y = resonator_filter(&r, &vec![1.0; 40_000], SAMPLE_RATE).unwrap();
        assert!(steady_peak(&y) < 1e-9);
    }

    #[test]
    fn resonator_rejects_speech_band_tone() {
        let r = ResonatorResponse::new(8900.0, 33.0, 2.0).unwrap();
        // analytic continuous band-pass magnitude relative to the peak
        let f: f64 = 3400.0;
        let analytic = 1.0 / (1.0 + (33.0 * (f / 8900.0 - 8900.0 / f)).powi(2)).sqrt();
        assert!(db(analytic) <= -25.0);
        let y = resonator_filter(&r, &tone(f, 1.0, 40_000), SAMPLE_RATE).unwrap();
        assert!(db(steady_peak(&y)) <= -25.0);
    }

    #[test]
    fn resonator_bandwidth_matches_q() {
        for q in [33.0, 10.0, 2.0] {
            let r = ResonatorResponse::new(8900.0, q, 2.0).unwrap();
            let bq = r.biquad(SAMPLE_RATE).unwrap();
            let half = 2.0 / 2f64.sqrt();
            let edge = |mut lo: f64, mut hi: f64, rising: bool| {
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    let above = bq.magnitude(mid, SAMPLE_RATE) > half;
                    if above == rising {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                0.5 * (lo + hi)
            };
            let f_lo = edge(1.0, 8900.0, true);
            let f_hi = edge(8900.0, SAMPLE_RATE / 2.0 - 1.0, false);
            let bw = f_hi - f_lo;
            let expect = 8900.0 / q;
            assert!((bw - expect).abs() / expect < 0.10, "q={q} bw={bw}");
        }
    }

    #[test]
    fn resonator_rejects_f0_above_nyquist() {
        let r = ResonatorResponse::new(20_000.0, 5.0, 2.0).unwrap();
        assert!(matches!(
            resonator_filter(&r, &[0.0; 8], SAMPLE_RATE),
            Err(Error::AboveNyquist { .. })
        ));
    }

    #[test]
    fn analog_chain_gains() {
        let c = AnalogChain::default();
        let g = |f: f64| {
            let y = analog_chain(&c, &tone(f, 1e-4, 40_000), SAMPLE_RATE).unwrap();
            db(steady_peak(&y) / 1e-4)
        };
        let g11 = g(11_000.0);
        assert!((62.0..=64.0).contains(&g11), "{g11}");
        assert!((g(8000.0) - 60.0).abs() <= 0.5);
        assert!(g(4000.0) <= 39.0);
        // analytic analog prototype at fc/2
        let proto = 1.0 / (1.0 + 2f64.powi(8)).sqrt();
        assert!((db(proto) + 24.1).abs() < 0.05);
    }

    #[test]
    fn adc_mid_rail_and_clip() {
        let m = AdcModel::default();
        let f = adc_convert(&m, &[0.0; 256]);
        assert!(f.codes.iter().all(|&c| c == 2048));
        assert!(!f.overload);
        let x: Vec<f64> = (0..256)
            .map(|i| 1.2 * m.full_scale * (2.0 * PI * i as f64 / 64.0).sin())
            .collect();
        assert!(adc_convert(&m, &x).overload);
    }

    #[test]
    fn adc_half_scale_span() {
        let m = AdcModel::default();
        let x: Vec<f64> = (0..256)
            .map(|i| 0.5 * m.full_scale * (2.0 * PI * i as f64 / 64.0).sin())
            .collect();
        let f = adc_convert(&m, &x);
        let lo = *f.codes.iter().min().unwrap();
        let hi = *f.codes.iter().max().unwrap();
        assert_eq!((lo, hi), (1024, 3072));
        assert!(!f.overload);
    }

    #[test]
    fn reference_front_end_is_stable() {
        let fe = Frontend::reference();
        assert!(fe.max_pole_radius() < 1.0);
        assert!((fe.resonator.q - 2.0).abs() < 1e-12);
    }

    #[test]
    fn response_csv_header() {
        let mut buf = Vec::new();
        write_frequency_response(&Frontend::reference(), ChainSelect::Full, 1000.0, &mut buf)
            .unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("frequency_hz,magnitude_db\n1000.0,"));
        assert_eq!(s.lines().count(), 17);
    }
}
