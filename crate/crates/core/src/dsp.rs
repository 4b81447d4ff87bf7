//! The digital path: 256-point FFT with a uniform window and the 34-bin
//! spectral energy sum over 7 to 11.5 kHz.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::frontend::{adc_convert, Frontend, ADC_MID_CODE};
use crate::synth::Scenario;
use crate::{FRAME_LEN, SAMPLE_RATE};

const LOG2_LEN: u32 = FRAME_LEN.trailing_zeros();

/// Number of one-sided bins, 0 through N/2 inclusive.
pub const ONE_SIDED_BINS: usize = FRAME_LEN / 2 + 1;

/// Lower and upper edges of the detection band, Hz.
pub const BAND_LOW_HZ: f64 = 7000.0;
pub const BAND_HIGH_HZ: f64 = 11_500.0;

/// First and last bin (inclusive) summed into the band energy: 34 bins
/// starting at the first bin above 7 kHz.
pub const BAND_FIRST_BIN: usize = 54;
pub const BAND_LAST_BIN: usize = BAND_FIRST_BIN + BAND_BINS - 1;

pub fn bin_hz() -> f64 {
    SAMPLE_RATE / FRAME_LEN as f64
}

/// Number of bins in the detection band.
pub const BAND_BINS: usize = 34;

/// 256 converter samples with the mid-rail offset removed.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub samples: Vec<f64>,
    pub t0: f64,
}

impl Frame {
    pub fn new(samples: Vec<f64>, t0: f64) -> Result<Self> {
        if samples.len() != FRAME_LEN {
            return Err(Error::FrameLength(samples.len()));
        }
        Ok(Self { samples, t0 })
    }

    pub fn from_codes(codes: &[u16], t0: f64) -> Result<Self> {
        let mid = f64::from(ADC_MID_CODE);
        Self::new(codes.iter().map(|&c| f64::from(c) - mid).collect(), t0)
    }
}

/// One-sided spectrum, bins 0..=128.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub bins: Vec<Complex64>,
}

impl Spectrum {
    pub fn frequency(&self, k: usize) -> f64 {
        k as f64 * bin_hz()
    }
}

/// Summed squared magnitude over the detection band.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct BandEnergy(pub f64);

struct Tables {
    twiddle: Vec<Complex64>,
    bitrev: Vec<usize>,
}

fn tables() -> &'static Tables {
    static T: OnceLock<Tables> = OnceLock::new();
    T.get_or_init(|| {
        let twiddle = (0..FRAME_LEN / 2)
            .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / FRAME_LEN as f64))
            .collect();
        let bitrev = (0..FRAME_LEN)
            .map(|i| i.reverse_bits() >> (usize::BITS - LOG2_LEN))
            .collect();
        Tables { twiddle, bitrev }
    })
}

/// In-place iterative radix-2 decimation-in-time transform of 256 points.
fn fft_in_place(buf: &mut [Complex64]) {
    let t = tables();
    for i in 0..FRAME_LEN {
        let j = t.bitrev[i];
        if j > i {
            buf.swap(i, j);
        }
    }
    let mut half = 1;
    while half < FRAME_LEN {
        let stride = FRAME_LEN / (2 * half);
        for start in (0..FRAME_LEN).step_by(2 * half) {
            for k in 0..half {
                let w = t.twiddle[k * stride];
                let a = buf[start + k];
                let b = buf[start + k + half] * w;
                buf[start + k] = a + b;
                buf[start + k + half] = a - b;
            }
        }
        half *= 2;
    }
}

/// Unnormalised forward DFT of a frame, one-sided.
pub fn fft256(frame: &Frame) -> Result<Spectrum> {
    if frame.samples.len() != FRAME_LEN {
        return Err(Error::FrameLength(frame.samples.len()));
    }
    let mut buf: Vec<Complex64> = frame
        .samples
        .iter()
        .map(|&x| Complex64::new(x, 0.0))
        .collect();
    fft_in_place(&mut buf);
    buf.truncate(ONE_SIDED_BINS);
    Ok(Spectrum { bins: buf })
}

/// Sum of `|X_k|^2` over bins 54..=87. Positive-frequency bins only.
pub fn spectral_energy(s: &Spectrum) -> BandEnergy {
    BandEnergy(
        s.bins[BAND_FIRST_BIN..=BAND_LAST_BIN]
            .iter()
            .map(Complex64::norm_sqr)
            .sum(),
    )
}

/// Outcome of one 7.68 ms acquisition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Acquisition {
    Energy(BandEnergy),
    Overload,
}

/// Pressure samples pre-rolled through the filters before a frame so the
/// resonator and high-pass sections start each acquisition settled.
pub const WARMUP_SAMPLES: usize = FRAME_LEN;

/// Converter codes of the frame starting at `t0` (filters settled).
pub fn capture(fe: &Frontend, scenario: &Scenario, t0: f64) -> crate::frontend::AdcFrame {
    let pre_t0 = t0 - WARMUP_SAMPLES as f64 / fe.rate();
    let mut x = scenario.synthesize_frame(pre_t0, WARMUP_SAMPLES + FRAME_LEN, fe.rate());
    let mut st = fe.fresh_state();
    fe.process_in_place(&mut st, &mut x);
    adc_convert(&fe.adc, &x[WARMUP_SAMPLES..])
}

/// Synthesis, front end, converter and band-energy sum for one acquisition.
/// An overloaded frame short-circuits before the FFT.
pub fn acquire(fe: &Frontend, scenario: &Scenario, t0: f64) -> Acquisition {
    let adc = capture(fe, scenario, t0);
    if adc.overload {
        return Acquisition::Overload;
    }
    let frame = Frame::from_codes(&adc.codes, t0).expect("capture yields 256 codes");
    Acquisition::Energy(spectral_energy(&fft256(&frame).expect("length checked")))
}

/// Expected band energy of white noise at `level_db` through `fe`, in
/// converter codes squared, including uniform quantisation noise.
pub fn expected_white_band_energy(fe: &Frontend, level_db: f64) -> f64 {
    let var = crate::filter::from_db(level_db).powi(2);
    let lsb = fe.adc.lsb();
    let n = FRAME_LEN as f64;
    (BAND_FIRST_BIN..=BAND_LAST_BIN)
        .map(|k| {
            let h = fe.magnitude(crate::frontend::ChainSelect::Full, k as f64 * bin_hz());
            n * var * h * h / (lsb * lsb) + n / 12.0
        })
        .sum()
}

/// Writes `bin_index,frequency_hz,magnitude` rows.
pub fn write_spectrum<W: std::io::Write>(s: &Spectrum, out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["bin_index", "frequency_hz", "magnitude"])?;
    for (k, x) in s.bins.iter().enumerate() {
        w.write_record([
            k.to_string(),
            format!("{:.3}", s.frequency(k)),
            format!("{:.6}", x.norm()),
        ])?;
    }
    w.flush()
}
