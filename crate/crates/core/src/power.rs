//! Duty-cycle energy accounting and battery lifetime.

use std::io::Write;

use crate::detector::TAU_RANGE;
use crate::error::{invalid, Result};
use crate::sim::TimelineRow;
use crate::FRAME_DURATION;

pub const SECONDS_PER_YEAR: f64 = 365.25 * 86_400.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerParams {
    pub sleep_power_w: f64,
    pub acq_energy_j: f64,
    /// Reported only; the peak's duration is unknown so it is not integrated.
    pub peak_current_a: f64,
    pub battery_capacity_j: f64,
    pub derating: f64,
    /// Awake time per acquisition beyond the 7.68 ms capture, s.
    pub overhead_s: f64,
}

impl Default for PowerParams {
    /// 12 µW sleep, 140 µJ per acquisition, two AAA cells (3.6 Wh) at 80 %.
    fn default() -> Self {
        Self {
            sleep_power_w: 12e-6,
            acq_energy_j: 140e-6,
            peak_current_a: 3.2e-3,
            battery_capacity_j: 3.6 * 3600.0,
            derating: 0.8,
            overhead_s: 0.0,
        }
    }
}

impl PowerParams {
    pub fn validate(&self) -> Result<()> {
        let pos = [
            ("sleep_power_w", self.sleep_power_w),
            ("acq_energy_j", self.acq_energy_j),
            ("peak_current_a", self.peak_current_a),
            ("battery_capacity_j", self.battery_capacity_j),
        ];
        for (name, v) in pos {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(name, format!("{v} must be positive")));
            }
        }
        if !(self.derating > 0.0 && self.derating <= 1.0) {
            return Err(invalid("derating", format!("{} not in (0, 1]", self.derating)));
        }
        if !(self.overhead_s >= 0.0) {
            return Err(invalid("overhead_s", "must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerReport {
    pub avg_power_w: f64,
    pub sleep_fraction: f64,
    pub lifetime_s: f64,
    pub peak_current_a: f64,
}

impl PowerReport {
    pub fn lifetime_years(&self) -> f64 {
        self.lifetime_s / SECONDS_PER_YEAR
    }
}

fn report(p: &PowerParams, acquisitions: f64, span_s: f64) -> PowerReport {
    let avg = p.sleep_power_w + acquisitions * p.acq_energy_j / span_s;
    let awake = acquisitions * (FRAME_DURATION + p.overhead_s) / span_s;
    PowerReport {
        avg_power_w: avg,
        sleep_fraction: (1.0 - awake).clamp(0.0, 1.0),
        lifetime_s: p.derating * p.battery_capacity_j / avg,
        peak_current_a: p.peak_current_a,
    }
}

/// Average power for a fixed polling period and mean acquisitions per poll.
pub fn average_power(p: &PowerParams, tau_s: f64, acq_per_poll: f64) -> Result<PowerReport> {
    p.validate()?;
    let (lo, hi) = (f64::from(*TAU_RANGE.start()), f64::from(*TAU_RANGE.end()));
    if !(lo..=hi).contains(&tau_s) {
        return Err(invalid("tau_s", format!("{tau_s} not in [1, 30]")));
    }
    if !(1.0..=5.0).contains(&acq_per_poll) {
        return Err(invalid("acq_per_poll", format!("{acq_per_poll} not in [1, 5]")));
    }
    Ok(report(p, acq_per_poll, tau_s))
}

/// Integrates the acquisitions actually performed over a monitor timeline.
/// Early-aborted confirmations are charged only for what ran.
pub fn simulate_energy(timeline: &[TimelineRow], tau_s: f64, p: &PowerParams) -> Result<PowerReport> {
    p.validate()?;
    if timeline.is_empty() {
        return Err(invalid("timeline", "no polls"));
    }
    if !(tau_s > 0.0) {
        return Err(invalid("tau_s", "must be positive"));
    }
    let acq: u64 = timeline.iter().map(|r| u64::from(r.acquisitions)).sum();
    let span = timeline.len() as f64 * tau_s;
    Ok(report(p, acq as f64, span))
}

pub const POWER_HEADER: [&str; 5] = [
    "tau_s",
    "acq_per_poll",
    "avg_power_uW",
    "sleep_fraction",
    "lifetime_years",
];

pub fn write_power_rows<W: Write>(rows: &[(f64, f64, PowerReport)], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(POWER_HEADER)?;
    for (tau, acq, r) in rows {
        w.write_record([
            format!("{tau}"),
            format!("{acq:.3}"),
            format!("{:.3}", r.avg_power_w * 1e6),
            format!("{:.6}", r.sleep_fraction),
            format!("{:.3}", r.lifetime_years()),
        ])?;
    }
    w.flush()
}

/// Quiet-operation grid over every integer polling period.
pub fn power_sweep(p: &PowerParams, acq_per_poll: f64) -> Result<Vec<(f64, f64, PowerReport)>> {
    TAU_RANGE
        .map(|tau| {
            let tau = f64::from(tau);
            average_power(p, tau, acq_per_poll).map(|r| (tau, acq_per_poll, r))
        })
        .collect()
}
