//! Drives a [`Sensor`] from a scenario through the full signal path.
//!
//! Time zero is the start of monitoring after power-on. The power-on
//! training session runs before it, tick `i` at `-(i + 1)` seconds, so
//! scenario intervals that start at zero describe events that begin as the
//! sensor starts listening. A retrain requested later runs forward from the
//! current time.

use std::io::Write;

use crate::detector::{
    poll_classify, run_training, Baseline, Event, LineEdge, MonitorConfig, Mode, Sensor,
    TrainingConfig, TrainingOutcome, CONFIRM_SPACING, TRAINING_PERIOD,
};
use crate::dsp::acquire;
use crate::error::Result;
use crate::frontend::Frontend;
use crate::synth::Scenario;

/// One polling cycle as recorded in the timeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimelineRow {
    pub t: f64,
    pub event: Event,
    pub acquisitions: u8,
    pub q: u16,
    pub s: u16,
    pub r: u16,
    pub alarm: bool,
    pub noise: bool,
}

#[derive(Debug, Clone)]
pub struct Device {
    pub frontend: Frontend,
    pub scenario: Scenario,
    pub sensor: Sensor,
    pub now: f64,
    next_poll: f64,
    max_sessions: Option<u32>,
    pub timeline: Vec<TimelineRow>,
    pub trainings: Vec<TrainingOutcome>,
}

impl Device {
    /// Powers up and trains; monitoring starts at `t = 0`.
    pub fn power_on(
        frontend: Frontend,
        scenario: Scenario,
        monitor: MonitorConfig,
        training: TrainingConfig,
        max_sessions: Option<u32>,
    ) -> Result<Self> {
        scenario.validate()?;
        let mut dev = Self {
            frontend,
            scenario,
            sensor: Sensor::new(monitor, training),
            now: 0.0,
            next_poll: 0.0,
            max_sessions,
            timeline: Vec::new(),
            trainings: Vec::new(),
        };
        let out = dev.train(|i| -(f64::from(i) + 1.0) * TRAINING_PERIOD)?;
        dev.sensor.finish_training(out.baseline);
        dev.trainings.push(out);
        Ok(dev)
    }

    fn train(&self, tick_time: impl Fn(u32) -> f64) -> Result<TrainingOutcome> {
        let (fe, sc) = (&self.frontend, &self.scenario);
        run_training(&self.sensor.training, self.max_sessions, |i| {
            acquire(fe, sc, tick_time(i))
        })
    }

    pub fn baseline(&self) -> Option<Baseline> {
        self.sensor.baseline
    }

    /// Runs every training tick and poll due before `now + dt`.
    pub fn advance(&mut self, dt: f64) -> Result<()> {
        let end = self.now + dt;
        loop {
            if self.sensor.mode == Mode::Training {
                let start = self.now;
                let out = self.train(|i| start + f64::from(i) * TRAINING_PERIOD)?;
                self.now = start + f64::from(out.ticks) * TRAINING_PERIOD;
                self.sensor.finish_training(out.baseline);
                self.trainings.push(out);
                self.next_poll = self.now;
                continue;
            }
            if self.next_poll >= end {
                break;
            }
            let t = self.next_poll;
            self.poll(t);
            self.next_poll = t + f64::from(self.sensor.monitor.tau_s);
        }
        self.now = self.now.max(end);
        Ok(())
    }

    fn poll(&mut self, t: f64) {
        let baseline = self.sensor.baseline.expect("monitoring has a baseline");
        let (fe, sc) = (&self.frontend, &self.scenario);
        let res = poll_classify(&baseline, |i| acquire(fe, sc, t + i as f64 * CONFIRM_SPACING));
        let out = self.sensor.record(res.event, t);
        let (q, s, r) = self.sensor.arrays.counts();
        self.timeline.push(TimelineRow {
            t,
            event: res.event,
            acquisitions: res.acquisitions,
            q,
            s,
            r,
            alarm: out.alarm,
            noise: out.noise,
        });
    }

    pub fn edges(&self) -> &[LineEdge] {
        &self.sensor.edges
    }
}

/// Monitors a trained baseline over `[0, duration)` and returns the timeline.
pub fn run_monitor(
    baseline: Baseline,
    cfg: MonitorConfig,
    frontend: &Frontend,
    scenario: &Scenario,
    duration: f64,
) -> Vec<TimelineRow> {
    let mut sensor = Sensor::new(cfg, TrainingConfig::default());
    sensor.finish_training(baseline);
    let mut rows = Vec::new();
    let tau = f64::from(cfg.tau_s);
    let mut k = 0u32;
    loop {
        let t = f64::from(k) * tau;
        if t >= duration {
            break;
        }
        let res = poll_classify(&baseline, |i| {
            acquire(frontend, scenario, t + i as f64 * CONFIRM_SPACING)
        });
        let out = sensor.record(res.event, t);
        let (q, s, r) = sensor.arrays.counts();
        rows.push(TimelineRow {
            t,
            event: res.event,
            acquisitions: res.acquisitions,
            q,
            s,
            r,
            alarm: out.alarm,
            noise: out.noise,
        });
        k += 1;
    }
    rows
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerdictKind {
    Alarm,
    Noise,
    Quiet,
}

impl VerdictKind {
    pub fn as_str(self) -> &'static str {
        match self {
            VerdictKind::Alarm => "ALARM",
            VerdictKind::Noise => "NOISE",
            VerdictKind::Quiet => "QUIET",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Verdict {
    pub kind: VerdictKind,
    /// Time of the first poll that raised the reported condition.
    pub first_trigger: Option<f64>,
    pub alarm_polls: usize,
}

impl Verdict {
    pub fn from_timeline(rows: &[TimelineRow]) -> Self {
        let alarm_polls = rows.iter().filter(|r| r.alarm).count();
        let first_alarm = rows.iter().find(|r| r.alarm).map(|r| r.t);
        let first_noise = rows.iter().find(|r| r.noise).map(|r| r.t);
        let (kind, first_trigger) = match (first_alarm, first_noise) {
            (Some(t), _) => (VerdictKind::Alarm, Some(t)),
            (None, Some(t)) => (VerdictKind::Noise, Some(t)),
            (None, None) => (VerdictKind::Quiet, None),
        };
        Self {
            kind,
            first_trigger,
            alarm_polls,
        }
    }

    pub fn line(&self) -> String {
        match self.first_trigger {
            Some(t) => format!("{} t={t:.3}", self.kind.as_str()),
            None => self.kind.as_str().to_string(),
        }
    }
}

pub const TIMELINE_HEADER: [&str; 7] = ["time_s", "event", "q", "s", "r", "alarm", "noise"];

/// Writes the timeline CSV, one row per poll.
pub fn write_timeline<W: Write>(rows: &[TimelineRow], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TIMELINE_HEADER)?;
    for r in rows {
        w.write_record([
            format!("{:.3}", r.t),
            r.event.code().to_string(),
            r.q.to_string(),
            r.s.to_string(),
            r.r.to_string(),
            u8::from(r.alarm).to_string(),
            u8::from(r.noise).to_string(),
        ])?;
    }
    w.flush()
}
