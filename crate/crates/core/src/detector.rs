//! Training and monitoring state machine.
//!
//! Training collects band energies at 1 Hz until a set is stable
//! (`2σ_B < x̄_B`). Each polling cycle is then classified as quiet, leak or
//! noise and pushed into three sliding 0/1 arrays whose sums drive the
//! alarm (`S ≥ T`) and noise (`S < T` and `S + R ≥ T`) outputs.
//!
//! Acquisition is abstracted as a closure so the decision logic can be
//! driven by the full signal path or by fixed energy sequences in tests.

use crate::dsp::Acquisition;
use crate::error::{invalid, Error, Result};

/// Allowed range for the training set size and the event window size.
pub const SET_SIZE_RANGE: std::ops::RangeInclusive<u16> = 10..=255;

/// Allowed polling periods, s.
pub const TAU_RANGE: std::ops::RangeInclusive<u16> = 1..=30;

/// Acquisitions in one confirmation group, including the first.
pub const CONFIRM_SAMPLES: usize = 5;

/// Spacing of the confirmation acquisitions, s.
pub const CONFIRM_SPACING: f64 = 0.045;

/// Training tick period, s.
pub const TRAINING_PERIOD: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainingConfig {
    pub set_size: u16,
}

impl TrainingConfig {
    pub fn new(set_size: u16) -> Result<Self> {
        if !SET_SIZE_RANGE.contains(&set_size) {
            return Err(invalid("train_size", format!("{set_size} not in 10..=255")));
        }
        Ok(Self { set_size })
    }
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self { set_size: 30 }
    }
}

/// Mean and population standard deviation of the training set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Baseline {
    pub mean: f64,
    pub std: f64,
}

impl Baseline {
    /// Leak threshold, one standard deviation above the floor.
    pub fn threshold(&self) -> f64 {
        self.mean + self.std
    }

    pub fn is_stable(&self) -> bool {
        2.0 * self.std < self.mean
    }
}

/// Mean and population standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingOutcome {
    pub baseline: Baseline,
    pub sessions: u32,
    /// Acquisitions attempted, overloads included.
    pub ticks: u32,
    pub overloads: u32,
}

/// Runs training sessions until one is stable.
///
/// `acquire` is called with a running tick counter; overloaded ticks are
/// discarded and retried on the next tick. With `max_sessions` set, gives
/// up after that many unstable sets.
pub fn run_training<F>(cfg: &TrainingConfig, max_sessions: Option<u32>, mut acquire: F) -> Result<TrainingOutcome>
where
    F: FnMut(u32) -> Acquisition,
{
    let mut ticks = 0u32;
    let mut overloads = 0u32;
    let mut sessions = 0u32;
    let mut set = Vec::with_capacity(cfg.set_size as usize);
    loop {
        if max_sessions.is_some_and(|cap| sessions >= cap) {
            return Err(Error::TrainingFailed { sessions });
        }
        set.clear();
        while set.len() < cfg.set_size as usize {
            let a = acquire(ticks);
            ticks += 1;
            match a {
                Acquisition::Energy(e) => set.push(e.0),
                Acquisition::Overload => overloads += 1,
            }
        }
        sessions += 1;
        let (mean, std) = mean_std(&set);
        let baseline = Baseline { mean, std };
        if baseline.is_stable() {
            return Ok(TrainingOutcome {
                baseline,
                sessions,
                ticks,
                overloads,
            });
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Event {
    Quiet,
    Leak,
    Noise,
}

impl Event {
    pub fn code(self) -> char {
        match self {
            Event::Quiet => 'Q',
            Event::Leak => 'L',
            Event::Noise => 'R',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PollResult {
    pub event: Event,
    /// Acquisitions actually performed (1 to 5).
    pub acquisitions: u8,
}

/// Classifies one polling cycle.
///
/// `acquire(i)` performs the i-th acquisition of the cycle (i = 0 at the
/// poll instant, then 45 ms apart). Acquisition stops as soon as the
/// outcome is decided.
pub fn poll_classify<F>(baseline: &Baseline, mut acquire: F) -> PollResult
where
    F: FnMut(usize) -> Acquisition,
{
    let thr = baseline.threshold();
    let done = |event, n: usize| PollResult {
        event,
        acquisitions: n as u8,
    };
    let x0 = match acquire(0) {
        Acquisition::Overload => return done(Event::Noise, 1),
        Acquisition::Energy(e) => e.0,
    };
    if x0 <= thr {
        return done(Event::Quiet, 1);
    }
    let mut xs = [0.0; CONFIRM_SAMPLES];
    xs[0] = x0;
    for (i, x) in xs.iter_mut().enumerate().skip(1) {
        match acquire(i) {
            Acquisition::Overload => return done(Event::Noise, i + 1),
            Acquisition::Energy(e) => *x = e.0,
        }
    }
    let (mean, std) = mean_std(&xs);
    if 2.0 * std > mean {
        return done(Event::Noise, CONFIRM_SAMPLES);
    }
    if xs.iter().all(|&x| x > thr) {
        done(Event::Leak, CONFIRM_SAMPLES)
    } else {
        done(Event::Quiet, CONFIRM_SAMPLES)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MonitorConfig {
    /// Event window size.
    pub n: u16,
    /// Polling period, whole seconds.
    pub tau_s: u16,
    /// Alarm threshold on the leak count.
    pub t_alarm: u16,
}

impl MonitorConfig {
    pub fn new(n: u16, tau_s: u16, t_alarm: u16) -> Result<Self> {
        if !SET_SIZE_RANGE.contains(&n) {
            return Err(invalid("n", format!("{n} not in 10..=255")));
        }
        if !TAU_RANGE.contains(&tau_s) {
            return Err(invalid("tau", format!("{tau_s} not in 1..=30")));
        }
        if t_alarm == 0 || t_alarm > n {
            return Err(invalid("t_alarm", format!("{t_alarm} not in 1..={n}")));
        }
        Ok(Self { n, tau_s, t_alarm })
    }

    pub fn window_s(&self) -> f64 {
        f64::from(self.n) * f64::from(self.tau_s)
    }

    /// Whether `t_alarm` lies in the recommended 80-90 % of `n`.
    pub fn threshold_is_recommended(&self) -> bool {
        let f = f64::from(self.t_alarm) / f64::from(self.n);
        (0.8..=0.9).contains(&f)
    }
}

impl Default for MonitorConfig {
    fn default() -> Self {
        Self {
            n: 20,
            tau_s: 2,
            t_alarm: 17,
        }
    }
}

/// Fixed 256-bit ring of 0/1 flags.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct BitRing([u64; 4]);

impl BitRing {
    fn get(&self, i: usize) -> bool {
        self.0[i / 64] >> (i % 64) & 1 == 1
    }

    fn set(&mut self, i: usize, v: bool) {
        let mask = 1u64 << (i % 64);
        if v {
            self.0[i / 64] |= mask;
        } else {
            self.0[i / 64] &= !mask;
        }
    }
}

/// Three sliding 0/1 arrays (quiet, leak, noise) sharing one write slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventArrays {
    n: usize,
    head: usize,
    quiet: BitRing,
    leak: BitRing,
    noise: BitRing,
    q: u16,
    s: u16,
    r: u16,
}

impl EventArrays {
    /// Window of `n` slots, all quiet.
    pub fn new(n: u16) -> Self {
        let n = n as usize;
        assert!((1..=256).contains(&n), "window size {n} out of range");
        let mut quiet = BitRing::default();
        for i in 0..n {
            quiet.set(i, true);
        }
        Self {
            n,
            head: 0,
            quiet,
            leak: BitRing::default(),
            noise: BitRing::default(),
            q: n as u16,
            s: 0,
            r: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Overwrites the oldest slot of all three arrays.
    pub fn push(&mut self, event: Event) {
        let i = self.head;
        self.q -= u16::from(self.quiet.get(i));
        self.s -= u16::from(self.leak.get(i));
        self.r -= u16::from(self.noise.get(i));
        self.quiet.set(i, event == Event::Quiet);
        self.leak.set(i, event == Event::Leak);
        self.noise.set(i, event == Event::Noise);
        self.q += u16::from(event == Event::Quiet);
        self.s += u16::from(event == Event::Leak);
        self.r += u16::from(event == Event::Noise);
        self.head = (i + 1) % self.n;
    }

    /// (Q, S, R).
    pub fn counts(&self) -> (u16, u16, u16) {
        (self.q, self.s, self.r)
    }

    /// Slot values of one array, oldest first.
    pub fn bits(&self, event: Event) -> Vec<bool> {
        let ring = match event {
            Event::Quiet => &self.quiet,
            Event::Leak => &self.leak,
            Event::Noise => &self.noise,
        };
        (0..self.n).map(|k| ring.get((self.head + k) % self.n)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Training,
    Monitoring,
}

/// Alarm and noise outputs derived from the counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Outputs {
    pub alarm: bool,
    pub noise: bool,
}

pub fn evaluate_status(arrays: &EventArrays, cfg: &MonitorConfig) -> Outputs {
    let (_, s, r) = arrays.counts();
    let t = cfg.t_alarm;
    Outputs {
        alarm: s >= t,
        noise: s < t && s + r >= t,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Line {
    Alarm,
    Noise,
}

/// A level change on one of the two interrupt lines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineEdge {
    pub t: f64,
    pub line: Line,
    pub rising: bool,
}

/// Complete device state: configuration, mode, baseline, arrays, outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Sensor {
    pub monitor: MonitorConfig,
    pub training: TrainingConfig,
    /// Written configuration, applied on the next training start.
    pub pending_monitor: MonitorConfig,
    pub pending_training: TrainingConfig,
    pub mode: Mode,
    pub baseline: Option<Baseline>,
    pub arrays: EventArrays,
    pub outputs: Outputs,
    pub edges: Vec<LineEdge>,
}

impl Sensor {
    /// Powered-up device in training mode.
    pub fn new(monitor: MonitorConfig, training: TrainingConfig) -> Self {
        Self {
            monitor,
            training,
            pending_monitor: monitor,
            pending_training: training,
            mode: Mode::Training,
            baseline: None,
            arrays: EventArrays::new(monitor.n),
            outputs: Outputs::default(),
            edges: Vec::new(),
        }
    }

    /// Applies pending configuration, clears the window and outputs and
    /// enters training.
    pub fn start_training(&mut self, t: f64) {
        self.monitor = self.pending_monitor;
        self.training = self.pending_training;
        self.mode = Mode::Training;
        self.baseline = None;
        self.arrays = EventArrays::new(self.monitor.n);
        self.set_outputs(Outputs::default(), t);
    }

    pub fn finish_training(&mut self, baseline: Baseline) {
        self.baseline = Some(baseline);
        self.mode = Mode::Monitoring;
        self.arrays = EventArrays::new(self.monitor.n);
    }

    /// Records one poll outcome and re-evaluates the outputs immediately.
    pub fn record(&mut self, event: Event, t: f64) -> Outputs {
        self.arrays.push(event);
        let out = evaluate_status(&self.arrays, &self.monitor);
        self.set_outputs(out, t);
        out
    }

    fn set_outputs(&mut self, out: Outputs, t: f64) {
        if out.alarm != self.outputs.alarm {
            self.edges.push(LineEdge {
                t,
                line: Line::Alarm,
                rising: out.alarm,
            });
        }
        if out.noise != self.outputs.noise {
            self.edges.push(LineEdge {
                t,
                line: Line::Noise,
                rising: out.noise,
            });
        }
        self.outputs = out;
    }

    /// Level of the alarm line; follows `S ≥ T` each poll.
    pub fn alarm_line(&self) -> bool {
        self.outputs.alarm
    }

    pub fn noise_line(&self) -> bool {
        self.outputs.noise
    }
}

impl Default for Sensor {
    fn default() -> Self {
        Self::new(MonitorConfig::default(), TrainingConfig::default())
    }
}
