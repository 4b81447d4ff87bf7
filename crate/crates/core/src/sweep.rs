//! Detection-range sweeps.
//!
//! A distance counts as detected when at least two thirds of the seeds
//! alarm within `1.5 N τ` of monitor start. The range is found by bisection
//! between a detected and an undetected distance.

use std::io::Write;

use rayon::prelude::*;

use crate::detector::{MonitorConfig, TrainingConfig};
use crate::error::Result;
use crate::frontend::Frontend;
use crate::sim::Device;
use crate::synth::{AcousticSource, Material, PropagationPath, Scenario, SOURCE_SETBACK};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeakKind {
    Spray,
    Jet,
}

impl LeakKind {
    pub fn source(self) -> AcousticSource {
        match self {
            LeakKind::Spray => AcousticSource::spray(),
            LeakKind::Jet => AcousticSource::jet(),
        }
        .with_interval(0.0, f64::INFINITY)
    }

    pub fn name(self) -> &'static str {
        match self {
            LeakKind::Spray => "spray",
            LeakKind::Jet => "jet",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub monitor: MonitorConfig,
    pub training: TrainingConfig,
    pub seeds: u32,
    pub base_seed: u64,
    /// Bisection stops when the bracket is this narrow, m.
    pub resolution_m: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            monitor: MonitorConfig::default(),
            training: TrainingConfig::default(),
            seeds: 3,
            base_seed: 1,
            resolution_m: 0.25,
        }
    }
}

impl SweepConfig {
    fn required(&self) -> u32 {
        (2 * self.seeds).div_ceil(3)
    }

    fn horizon(&self) -> f64 {
        1.5 * self.monitor.window_s()
    }
}

/// Evaluation of one distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Probe {
    pub distance_m: f64,
    pub alarms: u32,
    pub seeds: u32,
    pub detected: bool,
}

/// Whether `seed`'s run alarms within the sweep horizon.
fn alarms(fe: &Frontend, cfg: &SweepConfig, source: &AcousticSource, path: &PropagationPath, seed: u64) -> bool {
    let horizon = cfg.horizon();
    let sc = Scenario::quiet(seed, horizon).with_source(source.clone(), path.clone());
    let Ok(mut dev) = Device::power_on(fe.clone(), sc, cfg.monitor, cfg.training, Some(50)) else {
        return false;
    };
    dev.advance(horizon).is_ok() && dev.timeline.iter().any(|r| r.alarm)
}

pub fn probe(fe: &Frontend, cfg: &SweepConfig, source: &AcousticSource, path: &PropagationPath) -> Probe {
    let n = (0..cfg.seeds)
        .into_par_iter()
        .filter(|&i| alarms(fe, cfg, source, path, cfg.base_seed + u64::from(i)))
        .count() as u32;
    Probe {
        distance_m: path.distance_m,
        alarms: n,
        seeds: cfg.seeds,
        detected: n >= cfg.required(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RangeResult {
    pub range_m: f64,
    pub probes: Vec<Probe>,
}

/// Bisects `make_path(d)` over `[lo, hi]`; `lo` must be detected.
fn bisect<F>(fe: &Frontend, cfg: &SweepConfig, source: &AcousticSource, mut lo: f64, mut hi: f64, make_path: F) -> RangeResult
where
    F: Fn(f64) -> PropagationPath,
{
    let mut probes = Vec::new();
    let first = probe(fe, cfg, source, &make_path(lo));
    probes.push(first);
    if !first.detected {
        return RangeResult {
            range_m: 0.0,
            probes,
        };
    }
    let top = probe(fe, cfg, source, &make_path(hi));
    probes.push(top);
    if top.detected {
        return RangeResult { range_m: hi, probes };
    }
    while hi - lo > cfg.resolution_m {
        let mid = 0.5 * (lo + hi);
        let p = probe(fe, cfg, source, &make_path(mid));
        probes.push(p);
        if p.detected {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    probes.sort_by(|a, b| a.distance_m.total_cmp(&b.distance_m));
    RangeResult { range_m: lo, probes }
}

/// Maximum free-space distance at which `kind` is detected.
pub fn standoff_range(fe: &Frontend, cfg: &SweepConfig, kind: LeakKind) -> RangeResult {
    bisect(fe, cfg, &kind.source(), 1.0, 40.0, PropagationPath::free)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaterialResult {
    pub material: Material,
    pub insertion_loss_db: f64,
    /// Detection distance from the board surface, m.
    pub detection_m: f64,
}

/// Detection distance from the board for every material. Insertion losses
/// are calibrated against the measured free-space range.
pub fn material_sweep(fe: &Frontend, cfg: &SweepConfig, free_space_range_m: f64) -> Result<Vec<MaterialResult>> {
    let source = LeakKind::Spray.source();
    let fine = SweepConfig {
        resolution_m: cfg.resolution_m.min(0.01),
        ..cfg.clone()
    };
    Material::ALL
        .iter()
        .map(|&m| {
            let loss = m.insertion_loss_db(free_space_range_m)?;
            let res = bisect(fe, &fine, &source, 0.0, 3.0, |d| PropagationPath {
                distance_m: d + SOURCE_SETBACK,
                barrier_losses_db: vec![loss],
            });
            Ok(MaterialResult {
                material: m,
                insertion_loss_db: loss,
                detection_m: res.range_m,
            })
        })
        .collect()
}

pub const STANDOFF_HEADER: [&str; 5] = ["source", "distance_m", "alarms", "seeds", "detected"];

pub fn write_standoff<W: Write>(kind: LeakKind, res: &RangeResult, out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(STANDOFF_HEADER)?;
    for p in &res.probes {
        w.write_record([
            kind.name().to_string(),
            format!("{:.4}", p.distance_m),
            p.alarms.to_string(),
            p.seeds.to_string(),
            u8::from(p.detected).to_string(),
        ])?;
    }
    w.flush()
}

pub const MATERIAL_HEADER: [&str; 5] = [
    "material",
    "insertion_loss_db",
    "detection_m",
    "measured_min_m",
    "measured_max_m",
];

pub fn write_materials<W: Write>(rows: &[MaterialResult], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(MATERIAL_HEADER)?;
    for r in rows {
        let (lo, hi) = r.material.detection_range_m();
        w.write_record([
            r.material.name().to_string(),
            format!("{:.2}", r.insertion_loss_db),
            format!("{:.3}", r.detection_m),
            format!("{lo:.2}"),
            format!("{hi:.2}"),
        ])?;
    }
    w.flush()
}
