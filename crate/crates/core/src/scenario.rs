//! Scenario files (TOML).
//!
//! ```toml
//! seed = 7
//! duration_s = 600.0
//! ambient_level_db = -35.0      # optional, -inf for silence
//!
//! [sensor]                       # optional defaults, CLI flags override
//! n = 20
//! tau_s = 2
//! t_alarm = 17
//! train_size = 30
//!
//! [[source]]
//! kind = "leak_spray"            # leak_spray | leak_jet | ambient | impulse | persistent_noise
//! level_db = -17.5               # optional for leaks (calibrated default)
//! shape = "flat_above_6khz"      # optional: flat_above_6khz | low_pass_jet | broadband | click
//! start_s = 0.0                  # optional, default -inf
//! end_s = 300.0                  # optional, default +inf
//! distance_m = 5.0
//! barriers_db = [22.7]           # optional
//! materials = ["gypsum_1.3cm"]   # optional, calibrated insertion losses
//! period_s = 0.5                 # impulse repetition, optional
//! fluctuation_db = 0.0           # per-acquisition level swing, optional
//! ```
//!
//! Unknown keys are rejected. Times are seconds relative to the start of
//! monitoring; power-on training runs at negative times.

use serde::Deserialize;

use crate::detector::{MonitorConfig, TrainingConfig};
use crate::error::{Error, Result};
use crate::synth::{
    jet_level_db, AcousticSource, Material, PropagationPath, Scenario, SourceKind, SpectralShape,
    AMBIENT_LEVEL_DB, FREE_SPACE_RANGE, SPRAY_LEVEL_DB,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorDefaults {
    pub n: Option<u16>,
    pub tau_s: Option<u16>,
    pub t_alarm: Option<u16>,
    pub train_size: Option<u16>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioFile {
    pub name: Option<String>,
    pub scenario: Scenario,
    pub sensor: SensorDefaults,
}

impl ScenarioFile {
    /// Monitor settings: explicit overrides, then the file's `[sensor]`
    /// table, then defaults. When N is given without T, T = ceil(0.85 N).
    pub fn monitor_config(&self, n: Option<u16>, tau_s: Option<u16>, t_alarm: Option<u16>) -> Result<MonitorConfig> {
        let d = MonitorConfig::default();
        let n_set = n.or(self.sensor.n);
        let n = n_set.unwrap_or(d.n);
        let tau = tau_s.or(self.sensor.tau_s).unwrap_or(d.tau_s);
        let t = t_alarm.or(self.sensor.t_alarm).unwrap_or_else(|| match n_set {
            Some(_) => (f64::from(n) * 0.85).ceil() as u16,
            None => d.t_alarm,
        });
        MonitorConfig::new(n, tau, t)
    }

    pub fn training_config(&self, set_size: Option<u16>) -> Result<TrainingConfig> {
        match set_size.or(self.sensor.train_size) {
            Some(k) => TrainingConfig::new(k),
            None => Ok(TrainingConfig::default()),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    name: Option<String>,
    seed: u64,
    duration_s: f64,
    #[serde(default = "default_ambient")]
    ambient_level_db: f64,
    #[serde(default)]
    sensor: SensorDefaults,
    #[serde(default)]
    source: Vec<SourceEntry>,
}

fn default_ambient() -> f64 {
    AMBIENT_LEVEL_DB
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
enum KindName {
    LeakSpray,
    LeakJet,
    Ambient,
    Impulse,
    PersistentNoise,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ShapeName {
    #[serde(rename = "flat_above_6khz")]
    FlatAbove6kHz,
    LowPassJet,
    Broadband,
    Click,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSource {
    kind: KindName,
    level_db: Option<f64>,
    shape: Option<ShapeName>,
    #[serde(default = "neg_inf")]
    start_s: f64,
    #[serde(default = "pos_inf")]
    end_s: f64,
    distance_m: f64,
    #[serde(default)]
    barriers_db: Vec<f64>,
    #[serde(default)]
    materials: Vec<String>,
    period_s: Option<f64>,
    #[serde(default)]
    fluctuation_db: f64,
}

fn neg_inf() -> f64 {
    f64::NEG_INFINITY
}

fn pos_inf() -> f64 {
    f64::INFINITY
}

/// A validated `[[source]]` table.
#[derive(Debug, Deserialize)]
#[serde(try_from = "RawSource")]
struct SourceEntry(AcousticSource, PropagationPath);

impl TryFrom<RawSource> for SourceEntry {
    type Error = String;

    fn try_from(r: RawSource) -> std::result::Result<Self, String> {
        let kind = match r.kind {
            KindName::LeakSpray => SourceKind::LeakSpray,
            KindName::LeakJet => SourceKind::LeakJet,
            KindName::Ambient => SourceKind::Ambient,
            KindName::Impulse => SourceKind::Impulse,
            KindName::PersistentNoise => SourceKind::PersistentNoise,
        };
        let level_db = match (r.level_db, kind) {
            (Some(l), _) => l,
            (None, SourceKind::LeakSpray) => SPRAY_LEVEL_DB,
            (None, SourceKind::LeakJet) => jet_level_db(),
            (None, _) => return Err("level_db: required for this source kind".into()),
        };
        let shape = r.shape.map_or(kind.default_shape(), |s| match s {
            ShapeName::FlatAbove6kHz => SpectralShape::FlatAbove6kHz,
            ShapeName::LowPassJet => SpectralShape::LowPassJet,
            ShapeName::Broadband => SpectralShape::Broadband,
            ShapeName::Click => SpectralShape::Click,
        });
        let source = AcousticSource {
            kind,
            level_db,
            shape,
            start_s: r.start_s,
            end_s: r.end_s,
            period_s: r.period_s,
            fluctuation_db: r.fluctuation_db,
        };
        source.validate().map_err(|e| e.to_string())?;
        let mut losses = r.barriers_db;
        for m in &r.materials {
            let mat = Material::from_name(m).ok_or_else(|| format!("materials: unknown material `{m}`"))?;
            losses.push(mat.insertion_loss_db(FREE_SPACE_RANGE).map_err(|e| e.to_string())?);
        }
        let path = PropagationPath {
            distance_m: r.distance_m,
            barrier_losses_db: losses,
        };
        path.validate().map_err(|e| e.to_string())?;
        Ok(SourceEntry(source, path))
    }
}

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<ScenarioFile> {
    let raw: RawFile = toml::from_str(text).map_err(|e| Error::Scenario(e.to_string()))?;
    let scenario = Scenario {
        sources: raw.source.into_iter().map(|SourceEntry(s, p)| (s, p)).collect(),
        duration_s: raw.duration_s,
        seed: raw.seed,
        ambient_level_db: raw.ambient_level_db,
    };
    scenario.validate()?;
    Ok(ScenarioFile {
        name: raw.name,
        scenario,
        sensor: raw.sensor,
    })
}

pub fn load_scenario(path: &std::path::Path) -> Result<ScenarioFile> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Scenario(format!("{}: {e}", path.display())))?;
    parse_scenario(&text).map_err(|e| match e {
        Error::Scenario(m) => Error::Scenario(format!("{}: {m}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SPRAY: &str = r#"
seed = 3
duration_s = 100.0

[sensor]
n = 20
tau_s = 2

[[source]]
kind = "leak_spray"
start_s = 0.0
distance_m = 5.0
materials = ["gypsum_1.3cm"]
"#;

    #[test]
    fn parses_minimal_file() {
        let f = parse_scenario(SPRAY).unwrap();
        assert_eq!(f.scenario.seed, 3);
        assert_eq!(f.sensor.n, Some(20));
        assert_eq!(f.sensor.t_alarm, None);
        let (src, path) = &f.scenario.sources[0];
        assert_eq!(src.level_db, SPRAY_LEVEL_DB);
        assert_eq!(src.shape, SpectralShape::FlatAbove6kHz);
        assert_eq!(src.end_s, f64::INFINITY);
        assert!((path.barrier_losses_db[0] - 23.89).abs() < 0.01);
        assert_eq!(f.scenario.ambient_level_db, AMBIENT_LEVEL_DB);
    }

    #[test]
    fn sensor_defaults_resolve() {
        let f = parse_scenario(SPRAY).unwrap();
        let m = f.monitor_config(None, None, None).unwrap();
        assert_eq!((m.n, m.tau_s, m.t_alarm), (20, 2, 17));
        let m = f.monitor_config(Some(40), None, None).unwrap();
        assert_eq!(m.t_alarm, 34);
        assert!(f.monitor_config(Some(20), None, Some(21)).is_err());
        assert_eq!(f.training_config(None).unwrap().set_size, 30);
        assert!(f.training_config(Some(5)).is_err());
    }

    #[test]
    fn unknown_key_names_key_and_line() {
        let text = SPRAY.replace("distance_m = 5.0", "distance_m = 5.0\nvolume = 3");
        let msg = parse_scenario(&text).unwrap_err().to_string();
        assert!(msg.contains("volume"), "{msg}");
        assert!(msg.contains("line 13"), "{msg}");
    }

    #[test]
    fn semantic_error_names_key_and_line() {
        let text = SPRAY.replace("distance_m = 5.0", "distance_m = 0.05");
        let msg = parse_scenario(&text).unwrap_err().to_string();
        assert!(msg.contains("distance_m"), "{msg}");
        assert!(msg.contains("line"), "{msg}");
    }

    #[test]
    fn level_required_for_noise_sources() {
        let text = "seed = 1\nduration_s = 5.0\n[[source]]\nkind = \"impulse\"\ndistance_m = 1.0\n";
        let msg = parse_scenario(text).unwrap_err().to_string();
        assert!(msg.contains("level_db"), "{msg}");
    }

    #[test]
    fn silence_and_bad_kind() {
        let f = parse_scenario("seed = 1\nduration_s = 5.0\nambient_level_db = -inf\n").unwrap();
        assert_eq!(f.scenario.ambient_level_db, f64::NEG_INFINITY);
        let msg = parse_scenario("seed = 1\nduration_s = 5.0\n[[source]]\nkind = \"dog\"\ndistance_m = 1.0\n")
            .unwrap_err()
            .to_string();
        assert!(msg.contains("dog"), "{msg}");
    }
}
