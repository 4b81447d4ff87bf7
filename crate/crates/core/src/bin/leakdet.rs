//! Command-line front end for the leak sensor model.
//!
//! Exit codes: 0 success, 2 configuration or usage error, 3 training did
//! not converge, 4 I/O error.

use std::fs::File;
use std::io::{self, BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use leakdet::detector::{MonitorConfig, TrainingConfig};
use leakdet::dsp::{capture, fft256, write_spectrum, Frame};
use leakdet::frontend::{
    design_resonator, write_frequency_response, AdcModel, AnalogChain, ChainSelect, Frontend,
    ResonatorGeometry,
};
use leakdet::power::{power_sweep, simulate_energy, write_power_rows, PowerParams};
use leakdet::protocol::{handle_command, CommandFrame, Transaction};
use leakdet::scenario::load_scenario;
use leakdet::sim::{write_timeline, Device, Verdict};
use leakdet::sweep::{material_sweep, standoff_range, write_materials, write_standoff, LeakKind, SweepConfig};
use leakdet::synth::Scenario;
use leakdet::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_TRAINING: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(name = "leakdet", version, about = "Standoff acoustic leak sensor simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train, then monitor a scenario; writes timeline.csv and power.csv.
    Run {
        file: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        n: Option<u16>,
        #[arg(long)]
        tau: Option<u16>,
        #[arg(long = "t-alarm")]
        t_alarm: Option<u16>,
        #[arg(long = "train-size")]
        train_size: Option<u16>,
        /// Monitoring time, s (defaults to the scenario duration).
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Give up after this many unstable training sets.
        #[arg(long = "max-training-sessions", default_value_t = 20)]
        max_training_sessions: u32,
    },
    /// Calibration sweeps; CSV on stdout, summary on stderr.
    Sweep {
        kind: SweepKind,
        #[arg(long, value_enum, default_value = "spray")]
        source: SourceArg,
        #[arg(long, default_value_t = 3)]
        seeds: u32,
        #[arg(long = "base-seed", default_value_t = 1)]
        base_seed: u64,
    },
    /// Magnitude response of the front end as CSV.
    FreqResponse {
        #[arg(long, value_enum, default_value = "full")]
        chain: ChainArg,
        #[arg(long, default_value_t = 50.0)]
        step: f64,
        /// Use the lossless geometric Q instead of the loaded in-situ Q.
        #[arg(long = "design-q")]
        design_q: bool,
    },
    /// One-sided spectrum of the frame captured at `--t`.
    Spectrum {
        file: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        t: f64,
    },
    /// Host-controller emulator: reads hex commands and `wait <s>` lines
    /// from stdin, prints the transaction trace.
    Host {
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepKind {
    Standoff,
    Material,
    Power,
}

#[derive(Clone, Copy, ValueEnum)]
enum SourceArg {
    Spray,
    Jet,
}

#[derive(Clone, Copy, ValueEnum)]
enum ChainArg {
    Full,
    Analog,
    Resonator,
}

enum Failure {
    Config(String),
    Training(String),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::TrainingFailed { .. } => Failure::Training(e.to_string()),
            other => Failure::Config(other.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.cmd {
        Cmd::Run {
            file,
            seed,
            n,
            tau,
            t_alarm,
            train_size,
            duration,
            out,
            max_training_sessions,
        } => run(&file, seed, n, tau, t_alarm, train_size, duration, &out, max_training_sessions),
        Cmd::Sweep {
            kind,
            source,
            seeds,
            base_seed,
        } => sweep(kind, source, seeds, base_seed),
        Cmd::FreqResponse { chain, step, design_q } => freq_response(chain, step, design_q),
        Cmd::Spectrum { file, t } => spectrum(&file, t),
        Cmd::Host { scenario } => host(scenario.as_deref()),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Training(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_TRAINING)
        }
        Err(Failure::Io(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_IO)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn run(
    file: &Path,
    seed: Option<u64>,
    n: Option<u16>,
    tau: Option<u16>,
    t_alarm: Option<u16>,
    train_size: Option<u16>,
    duration: Option<f64>,
    out: &Path,
    max_sessions: u32,
) -> Result<(), Failure> {
    let mut sf = load_scenario(file)?;
    if let Some(s) = seed {
        sf.scenario.seed = s;
    }
    let monitor = sf.monitor_config(n, tau, t_alarm)?;
    let training = sf.training_config(train_size)?;
    let duration = duration.unwrap_or(sf.scenario.duration_s);
    if !(duration > 0.0) {
        return Err(Failure::Config("--duration must be positive".into()));
    }
    let mut dev = Device::power_on(Frontend::reference(), sf.scenario, monitor, training, Some(max_sessions))?;
    dev.advance(duration)?;

    std::fs::create_dir_all(out)?;
    write_timeline(&dev.timeline, BufWriter::new(File::create(out.join("timeline.csv"))?))?;
    let tau_s = f64::from(monitor.tau_s);
    let report = simulate_energy(&dev.timeline, tau_s, &PowerParams::default())?;
    let acq = dev.timeline.iter().map(|r| f64::from(r.acquisitions)).sum::<f64>() / dev.timeline.len() as f64;
    write_power_rows(&[(tau_s, acq, report)], BufWriter::new(File::create(out.join("power.csv"))?))?;

    let verdict = Verdict::from_timeline(&dev.timeline);
    println!("{}", verdict.line());
    Ok(())
}

fn sweep(kind: SweepKind, source: SourceArg, seeds: u32, base_seed: u64) -> Result<(), Failure> {
    if seeds == 0 {
        return Err(Failure::Config("--seeds must be at least 1".into()));
    }
    let fe = Frontend::reference();
    let cfg = SweepConfig {
        seeds,
        base_seed,
        ..SweepConfig::default()
    };
    let stdout = io::stdout();
    match kind {
        SweepKind::Standoff => {
            let kind = match source {
                SourceArg::Spray => LeakKind::Spray,
                SourceArg::Jet => LeakKind::Jet,
            };
            let res = standoff_range(&fe, &cfg, kind);
            write_standoff(kind, &res, stdout.lock())?;
            eprintln!("{} range_m={:.2}", kind.name(), res.range_m);
        }
        SweepKind::Material => {
            let free = standoff_range(&fe, &cfg, LeakKind::Spray).range_m;
            eprintln!("spray range_m={free:.2}");
            let rows = material_sweep(&fe, &cfg, free)?;
            write_materials(&rows, stdout.lock())?;
        }
        SweepKind::Power => {
            let p = PowerParams::default();
            let mut rows = power_sweep(&p, 1.0)?;
            rows.extend(power_sweep(&p, 5.0)?);
            write_power_rows(&rows, stdout.lock())?;
        }
    }
    Ok(())
}

fn freq_response(chain: ChainArg, step: f64, design_q: bool) -> Result<(), Failure> {
    if !(step > 0.0) {
        return Err(Failure::Config("--step must be positive".into()));
    }
    let fe = if design_q {
        let design = design_resonator(&ResonatorGeometry::reference())?;
        Frontend::new(design, AnalogChain::default(), AdcModel::default())?
    } else {
        Frontend::reference()
    };
    let which = match chain {
        ChainArg::Full => ChainSelect::Full,
        ChainArg::Analog => ChainSelect::Analog,
        ChainArg::Resonator => ChainSelect::Resonator,
    };
    write_frequency_response(&fe, which, step, io::stdout().lock())?;
    Ok(())
}

fn spectrum(file: &Path, t: f64) -> Result<(), Failure> {
    let sf = load_scenario(file)?;
    let fe = Frontend::reference();
    let adc = capture(&fe, &sf.scenario, t);
    if adc.overload {
        eprintln!("warning: frame at t={t} overloads the converter");
    }
    let frame = Frame::from_codes(&adc.codes, t)?;
    write_spectrum(&fft256(&frame)?, io::stdout().lock())?;
    Ok(())
}

fn host(scenario: Option<&Path>) -> Result<(), Failure> {
    let (sc, sensor) = match scenario {
        Some(p) => {
            let sf = load_scenario(p)?;
            let monitor = sf.monitor_config(None, None, None)?;
            let training = sf.training_config(None)?;
            (sf.scenario, (monitor, training))
        }
        None => (Scenario::quiet(1, 3600.0), (MonitorConfig::default(), TrainingConfig::default())),
    };
    let mut dev = Device::power_on(Frontend::reference(), sc, sensor.0, sensor.1, Some(20))?;
    let stdout = io::stdout();
    let mut out = stdout.lock();
    for (lineno, line) in io::stdin().lock().lines().enumerate() {
        let line = line?;
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("wait") {
            let dt: f64 = rest
                .trim()
                .parse()
                .map_err(|_| Failure::Config(format!("line {}: bad wait `{line}`", lineno + 1)))?;
            let seen = dev.edges().len();
            dev.advance(dt)?;
            for e in &dev.edges()[seen..] {
                writeln!(
                    out,
                    "# t={:.3} {:?} {}",
                    e.t,
                    e.line,
                    if e.rising { "rising" } else { "falling" }
                )?;
            }
            continue;
        }
        let frame = CommandFrame::parse_hex(line)
            .ok_or_else(|| Failure::Config(format!("line {}: bad command `{line}`", lineno + 1)))?;
        let response = handle_command(&mut dev.sensor, &frame, dev.now);
        writeln!(out, "{}", Transaction { command: frame, response })?;
    }
    Ok(())
}
