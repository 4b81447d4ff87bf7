use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_leakdet"))
}

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn run(name: &str, out: &std::path::Path, extra: &[&str]) -> Output {
    bin()
        .arg("run")
        .arg(scenario(name))
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn verdict(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).trim().to_string()
}

#[test]
fn quiet_is_quiet() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("quiet.scn", dir.path(), &[]);
    assert!(o.status.success());
    assert_eq!(verdict(&o), "QUIET");
    let tl = std::fs::read_to_string(dir.path().join("timeline.csv")).unwrap();
    assert!(tl.starts_with("time_s,event,q,s,r,alarm,noise\n"));
    assert!(tl.lines().skip(1).all(|l| l.ends_with(",0,0")));
    let pw = std::fs::read_to_string(dir.path().join("power.csv")).unwrap();
    assert!(pw.starts_with("tau_s,acq_per_poll,avg_power_uW,sleep_fraction,lifetime_years\n"));
}

#[test]
fn spray_5m_alarms_within_50s() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("spray_5m.scn", dir.path(), &[]);
    assert!(o.status.success());
    let v = verdict(&o);
    let t: f64 = v.strip_prefix("ALARM t=").expect(&v).parse().unwrap();
    assert!(t <= 50.0, "{v}");
}

#[test]
fn faucet_never_alarms() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("faucet_20min.scn", dir.path(), &[]);
    assert!(o.status.success());
    let v = verdict(&o);
    assert!(v == "QUIET" || v.starts_with("NOISE"), "{v}");
}

#[test]
fn break_in_raises_noise() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("break_in.scn", dir.path(), &[]);
    assert!(verdict(&o).starts_with("NOISE"), "{}", verdict(&o));
}

#[test]
fn outputs_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        assert!(run("spray_10m.scn", d.path(), &["--seed", "9"]).status.success());
    }
    for f in ["timeline.csv", "power.csv"] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
    let sweep = || bin().args(["sweep", "standoff", "--source", "jet"]).output().unwrap().stdout;
    assert_eq!(sweep(), sweep());
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = run("quiet.scn", dir.path(), &["--n", "20", "--t-alarm", "30"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run("quiet.scn", dir.path(), &["--tau", "31"]);
    assert_eq!(o.status.code(), Some(2));

    let bad = dir.path().join("bad.scn");
    std::fs::write(&bad, "seed = 1\nduration_s = 10.0\nloudness = 3\n").unwrap();
    let o = bin().arg("run").arg(&bad).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("loudness") && err.contains("line 3"), "{err}");
}

#[test]
fn unstable_background_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    // no start_s: the noise is already running while the sensor trains
    let sc = dir.path().join("storm.scn");
    std::fs::write(
        &sc,
        "seed = 1\nduration_s = 10.0\n[[source]]\nkind = \"persistent_noise\"\nshape = \"broadband\"\nlevel_db = -15.0\nfluctuation_db = 30.0\ndistance_m = 1.0\n",
    )
    .unwrap();
    let o = bin()
        .arg("run")
        .arg(&sc)
        .args(["--max-training-sessions", "2", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn missing_file_is_config_error() {
    let o = bin().args(["run", "/nonexistent.scn"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn host_trace() {
    let mut child = bin()
        .args(["host", "--scenario"])
        .arg(scenario("spray_1m.scn"))
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(b"01\n02 # counts\n11 05\n11 1F\n42\nwait 40\n01\n02\n")
        .unwrap();
    let out = child.wait_with_output().unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(&lines[..10], &[
        "> 01", "< 04", "> 02", "< 14 00 00", "> 11 05", "< 00", "> 11 1F", "< EE", "> 42", "< EF",
    ]);
    assert_eq!(&lines[10..], &["# t=32.000 Alarm rising", "> 01", "< 05", "> 02", "< 00 14 00"]);
}

#[test]
fn freq_response_and_spectrum() {
    let o = bin().args(["freq-response", "--chain", "analog", "--step", "1000"]).output().unwrap();
    let t = String::from_utf8(o.stdout).unwrap();
    assert!(t.starts_with("frequency_hz,magnitude_db\n"));
    let o = bin().arg("spectrum").arg(scenario("quiet.scn")).output().unwrap();
    let t = String::from_utf8(o.stdout).unwrap();
    assert_eq!(t.lines().count(), 130);
}
