use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::ptr;

use leakdet_ffi::*;

const SPRAY: &str = "seed = 1\nduration_s = 60.0\n[[source]]\nkind = \"leak_spray\"\nstart_s = 0.0\ndistance_m = 1.0\n";

fn new_device(toml: &str) -> (LdStatus, *mut LdDevice) {
    let text = CString::new(toml).unwrap();
    let mut dev = ptr::null_mut();
    let st = unsafe { ld_device_new(text.as_ptr(), 20, &mut dev) };
    (st, dev)
}

fn command(dev: *mut LdDevice, cmd: &[u8]) -> Vec<u8> {
    let mut buf = [0u8; 8];
    let mut len = 0usize;
    let st = unsafe { ld_device_command(dev, cmd.as_ptr(), cmd.len(), buf.as_mut_ptr(), buf.len(), &mut len) };
    assert_eq!(st, LdStatus::Ok);
    buf[..len].to_vec()
}

#[test]
fn resonator_reference() {
    let mut r = LdResonator::default();
    let st = unsafe { ld_resonator_design(3.9e-3, 3.2e-3, 3.5e-3, 1e-3, 1e-3, &mut r) };
    assert_eq!(st, LdStatus::Ok);
    assert!((r.f0_hz - 8909.0).abs() < 5.0);
    assert!((r.q - 33.09).abs() < 0.05);
    let st = unsafe { ld_resonator_design(-1.0, 3.2e-3, 3.5e-3, 1e-3, 1e-3, &mut r) };
    assert_eq!(st, LdStatus::InvalidArgument);
    let st = unsafe { ld_resonator_design(3.9e-3, 3.2e-3, 3.5e-3, 1e-3, 1e-3, ptr::null_mut()) };
    assert_eq!(st, LdStatus::NullPointer);
}

#[test]
fn band_energy_of_codes() {
    let mid = [2048u16; 256];
    let mut e = -1.0;
    assert_eq!(unsafe { ld_band_energy(mid.as_ptr(), 256, &mut e) }, LdStatus::Ok);
    assert_eq!(e, 0.0);
    // on-bin tone at bin 60, amplitude 100 codes: |X|^2 = (128 * 100)^2
    let tone: Vec<u16> = (0..256)
        .map(|n| (2048.0 + 100.0 * (2.0 * std::f64::consts::PI * 60.0 * n as f64 / 256.0).cos()).round() as u16)
        .collect();
    assert_eq!(unsafe { ld_band_energy(tone.as_ptr(), 256, &mut e) }, LdStatus::Ok);
    assert!((e / (12_800.0f64 * 12_800.0) - 1.0).abs() < 0.01);
    assert_eq!(unsafe { ld_band_energy(tone.as_ptr(), 255, &mut e) }, LdStatus::InvalidArgument);
}

#[test]
fn power_reference() {
    let mut p = LdPower::default();
    assert_eq!(unsafe { ld_average_power(2.0, 1.0, &mut p) }, LdStatus::Ok);
    assert!((p.avg_power_w - 82e-6).abs() < 1e-12);
    assert_eq!(unsafe { ld_average_power(0.5, 1.0, &mut p) }, LdStatus::InvalidArgument);
}

#[test]
fn device_alarms_and_answers_commands() {
    let (st, dev) = new_device(SPRAY);
    assert_eq!(st, LdStatus::Ok);
    assert_eq!(command(dev, &[0x01]), [0x04]);
    assert_eq!(unsafe { ld_device_advance(dev, 40.0) }, LdStatus::Ok);
    let (mut alarm, mut noise) = (false, false);
    assert_eq!(unsafe { ld_device_lines(dev, &mut alarm, &mut noise) }, LdStatus::Ok);
    assert!(alarm && !noise);
    let mut c = LdCounts::default();
    assert_eq!(unsafe { ld_device_counts(dev, &mut c) }, LdStatus::Ok);
    assert_eq!((c.quiet, c.leak, c.noise), (0, 20, 0));
    assert_eq!(command(dev, &[0x02]), [0, 20, 0]);
    assert_eq!(command(dev, &[0x11, 0x00]), [0xEE]);
    assert_eq!(command(dev, &[0x99]), [0xEF]);
    let mut t = 0.0;
    assert_eq!(unsafe { ld_device_time(dev, &mut t) }, LdStatus::Ok);
    assert_eq!(t, 40.0);
    unsafe { ld_device_free(dev) };
}

#[test]
fn small_response_buffer() {
    let (_, dev) = new_device(SPRAY);
    let mut buf = [0u8; 2];
    let mut len = 0;
    let st = unsafe { ld_device_command(dev, [0x02].as_ptr(), 1, buf.as_mut_ptr(), 2, &mut len) };
    assert_eq!(st, LdStatus::BufferTooSmall);
    assert_eq!(len, 3);
    unsafe { ld_device_free(dev) };
}

#[test]
fn bad_inputs() {
    let (st, dev) = new_device("seed = 1\nduration_s = 5.0\nvolume = 2\n");
    assert_eq!(st, LdStatus::Scenario);
    assert!(dev.is_null());
    let storm = "seed = 1\nduration_s = 10.0\n[[source]]\nkind = \"persistent_noise\"\nshape = \"broadband\"\nlevel_db = -15.0\nfluctuation_db = 30.0\ndistance_m = 1.0\n";
    let text = CString::new(storm).unwrap();
    let mut dev = ptr::null_mut();
    assert_eq!(unsafe { ld_device_new(text.as_ptr(), 2, &mut dev) }, LdStatus::TrainingFailed);
    assert_eq!(unsafe { ld_device_new(ptr::null(), 2, &mut dev) }, LdStatus::NullPointer);
    assert_eq!(unsafe { ld_device_advance(ptr::null_mut(), 1.0) }, LdStatus::NullPointer);
    unsafe { ld_device_free(ptr::null_mut()) };
    let msg = unsafe { CStr::from_ptr(ld_status_message(LdStatus::TrainingFailed as i32)) };
    assert_eq!(msg.to_str().unwrap(), "training did not converge");
    let msg = unsafe { CStr::from_ptr(ld_status_message(-4)) };
    assert_eq!(msg.to_str().unwrap(), "unknown status");
}

#[test]
fn header_is_current() {
    let h = std::fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/leakdet.h")).unwrap();
    for f in [
        "ld_status_message",
        "ld_resonator_design",
        "ld_band_energy",
        "ld_average_power",
        "ld_device_new",
        "ld_device_free",
        "ld_device_advance",
        "ld_device_time",
        "ld_device_command",
        "ld_device_lines",
        "ld_device_counts",
    ] {
        assert!(h.contains(&format!("{f}(")), "{f} missing from header");
    }
    assert!(h.contains("typedef struct LdDevice LdDevice;"));
    assert!(h.contains("LD_STATUS_TRAINING_FAILED = 5"));
}

/// Compiles and runs a C program against the static library when a C
/// compiler is on the path.
#[test]
fn c_program_links() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // target/<profile>/deps/c_abi-<hash> -> target/<profile>
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().unwrap().parent().unwrap();
    let lib = profile_dir.join("libleakdet_ffi.a");
    if !lib.exists() || std::process::Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no cc or static library");
        return;
    }
    let tmp = std::env::temp_dir().join(format!("leakdet_c_{}", std::process::id()));
    std::fs::create_dir_all(&tmp).unwrap();
    let src = tmp.join("main.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include "leakdet.h"
int main(void) {
    const char *toml = "seed = 1\nduration_s = 60.0\n[[source]]\nkind = \"leak_spray\"\nstart_s = 0.0\ndistance_m = 1.0\n";
    LdDevice *dev = NULL;
    if (ld_device_new(toml, 20, &dev) != LD_STATUS_OK) return 1;
    if (ld_device_advance(dev, 40.0) != LD_STATUS_OK) return 2;
    uint8_t cmd = 0x01, resp[4];
    size_t len = 0;
    if (ld_device_command(dev, &cmd, 1, resp, sizeof resp, &len) != LD_STATUS_OK) return 3;
    printf("%zu %02X\n", len, resp[0]);
    ld_device_free(dev);
    return 0;
}
"#,
    )
    .unwrap();
    let bin = tmp.join("main");
    let st = std::process::Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(dir.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(st.success());
    let out = std::process::Command::new(&bin).output().unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "1 05\n");
    let _ = std::fs::remove_dir_all(&tmp);
}
