//! C ABI over the leakdet simulator.
//!
//! Every function returns an [`LdStatus`]; results come back through out
//! pointers. A device is an opaque heap object owned by the caller between
//! `ld_device_new` and `ld_device_free`. Panics never cross the boundary.

use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};

use leakdet::dsp::{fft256, spectral_energy, Frame};
use leakdet::frontend::{design_resonator, Frontend, ResonatorGeometry, SPEED_OF_SOUND};
use leakdet::power::{average_power, PowerParams};
use leakdet::protocol::{handle_command, CommandFrame};
use leakdet::scenario::parse_scenario;
use leakdet::sim::Device;
use leakdet::{Error, FRAME_LEN};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidUtf8 = 3,
    Scenario = 4,
    TrainingFailed = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

impl From<Error> for LdStatus {
    fn from(e: Error) -> Self {
        match e {
            Error::Scenario(_) => LdStatus::Scenario,
            Error::TrainingFailed { .. } => LdStatus::TrainingFailed,
            _ => LdStatus::InvalidArgument,
        }
    }
}

/// Opaque simulated device.
pub struct LdDevice {
    dev: Device,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LdResonator {
    pub f0_hz: f64,
    pub q: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LdPower {
    pub avg_power_w: f64,
    pub sleep_fraction: f64,
    pub lifetime_years: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LdCounts {
    pub quiet: u16,
    pub leak: u16,
    pub noise: u16,
}

fn guard(f: impl FnOnce() -> Result<(), LdStatus>) -> LdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LdStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => LdStatus::Panic,
    }
}

unsafe fn out<'a, T>(p: *mut T) -> Result<&'a mut T, LdStatus> {
    p.as_mut().ok_or(LdStatus::NullPointer)
}

unsafe fn handle<'a>(p: *mut LdDevice) -> Result<&'a mut Device, LdStatus> {
    p.as_mut().map(|d| &mut d.dev).ok_or(LdStatus::NullPointer)
}

/// Static, NUL-terminated description of a status code. Takes a plain
/// integer so unknown codes from C are safe.
#[no_mangle]
pub extern "C" fn ld_status_message(status: i32) -> *const c_char {
    let s: &'static CStr = match status {
        0 => c"ok",
        1 => c"null pointer argument",
        2 => c"argument out of range",
        3 => c"string is not valid UTF-8",
        4 => c"scenario document rejected",
        5 => c"training did not converge",
        6 => c"response buffer too small",
        7 => c"internal error",
        _ => c"unknown status",
    };
    s.as_ptr()
}

/// Resonator frequency and Q from cavity and neck dimensions in metres.
///
/// # Safety
/// `result` must be null or point to writable memory for one `LdResonator`.
#[no_mangle]
pub unsafe extern "C" fn ld_resonator_design(
    length_m: f64,
    width_m: f64,
    height_m: f64,
    hole_radius_m: f64,
    wall_thickness_m: f64,
    result: *mut LdResonator,
) -> LdStatus {
    guard(|| {
        let result = out(result)?;
        let g = ResonatorGeometry {
            length: length_m,
            width: width_m,
            height: height_m,
            hole_radius: hole_radius_m,
            wall_thickness: wall_thickness_m,
            speed_of_sound: SPEED_OF_SOUND,
        };
        let r = design_resonator(&g)?;
        *result = LdResonator { f0_hz: r.f0, q: r.q };
        Ok(())
    })
}

/// Band energy of one frame of 256 converter codes.
///
/// # Safety
/// `codes` must point to `len` readable values; `result` to one `double`.
#[no_mangle]
pub unsafe extern "C" fn ld_band_energy(codes: *const u16, len: usize, result: *mut f64) -> LdStatus {
    guard(|| {
        let result = out(result)?;
        if codes.is_null() {
            return Err(LdStatus::NullPointer);
        }
        if len != FRAME_LEN {
            return Err(LdStatus::InvalidArgument);
        }
        let codes = std::slice::from_raw_parts(codes, len);
        let frame = Frame::from_codes(codes, 0.0)?;
        *result = spectral_energy(&fft256(&frame)?).0;
        Ok(())
    })
}

/// Average power with default battery and acquisition constants.
///
/// # Safety
/// `result` must be null or point to one writable `LdPower`.
#[no_mangle]
pub unsafe extern "C" fn ld_average_power(tau_s: f64, acq_per_poll: f64, result: *mut LdPower) -> LdStatus {
    guard(|| {
        let result = out(result)?;
        let r = average_power(&PowerParams::default(), tau_s, acq_per_poll)?;
        *result = LdPower {
            avg_power_w: r.avg_power_w,
            sleep_fraction: r.sleep_fraction,
            lifetime_years: r.lifetime_years(),
        };
        Ok(())
    })
}

/// Parses a TOML scenario, powers the device on and trains it. Monitoring
/// starts at t = 0. `max_training_sessions` of 0 means no cap.
///
/// # Safety
/// `scenario_toml` must be a NUL-terminated string; `device_out` must
/// point to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn ld_device_new(
    scenario_toml: *const c_char,
    max_training_sessions: u32,
    device_out: *mut *mut LdDevice,
) -> LdStatus {
    guard(|| {
        let slot = out(device_out)?;
        *slot = std::ptr::null_mut();
        if scenario_toml.is_null() {
            return Err(LdStatus::NullPointer);
        }
        let text = CStr::from_ptr(scenario_toml).to_str().map_err(|_| LdStatus::InvalidUtf8)?;
        let sf = parse_scenario(text)?;
        let monitor = sf.monitor_config(None, None, None)?;
        let training = sf.training_config(None)?;
        let cap = (max_training_sessions > 0).then_some(max_training_sessions);
        let dev = Device::power_on(Frontend::reference(), sf.scenario, monitor, training, cap)?;
        *slot = Box::into_raw(Box::new(LdDevice { dev }));
        Ok(())
    })
}

/// Releases a device. Null is ignored.
///
/// # Safety
/// `device` must come from `ld_device_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ld_device_free(device: *mut LdDevice) {
    if !device.is_null() {
        drop(Box::from_raw(device));
    }
}

/// Runs the device forward by `dt_s` seconds of simulated time.
///
/// # Safety
/// `device` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ld_device_advance(device: *mut LdDevice, dt_s: f64) -> LdStatus {
    guard(|| {
        let dev = handle(device)?;
        if !(dt_s >= 0.0 && dt_s.is_finite()) {
            return Err(LdStatus::InvalidArgument);
        }
        dev.advance(dt_s)?;
        Ok(())
    })
}

/// Simulated time since monitor start, s.
///
/// # Safety
/// `device` must be a live handle and `result` writable.
#[no_mangle]
pub unsafe extern "C" fn ld_device_time(device: *mut LdDevice, result: *mut f64) -> LdStatus {
    guard(|| {
        *out(result)? = handle(device)?.now;
        Ok(())
    })
}

/// Executes one host command (opcode then payload bytes). The response is
/// written to `response` and its length to `response_len`.
///
/// # Safety
/// `command` must point to `command_len` bytes, `response` to
/// `response_cap` writable bytes, `response_len` to one `size_t`.
#[no_mangle]
pub unsafe extern "C" fn ld_device_command(
    device: *mut LdDevice,
    command: *const u8,
    command_len: usize,
    response: *mut u8,
    response_cap: usize,
    response_len: *mut usize,
) -> LdStatus {
    guard(|| {
        let dev = handle(device)?;
        let len_out = out(response_len)?;
        if command.is_null() || response.is_null() {
            return Err(LdStatus::NullPointer);
        }
        let bytes = std::slice::from_raw_parts(command, command_len);
        let (&opcode, payload) = bytes.split_first().ok_or(LdStatus::InvalidArgument)?;
        let now = dev.now;
        let resp = handle_command(&mut dev.sensor, &CommandFrame::new(opcode, payload), now);
        *len_out = resp.len();
        if resp.len() > response_cap {
            return Err(LdStatus::BufferTooSmall);
        }
        std::ptr::copy_nonoverlapping(resp.as_ptr(), response, resp.len());
        Ok(())
    })
}

/// Levels of the alarm and noise lines.
///
/// # Safety
/// `device` must be a live handle; `alarm` and `noise` writable.
#[no_mangle]
pub unsafe extern "C" fn ld_device_lines(device: *mut LdDevice, alarm: *mut bool, noise: *mut bool) -> LdStatus {
    guard(|| {
        let dev = handle(device)?;
        *out(alarm)? = dev.sensor.alarm_line();
        *out(noise)? = dev.sensor.noise_line();
        Ok(())
    })
}

/// Current Q, S, R window counts.
///
/// # Safety
/// `device` must be a live handle and `result` writable.
#[no_mangle]
pub unsafe extern "C" fn ld_device_counts(device: *mut LdDevice, result: *mut LdCounts) -> LdStatus {
    guard(|| {
        let (quiet, leak, noise) = handle(device)?.sensor.arrays.counts();
        *out(result)? = LdCounts { quiet, leak, noise };
        Ok(())
    })
}
