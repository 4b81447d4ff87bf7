//! Register-style command set seen by the host controller.
//!
//! | opcode | name           | payload | response            |
//! |--------|----------------|---------|---------------------|
//! | `0x01` | READ_STATUS    | -       | status byte         |
//! | `0x02` | READ_COUNTS    | -       | Q, S, R             |
//! | `0x10` | SET_N          | 10..=255 | `0x00`             |
//! | `0x11` | SET_TAU        | 1..=30  | `0x00`              |
//! | `0x12` | SET_T          | 1..=N   | `0x00`              |
//! | `0x13` | SET_TRAINSIZE  | 10..=255 | `0x00`             |
//! | `0x20` | START_TRAINING | -       | `0x00`              |
//! | `0x21` | SOFT_RESET     | -       | `0x00`              |
//!
//! A bad payload answers `0xEE` and leaves the state untouched; an unknown
//! opcode answers `0xEF`. Configuration writes land in the pending set and
//! take effect at the next START_TRAINING.

use std::fmt;

use crate::detector::{
    Mode, MonitorConfig, Sensor, TrainingConfig, SET_SIZE_RANGE, TAU_RANGE,
};

pub const READ_STATUS: u8 = 0x01;
pub const READ_COUNTS: u8 = 0x02;
pub const SET_N: u8 = 0x10;
pub const SET_TAU: u8 = 0x11;
pub const SET_T: u8 = 0x12;
pub const SET_TRAINSIZE: u8 = 0x13;
pub const START_TRAINING: u8 = 0x20;
pub const SOFT_RESET: u8 = 0x21;

pub const ACK: u8 = 0x00;
pub const ERR_RANGE: u8 = 0xEE;
pub const ERR_OPCODE: u8 = 0xEF;

/// Bit layout of the status register.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StatusByte {
    pub alarm: bool,
    pub noise: bool,
    pub monitoring: bool,
    pub training: bool,
}

impl StatusByte {
    pub const ALARM: u8 = 1 << 0;
    pub const NOISE: u8 = 1 << 1;
    pub const MONITORING: u8 = 1 << 2;
    pub const TRAINING: u8 = 1 << 3;

    pub fn of(sensor: &Sensor) -> Self {
        Self {
            alarm: sensor.outputs.alarm,
            noise: sensor.outputs.noise,
            monitoring: sensor.mode == Mode::Monitoring,
            training: sensor.mode == Mode::Training,
        }
    }

    pub fn to_byte(self) -> u8 {
        (u8::from(self.alarm) * Self::ALARM)
            | (u8::from(self.noise) * Self::NOISE)
            | (u8::from(self.monitoring) * Self::MONITORING)
            | (u8::from(self.training) * Self::TRAINING)
    }

    /// `None` if a reserved bit is set.
    pub fn from_byte(b: u8) -> Option<Self> {
        if b & 0xF0 != 0 {
            return None;
        }
        Some(Self {
            alarm: b & Self::ALARM != 0,
            noise: b & Self::NOISE != 0,
            monitoring: b & Self::MONITORING != 0,
            training: b & Self::TRAINING != 0,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandFrame {
    pub opcode: u8,
    pub payload: Vec<u8>,
}

impl CommandFrame {
    pub fn new(opcode: u8, payload: &[u8]) -> Self {
        Self {
            opcode,
            payload: payload.to_vec(),
        }
    }

    /// Parses whitespace-separated hex bytes, e.g. `"11 05"`.
    pub fn parse_hex(s: &str) -> Option<Self> {
        let bytes: Option<Vec<u8>> = s
            .split_whitespace()
            .map(|t| u8::from_str_radix(t.trim_start_matches("0x"), 16).ok())
            .collect();
        let bytes = bytes?;
        let (&opcode, payload) = bytes.split_first()?;
        Some(Self::new(opcode, payload))
    }
}

fn hex_line(prefix: char, bytes: &[u8]) -> String {
    let mut s = String::with_capacity(2 + 3 * bytes.len());
    s.push(prefix);
    for b in bytes {
        s.push_str(&format!(" {b:02X}"));
    }
    s
}

/// One command/response exchange, rendered as two trace lines.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transaction {
    pub command: CommandFrame,
    pub response: Vec<u8>,
}

impl fmt::Display for Transaction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut cmd = vec![self.command.opcode];
        cmd.extend_from_slice(&self.command.payload);
        writeln!(f, "{}", hex_line('>', &cmd))?;
        write!(f, "{}", hex_line('<', &self.response))
    }
}

fn one_byte(frame: &CommandFrame) -> Option<u8> {
    match frame.payload.as_slice() {
        [b] => Some(*b),
        _ => None,
    }
}

/// Executes one command against the sensor state.
///
/// The caller must hold the sensor exclusively, so a response always
/// reflects a complete poll.
pub fn handle_command(sensor: &mut Sensor, frame: &CommandFrame, now: f64) -> Vec<u8> {
    let no_payload = frame.payload.is_empty();
    match frame.opcode {
        READ_STATUS if no_payload => vec![StatusByte::of(sensor).to_byte()],
        READ_COUNTS if no_payload => {
            let (q, s, r) = sensor.arrays.counts();
            // counts never exceed N <= 255
            vec![q as u8, s as u8, r as u8]
        }
        SET_N => match one_byte(frame) {
            Some(n) if SET_SIZE_RANGE.contains(&u16::from(n)) && sensor.pending_monitor.t_alarm <= u16::from(n) => {
                sensor.pending_monitor.n = u16::from(n);
                vec![ACK]
            }
            _ => vec![ERR_RANGE],
        },
        SET_TAU => match one_byte(frame) {
            Some(t) if TAU_RANGE.contains(&u16::from(t)) => {
                sensor.pending_monitor.tau_s = u16::from(t);
                vec![ACK]
            }
            _ => vec![ERR_RANGE],
        },
        SET_T => match one_byte(frame) {
            Some(t) if t >= 1 && u16::from(t) <= sensor.pending_monitor.n => {
                sensor.pending_monitor.t_alarm = u16::from(t);
                vec![ACK]
            }
            _ => vec![ERR_RANGE],
        },
        SET_TRAINSIZE => match one_byte(frame) {
            Some(n) if SET_SIZE_RANGE.contains(&u16::from(n)) => {
                sensor.pending_training.set_size = u16::from(n);
                vec![ACK]
            }
            _ => vec![ERR_RANGE],
        },
        START_TRAINING if no_payload => {
            sensor.start_training(now);
            vec![ACK]
        }
        SOFT_RESET if no_payload => {
            sensor.pending_monitor = MonitorConfig::default();
            sensor.pending_training = TrainingConfig::default();
            sensor.start_training(now);
            vec![ACK]
        }
        READ_STATUS | READ_COUNTS | START_TRAINING | SOFT_RESET => vec![ERR_RANGE],
        _ => vec![ERR_OPCODE],
    }
}

/// Decoded snapshot from a READ_STATUS + READ_COUNTS pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HostView {
    pub status: StatusByte,
    pub q: u8,
    pub s: u8,
    pub r: u8,
}

impl HostView {
    pub fn decode(status: &[u8], counts: &[u8]) -> Option<Self> {
        match (status, counts) {
            ([st], [q, s, r]) => Some(Self {
                status: StatusByte::from_byte(*st)?,
                q: *q,
                s: *s,
                r: *r,
            }),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::{Baseline, Event};

    fn monitoring() -> Sensor {
        let mut s = Sensor::default();
        s.finish_training(Baseline { mean: 1.0, std: 0.1 });
        s
    }

    #[test]
    fn read_counts_bytes() {
        let mut s = monitoring();
        s.record(Event::Leak, 0.0);
        s.record(Event::Noise, 2.0);
        assert_eq!(handle_command(&mut s, &CommandFrame::new(READ_COUNTS, &[]), 2.0), [18, 1, 1]);
    }

    #[test]
    fn set_tau_range() {
        let mut s = monitoring();
        let before = s.clone();
        assert_eq!(handle_command(&mut s, &CommandFrame::new(SET_TAU, &[31]), 0.0), [ERR_RANGE]);
        assert_eq!(s, before);
        assert_eq!(handle_command(&mut s, &CommandFrame::new(SET_TAU, &[0]), 0.0), [ERR_RANGE]);
        assert_eq!(handle_command(&mut s, &CommandFrame::new(SET_TAU, &[]), 0.0), [ERR_RANGE]);
        assert_eq!(handle_command(&mut s, &CommandFrame::new(SET_TAU, &[30]), 0.0), [ACK]);
        // deferred until retrain
        assert_eq!(s.monitor.tau_s, 2);
        assert_eq!(s.pending_monitor.tau_s, 30);
        handle_command(&mut s, &CommandFrame::new(START_TRAINING, &[]), 0.0);
        assert_eq!(s.monitor.tau_s, 30);
        assert_eq!(s.mode, Mode::Training);
    }

    #[test]
    fn status_during_alarm() {
        let mut s = monitoring();
        for i in 0..17 {
            s.record(Event::Leak, f64::from(i));
        }
        assert_eq!(handle_command(&mut s, &CommandFrame::new(READ_STATUS, &[]), 0.0), [0x05]);
    }

    #[test]
    fn t_bounded_by_n() {
        let mut s = monitoring();
        assert_eq!(handle_command(&mut s, &CommandFrame::new(SET_T, &[21]), 0.0), [ERR_RANGE]);
        assert_eq!(handle_command(&mut s, &CommandFrame::new(SET_N, &[16]), 0.0), [ERR_RANGE]);
        assert_eq!(handle_command(&mut s, &CommandFrame::new(SET_N, &[100]), 0.0), [ACK]);
        assert_eq!(handle_command(&mut s, &CommandFrame::new(SET_T, &[90]), 0.0), [ACK]);
        assert_eq!(handle_command(&mut s, &CommandFrame::new(SET_TRAINSIZE, &[9]), 0.0), [ERR_RANGE]);
    }

    #[test]
    fn every_opcode_answers() {
        for op in 0..=255u8 {
            let mut s = monitoring();
            let r = handle_command(&mut s, &CommandFrame::new(op, &[]), 0.0);
            assert!(!r.is_empty());
            let known = [READ_STATUS, READ_COUNTS, SET_N, SET_TAU, SET_T, SET_TRAINSIZE, START_TRAINING, SOFT_RESET];
            if !known.contains(&op) {
                assert_eq!(r, [ERR_OPCODE]);
            }
        }
    }

    #[test]
    fn soft_reset_restores_defaults() {
        let mut s = monitoring();
        handle_command(&mut s, &CommandFrame::new(SET_N, &[200]), 0.0);
        assert_eq!(handle_command(&mut s, &CommandFrame::new(SOFT_RESET, &[]), 0.0), [ACK]);
        assert_eq!(s.monitor, MonitorConfig::default());
        assert_eq!(s.mode, Mode::Training);
        assert_eq!(handle_command(&mut s, &CommandFrame::new(READ_STATUS, &[]), 0.0), [0x08]);
    }

    #[test]
    fn trace_format() {
        let t = Transaction {
            command: CommandFrame::parse_hex("11 05").unwrap(),
            response: vec![ACK],
        };
        assert_eq!(t.to_string(), "> 11 05\n< 00");
        assert!(CommandFrame::parse_hex("").is_none());
        assert!(CommandFrame::parse_hex("zz").is_none());
    }

    #[test]
    fn status_byte_reserved_bits() {
        assert!(StatusByte::from_byte(0x10).is_none());
        for b in 0..16u8 {
            assert_eq!(StatusByte::from_byte(b).unwrap().to_byte(), b);
        }
    }
}
