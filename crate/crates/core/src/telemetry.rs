//! G-force telemetry ingestion.
//!
//! Three interchangeable sources feed the pipeline: JSON-lines replay logs,
//! a fixed-layout little-endian UDP datagram, and a deterministic synthetic
//! lap generator. All of them produce [`TelemetrySample`]s.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

/// Default UDP port for the live feed.
pub const DEFAULT_UDP_PORT: u16 = 9537;

/// Default nominal telemetry rate (the game delivers roughly 60 to 65 Hz).
pub const DEFAULT_RATE_HZ: f64 = 62.5;

/// "ROFG" read as a little-endian u32.
pub const UDP_MAGIC: u32 = 0x4746_4F52;
pub const UDP_VERSION: u16 = 1;
pub const UDP_PACKET_LEN: usize = 34;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TelemetryError {
    #[error("malformed line: {0}")]
    MalformedLine(String),
    #[error("non-finite value in field `{0}`")]
    NonFiniteValue(&'static str),
    #[error("bad magic 0x{0:08X}")]
    BadMagic(u32),
    #[error("unsupported packet version {0}")]
    UnsupportedVersion(u16),
    #[error("truncated packet: {0} bytes, need {UDP_PACKET_LEN}")]
    TruncatedPacket(usize),
    #[error("invalid lap profile: {0}")]
    InvalidProfile(String),
}

/// Error from reading a whole replay log, carrying the 1-based line number.
#[derive(Debug, Error)]
pub enum LogReadError {
    #[error("cannot read log: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Line {
        line: usize,
        #[source]
        source: TelemetryError,
    },
}

/// One timestamped g-force reading.
///
/// Sign convention: positive `g_lon` is forward acceleration, positive `g_lat`
/// is rightward. `g_vert` is carried for format stability but synthesis does
/// not consume it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct TelemetrySample {
    /// Monotonic stream time in seconds.
    pub t: f64,
    pub g_lat: f64,
    pub g_lon: f64,
    #[serde(default)]
    pub g_vert: f64,
    /// Vehicle speed in m/s.
    #[serde(default)]
    pub speed: f64,
}

impl TelemetrySample {
    pub fn new(t: f64, g_lat: f64, g_lon: f64) -> Self {
        Self {
            t,
            g_lat,
            g_lon,
            g_vert: 0.0,
            speed: 0.0,
        }
    }

    /// Checks that every field is finite.
    pub fn validate(&self) -> Result<(), TelemetryError> {
        for (name, v) in [
            ("t", self.t),
            ("g_lat", self.g_lat),
            ("g_lon", self.g_lon),
            ("g_vert", self.g_vert),
            ("speed", self.speed),
        ] {
            if !v.is_finite() {
                return Err(TelemetryError::NonFiniteValue(name));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Replay,
    Udp,
    Synthetic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamMeta {
    pub nominal_rate_hz: f64,
    pub source: SourceKind,
}

impl StreamMeta {
    pub fn new(source: SourceKind, nominal_rate_hz: f64) -> Result<Self, TelemetryError> {
        if !(nominal_rate_hz.is_finite() && nominal_rate_hz > 0.0) {
            return Err(TelemetryError::InvalidProfile(format!(
                "nominal rate must be positive, got {nominal_rate_hz}"
            )));
        }
        Ok(Self {
            nominal_rate_hz,
            source,
        })
    }
}

impl Default for StreamMeta {
    fn default() -> Self {
        Self {
            nominal_rate_hz: DEFAULT_RATE_HZ,
            source: SourceKind::Replay,
        }
    }
}

// ── JSON-lines replay format ────────────────────────────────────────────────

fn field(
    obj: &serde_json::Map<String, Value>,
    key: &'static str,
    required: bool,
) -> Result<f64, TelemetryError> {
    match obj.get(key) {
        None if required => Err(TelemetryError::MalformedLine(format!(
            "missing key `{key}`"
        ))),
        None => Ok(0.0),
        Some(Value::Null) if !required => Ok(0.0),
        Some(Value::Number(n)) => {
            let v = n.as_f64().ok_or_else(|| {
                TelemetryError::MalformedLine(format!("`{key}` is not representable"))
            })?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(TelemetryError::NonFiniteValue(key))
            }
        }
        // JSON has no NaN/Infinity literals; loggers that write them as strings
        // are reporting a non-finite value, not a format error.
        Some(Value::String(s)) => match s.trim().to_ascii_lowercase().as_str() {
            "nan" | "-nan" | "inf" | "+inf" | "-inf" | "infinity" | "+infinity" | "-infinity" => {
                Err(TelemetryError::NonFiniteValue(key))
            }
            _ => Err(TelemetryError::MalformedLine(format!(
                "`{key}` must be a number"
            ))),
        },
        Some(_) => Err(TelemetryError::MalformedLine(format!(
            "`{key}` must be a number"
        ))),
    }
}

/// Parses one replay-log line into a sample, filling optional fields with 0.
pub fn parse_log_line(line: &str) -> Result<TelemetrySample, TelemetryError> {
    let value: Value =
        serde_json::from_str(line).map_err(|e| TelemetryError::MalformedLine(e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| TelemetryError::MalformedLine("expected a JSON object".into()))?;
    Ok(TelemetrySample {
        t: field(obj, "t", true)?,
        g_lat: field(obj, "g_lat", true)?,
        g_lon: field(obj, "g_lon", true)?,
        g_vert: field(obj, "g_vert", false)?,
        speed: field(obj, "speed", false)?,
    })
}

/// Serializes a sample as a single JSON-lines record (no trailing newline).
pub fn encode_log_line(sample: &TelemetrySample) -> String {
    serde_json::to_string(sample).expect("sample serialization is infallible")
}

/// Reads a whole `.jsonl` replay file. Blank lines are skipped.
pub fn read_log(path: &Path) -> Result<Vec<TelemetrySample>, LogReadError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let sample = parse_log_line(&line).map_err(|source| LogReadError::Line {
            line: idx + 1,
            source,
        })?;
        out.push(sample);
    }
    Ok(out)
}

// ── UDP datagram codec ──────────────────────────────────────────────────────
//
// offset  size  field
//      0     4  magic   u32 = 0x47464F52
//      4     2  version u16 = 1
//      6     4  seq     u32
//     10     8  t       f64
//     18     4  g_lat   f32
//     22     4  g_lon   f32
//     26     4  g_vert  f32
//     30     4  speed   f32

/// A decoded datagram. `seq` is exposed for gap metrics only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UdpPacket {
    pub seq: u32,
    pub sample: TelemetrySample,
}

pub fn encode_udp_packet(sample: &TelemetrySample, seq: u32) -> [u8; UDP_PACKET_LEN] {
    let mut buf = [0u8; UDP_PACKET_LEN];
    buf[0..4].copy_from_slice(&UDP_MAGIC.to_le_bytes());
    buf[4..6].copy_from_slice(&UDP_VERSION.to_le_bytes());
    buf[6..10].copy_from_slice(&seq.to_le_bytes());
    buf[10..18].copy_from_slice(&sample.t.to_le_bytes());
    buf[18..22].copy_from_slice(&(sample.g_lat as f32).to_le_bytes());
    buf[22..26].copy_from_slice(&(sample.g_lon as f32).to_le_bytes());
    buf[26..30].copy_from_slice(&(sample.g_vert as f32).to_le_bytes());
    buf[30..34].copy_from_slice(&(sample.speed as f32).to_le_bytes());
    buf
}

fn le_f32(bytes: &[u8], at: usize) -> f64 {
    f32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as f64
}

/// Decodes one datagram. Bytes past the fixed 34-byte layout are ignored.
pub fn decode_udp_packet(bytes: &[u8]) -> Result<UdpPacket, TelemetryError> {
    if bytes.len() < UDP_PACKET_LEN {
        return Err(TelemetryError::TruncatedPacket(bytes.len()));
    }
    let magic = u32::from_le_bytes(bytes[0..4].try_into().unwrap());
    if magic != UDP_MAGIC {
        return Err(TelemetryError::BadMagic(magic));
    }
    let version = u16::from_le_bytes(bytes[4..6].try_into().unwrap());
    if version != UDP_VERSION {
        return Err(TelemetryError::UnsupportedVersion(version));
    }
    let seq = u32::from_le_bytes(bytes[6..10].try_into().unwrap());
    let sample = TelemetrySample {
        t: f64::from_le_bytes(bytes[10..18].try_into().unwrap()),
        g_lat: le_f32(bytes, 18),
        g_lon: le_f32(bytes, 22),
        g_vert: le_f32(bytes, 26),
        speed: le_f32(bytes, 30),
    };
    sample.validate()?;
    Ok(UdpPacket { seq, sample })
}

// ── Stream monotonicity ─────────────────────────────────────────────────────

/// Drops samples whose timestamp does not advance, counting them.
///
/// Live feeds jitter, so a repeated or backwards timestamp is a warning and
/// not an error.
#[derive(Debug, Clone, Default)]
pub struct MonotonicGate {
    last_t: Option<f64>,
    dropped: u64,
}

impl MonotonicGate {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns true if the sample should be processed.
    pub fn admit(&mut self, sample: &TelemetrySample) -> bool {
        match self.last_t {
            Some(prev) if sample.t <= prev => {
                self.dropped += 1;
                log::warn!(
                    "dropping sample at t={} (previous t={prev}); {} dropped so far",
                    sample.t,
                    self.dropped
                );
                false
            }
            _ => {
                self.last_t = Some(sample.t);
                true
            }
        }
    }

    pub fn dropped(&self) -> u64 {
        self.dropped
    }
}

// ── Synthetic lap generator ─────────────────────────────────────────────────

const STANDARD_GRAVITY: f64 = 9.80665;
const MAX_PEAK_G: f64 = 5.0;

/// Shape of a synthetic lap.
///
/// The lap is laid out as fractions of its duration: idle, acceleration ramp,
/// braking step, then a sustained corner during which a curb strike adds a
/// zero-mean longitudinal burst, then a straight cruise to the end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LapProfile {
    /// Peak longitudinal g reached at the end of the acceleration ramp.
    pub accel_peak_g: f64,
    /// Magnitude of the (negative) braking step.
    pub brake_peak_g: f64,
    /// Lateral plateau while cornering; sign selects the turn direction.
    pub corner_peak_g: f64,
    /// Amplitude of the curb burst on the longitudinal axis.
    pub curb_amp_g: f64,
    /// Curb burst frequency; must be at least 5 Hz.
    pub curb_freq_hz: f64,
    /// Uniform noise half-width added to both g axes.
    pub noise_g: f64,
    pub initial_speed_mps: f64,
}

impl Default for LapProfile {
    fn default() -> Self {
        Self {
            accel_peak_g: 0.5,
            brake_peak_g: 0.9,
            corner_peak_g: 1.1,
            curb_amp_g: 0.6,
            curb_freq_hz: 8.0,
            noise_g: 0.01,
            initial_speed_mps: 10.0,
        }
    }
}

/// Segment boundaries as fractions of the lap duration.
pub mod segments {
    pub const IDLE_END: f64 = 0.08;
    pub const ACCEL_END: f64 = 0.30;
    pub const BRAKE_END: f64 = 0.42;
    pub const CORNER_END: f64 = 0.85;
    pub const CURB_START: f64 = 0.60;
    pub const CURB_END: f64 = 0.70;
    /// Lateral ramp-in/out time at the corner edges, seconds.
    pub const CORNER_EDGE_S: f64 = 0.5;
}

/// Which part of the lap a given time falls in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LapSegment {
    Idle,
    Accel,
    Brake,
    Corner,
    CurbStrike,
    Cruise,
}

pub fn lap_segment(t: f64, duration: f64) -> LapSegment {
    use segments::*;
    let f = t / duration;
    if f < IDLE_END {
        LapSegment::Idle
    } else if f < ACCEL_END {
        LapSegment::Accel
    } else if f < BRAKE_END {
        LapSegment::Brake
    } else if f < CORNER_END {
        if (CURB_START..CURB_END).contains(&f) {
            LapSegment::CurbStrike
        } else {
            LapSegment::Corner
        }
    } else {
        LapSegment::Cruise
    }
}

impl LapProfile {
    /// A profile whose every peak is zero; generates an all-zero stream.
    pub fn zero() -> Self {
        Self {
            accel_peak_g: 0.0,
            brake_peak_g: 0.0,
            corner_peak_g: 0.0,
            curb_amp_g: 0.0,
            curb_freq_hz: 8.0,
            noise_g: 0.0,
            initial_speed_mps: 0.0,
        }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "default" | "curb" => Some(Self::default()),
            "zero" => Some(Self::zero()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), TelemetryError> {
        let peaks = [
            ("accel_peak_g", self.accel_peak_g),
            ("brake_peak_g", self.brake_peak_g),
            ("corner_peak_g", self.corner_peak_g),
            ("curb_amp_g", self.curb_amp_g),
            ("noise_g", self.noise_g),
        ];
        for (name, v) in peaks {
            if !v.is_finite() || v.abs() > MAX_PEAK_G {
                return Err(TelemetryError::InvalidProfile(format!(
                    "{name} = {v} outside [-{MAX_PEAK_G}, {MAX_PEAK_G}] g"
                )));
            }
        }
        if self.accel_peak_g < 0.0
            || self.brake_peak_g < 0.0
            || self.curb_amp_g < 0.0
            || self.noise_g < 0.0
        {
            return Err(TelemetryError::InvalidProfile(
                "accel, brake, curb and noise magnitudes must be non-negative".into(),
            ));
        }
        if !(self.curb_freq_hz.is_finite() && self.curb_freq_hz >= 5.0) {
            return Err(TelemetryError::InvalidProfile(format!(
                "curb_freq_hz must be >= 5, got {}",
                self.curb_freq_hz
            )));
        }
        if !(self.initial_speed_mps.is_finite() && self.initial_speed_mps >= 0.0) {
            return Err(TelemetryError::InvalidProfile(
                "initial speed must be >= 0".into(),
            ));
        }
        Ok(())
    }

    /// Noise-free g-forces at time `t` of a lap lasting `duration`.
    fn clean_g(&self, t: f64, duration: f64) -> (f64, f64, f64) {
        use segments::*;
        let seg = lap_segment(t, duration);
        let mut g_lat = 0.0;
        let mut g_lon = 0.0;
        let mut g_vert = 0.0;
        match seg {
            LapSegment::Idle | LapSegment::Cruise => {}
            LapSegment::Accel => {
                let t0 = IDLE_END * duration;
                let t1 = ACCEL_END * duration;
                g_lon = self.accel_peak_g * (t - t0) / (t1 - t0);
            }
            LapSegment::Brake => g_lon = -self.brake_peak_g,
            LapSegment::Corner | LapSegment::CurbStrike => {
                let t0 = BRAKE_END * duration;
                let t1 = CORNER_END * duration;
                let edge = ((t - t0).min(t1 - t)).clamp(0.0, CORNER_EDGE_S) / CORNER_EDGE_S;
                g_lat = self.corner_peak_g * edge;
                if seg == LapSegment::CurbStrike {
                    let tc = t - CURB_START * duration;
                    let burst = (2.0 * PI * self.curb_freq_hz * tc).sin();
                    g_lon = self.curb_amp_g * burst;
                    g_vert = 0.5 * self.curb_amp_g * burst;
                }
            }
        }
        (g_lat, g_lon, g_vert)
    }
}

/// Generates a deterministic synthetic lap sampled at `rate_hz`.
///
/// Sample `k` sits at `t = k / rate_hz`; the stream holds
/// `floor(duration * rate_hz)` samples.
pub fn synth_lap(
    profile: &LapProfile,
    duration: f64,
    rate_hz: f64,
    seed: u64,
) -> Result<Vec<TelemetrySample>, TelemetryError> {
    profile.validate()?;
    if !(duration.is_finite() && duration > 0.0) {
        return Err(TelemetryError::InvalidProfile(format!(
            "duration must be > 0, got {duration}"
        )));
    }
    if !(30.0..=200.0).contains(&rate_hz) {
        return Err(TelemetryError::InvalidProfile(format!(
            "rate_hz must be in [30, 200], got {rate_hz}"
        )));
    }
    let n = (duration * rate_hz + 1e-9).floor() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut speed = profile.initial_speed_mps;
    let dt = 1.0 / rate_hz;
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let t = k as f64 / rate_hz;
        let (mut g_lat, mut g_lon, g_vert) = profile.clean_g(t, duration);
        if profile.noise_g > 0.0 {
            g_lat += rng.gen_range(-profile.noise_g..=profile.noise_g);
            g_lon += rng.gen_range(-profile.noise_g..=profile.noise_g);
        }
        out.push(TelemetrySample {
            t,
            g_lat,
            g_lon,
            g_vert,
            speed,
        });
        speed = (speed + g_lon * STANDARD_GRAVITY * dt).max(0.0);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parse_zero_line() {
        let s = parse_log_line(r#"{"t":0.0,"g_lat":0.0,"g_lon":0.0}"#).unwrap();
        assert_eq!(s, TelemetrySample::default());
    }

    #[test]
    fn parse_copies_fields_and_fills_defaults() {
        let s = parse_log_line(r#"{"t":1.25,"g_lat":-0.8,"g_lon":0.3,"speed":41.2}"#).unwrap();
        assert_eq!(
            s,
            TelemetrySample {
                t: 1.25,
                g_lat: -0.8,
                g_lon: 0.3,
                g_vert: 0.0,
                speed: 41.2
            }
        );
    }

    #[test]
    fn parse_rejects_nan_string() {
        let err = parse_log_line(r#"{"t":0.5,"g_lon":"NaN","g_lat":0.0}"#).unwrap_err();
        assert_eq!(err, TelemetryError::NonFiniteValue("g_lon"));
    }

    #[test]
    fn parse_rejects_missing_key_and_garbage() {
        assert!(matches!(
            parse_log_line(r#"{"t":0.5,"g_lat":0.0}"#),
            Err(TelemetryError::MalformedLine(_))
        ));
        assert!(matches!(
            parse_log_line("not json"),
            Err(TelemetryError::MalformedLine(_))
        ));
        assert!(matches!(
            parse_log_line("[1,2,3]"),
            Err(TelemetryError::MalformedLine(_))
        ));
        assert!(matches!(
            parse_log_line(r#"{"t":"soon","g_lat":0.0,"g_lon":0.0}"#),
            Err(TelemetryError::MalformedLine(_))
        ));
    }

    #[test]
    fn parse_rejects_overflowing_number() {
        // 1e400 parses to +inf in f64.
        let r = parse_log_line(r#"{"t":1e400,"g_lat":0.0,"g_lon":0.0}"#);
        assert!(r.is_err());
    }

    #[test]
    fn udp_header_bytes() {
        let bytes = encode_udp_packet(&TelemetrySample::default(), 0);
        assert_eq!(bytes.len(), 34);
        assert_eq!(&bytes[..6], &[0x52, 0x4F, 0x46, 0x47, 0x01, 0x00]);
        assert_eq!(&bytes[..4], b"ROFG");
    }

    #[test]
    fn udp_truncated_and_bad_magic() {
        let bytes = encode_udp_packet(&TelemetrySample::default(), 7);
        assert_eq!(
            decode_udp_packet(&bytes[..33]),
            Err(TelemetryError::TruncatedPacket(33))
        );
        let mut bad = bytes;
        bad[..4].copy_from_slice(&[0, 0, 0, 0]);
        assert_eq!(decode_udp_packet(&bad), Err(TelemetryError::BadMagic(0)));
        let mut v2 = bytes;
        v2[4] = 2;
        assert_eq!(
            decode_udp_packet(&v2),
            Err(TelemetryError::UnsupportedVersion(2))
        );
    }

    #[test]
    fn udp_rejects_nan_payload() {
        let mut bytes = encode_udp_packet(&TelemetrySample::default(), 1);
        bytes[22..26].copy_from_slice(&f32::NAN.to_le_bytes());
        assert_eq!(
            decode_udp_packet(&bytes),
            Err(TelemetryError::NonFiniteValue("g_lon"))
        );
    }

    #[test]
    fn udp_exposes_seq() {
        let s = TelemetrySample::new(3.5, 0.25, -0.5);
        let p = decode_udp_packet(&encode_udp_packet(&s, 4242)).unwrap();
        assert_eq!(p.seq, 4242);
        assert_eq!(p.sample, s);
    }

    #[test]
    fn gate_drops_duplicates() {
        let mut gate = MonotonicGate::new();
        assert!(gate.admit(&TelemetrySample::new(0.0, 0.0, 0.0)));
        assert!(!gate.admit(&TelemetrySample::new(0.0, 0.0, 0.0)));
        assert!(!gate.admit(&TelemetrySample::new(-1.0, 0.0, 0.0)));
        assert!(gate.admit(&TelemetrySample::new(0.1, 0.0, 0.0)));
        assert_eq!(gate.dropped(), 2);
    }

    #[test]
    fn zero_profile_gives_zero_stream() {
        let lap = synth_lap(&LapProfile::zero(), 5.0, 62.5, 9).unwrap();
        assert!(lap
            .iter()
            .all(|s| s.g_lat == 0.0 && s.g_lon == 0.0 && s.g_vert == 0.0 && s.speed == 0.0));
    }

    #[test]
    fn ten_seconds_at_62_5() {
        let lap = synth_lap(&LapProfile::default(), 10.0, 62.5, 1).unwrap();
        assert_eq!(lap.len(), 625);
        for (k, s) in lap.iter().enumerate() {
            assert_eq!(s.t, k as f64 / 62.5);
        }
    }

    #[test]
    fn lap_is_deterministic_per_seed() {
        let a = synth_lap(&LapProfile::default(), 20.0, 62.5, 1).unwrap();
        let b = synth_lap(&LapProfile::default(), 20.0, 62.5, 1).unwrap();
        let c = synth_lap(&LapProfile::default(), 20.0, 62.5, 2).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn lap_contains_every_segment() {
        let lap = synth_lap(&LapProfile::default(), 40.0, 62.5, 1).unwrap();
        let seg_of = |s: &TelemetrySample| lap_segment(s.t, 40.0);
        let accel: Vec<_> = lap
            .iter()
            .filter(|s| seg_of(s) == LapSegment::Accel)
            .collect();
        assert!(accel.last().unwrap().g_lon > 0.4);
        assert!(lap
            .iter()
            .filter(|s| seg_of(s) == LapSegment::Brake)
            .all(|s| s.g_lon < -0.8));
        let corner: Vec<_> = lap
            .iter()
            .filter(|s| seg_of(s) == LapSegment::Corner)
            .collect();
        assert!(corner.iter().filter(|s| s.g_lat > 1.0).count() > corner.len() / 2);
        let curb: Vec<_> = lap
            .iter()
            .filter(|s| seg_of(s) == LapSegment::CurbStrike)
            .collect();
        let mean = curb.iter().map(|s| s.g_lon).sum::<f64>() / curb.len() as f64;
        assert!(
            mean.abs() < 0.05,
            "curb burst should be zero-mean, got {mean}"
        );
        assert!(curb.iter().any(|s| s.g_lon > 0.5) && curb.iter().any(|s| s.g_lon < -0.5));
        assert!(curb.iter().all(|s| s.g_lat > 1.0));
    }

    #[test]
    fn lap_rejects_bad_requests() {
        let p = LapProfile::default();
        assert!(synth_lap(&p, 0.0, 62.5, 1).is_err());
        assert!(synth_lap(&p, 10.0, 29.0, 1).is_err());
        assert!(synth_lap(&p, 10.0, 201.0, 1).is_err());
        let bad = LapProfile {
            corner_peak_g: f64::NAN,
            ..LapProfile::default()
        };
        assert!(matches!(
            synth_lap(&bad, 10.0, 62.5, 1),
            Err(TelemetryError::InvalidProfile(_))
        ));
        let slow_curb = LapProfile {
            curb_freq_hz: 2.0,
            ..LapProfile::default()
        };
        assert!(synth_lap(&slow_curb, 10.0, 62.5, 1).is_err());
    }

    fn finite_sample() -> impl Strategy<Value = TelemetrySample> {
        (
            -1e6f64..1e6,
            -20.0f64..20.0,
            -20.0f64..20.0,
            -20.0f64..20.0,
            0.0f64..150.0,
        )
            .prop_map(|(t, g_lat, g_lon, g_vert, speed)| TelemetrySample {
                t,
                g_lat,
                g_lon,
                g_vert,
                speed,
            })
    }

    proptest! {
        #[test]
        fn udp_round_trip_after_f32_rounding(s in finite_sample(), seq in any::<u32>()) {
            let p = decode_udp_packet(&encode_udp_packet(&s, seq)).unwrap();
            prop_assert_eq!(p.seq, seq);
            prop_assert_eq!(p.sample.t, s.t);
            prop_assert_eq!(p.sample.g_lat, s.g_lat as f32 as f64);
            prop_assert_eq!(p.sample.g_lon, s.g_lon as f32 as f64);
            prop_assert_eq!(p.sample.g_vert, s.g_vert as f32 as f64);
            prop_assert_eq!(p.sample.speed, s.speed as f32 as f64);
        }

        #[test]
        fn log_line_round_trip(s in finite_sample()) {
            prop_assert_eq!(parse_log_line(&encode_log_line(&s)).unwrap(), s);
        }

        #[test]
        fn synthetic_laps_are_valid(
            seed in any::<u64>(),
            rate in 30.0f64..200.0,
            duration in 1.0f64..30.0,
        ) {
            let lap = synth_lap(&LapProfile::default(), duration, rate, seed).unwrap();
            prop_assert!(!lap.is_empty());
            for w in lap.windows(2) {
                prop_assert!(w[1].t > w[0].t);
            }
            for s in &lap {
                prop_assert!(s.validate().is_ok());
            }
        }
    }
}
