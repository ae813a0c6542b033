//! G-force to motion-cue synthesis.
//!
//! Two engines turn a telemetry stream into [`CueFrame`]s:
//!
//! * [`SmoothedEngine`] splits longitudinal g into a slow low-pass trend
//!   (tilt), a fast high-pass part (jolt) and a roughness envelope
//!   (vibration). Lateral g drives sway through the same low-pass.
//! * [`ThresholdEngine`] keeps the low-pass sway but maps longitudinal g to
//!   discrete half-sine events whenever the clipped force leaves the deadzone
//!   or the clipped jerk crosses its trigger.
//!
//! Both engines run the acceleration guard, a hysteresis machine over the
//! low-passed longitudinal trend that suppresses jolts opposing a sustained
//! acceleration.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::{DspError, JerkEstimator, OnePoleHpf, OnePoleLpf, RmsWindow};
use crate::telemetry::TelemetrySample;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("time went backwards or repeated: {t} <= {last}")]
    NonMonotonicTime { t: f64, last: f64 },
    #[error("non-finite input in `{0}`")]
    NonFiniteInput(&'static str),
    #[error("invalid synthesis parameters: {0}")]
    InvalidParams(String),
}

impl From<DspError> for SynthError {
    fn from(e: DspError) -> Self {
        match e {
            DspError::NonMonotonicTime { t, last } => SynthError::NonMonotonicTime { t, last },
            DspError::NonPositiveDt(_) => SynthError::NonMonotonicTime {
                t: f64::NAN,
                last: f64::NAN,
            },
            DspError::NonFiniteInput(_) => SynthError::NonFiniteInput("signal"),
            DspError::InvalidParameter(s) => SynthError::InvalidParams(s),
        }
    }
}

fn invalid(msg: impl Into<String>) -> SynthError {
    SynthError::InvalidParams(msg.into())
}

fn non_negative(name: &str, v: f64) -> Result<(), SynthError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be finite and >= 0, got {v}")))
    }
}

fn positive(name: &str, v: f64) -> Result<(), SynthError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be finite and > 0, got {v}")))
    }
}

// ── Parameters ──────────────────────────────────────────────────────────────

/// Filter-based synthesis parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoothedParams {
    /// Slow-trend cutoff for tilt, sway and the guard trend.
    pub lpf_cutoff_hz: f64,
    /// Fast-component cutoff for jolt detection.
    pub hpf_cutoff_hz: f64,
    /// Roughness RMS window for vibration.
    pub rms_window_s: f64,
    pub tilt_gain_m_per_g: f64,
    pub jolt_gain_m_per_g: f64,
    pub vib_freq_hz: f64,
    /// Vibration amplitude per g of fast-component RMS.
    pub vib_amp_gain_m: f64,
    pub sway_gain_m_per_g: f64,
    /// |HPF(g_lon)| above which a jolt period starts.
    pub jolt_on_g: f64,
    /// |HPF(g_lon)| below which a jolt period ends.
    pub jolt_off_g: f64,
    /// Multiplier on tilt and vibration during a jolt period.
    pub jolt_weight_reduction: f64,
}

impl Default for SmoothedParams {
    fn default() -> Self {
        Self {
            lpf_cutoff_hz: 0.7,
            hpf_cutoff_hz: 0.4,
            rms_window_s: 0.2,
            tilt_gain_m_per_g: 0.1,
            jolt_gain_m_per_g: 0.5,
            vib_freq_hz: 12.0,
            vib_amp_gain_m: 0.3,
            sway_gain_m_per_g: 0.1,
            jolt_on_g: 0.25,
            jolt_off_g: 0.15,
            jolt_weight_reduction: 0.3,
        }
    }
}

impl SmoothedParams {
    pub fn validate(&self) -> Result<(), SynthError> {
        positive("lpf_cutoff_hz", self.lpf_cutoff_hz)?;
        positive("hpf_cutoff_hz", self.hpf_cutoff_hz)?;
        positive("rms_window_s", self.rms_window_s)?;
        positive("vib_freq_hz", self.vib_freq_hz)?;
        non_negative("tilt_gain_m_per_g", self.tilt_gain_m_per_g)?;
        non_negative("jolt_gain_m_per_g", self.jolt_gain_m_per_g)?;
        non_negative("vib_amp_gain_m", self.vib_amp_gain_m)?;
        non_negative("sway_gain_m_per_g", self.sway_gain_m_per_g)?;
        non_negative("jolt_off_g", self.jolt_off_g)?;
        non_negative("jolt_weight_reduction", self.jolt_weight_reduction)?;
        if !(self.jolt_on_g > self.jolt_off_g) || !self.jolt_on_g.is_finite() {
            return Err(invalid("jolt_on_g must exceed jolt_off_g"));
        }
        Ok(())
    }
}

/// Threshold (event-based) synthesis parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdParams {
    /// Cutoff for sway and the guard trend.
    pub lpf_cutoff_hz: f64,
    pub deadzone_g: f64,
    pub clip_force_g: f64,
    pub clip_jerk_gps: f64,
    pub force_gain_m_per_g: f64,
    pub jerk_gain_m_per_gps: f64,
    /// |jerk| above which a jerk event fires.
    pub jerk_trigger_gps: f64,
    /// Half-sine event duration.
    pub event_envelope_s: f64,
    pub sway_gain_m_per_g: f64,
}

impl Default for ThresholdParams {
    fn default() -> Self {
        Self {
            lpf_cutoff_hz: 0.7,
            deadzone_g: 0.2,
            clip_force_g: 1.3,
            clip_jerk_gps: 5.0,
            force_gain_m_per_g: 0.1,
            jerk_gain_m_per_gps: 0.1,
            jerk_trigger_gps: 2.0,
            event_envelope_s: 0.15,
            sway_gain_m_per_g: 0.1,
        }
    }
}

impl ThresholdParams {
    pub fn validate(&self) -> Result<(), SynthError> {
        positive("lpf_cutoff_hz", self.lpf_cutoff_hz)?;
        non_negative("deadzone_g", self.deadzone_g)?;
        positive("clip_force_g", self.clip_force_g)?;
        positive("clip_jerk_gps", self.clip_jerk_gps)?;
        non_negative("force_gain_m_per_g", self.force_gain_m_per_g)?;
        non_negative("jerk_gain_m_per_gps", self.jerk_gain_m_per_gps)?;
        non_negative("jerk_trigger_gps", self.jerk_trigger_gps)?;
        positive("event_envelope_s", self.event_envelope_s)?;
        non_negative("sway_gain_m_per_g", self.sway_gain_m_per_g)?;
        if !(self.deadzone_g < self.clip_force_g) {
            return Err(invalid("deadzone_g must be below clip_force_g"));
        }
        Ok(())
    }
}

/// Acceleration-guard hysteresis parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AccelGuardParams {
    pub enter_g: f64,
    pub release_g: f64,
    pub min_hold_s: f64,
    /// Fraction of an opposite-direction jolt removed while guarding.
    pub opposite_jolt_suppression: f64,
}

impl Default for AccelGuardParams {
    fn default() -> Self {
        Self {
            enter_g: 0.15,
            release_g: 0.10,
            min_hold_s: 0.20,
            opposite_jolt_suppression: 1.0,
        }
    }
}

impl AccelGuardParams {
    pub fn validate(&self) -> Result<(), SynthError> {
        non_negative("release_g", self.release_g)?;
        non_negative("min_hold_s", self.min_hold_s)?;
        if !(self.enter_g > self.release_g) || !self.enter_g.is_finite() {
            return Err(invalid("enter_g must exceed release_g"));
        }
        if !(0.0..=1.0).contains(&self.opposite_jolt_suppression) {
            return Err(invalid("opposite_jolt_suppression must be in [0, 1]"));
        }
        Ok(())
    }
}

// ── Acceleration guard ──────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum GuardMode {
    #[default]
    Idle,
    AccelPos,
    AccelNeg,
}

impl GuardMode {
    pub fn as_str(self) -> &'static str {
        match self {
            GuardMode::Idle => "Idle",
            GuardMode::AccelPos => "AccelPos",
            GuardMode::AccelNeg => "AccelNeg",
        }
    }
}

impl std::fmt::Display for GuardMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AccelGuardState {
    pub mode: GuardMode,
    /// Time the current non-idle mode was entered.
    pub entered_at: Option<f64>,
}

/// One transition of the acceleration guard.
///
/// A guard mode releases once it has been held for `min_hold_s` and the
/// trend has fallen back below `release_g` in its own direction (for
/// `AccelNeg`, risen above `-release_g`). Released state is re-evaluated on
/// the same step, so a hard reversal moves straight to the opposite mode.
pub fn accel_guard_step(
    st: AccelGuardState,
    p: &AccelGuardParams,
    lpf_gy: f64,
    t: f64,
) -> AccelGuardState {
    let mut mode = st.mode;
    let mut entered_at = st.entered_at;
    if mode != GuardMode::Idle {
        let held = t - entered_at.unwrap_or(t) >= p.min_hold_s;
        let fell_back = match mode {
            GuardMode::AccelPos => lpf_gy < p.release_g,
            GuardMode::AccelNeg => lpf_gy > -p.release_g,
            GuardMode::Idle => unreachable!(),
        };
        if held && fell_back {
            mode = GuardMode::Idle;
            entered_at = None;
        }
    }
    if mode == GuardMode::Idle {
        if lpf_gy > p.enter_g {
            mode = GuardMode::AccelPos;
            entered_at = Some(t);
        } else if lpf_gy < -p.enter_g {
            mode = GuardMode::AccelNeg;
            entered_at = Some(t);
        }
    }
    AccelGuardState { mode, entered_at }
}

/// Scales a jolt that opposes the guard direction by `1 - suppression`.
pub fn suppress_jolt(jolt_m: f64, mode: GuardMode, suppression: f64) -> f64 {
    let opposing = match mode {
        GuardMode::AccelPos => jolt_m < 0.0,
        GuardMode::AccelNeg => jolt_m > 0.0,
        GuardMode::Idle => false,
    };
    if opposing {
        jolt_m * (1.0 - suppression)
    } else {
        jolt_m
    }
}

/// Schmitt trigger on a magnitude: on above `on`, off below `off`.
#[derive(Debug, Clone, Copy)]
pub struct Hysteresis {
    on: f64,
    off: f64,
    active: bool,
}

impl Hysteresis {
    pub fn new(on: f64, off: f64) -> Self {
        Self {
            on,
            off,
            active: false,
        }
    }

    pub fn update(&mut self, magnitude: f64) -> bool {
        if magnitude > self.on {
            self.active = true;
        } else if magnitude < self.off {
            self.active = false;
        }
        self.active
    }

    pub fn is_active(&self) -> bool {
        self.active
    }
}

// ── Cue frames ──────────────────────────────────────────────────────────────

/// One frame of haptic intent, in meters at the chair lever.
///
/// CSV column order: `t, sway_m, tilt_m, jolt_m, vib_m, guard_mode`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct CueFrame {
    pub t: f64,
    pub sway_m: f64,
    pub tilt_m: f64,
    pub jolt_m: f64,
    pub vib_m: f64,
    pub guard_mode: GuardMode,
    /// Vibration envelope before the sinusoid, after jolt-period weighting.
    #[serde(skip)]
    pub vib_amp_m: f64,
    #[serde(skip)]
    pub jolt_active: bool,
}

impl CueFrame {
    fn zero(t: f64) -> Self {
        Self {
            t,
            ..Self::default()
        }
    }
}

/// Sums longitudinal components into a pitch cue; sway becomes the yaw cue.
pub fn blend(cue: &CueFrame) -> (f64, f64) {
    (cue.tilt_m + cue.jolt_m + cue.vib_m, cue.sway_m)
}

fn check_sample(s: &TelemetrySample) -> Result<(), SynthError> {
    for (name, v) in [("t", s.t), ("g_lat", s.g_lat), ("g_lon", s.g_lon)] {
        if !v.is_finite() {
            return Err(SynthError::NonFiniteInput(name));
        }
    }
    Ok(())
}

/// Returns dt since the previous sample, or `None` on the first one.
fn advance_clock(last_t: &mut Option<f64>, t: f64) -> Result<Option<f64>, SynthError> {
    let dt = match *last_t {
        None => None,
        Some(last) if t <= last => return Err(SynthError::NonMonotonicTime { t, last }),
        Some(last) => Some(t - last),
    };
    *last_t = Some(t);
    Ok(dt)
}

// ── Smoothed engine ─────────────────────────────────────────────────────────

#[derive(Debug, Clone)]
pub struct SmoothedEngine {
    params: SmoothedParams,
    guard_params: AccelGuardParams,
    lat_lpf: OnePoleLpf,
    lon_lpf: OnePoleLpf,
    lon_hpf: OnePoleHpf,
    roughness: RmsWindow,
    guard: AccelGuardState,
    jolt_period: Hysteresis,
    phase: f64,
    last_t: Option<f64>,
}

impl SmoothedEngine {
    pub fn new(params: SmoothedParams, guard_params: AccelGuardParams) -> Result<Self, SynthError> {
        params.validate()?;
        guard_params.validate()?;
        Ok(Self {
            lat_lpf: OnePoleLpf::new(params.lpf_cutoff_hz)?,
            lon_lpf: OnePoleLpf::new(params.lpf_cutoff_hz)?,
            lon_hpf: OnePoleHpf::new(params.hpf_cutoff_hz)?,
            roughness: RmsWindow::new(params.rms_window_s)?,
            jolt_period: Hysteresis::new(params.jolt_on_g, params.jolt_off_g),
            guard: AccelGuardState::default(),
            phase: 0.0,
            last_t: None,
            params,
            guard_params,
        })
    }

    pub fn params(&self) -> &SmoothedParams {
        &self.params
    }

    pub fn guard(&self) -> AccelGuardState {
        self.guard
    }

    pub fn step(&mut self, s: &TelemetrySample) -> Result<CueFrame, SynthError> {
        check_sample(s)?;
        let p = &self.params;
        let Some(dt) = advance_clock(&mut self.last_t, s.t)? else {
            self.lat_lpf.step(s.g_lat, 0.0)?;
            self.lon_lpf.step(s.g_lon, 0.0)?;
            let (_, h) = self.lon_hpf.split(s.g_lon, 0.0)?;
            self.roughness.step(h, s.t)?;
            return Ok(CueFrame::zero(s.t));
        };

        let lat = self.lat_lpf.step(s.g_lat, dt)?;
        let trend = self.lon_lpf.step(s.g_lon, dt)?;
        let (_, fast) = self.lon_hpf.split(s.g_lon, dt)?;
        let rough = self.roughness.step(fast, s.t)?;

        self.guard = accel_guard_step(self.guard, &self.guard_params, trend, s.t);
        let jolt_active = self.jolt_period.update(fast.abs());

        self.phase = (self.phase + 2.0 * PI * p.vib_freq_hz * dt) % (2.0 * PI);

        let weight = if jolt_active {
            p.jolt_weight_reduction
        } else {
            1.0
        };
        let vib_amp_m = p.vib_amp_gain_m * rough * weight;
        Ok(CueFrame {
            t: s.t,
            sway_m: p.sway_gain_m_per_g * lat,
            tilt_m: p.tilt_gain_m_per_g * trend * weight,
            jolt_m: suppress_jolt(
                p.jolt_gain_m_per_g * fast,
                self.guard.mode,
                self.guard_params.opposite_jolt_suppression,
            ),
            vib_m: vib_amp_m * self.phase.sin(),
            guard_mode: self.guard.mode,
            vib_amp_m,
            jolt_active,
        })
    }
}

// ── Threshold engine ────────────────────────────────────────────────────────

/// A discrete longitudinal event: a half-sine bump starting at `start_t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CueEvent {
    pub start_t: f64,
    pub peak_m: f64,
    /// Clipped force and jerk that produced the event.
    pub force_g: f64,
    pub jerk_gps: f64,
}

impl CueEvent {
    fn value_at(&self, t: f64, duration: f64) -> f64 {
        let age = t - self.start_t;
        if (0.0..=duration).contains(&age) {
            self.peak_m * (PI * age / duration).sin()
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone)]
pub struct ThresholdEngine {
    params: ThresholdParams,
    guard_params: AccelGuardParams,
    lat_lpf: OnePoleLpf,
    lon_lpf: OnePoleLpf,
    jerk: JerkEstimator,
    guard: AccelGuardState,
    force_armed: bool,
    jerk_armed: bool,
    events: Vec<CueEvent>,
    last_event: Option<CueEvent>,
    last_t: Option<f64>,
}

impl ThresholdEngine {
    pub fn new(
        params: ThresholdParams,
        guard_params: AccelGuardParams,
    ) -> Result<Self, SynthError> {
        params.validate()?;
        guard_params.validate()?;
        Ok(Self {
            lat_lpf: OnePoleLpf::new(params.lpf_cutoff_hz)?,
            lon_lpf: OnePoleLpf::new(params.lpf_cutoff_hz)?,
            jerk: JerkEstimator::new(),
            guard: AccelGuardState::default(),
            force_armed: true,
            jerk_armed: true,
            events: Vec::new(),
            last_event: None,
            last_t: None,
            params,
            guard_params,
        })
    }

    pub fn params(&self) -> &ThresholdParams {
        &self.params
    }

    pub fn guard(&self) -> AccelGuardState {
        self.guard
    }

    /// Most recently triggered event, if any.
    pub fn last_event(&self) -> Option<CueEvent> {
        self.last_event
    }

    /// Events still contributing to the output.
    pub fn active_events(&self) -> &[CueEvent] {
        &self.events
    }

    pub fn step(&mut self, s: &TelemetrySample) -> Result<CueFrame, SynthError> {
        check_sample(s)?;
        let p = &self.params;
        let Some(dt) = advance_clock(&mut self.last_t, s.t)? else {
            self.lat_lpf.step(s.g_lat, 0.0)?;
            self.lon_lpf.step(s.g_lon, 0.0)?;
            self.jerk.step(s.g_lon, s.t)?;
            return Ok(CueFrame::zero(s.t));
        };

        let lat = self.lat_lpf.step(s.g_lat, dt)?;
        let trend = self.lon_lpf.step(s.g_lon, dt)?;
        let force = s.g_lon.clamp(-p.clip_force_g, p.clip_force_g);
        let jerk = self
            .jerk
            .step(s.g_lon, s.t)?
            .clamp(-p.clip_jerk_gps, p.clip_jerk_gps);
        self.guard = accel_guard_step(self.guard, &self.guard_params, trend, s.t);

        let force_over = force.abs() > p.deadzone_g;
        let jerk_over = jerk.abs() > p.jerk_trigger_gps;
        // Events fire on the rising edge of either condition.
        let fire = (force_over && self.force_armed) || (jerk_over && self.jerk_armed);
        self.force_armed = !force_over;
        self.jerk_armed = !jerk_over;
        if fire {
            let force_term = if force_over {
                p.force_gain_m_per_g * force
            } else {
                0.0
            };
            let event = CueEvent {
                start_t: s.t,
                peak_m: force_term + p.jerk_gain_m_per_gps * jerk,
                force_g: force,
                jerk_gps: jerk,
            };
            self.events.push(event);
            self.last_event = Some(event);
        }

        let duration = p.event_envelope_s;
        self.events.retain(|e| s.t - e.start_t <= duration);
        let superposed: f64 = self.events.iter().map(|e| e.value_at(s.t, duration)).sum();

        Ok(CueFrame {
            t: s.t,
            sway_m: p.sway_gain_m_per_g * lat,
            tilt_m: 0.0,
            jolt_m: suppress_jolt(
                superposed,
                self.guard.mode,
                self.guard_params.opposite_jolt_suppression,
            ),
            vib_m: 0.0,
            guard_mode: self.guard.mode,
            vib_amp_m: 0.0,
            jolt_active: !self.events.is_empty(),
        })
    }
}

// ── Engine selection ────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthMode {
    #[default]
    Smoothed,
    Threshold,
}

impl std::str::FromStr for SynthMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "smoothed" => Ok(SynthMode::Smoothed),
            "threshold" => Ok(SynthMode::Threshold),
            other => Err(format!(
                "unknown mode `{other}` (expected smoothed or threshold)"
            )),
        }
    }
}

#[derive(Debug, Clone)]
pub enum SynthEngine {
    Smoothed(SmoothedEngine),
    Threshold(ThresholdEngine),
}

impl SynthEngine {
    pub fn mode(&self) -> SynthMode {
        match self {
            SynthEngine::Smoothed(_) => SynthMode::Smoothed,
            SynthEngine::Threshold(_) => SynthMode::Threshold,
        }
    }

    pub fn step(&mut self, s: &TelemetrySample) -> Result<CueFrame, SynthError> {
        match self {
            SynthEngine::Smoothed(e) => e.step(s),
            SynthEngine::Threshold(e) => e.step(s),
        }
    }
}
