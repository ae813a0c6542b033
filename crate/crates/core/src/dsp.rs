//! Single-sample signal primitives.
//!
//! All filters take the actual sample interval on every step, so they stay
//! stable on a jittery 60-65 Hz feed.

use std::collections::VecDeque;
use std::f64::consts::PI;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DspError {
    #[error("non-finite input {0}")]
    NonFiniteInput(f64),
    #[error("sample interval must be positive, got {0}")]
    NonPositiveDt(f64),
    #[error("time went backwards: {t} < {last}")]
    NonMonotonicTime { t: f64, last: f64 },
    #[error("invalid filter parameter: {0}")]
    InvalidParameter(String),
}

/// Smoothing coefficient of a one-pole low-pass with the exact pole mapping.
pub fn one_pole_alpha(cutoff_hz: f64, dt: f64) -> f64 {
    1.0 - (-2.0 * PI * cutoff_hz * dt).exp()
}

fn check_finite(x: f64) -> Result<(), DspError> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(DspError::NonFiniteInput(x))
    }
}

/// One-pole low-pass filter. The first sample initializes the state, so
/// there is no startup transient.
#[derive(Debug, Clone)]
pub struct OnePoleLpf {
    cutoff_hz: f64,
    y_prev: Option<f64>,
}

impl OnePoleLpf {
    pub fn new(cutoff_hz: f64) -> Result<Self, DspError> {
        if !(cutoff_hz.is_finite() && cutoff_hz > 0.0) {
            return Err(DspError::InvalidParameter(format!(
                "cutoff must be > 0, got {cutoff_hz}"
            )));
        }
        Ok(Self {
            cutoff_hz,
            y_prev: None,
        })
    }

    pub fn cutoff_hz(&self) -> f64 {
        self.cutoff_hz
    }

    pub fn output(&self) -> Option<f64> {
        self.y_prev
    }

    /// Advances the filter by one sample. `dt` is ignored on the priming call.
    pub fn step(&mut self, x: f64, dt: f64) -> Result<f64, DspError> {
        check_finite(x)?;
        let y = match self.y_prev {
            None => x,
            Some(prev) => {
                if !(dt > 0.0 && dt.is_finite()) {
                    return Err(DspError::NonPositiveDt(dt));
                }
                prev + one_pole_alpha(self.cutoff_hz, dt) * (x - prev)
            }
        };
        self.y_prev = Some(y);
        Ok(y)
    }

    pub fn reset(&mut self) {
        self.y_prev = None;
    }
}

/// Complementary one-pole high-pass: input minus an inner low-pass.
#[derive(Debug, Clone)]
pub struct OnePoleHpf {
    inner: OnePoleLpf,
}

impl OnePoleHpf {
    pub fn new(cutoff_hz: f64) -> Result<Self, DspError> {
        Ok(Self {
            inner: OnePoleLpf::new(cutoff_hz)?,
        })
    }

    pub fn cutoff_hz(&self) -> f64 {
        self.inner.cutoff_hz()
    }

    pub fn step(&mut self, x: f64, dt: f64) -> Result<f64, DspError> {
        Ok(self.split(x, dt)?.1)
    }

    /// Returns `(low, high)` from one shared state, with `high = x - low`.
    pub fn split(&mut self, x: f64, dt: f64) -> Result<(f64, f64), DspError> {
        let low = self.inner.step(x, dt)?;
        Ok((low, x - low))
    }

    pub fn reset(&mut self) {
        self.inner.reset();
    }
}

/// Trailing-window RMS over true timestamps.
#[derive(Debug, Clone)]
pub struct RmsWindow {
    window_s: f64,
    entries: VecDeque<(f64, f64)>,
}

impl RmsWindow {
    pub fn new(window_s: f64) -> Result<Self, DspError> {
        if !(window_s.is_finite() && window_s > 0.0) {
            return Err(DspError::InvalidParameter(format!(
                "window must be > 0, got {window_s}"
            )));
        }
        Ok(Self {
            window_s,
            entries: VecDeque::new(),
        })
    }

    pub fn window_s(&self) -> f64 {
        self.window_s
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Inserts `x` at time `t` and returns the RMS over `(t - window, t]`.
    pub fn step(&mut self, x: f64, t: f64) -> Result<f64, DspError> {
        check_finite(x)?;
        check_finite(t)?;
        if let Some(&(last, _)) = self.entries.back() {
            if t < last {
                return Err(DspError::NonMonotonicTime { t, last });
            }
        }
        self.entries.push_back((t, x * x));
        let horizon = t - self.window_s;
        while let Some(&(te, _)) = self.entries.front() {
            if te <= horizon {
                self.entries.pop_front();
            } else {
                break;
            }
        }
        // Summing a handful of entries per step avoids running-sum drift.
        let sum: f64 = self.entries.iter().map(|&(_, sq)| sq).sum();
        Ok((sum / self.entries.len() as f64).sqrt())
    }
}

/// Backward finite-difference derivative in units per second.
#[derive(Debug, Clone, Default)]
pub struct JerkEstimator {
    prev: Option<(f64, f64)>,
}

impl JerkEstimator {
    pub fn new() -> Self {
        Self::default()
    }

    /// First call primes the state and returns 0.
    pub fn step(&mut self, x: f64, t: f64) -> Result<f64, DspError> {
        check_finite(x)?;
        check_finite(t)?;
        let out = match self.prev {
            None => 0.0,
            Some((x_prev, t_prev)) => {
                let dt = t - t_prev;
                if dt <= 0.0 {
                    return Err(DspError::NonPositiveDt(dt));
                }
                (x - x_prev) / dt
            }
        };
        self.prev = Some((x, t));
        Ok(out)
    }
}
