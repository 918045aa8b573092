//! Sigmoidal shifting sequence `eta_t` and per-step drift `alpha_t = eta_t - eta_{t-1}`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// How the sigmoid is mapped onto the sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScheduleMode {
    /// `eta_t = s(t)` with `eta_0 = s(0)`.
    Raw,
    /// `eta_t = (s(t) - s(0)) / (s(T) - s(0))`, pinning `eta_0 = 0` and `eta_T = 1`.
    #[default]
    Normalized,
}

impl ScheduleMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ScheduleMode::Raw => "raw",
            ScheduleMode::Normalized => "normalized",
        }
    }
}

impl fmt::Display for ScheduleMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScheduleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(ScheduleMode::Raw),
            "normalized" => Ok(ScheduleMode::Normalized),
            other => Err(Error::Parameter(format!("unknown schedule mode `{other}`"))),
        }
    }
}

/// Midpoint used when none is given: `T/2 + 0.5`.
pub fn default_t_mid(steps: usize) -> f64 {
    steps as f64 / 2.0 + 0.5
}

/// Immutable shifting sequence `eta_0..=eta_T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule<T> {
    steps: usize,
    t_mid: T,
    etas: Vec<T>,
    mode: ScheduleMode,
}

fn sigmoid<T: Real>(t: T, t_mid: T) -> T {
    T::one() / (T::one() + (-(t - t_mid)).exp())
}

impl<T: Real> Schedule<T> {
    /// Builds the sequence for `steps` diffusion steps centred at `t_mid`.
    pub fn build(steps: usize, t_mid: T, mode: ScheduleMode) -> Result<Self> {
        if steps < 2 {
            return Err(Error::Parameter(format!("steps must be >= 2, got {steps}")));
        }
        let upper = T::from_usize_lossy(steps);
        if !(t_mid > T::zero() && t_mid < upper) {
            return Err(Error::Parameter(format!(
                "t_mid must lie in (0, {steps}), got {t_mid}"
            )));
        }

        let raw: Vec<T> = (0..=steps)
            .map(|t| sigmoid(T::from_usize_lossy(t), t_mid))
            .collect();
        let etas = match mode {
            ScheduleMode::Raw => raw,
            ScheduleMode::Normalized => {
                let lo = raw[0];
                let span = raw[steps] - lo;
                let mut etas: Vec<T> = raw.iter().map(|&s| (s - lo) / span).collect();
                etas[0] = T::zero();
                etas[steps] = T::one();
                etas
            }
        };

        let schedule = Schedule {
            steps,
            t_mid,
            etas,
            mode,
        };
        if let Some(t) = (1..=steps).find(|&t| schedule.etas[t] <= schedule.etas[t - 1]) {
            return Err(Error::Parameter(format!(
                "schedule is not strictly increasing at t={t} (precision exhausted)"
            )));
        }
        Ok(schedule)
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn t_mid(&self) -> T {
        self.t_mid
    }

    pub fn mode(&self) -> ScheduleMode {
        self.mode
    }

    /// All `T + 1` values, index 0 being the start anchor.
    pub fn etas(&self) -> &[T] {
        &self.etas
    }

    pub fn eta(&self, t: usize) -> Result<T> {
        self.etas.get(t).copied().ok_or(Error::Index {
            index: t,
            lo: 0,
            hi: self.steps,
        })
    }

    /// Drift `eta_t - eta_{t-1}` for `1 <= t <= T`.
    pub fn alpha(&self, t: usize) -> Result<T> {
        if t == 0 || t > self.steps {
            return Err(Error::Index {
                index: t,
                lo: 1,
                hi: self.steps,
            });
        }
        Ok(self.etas[t] - self.etas[t - 1])
    }

    /// CSV table with header `t,eta,alpha`, one row per step `1..=T`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,eta,alpha\n");
        for t in 1..=self.steps {
            let alpha = self.etas[t] - self.etas[t - 1];
            out.push_str(&format!("{t},{},{}\n", self.etas[t], alpha));
        }
        out
    }
}
