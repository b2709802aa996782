//! Reverse-biased photodiode receiver.

use serde::{Deserialize, Serialize};

use super::AnalogError;
use crate::waveform::Waveform;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Photodiode {
    pub responsivity_ma_per_mw: f64,
    /// First-order −3 dB bandwidth, MHz.
    pub bandwidth_mhz: f64,
}

impl Default for Photodiode {
    fn default() -> Self {
        Self {
            responsivity_ma_per_mw: 0.55,
            bandwidth_mhz: 3.7,
        }
    }
}

impl Photodiode {
    pub fn time_constant_ns(&self) -> f64 {
        1e3 / (2.0 * std::f64::consts::PI * self.bandwidth_mhz)
    }

    pub fn validate(&self) -> Result<(), AnalogError> {
        if self.responsivity_ma_per_mw >= 0.0
            && self.responsivity_ma_per_mw.is_finite()
            && self.bandwidth_mhz > 0.0
            && self.bandwidth_mhz.is_finite()
        {
            Ok(())
        } else {
            Err(AnalogError::InvalidModel(format!("{self:?}")))
        }
    }
}

/// Streaming single-pole low-pass on the photocurrent.
#[derive(Debug, Clone)]
pub struct PhotodiodeFilter {
    responsivity: f64,
    keep: f64,
    current_ma: f64,
}

impl PhotodiodeFilter {
    /// Starts settled at the photocurrent of `initial_p_mw`.
    pub fn new(pd: Photodiode, sample_period_ns: f64, initial_p_mw: f64) -> Result<Self, AnalogError> {
        pd.validate()?;
        if !(sample_period_ns > 0.0 && sample_period_ns.is_finite()) {
            return Err(AnalogError::InvalidInput(format!("sample period {sample_period_ns} ns")));
        }
        Ok(Self {
            responsivity: pd.responsivity_ma_per_mw,
            keep: (-sample_period_ns / pd.time_constant_ns()).exp(),
            current_ma: pd.responsivity_ma_per_mw * initial_p_mw.max(0.0),
        })
    }

    pub fn step(&mut self, p_mw: f64) -> f64 {
        let target = self.responsivity * p_mw.max(0.0);
        self.current_ma = target + (self.current_ma - target) * self.keep;
        self.current_ma
    }
}

/// Band-limited photocurrent (mA) for optical power `p_in` (mW).
pub fn photodiode_current(pd: &Photodiode, p_in: &Waveform) -> Result<Waveform, AnalogError> {
    if let Some(bad) = p_in.samples.iter().find(|p| !(**p >= 0.0 && p.is_finite())) {
        return Err(AnalogError::InvalidInput(format!("optical power {bad} mW")));
    }
    let first = p_in.samples.first().copied().unwrap_or(0.0);
    let mut filter = PhotodiodeFilter::new(*pd, p_in.sample_period_ns, first)?;
    Ok(Waveform::starting_at(
        p_in.t0_ns,
        p_in.sample_period_ns,
        p_in.samples.iter().map(|&p| filter.step(p)).collect(),
    ))
}
