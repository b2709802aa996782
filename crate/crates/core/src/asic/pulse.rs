//! Constant-current pulse generation and charge accounting.

use serde::{Deserialize, Serialize};

use super::AsicError;
use crate::waveform::Waveform;

pub const CLOCK_KHZ: f64 = 600.0;

/// Current DAC with 256 codes over [0, 500 µA).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DacModel {
    pub gain_error: f64,
    pub offset_ua: f64,
    pub full_scale_ua: f64,
}

impl Default for DacModel {
    fn default() -> Self {
        Self {
            gain_error: 0.08,
            offset_ua: 0.0,
            full_scale_ua: 500.0,
        }
    }
}

impl DacModel {
    pub fn ideal() -> Self {
        Self {
            gain_error: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), AsicError> {
        if self.gain_error.abs() < 0.2 && self.offset_ua.is_finite() && self.full_scale_ua > 0.0 {
            Ok(())
        } else {
            Err(AsicError::InvalidParams(format!("{self:?}")))
        }
    }

    pub fn lsb_ua(&self) -> f64 {
        self.full_scale_ua / 256.0
    }

    pub fn target_ua(&self, code: u8) -> f64 {
        code as f64 * self.lsb_ua()
    }

    /// Nearest code, saturating at the top of the range.
    pub fn code_for(&self, target_ua: f64) -> u8 {
        (target_ua / self.lsb_ua()).round().clamp(0.0, 255.0) as u8
    }

    pub fn actual_ua(&self, code: u8) -> f64 {
        (self.target_ua(code) * (1.0 + self.gain_error) + self.offset_ua).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    CathodicFirst,
    AnodicFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseShape {
    Biphasic,
    Monophasic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StimParams {
    pub amplitude_code: u8,
    pub phase1_us: f64,
    pub interphase_us: f64,
    pub phase2_us: f64,
    pub polarity: Polarity,
    pub shape: PulseShape,
}

pub const DEFAULT_INTERPHASE_US: f64 = 20.0;

impl Default for StimParams {
    fn default() -> Self {
        Self::biphasic(250.0, 500.0, &DacModel::default())
    }
}

impl StimParams {
    /// Symmetric cathodic-first pulse, amplitude rounded to the nearest code.
    pub fn biphasic(amplitude_ua: f64, phase_us: f64, dac: &DacModel) -> Self {
        Self {
            amplitude_code: dac.code_for(amplitude_ua),
            phase1_us: phase_us,
            interphase_us: DEFAULT_INTERPHASE_US,
            phase2_us: phase_us,
            polarity: Polarity::CathodicFirst,
            shape: PulseShape::Biphasic,
        }
    }

    pub fn monophasic(amplitude_ua: f64, phase_us: f64, dac: &DacModel) -> Self {
        Self {
            shape: PulseShape::Monophasic,
            interphase_us: 0.0,
            phase2_us: 0.0,
            ..Self::biphasic(amplitude_ua, phase_us, dac)
        }
    }

    pub fn validate(&self) -> Result<(), AsicError> {
        let ok = [self.phase1_us, self.interphase_us, self.phase2_us]
            .iter()
            .all(|d| *d >= 0.0 && d.is_finite());
        if ok {
            Ok(())
        } else {
            Err(AsicError::InvalidParams(format!("{self:?}")))
        }
    }

    /// Whole pulse length including the interphase gap, µs.
    pub fn duration_us(&self) -> f64 {
        match self.shape {
            PulseShape::Biphasic => self.phase1_us + self.interphase_us + self.phase2_us,
            PulseShape::Monophasic => self.phase1_us,
        }
    }
}

pub fn tick_ns(clock_khz: f64) -> f64 {
    1e6 / clock_khz
}

/// Durations in whole clock ticks.
pub fn to_ticks(us: f64, clock_khz: f64) -> u32 {
    (us * clock_khz / 1e3).round() as u32
}

/// Electrode current in µA, one sample per clock tick, starting at the
/// pulse onset and ending with one idle tick. Cathodic current is negative.
pub fn generate_pulse(p: &StimParams, dac: &DacModel, clock_khz: f64) -> Result<Waveform, AsicError> {
    p.validate()?;
    dac.validate()?;
    if !(clock_khz > 0.0) {
        return Err(AsicError::InvalidParams(format!("clock {clock_khz} kHz")));
    }
    let magnitude = dac.actual_ua(p.amplitude_code);
    let first = match p.polarity {
        Polarity::CathodicFirst => -magnitude,
        Polarity::AnodicFirst => magnitude,
    };
    let mut samples = vec![first; to_ticks(p.phase1_us, clock_khz) as usize];
    if p.shape == PulseShape::Biphasic {
        samples.extend(std::iter::repeat_n(0.0, to_ticks(p.interphase_us, clock_khz) as usize));
        samples.extend(std::iter::repeat_n(-first, to_ticks(p.phase2_us, clock_khz) as usize));
    }
    samples.push(0.0);
    Ok(Waveform::new(tick_ns(clock_khz), samples))
}

/// Net charge of a current waveform in µA, nC.
pub fn charge_balance(i_ua: &Waveform) -> f64 {
    // µA · ns = 1e-6 nC
    i_ua.integral() * 1e-6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchedulePlan {
    pub electrodes: Vec<u16>,
    pub refresh_hz: f64,
    pub frame_period_us: f64,
    pub pulse_duration_us: f64,
    pub slack_us: f64,
}

pub const MAX_REFRESH_HZ: f64 = 60.0;

/// Checks that one simultaneous pulse on every listed electrode fits in a
/// refresh frame.
pub fn frame_schedule(electrodes: &[u16], pulse: &StimParams, refresh_hz: f64) -> Result<SchedulePlan, AsicError> {
    if !(refresh_hz > 0.0 && refresh_hz <= MAX_REFRESH_HZ) {
        return Err(AsicError::Schedule(format!("refresh {refresh_hz} Hz outside (0, {MAX_REFRESH_HZ}]")));
    }
    if let Some(bad) = electrodes.iter().find(|&&e| e > 255) {
        return Err(AsicError::Schedule(format!("electrode index {bad}")));
    }
    pulse.validate()?;
    let frame_period_us = 1e6 / refresh_hz;
    let pulse_duration_us = if electrodes.is_empty() { 0.0 } else { pulse.duration_us() };
    if pulse_duration_us > frame_period_us {
        return Err(AsicError::Schedule(format!(
            "{pulse_duration_us} µs pulse exceeds the {frame_period_us:.1} µs frame"
        )));
    }
    Ok(SchedulePlan {
        electrodes: electrodes.to_vec(),
        refresh_hz,
        frame_period_us,
        pulse_duration_us,
        slack_us: frame_period_us - pulse_duration_us,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dac_codes() {
        let dac = DacModel::default();
        assert_eq!(dac.code_for(250.0), 128);
        assert_eq!(dac.target_ua(128), 250.0);
        assert_eq!(dac.code_for(10_000.0), 255);
        assert!((dac.actual_ua(128) - 270.0).abs() < 1e-9);
    }

    #[test]
    fn biphasic_shape_and_timing() {
        let p = StimParams::biphasic(250.0, 500.0, &DacModel::ideal());
        let w = generate_pulse(&p, &DacModel::ideal(), CLOCK_KHZ).unwrap();
        assert!((w.sample_period_ns - 1e6 / 600.0).abs() < 1e-9);
        // 300 + 12 + 300 ticks and one idle tick
        assert_eq!(w.len(), 613);
        assert!(w.samples[..300].iter().all(|&i| i == -250.0));
        assert!(w.samples[300..312].iter().all(|&i| i == 0.0));
        assert!(w.samples[312..612].iter().all(|&i| i == 250.0));
        assert_eq!(charge_balance(&w), 0.0);
    }

    #[test]
    fn monophasic_charge() {
        let dac = DacModel::ideal();
        let w = generate_pulse(&StimParams::monophasic(250.0, 500.0, &dac), &dac, CLOCK_KHZ).unwrap();
        assert!((charge_balance(&w).abs() - 125.0).abs() < 1e-9);
    }

    #[test]
    fn anodic_first_flips_sign() {
        let dac = DacModel::ideal();
        let p = StimParams {
            polarity: Polarity::AnodicFirst,
            ..StimParams::biphasic(100.0, 100.0, &dac)
        };
        let w = generate_pulse(&p, &dac, CLOCK_KHZ).unwrap();
        assert!(w.samples[0] > 0.0 && w.samples[w.len() - 2] < 0.0);
    }

    #[test]
    fn schedules() {
        let all: Vec<u16> = (0..256).collect();
        let p = StimParams::default();
        let plan = frame_schedule(&all, &p, 60.0).unwrap();
        assert!((plan.pulse_duration_us - 1020.0).abs() < 1e-9);
        let long = StimParams {
            phase1_us: 17_000.0,
            shape: PulseShape::Monophasic,
            ..p
        };
        assert!(frame_schedule(&all, &long, 60.0).is_err());
        assert!(frame_schedule(&all, &p, 61.0).is_err());
        assert_eq!(frame_schedule(&[], &long, 60.0).unwrap().pulse_duration_us, 0.0);
    }
}
