//! Transition timing on sampled waveforms.

use serde::{Deserialize, Serialize};

use super::AnalogError;
use crate::waveform::Waveform;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiseFall {
    /// Mean rise time over complete rising transitions, ns.
    pub rise_ns: Option<f64>,
    /// Mean fall time over complete falling transitions, ns.
    pub fall_ns: Option<f64>,
    pub rising_count: usize,
    pub falling_count: usize,
}

/// Times between the `lo_frac` and `hi_frac` crossings of the normalised
/// swing (`min` to `max` of `w`), averaged per direction.
///
/// Crossings are interpolated linearly. A transition whose two crossings
/// fall inside one sample interval is unresolved and counts as 0.
pub fn measure_rise_fall(w: &Waveform, lo_frac: f64, hi_frac: f64) -> Result<RiseFall, AnalogError> {
    if !(0.0 < lo_frac && lo_frac < hi_frac && hi_frac < 1.0) {
        return Err(AnalogError::InvalidInput(format!("fractions {lo_frac}, {hi_frac}")));
    }
    if w.len() < 2 || !w.all_finite() {
        return Err(AnalogError::NoTransitions);
    }
    let (min, max) = (w.min(), w.max());
    let swing = max - min;
    if !(swing > 0.0) {
        return Err(AnalogError::NoTransitions);
    }
    let lo = min + lo_frac * swing;
    let hi = min + hi_frac * swing;
    let s = &w.samples;
    let dt = w.sample_period_ns;
    let cross = |k: usize, level: f64| -> (f64, usize) {
        let (a, b) = (s[k - 1], s[k]);
        (k as f64 - 1.0 + (level - a) / (b - a), k)
    };

    let mut rises = Vec::new();
    let mut falls = Vec::new();
    // crossing of the first level, waiting for the second
    let mut rising_from: Option<(f64, usize)> = None;
    let mut falling_from: Option<(f64, usize)> = None;
    for k in 1..s.len() {
        let (a, b) = (s[k - 1], s[k]);
        if a < lo && b >= lo {
            rising_from = Some(cross(k, lo));
        }
        if a > hi && b <= hi {
            falling_from = Some(cross(k, hi));
        }
        if a < hi && b >= hi {
            if let Some((t_lo, k_lo)) = rising_from.take() {
                let (t_hi, k_hi) = cross(k, hi);
                rises.push(if k_hi == k_lo { 0.0 } else { (t_hi - t_lo) * dt });
            }
        }
        if a > lo && b <= lo {
            if let Some((t_hi, k_hi)) = falling_from.take() {
                let (t_lo, k_lo) = cross(k, lo);
                falls.push(if k_hi == k_lo { 0.0 } else { (t_lo - t_hi) * dt });
            }
        }
        if b < lo {
            falling_from = None;
        }
        if b > hi {
            rising_from = None;
        }
    }
    if rises.is_empty() && falls.is_empty() {
        return Err(AnalogError::NoTransitions);
    }
    let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    Ok(RiseFall {
        rise_ns: mean(&rises),
        fall_ns: mean(&falls),
        rising_count: rises.len(),
        falling_count: falls.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ideal_step_is_zero() {
        let w = Waveform::new(1.0, vec![0.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
        let rf = measure_rise_fall(&w, 0.3, 0.7).unwrap();
        assert_eq!((rf.rise_ns, rf.fall_ns), (Some(0.0), Some(0.0)));
    }

    #[test]
    fn single_pole_oracle() {
        let tau = 100.0;
        let w = Waveform::from_fn(0.1, 20_000, |t| if t < 200.0 { 0.0 } else { 1.0 - (-(t - 200.0) / tau).exp() });
        let rf = measure_rise_fall(&w, 0.3, 0.7).unwrap();
        // 1 − e^{−t/τ} crosses 0.3 at τ·ln(1/0.7) and 0.7 at τ·ln(1/0.3)
        let expected = tau * ((1.0f64 / 0.3).ln() - (1.0f64 / 0.7).ln());
        assert!((rf.rise_ns.unwrap() - expected).abs() < 0.05 * tau / 100.0 + 0.01);
        assert!((expected / tau - 0.847).abs() < 1e-3);
        assert_eq!(rf.fall_ns, None);
    }

    #[test]
    fn flat_waveform_has_no_transitions() {
        let w = Waveform::new(1.0, vec![2.0; 10]);
        assert_eq!(measure_rise_fall(&w, 0.3, 0.7), Err(AnalogError::NoTransitions));
        assert!(measure_rise_fall(&w, 0.7, 0.3).is_err());
    }
}
