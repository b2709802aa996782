//! Amplitude-shift keying of the laser between two power levels.

use serde::{Deserialize, Serialize};

use super::TelemetryError;
use crate::waveform::Waveform;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AskParams {
    pub p_high_mw: f64,
    pub p_low_mw: f64,
    /// 10–90 % transition time, ns.
    pub edge_time_ns: f64,
    pub sample_period_ns: f64,
}

impl Default for AskParams {
    fn default() -> Self {
        Self {
            p_high_mw: 28.0,
            p_low_mw: 20.0,
            edge_time_ns: 50.0,
            sample_period_ns: 10.0,
        }
    }
}

impl AskParams {
    pub fn validate(&self) -> Result<(), TelemetryError> {
        let ok = self.p_low_mw >= 0.0
            && self.p_high_mw >= self.p_low_mw
            && self.p_high_mw.is_finite()
            && self.edge_time_ns > 0.0
            && self.sample_period_ns > 0.0
            && self.sample_period_ns <= self.edge_time_ns / 5.0;
        if ok {
            Ok(())
        } else {
            Err(TelemetryError::InvalidParams(format!("{self:?}")))
        }
    }

    pub fn time_constant_ns(&self) -> f64 {
        self.edge_time_ns / 9f64.ln()
    }

    pub fn mean_mw(&self) -> f64 {
        0.5 * (self.p_high_mw + self.p_low_mw)
    }

    /// `(p_high − p_low) / (p_high + p_low)`.
    pub fn modulation_depth(&self) -> f64 {
        (self.p_high_mw - self.p_low_mw) / (self.p_high_mw + self.p_low_mw)
    }

    /// Levels with the given mean and depth.
    pub fn with_mean_and_depth(self, mean_mw: f64, depth: f64) -> Self {
        Self {
            p_high_mw: mean_mw * (1.0 + depth),
            p_low_mw: mean_mw * (1.0 - depth),
            ..self
        }
    }
}

/// Optical power of an ASK half-symbol stream at arbitrary non-decreasing
/// times. Each value is exact for a single-pole response to the symbol
/// sequence, starting settled on the first symbol. After the last symbol the
/// final level is held.
#[derive(Debug, Clone)]
pub struct AskSampler {
    symbols: Vec<bool>,
    half_ns: f64,
    tau_ns: f64,
    p_high: f64,
    p_low: f64,
    t_start: f64,
    segment: usize,
    segment_start_value: f64,
}

impl AskSampler {
    pub fn new(symbols: Vec<bool>, bitrate_kbps: f64, params: &AskParams, t_start_ns: f64) -> Result<Self, TelemetryError> {
        params.validate()?;
        if symbols.is_empty() {
            return Err(TelemetryError::EmptyStream);
        }
        if !(bitrate_kbps > 0.0) {
            return Err(TelemetryError::InvalidParams(format!("bitrate {bitrate_kbps}")));
        }
        let level = |s: bool| if s { params.p_high_mw } else { params.p_low_mw };
        Ok(Self {
            segment_start_value: level(symbols[0]),
            symbols,
            half_ns: 0.5e6 / bitrate_kbps,
            tau_ns: params.time_constant_ns(),
            p_high: params.p_high_mw,
            p_low: params.p_low_mw,
            t_start: t_start_ns,
            segment: 0,
        })
    }

    pub fn duration_ns(&self) -> f64 {
        self.symbols.len() as f64 * self.half_ns
    }

    fn level(&self, k: usize) -> f64 {
        if self.symbols[k] {
            self.p_high
        } else {
            self.p_low
        }
    }

    pub fn sample(&mut self, t_ns: f64) -> f64 {
        let rel = (t_ns - self.t_start).max(0.0);
        let last = self.symbols.len() - 1;
        let want = ((rel / self.half_ns) as usize).min(last);
        let decay = (-self.half_ns / self.tau_ns).exp();
        while self.segment < want {
            let target = self.level(self.segment);
            self.segment_start_value = target + (self.segment_start_value - target) * decay;
            self.segment += 1;
        }
        let target = self.level(self.segment);
        let local = rel - self.segment as f64 * self.half_ns;
        target + (self.segment_start_value - target) * (-local / self.tau_ns).exp()
    }
}

/// Samples the modulated laser power over the whole symbol stream.
pub fn ask_modulate(symbols: &[bool], bitrate_kbps: f64, params: &AskParams) -> Result<Waveform, TelemetryError> {
    let mut sampler = AskSampler::new(symbols.to_vec(), bitrate_kbps, params, 0.0)?;
    let n = (sampler.duration_ns() / params.sample_period_ns).round() as usize;
    Ok(Waveform::from_fn(params.sample_period_ns, n, |t| sampler.sample(t)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analog::measure_rise_fall;
    use crate::telemetry::manchester_encode;

    #[test]
    fn nominal_levels_average_twenty_four() {
        let bits: Vec<bool> = (0..500).map(|i| (i * 7 + i / 3) % 5 < 2).collect();
        let w = ask_modulate(&manchester_encode(&bits).unwrap(), 600.0, &AskParams::default()).unwrap();
        assert!((w.mean() - 24.0).abs() / 24.0 < 0.005, "{}", w.mean());
        assert!((AskParams::default().modulation_depth() - 1.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn edge_time_is_fifty_ns() {
        let params = AskParams {
            sample_period_ns: 0.5,
            ..AskParams::default()
        };
        let w = ask_modulate(&manchester_encode(&[true, false, true, true]).unwrap(), 600.0, &params).unwrap();
        let rf = measure_rise_fall(&w, 0.1, 0.9).unwrap();
        assert!((rf.rise_ns.unwrap() - 50.0).abs() < 0.5);
        assert!((rf.fall_ns.unwrap() - 50.0).abs() < 0.5);
    }

    #[test]
    fn zero_depth_is_constant() {
        let params = AskParams {
            p_high_mw: 24.0,
            p_low_mw: 24.0,
            ..AskParams::default()
        };
        let w = ask_modulate(&manchester_encode(&[true, false, false]).unwrap(), 600.0, &params).unwrap();
        assert!(w.samples.iter().all(|&p| p == 24.0));
    }

    #[test]
    fn sampler_matches_closed_form() {
        let params = AskParams::default();
        let tau = params.time_constant_ns();
        let half = 0.5e6 / 600.0;
        let mut s = AskSampler::new(vec![false, true, true, false], 600.0, &params, 0.0).unwrap();
        // one symbol into a rise from settled low
        let t = half + 30.0;
        let expected = 28.0 - 8.0 * (-30.0 / tau).exp();
        assert!((s.sample(t) - expected).abs() < 1e-12);
        // fall starts from the value reached after two high half-symbols
        let v_at_fall = 28.0 - 8.0 * (-2.0 * half / tau).exp();
        let expected = 20.0 + (v_at_fall - 20.0) * (-10.0 / tau).exp();
        assert!((s.sample(3.0 * half + 10.0) - expected).abs() < 1e-12);
    }

    #[test]
    fn rejects_coarse_sampling() {
        let params = AskParams {
            sample_period_ns: 11.0,
            ..AskParams::default()
        };
        assert!(ask_modulate(&[true, false], 600.0, &params).is_err());
    }
}
