//! Uniformly sampled time series.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

/// A uniformly sampled scalar signal. The unit is set by context (mW for
/// optical power, V for voltages, mA or µA for currents).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waveform {
    /// Time of the first sample, ns.
    pub t0_ns: f64,
    pub sample_period_ns: f64,
    pub samples: Vec<f64>,
}

impl Waveform {
    pub fn new(sample_period_ns: f64, samples: Vec<f64>) -> Self {
        Self::starting_at(0.0, sample_period_ns, samples)
    }

    pub fn starting_at(t0_ns: f64, sample_period_ns: f64, samples: Vec<f64>) -> Self {
        assert!(
            sample_period_ns > 0.0 && sample_period_ns.is_finite(),
            "sample period must be positive"
        );
        Self {
            t0_ns,
            sample_period_ns,
            samples,
        }
    }

    /// Samples `f(t)` on `n` points spaced `sample_period_ns` apart from zero.
    pub fn from_fn<F: FnMut(f64) -> f64>(sample_period_ns: f64, n: usize, mut f: F) -> Self {
        let samples = (0..n).map(|i| f(i as f64 * sample_period_ns)).collect();
        Self::new(sample_period_ns, samples)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn time_ns(&self, index: usize) -> f64 {
        self.t0_ns + index as f64 * self.sample_period_ns
    }

    pub fn duration_ns(&self) -> f64 {
        self.samples.len() as f64 * self.sample_period_ns
    }

    pub fn mean(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.samples.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.samples.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Self {
        Self {
            t0_ns: self.t0_ns,
            sample_period_ns: self.sample_period_ns,
            samples: self.samples.iter().map(|&x| f(x)).collect(),
        }
    }

    /// Trapezoid-free integral: sum of samples times the sample period.
    /// Exact for piecewise-constant signals held over each sample.
    pub fn integral(&self) -> f64 {
        self.samples.iter().sum::<f64>() * self.sample_period_ns
    }

    pub fn all_finite(&self) -> bool {
        self.samples.iter().all(|x| x.is_finite())
    }

    /// Writes `time_ns,<column>` CSV rows.
    pub fn write_csv<W: Write>(&self, mut out: W, column: &str) -> io::Result<()> {
        writeln!(out, "time_ns,{column}")?;
        for (i, v) in self.samples.iter().enumerate() {
            writeln!(out, "{},{}", self.time_ns(i), v)?;
        }
        Ok(())
    }
}

/// Voltage/current pairs on a shared time base (V, mA).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElectricalWaveform {
    pub t0_ns: f64,
    pub sample_period_ns: f64,
    pub voltage: Vec<f64>,
    pub current_ma: Vec<f64>,
}

impl ElectricalWaveform {
    pub fn len(&self) -> usize {
        self.voltage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voltage.is_empty()
    }

    pub fn voltage_waveform(&self) -> Waveform {
        Waveform::starting_at(self.t0_ns, self.sample_period_ns, self.voltage.clone())
    }

    pub fn current_waveform(&self) -> Waveform {
        Waveform::starting_at(self.t0_ns, self.sample_period_ns, self.current_ma.clone())
    }

    /// Time-averaged electrical power, mW.
    pub fn mean_power_mw(&self) -> f64 {
        if self.voltage.is_empty() {
            return 0.0;
        }
        let sum: f64 = self
            .voltage
            .iter()
            .zip(&self.current_ma)
            .map(|(v, i)| v * i)
            .sum();
        sum / self.voltage.len() as f64
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "time_ns,voltage_v,current_ma")?;
        for (i, (v, c)) in self.voltage.iter().zip(&self.current_ma).enumerate() {
            writeln!(out, "{},{},{}", self.t0_ns + i as f64 * self.sample_period_ns, v, c)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_header_and_rows() {
        let w = Waveform::new(10.0, vec![1.0, 2.5]);
        let mut buf = Vec::new();
        w.write_csv(&mut buf, "power_mw").unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "time_ns,power_mw\n0,1\n10,2.5\n");
    }

    #[test]
    fn integral_of_constant() {
        let w = Waveform::new(2.0, vec![3.0; 5]);
        assert_eq!(w.integral(), 30.0);
    }
}
