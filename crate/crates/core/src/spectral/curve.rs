use std::io::Read;

use serde::{Deserialize, Serialize};

use super::SpectralError;

/// Tabulated wavelength → value function with linear interpolation.
///
/// Evaluation outside the tabulated range is an error; the curve never
/// extrapolates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralCurve {
    wavelengths_nm: Vec<f64>,
    values: Vec<f64>,
}

impl SpectralCurve {
    pub fn new(samples: Vec<(f64, f64)>) -> Result<Self, SpectralError> {
        if samples.is_empty() {
            return Err(SpectralError::InvalidCurve("curve has no samples".into()));
        }
        for w in samples.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(SpectralError::InvalidCurve(format!(
                    "wavelengths not strictly increasing at {} nm",
                    w[1].0
                )));
            }
        }
        if let Some(&(nm, v)) = samples.iter().find(|(nm, v)| !nm.is_finite() || !v.is_finite() || *v < 0.0) {
            return Err(SpectralError::InvalidCurve(format!(
                "value {v} at {nm} nm must be finite and non-negative"
            )));
        }
        let (wavelengths_nm, values) = samples.into_iter().unzip();
        Ok(Self {
            wavelengths_nm,
            values,
        })
    }

    /// Samples `f` on a regular grid `[from, to]` with spacing `step`.
    pub fn tabulate<F: Fn(f64) -> f64>(from: f64, to: f64, step: f64, f: F) -> Result<Self, SpectralError> {
        let n = ((to - from) / step + 1e-9).floor() as usize + 1;
        let samples = (0..n)
            .map(|i| {
                let nm = from + i as f64 * step;
                (nm, f(nm))
            })
            .collect();
        Self::new(samples)
    }

    /// Reads a `wavelength_nm,value` CSV table with a header row.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self, SpectralError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut samples = Vec::new();
        for record in rdr.deserialize() {
            let row: CsvRow = record.map_err(|e| SpectralError::Csv(e.to_string()))?;
            samples.push((row.wavelength_nm, row.value));
        }
        Self::new(samples)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("wavelength_nm,value\n");
        for (nm, v) in self.wavelengths_nm.iter().zip(&self.values) {
            out.push_str(&format!("{nm},{v}\n"));
        }
        out
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.wavelengths_nm[0], self.wavelengths_nm[self.wavelengths_nm.len() - 1])
    }

    pub fn contains(&self, nm: f64) -> bool {
        let (lo, hi) = self.domain();
        nm >= lo && nm <= hi
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.wavelengths_nm.iter().copied().zip(self.values.iter().copied())
    }

    pub fn eval(&self, nm: f64) -> Result<f64, SpectralError> {
        let (lo, hi) = self.domain();
        if !(nm >= lo && nm <= hi) {
            return Err(SpectralError::OutOfDomain {
                wavelength_nm: nm,
                min_nm: lo,
                max_nm: hi,
            });
        }
        let idx = self.wavelengths_nm.partition_point(|&w| w <= nm);
        if idx == 0 {
            return Ok(self.values[0]);
        }
        if idx == self.wavelengths_nm.len() {
            return Ok(self.values[idx - 1]);
        }
        let (x0, x1) = (self.wavelengths_nm[idx - 1], self.wavelengths_nm[idx]);
        let (y0, y1) = (self.values[idx - 1], self.values[idx]);
        Ok(y0 + (y1 - y0) * (nm - x0) / (x1 - x0))
    }

    /// Returns a copy with every value multiplied by `factor` (must be ≥ 0).
    pub fn scaled(&self, factor: f64) -> Self {
        assert!(factor >= 0.0 && factor.is_finite());
        Self {
            wavelengths_nm: self.wavelengths_nm.clone(),
            values: self.values.iter().map(|v| v * factor).collect(),
        }
    }

    /// Replaces the value at an existing sample wavelength.
    pub fn with_value_at(mut self, nm: f64, value: f64) -> Result<Self, SpectralError> {
        let idx = self
            .wavelengths_nm
            .iter()
            .position(|&w| w == nm)
            .ok_or_else(|| SpectralError::InvalidCurve(format!("no sample at {nm} nm")))?;
        if !(value.is_finite() && value >= 0.0) {
            return Err(SpectralError::InvalidCurve(format!("bad value {value}")));
        }
        self.values[idx] = value;
        Ok(self)
    }
}

#[derive(Deserialize)]
struct CsvRow {
    wavelength_nm: f64,
    value: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp() -> SpectralCurve {
        SpectralCurve::new(vec![(400.0, 0.0), (500.0, 1.0), (600.0, 3.0)]).unwrap()
    }

    #[test]
    fn interpolates_linearly() {
        let c = ramp();
        assert_eq!(c.eval(450.0).unwrap(), 0.5);
        assert_eq!(c.eval(550.0).unwrap(), 2.0);
        assert_eq!(c.eval(600.0).unwrap(), 3.0);
        assert_eq!(c.eval(400.0).unwrap(), 0.0);
    }

    #[test]
    fn refuses_to_extrapolate() {
        let c = ramp();
        assert!(matches!(c.eval(399.9), Err(SpectralError::OutOfDomain { .. })));
        assert!(matches!(c.eval(600.1), Err(SpectralError::OutOfDomain { .. })));
        assert!(c.eval(f64::NAN).is_err());
    }

    #[test]
    fn rejects_unsorted_and_negative() {
        assert!(SpectralCurve::new(vec![(500.0, 1.0), (500.0, 2.0)]).is_err());
        assert!(SpectralCurve::new(vec![(500.0, 1.0), (400.0, 2.0)]).is_err());
        assert!(SpectralCurve::new(vec![(500.0, -1.0)]).is_err());
        assert!(SpectralCurve::new(vec![]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let c = ramp();
        let back = SpectralCurve::from_csv(c.to_csv().as_bytes()).unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn csv_errors_are_reported() {
        let bad = "wavelength_nm,value\n400,abc\n";
        assert!(matches!(SpectralCurve::from_csv(bad.as_bytes()), Err(SpectralError::Csv(_))));
    }
}
