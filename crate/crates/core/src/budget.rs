//! Power flow from pupil to dissipation, ocular safety margin and thermal
//! limits of the implant.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analog::{AnalogError, Load, PvModel};
use crate::spectral::{LinkSpectrum, SpectralError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BudgetError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Analog(#[from] AnalogError),
}

/// Outer dimensions of the implant, mm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImplantGeometry {
    pub length_mm: f64,
    pub width_mm: f64,
    pub thickness_mm: f64,
}

impl Default for ImplantGeometry {
    fn default() -> Self {
        Self {
            length_mm: 4.6,
            width_mm: 3.7,
            thickness_mm: 0.9,
        }
    }
}

impl ImplantGeometry {
    pub fn footprint_mm2(&self) -> f64 {
        self.length_mm * self.width_mm
    }

    pub fn surface_mm2(&self) -> f64 {
        let (l, w, t) = (self.length_mm, self.width_mm, self.thickness_mm);
        2.0 * (l * w + l * t + w * t)
    }
}

/// Tolerable heat flux for a 2 °C rise, mW/mm².
pub const FLUX_LIMIT_MW_PER_MM2: f64 = 1.46;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalLimits {
    /// Footprint only, mW.
    pub limit_2d_mw: f64,
    /// Whole surface, mW.
    pub limit_3d_mw: f64,
    pub footprint_mm2: f64,
    pub surface_mm2: f64,
}

pub fn thermal_limits(g: &ImplantGeometry, flux_limit_mw_per_mm2: f64) -> Result<ThermalLimits, BudgetError> {
    let dims = [g.length_mm, g.width_mm, g.thickness_mm];
    if !(flux_limit_mw_per_mm2 > 0.0) || dims.iter().any(|d| !(*d > 0.0)) {
        return Err(BudgetError::InvalidInput(format!("{g:?}, flux {flux_limit_mw_per_mm2}")));
    }
    Ok(ThermalLimits {
        limit_2d_mw: flux_limit_mw_per_mm2 * g.footprint_mm2(),
        limit_3d_mw: flux_limit_mw_per_mm2 * g.surface_mm2(),
        footprint_mm2: g.footprint_mm2(),
        surface_mm2: g.surface_mm2(),
    })
}

/// Mean irradiance of `p_mw` spread over a circular pupil, mW/cm².
pub fn irradiance(p_mw: f64, pupil_diameter_mm: f64) -> Result<f64, BudgetError> {
    if !(pupil_diameter_mm > 0.0) {
        return Err(BudgetError::InvalidInput(format!("pupil diameter {pupil_diameter_mm} mm")));
    }
    let area_cm2 = std::f64::consts::PI * (pupil_diameter_mm / 2.0).powi(2) / 100.0;
    Ok(p_mw / area_cm2)
}

/// Pupil diameter at which `p_mw` gives `irradiance_mw_per_cm2`, mm.
pub fn effective_diameter_mm(p_mw: f64, irradiance_mw_per_cm2: f64) -> f64 {
    2.0 * (p_mw * 100.0 / (std::f64::consts::PI * irradiance_mw_per_cm2)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalVerdicts {
    pub limit_2d_mw: f64,
    pub limit_3d_mw: f64,
    pub pass_2d: bool,
    pub pass_3d: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetReport {
    pub wavelength_nm: f64,
    pub p_pupil_mw: f64,
    pub p_retina_mw: f64,
    pub p_at_pv_mw: f64,
    pub p_optical_loss_mw: f64,
    pub p_dissipated_mw: f64,
    pub p_electrical_mw: f64,
    pub pv_voltage: f64,
    pub pv_current_ma: f64,
    pub mp_phi_mw: f64,
    pub safety_margin_mw: f64,
    /// `p_pupil ≤ MPΦ`.
    pub safe: bool,
    pub thermal_verdicts: ThermalVerdicts,
}

/// Models behind [`BudgetConfig::power_chain`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetConfig {
    pub spectrum: LinkSpectrum,
    pub pv: PvModel,
    pub load: Load,
    pub geometry: ImplantGeometry,
    pub flux_limit_mw_per_mm2: f64,
    /// Wavelength at which the PV photocurrent scale was fitted, nm.
    pub pv_calibration_nm: f64,
}

impl Default for BudgetConfig {
    fn default() -> Self {
        Self {
            spectrum: LinkSpectrum::default(),
            pv: PvModel::default(),
            load: Load::implant_base(),
            geometry: ImplantGeometry::default(),
            flux_limit_mw_per_mm2: FLUX_LIMIT_MW_PER_MM2,
            pv_calibration_nm: 850.0,
        }
    }
}

impl BudgetConfig {
    /// Optical power that gives the PV model, fitted at the calibration
    /// wavelength, the photocurrent `p_at_pv_mw` produces at `nm`.
    pub fn pv_equivalent_power(&self, p_at_pv_mw: f64, nm: f64) -> Result<f64, BudgetError> {
        let cal = self.pv_calibration_nm;
        let eqe_cal = self.spectrum.pv_eqe_scaled(cal)?;
        if eqe_cal <= 0.0 {
            return Err(BudgetError::InvalidInput(format!("zero EQE at calibration wavelength {cal} nm")));
        }
        // photons per mW scale with wavelength
        Ok(p_at_pv_mw * self.spectrum.pv_eqe_scaled(nm)? * nm / (eqe_cal * cal))
    }

    /// Staged power flow for `p_pupil_mw` at `nm`. Exceeding MPΦ sets
    /// `safe = false` rather than failing.
    pub fn power_chain(&self, p_pupil_mw: f64, nm: f64) -> Result<BudgetReport, BudgetError> {
        if !(p_pupil_mw >= 0.0 && p_pupil_mw.is_finite()) {
            return Err(BudgetError::InvalidInput(format!("pupil power {p_pupil_mw} mW")));
        }
        let p_retina = p_pupil_mw * self.spectrum.eye_transmission(nm)?;
        let p_at_pv = p_retina;
        let eqe = self.spectrum.pv_eqe_scaled(nm)?;
        let loss = (1.0 - eqe) * p_at_pv;
        let dissipated = p_at_pv - loss;
        let op = self.pv.operating_point(self.pv_equivalent_power(p_at_pv, nm)?, self.load)?;
        let mp_phi = self.spectrum.mp_phi(nm)?;
        let limits = thermal_limits(&self.geometry, self.flux_limit_mw_per_mm2)?;
        Ok(BudgetReport {
            wavelength_nm: nm,
            p_pupil_mw,
            p_retina_mw: p_retina,
            p_at_pv_mw: p_at_pv,
            p_optical_loss_mw: loss,
            p_dissipated_mw: dissipated,
            p_electrical_mw: op.power_mw,
            pv_voltage: op.voltage,
            pv_current_ma: op.current_ma,
            mp_phi_mw: mp_phi,
            safety_margin_mw: mp_phi - p_pupil_mw,
            safe: p_pupil_mw <= mp_phi,
            thermal_verdicts: ThermalVerdicts {
                limit_2d_mw: limits.limit_2d_mw,
                limit_3d_mw: limits.limit_3d_mw,
                pass_2d: dissipated <= limits.limit_2d_mw,
                pass_3d: dissipated <= limits.limit_3d_mw,
            },
        })
    }
}

/// [`BudgetConfig::power_chain`] with default models.
pub fn power_chain(p_pupil_mw: f64, nm: f64) -> Result<BudgetReport, BudgetError> {
    BudgetConfig::default().power_chain(p_pupil_mw, nm)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub safe: bool,
    pub pass_2d: bool,
    pub pass_3d: bool,
    /// Safe and within the footprint (conservative) thermal limit.
    pub pass: bool,
}

pub fn verdict(report: &BudgetReport) -> Verdict {
    let t = report.thermal_verdicts;
    let safe = report.p_pupil_mw <= report.mp_phi_mw;
    let pass_2d = report.p_dissipated_mw <= t.limit_2d_mw;
    Verdict {
        safe,
        pass_2d,
        pass_3d: report.p_dissipated_mw <= t.limit_3d_mw,
        pass: safe && pass_2d,
    }
}

impl BudgetReport {
    /// Staged plain-text table.
    pub fn to_table(&self) -> String {
        let v = verdict(self);
        let t = self.thermal_verdicts;
        let mark = |ok: bool| if ok { "pass" } else { "FAIL" };
        let rows = [
            ("pupil", self.p_pupil_mw),
            ("retina (after ocular media)", self.p_retina_mw),
            ("incident on PV", self.p_at_pv_mw),
            ("optical loss at PV", self.p_optical_loss_mw),
            ("dissipated in implant", self.p_dissipated_mw),
            ("electrical to ASIC + interface", self.p_electrical_mw),
        ];
        let mut s = format!("power budget at {:.0} nm\n", self.wavelength_nm);
        for (name, mw) in rows {
            s += &format!("  {name:<32} {mw:>8.2} mW\n");
        }
        s += &format!("  {:<32} {:>8.2} V @ {:.2} mA\n", "PV operating point", self.pv_voltage, self.pv_current_ma);
        s += &format!(
            "  {:<32} {:>8.2} mW (MPΦ {:.2} mW) {}\n",
            "safety margin",
            self.safety_margin_mw,
            self.mp_phi_mw,
            mark(v.safe)
        );
        s += &format!("  {:<32} {:>8.2} mW {}\n", "thermal limit, footprint", t.limit_2d_mw, mark(t.pass_2d));
        s += &format!("  {:<32} {:>8.2} mW {}\n", "thermal limit, full surface", t.limit_3d_mw, mark(t.pass_3d));
        s += &format!("verdict: {}\n", mark(v.pass));
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn within(actual: f64, expected: f64, rel: f64) -> bool {
        ((actual - expected) / expected).abs() <= rel
    }

    #[test]
    fn nominal_chain() {
        let r = power_chain(30.0, 850.0).unwrap();
        assert!(within(r.p_retina_mw, 24.0, 0.02), "{r:?}");
        assert!(within(r.p_optical_loss_mw, 1.7, 0.02), "{r:?}");
        assert!(within(r.p_dissipated_mw, 22.3, 0.02), "{r:?}");
        assert!(within(r.p_electrical_mw, 10.1, 0.02), "{r:?}");
        assert!(verdict(&r).pass);
    }

    #[test]
    fn accounting_closes() {
        for (p, nm) in [(30.0, 850.0), (12.0, 700.0), (36.5, 900.0)] {
            let r = power_chain(p, nm).unwrap();
            let total = (r.p_pupil_mw - r.p_retina_mw) + r.p_optical_loss_mw + r.p_dissipated_mw;
            assert!((total - p).abs() < 1e-12);
            assert!(r.p_retina_mw <= r.p_pupil_mw && r.p_dissipated_mw <= r.p_at_pv_mw);
        }
    }

    #[test]
    fn dark_chain() {
        let r = power_chain(0.0, 850.0).unwrap();
        for v in [r.p_retina_mw, r.p_at_pv_mw, r.p_optical_loss_mw, r.p_dissipated_mw, r.p_electrical_mw] {
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn safety_boundary() {
        let r = power_chain(36.5, 850.0).unwrap();
        assert!(r.safety_margin_mw.abs() < 1e-9 && r.safe);
        assert!(!power_chain(37.0, 850.0).unwrap().safe);
    }

    #[test]
    fn thermal_examples() {
        let t = thermal_limits(&ImplantGeometry::default(), 1.46).unwrap();
        assert!((t.limit_2d_mw - 24.8).abs() < 0.06);
        assert!((t.limit_3d_mw - 71.5).abs() < 0.06);
        assert!((t.surface_mm2 - 48.98).abs() < 1e-9);
        let cube = ImplantGeometry {
            length_mm: 1.0,
            width_mm: 1.0,
            thickness_mm: 1.0,
        };
        let c = thermal_limits(&cube, 1.0).unwrap();
        assert_eq!((c.limit_2d_mw, c.limit_3d_mw), (1.0, 6.0));
    }

    #[test]
    fn irradiance_examples() {
        assert!((irradiance(36.5, 5.0).unwrap() - 185.9).abs() < 0.05);
        assert_eq!(irradiance(0.0, 5.0).unwrap(), 0.0);
        assert!((irradiance(10.0, 2.0).unwrap() / irradiance(10.0, 4.0).unwrap() - 4.0).abs() < 1e-12);
        assert!((effective_diameter_mm(36.5, 171.0) - 5.21).abs() < 0.01);
    }

    #[test]
    fn verdict_cases() {
        let mut r = power_chain(30.0, 850.0).unwrap();
        r.p_dissipated_mw = 25.0;
        let v = verdict(&r);
        assert!(!v.pass && !v.pass_2d && v.pass_3d);
        r.p_dissipated_mw = 80.0;
        let v = verdict(&r);
        assert!(!v.pass_2d && !v.pass_3d);
    }
}
