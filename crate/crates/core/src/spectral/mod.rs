//! Wavelength-dependent link models: ocular safety limit, transmission
//! through the eye, multi-junction PV quantum efficiency, lid optics and the
//! power-delivery-capacity optimizer.

mod curve;
mod fresnel;
mod junction;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use curve::SpectralCurve;
pub use fresnel::{fresnel_reflectance, LidOptics, N_AIR, N_AQUEOUS_HUMOUR, N_DIAMOND};
pub use junction::{
    gaas_like_absorption, solve_equal_thicknesses, JunctionStack, DESIGN_TOTAL_ABSORPTION,
    DESIGN_WAVELENGTH_NM, GAAS_CUTOFF_NM,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error("wavelength {wavelength_nm} nm outside [{min_nm}, {max_nm}] nm")]
    OutOfDomain {
        wavelength_nm: f64,
        min_nm: f64,
        max_nm: f64,
    },
    #[error("invalid spectral curve: {0}")]
    InvalidCurve(String),
    #[error("invalid junction stack: {0}")]
    InvalidStack(String),
    #[error("total absorption {0} is not achievable (must be in [0, 1))")]
    InfeasibleAbsorption(f64),
    #[error("invalid optics: {0}")]
    InvalidOptics(String),
    #[error("total internal reflection from n={n1} into n={n2} at {angle_deg}°")]
    TotalInternalReflection { n1: f64, n2: f64, angle_deg: f64 },
    #[error("invalid spot area {0} mm²")]
    InvalidSpotArea(f64),
    #[error("empty wavelength grid [{from_nm}, {to_nm}] with step {step_nm}")]
    EmptyGrid {
        from_nm: f64,
        to_nm: f64,
        step_nm: f64,
    },
    #[error("csv: {0}")]
    Csv(String),
}

/// Maximum permissible power at the pupil for a 3 × 3 mm retinal spot, mW, at 850 nm.
pub const MP_PHI_850_MW: f64 = 36.5;
/// Spot area the safety limit is quoted for, mm².
pub const REFERENCE_SPOT_AREA_MM2: f64 = 9.0;

/// Ocular maximum permissible power entering the pupil.
///
/// `K · 10^(0.002(λ − 700))` above 700 nm and `K` below, scaled linearly
/// with spot area. `K` is set so the 850 nm, 9 mm² limit is 36.5 mW.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MpeModel {
    /// Limit at and below 700 nm for the reference spot, mW.
    pub k_mw: f64,
    pub reference_area_mm2: f64,
    pub min_nm: f64,
    pub max_nm: f64,
}

impl Default for MpeModel {
    fn default() -> Self {
        Self::calibrated_to(850.0, MP_PHI_850_MW)
    }
}

impl MpeModel {
    /// Chooses `K` so that `mp_phi(nm, 9 mm²) = limit_mw`.
    pub fn calibrated_to(nm: f64, limit_mw: f64) -> Self {
        Self {
            k_mw: limit_mw / Self::correction(nm),
            reference_area_mm2: REFERENCE_SPOT_AREA_MM2,
            min_nm: 600.0,
            max_nm: 1050.0,
        }
    }

    fn correction(nm: f64) -> f64 {
        if nm < 700.0 {
            1.0
        } else {
            10f64.powf(0.002 * (nm - 700.0))
        }
    }

    pub fn mp_phi(&self, nm: f64, spot_area_mm2: f64) -> Result<f64, SpectralError> {
        if !(nm >= self.min_nm && nm <= self.max_nm) {
            return Err(SpectralError::OutOfDomain {
                wavelength_nm: nm,
                min_nm: self.min_nm,
                max_nm: self.max_nm,
            });
        }
        if !(spot_area_mm2 > 0.0 && spot_area_mm2.is_finite()) {
            return Err(SpectralError::InvalidSpotArea(spot_area_mm2));
        }
        Ok(self.k_mw * Self::correction(nm) * spot_area_mm2 / self.reference_area_mm2)
    }
}

const EYE_TRANSMISSION_TABLE: [(f64, f64); 22] = [
    (400.0, 0.55),
    (450.0, 0.70),
    (500.0, 0.78),
    (550.0, 0.82),
    (600.0, 0.84),
    (650.0, 0.845),
    (700.0, 0.84),
    (750.0, 0.83),
    (800.0, 0.82),
    (825.0, 0.81),
    (850.0, 0.80),
    (875.0, 0.74),
    (900.0, 0.66),
    (925.0, 0.58),
    (950.0, 0.45),
    (975.0, 0.30),
    (980.0, 0.28),
    (1000.0, 0.35),
    (1025.0, 0.40),
    (1050.0, 0.30),
    (1075.0, 0.20),
    (1100.0, 0.10),
];

/// Transmission from the cornea to the anterior retina for an adult eye.
/// Near flat through the visible, falling past 850 nm into the water band
/// around 980 nm.
pub fn eye_transmission_curve() -> SpectralCurve {
    SpectralCurve::new(EYE_TRANSMISSION_TABLE.to_vec()).expect("built-in table is valid")
}

/// Grid search outcome of [`LinkSpectrum::optimum_wavelength`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WavelengthOptimum {
    /// Best wavelength, or `None` if every grid point has zero capacity.
    pub wavelength_nm: Option<f64>,
    pub capacity_mw: f64,
    pub grid_points: usize,
}

/// The three wavelength-dependent constraints on delivered power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkSpectrum {
    pub mpe: MpeModel,
    pub eye_transmission: SpectralCurve,
    pub stack: JunctionStack,
    pub spot_area_mm2: f64,
}

impl Default for LinkSpectrum {
    fn default() -> Self {
        Self {
            mpe: MpeModel::default(),
            eye_transmission: eye_transmission_curve(),
            stack: JunctionStack::five_junction_gaas(),
            spot_area_mm2: REFERENCE_SPOT_AREA_MM2,
        }
    }
}

impl LinkSpectrum {
    /// Wavelength range shared by all three inputs.
    pub fn domain(&self) -> (f64, f64) {
        let (e0, e1) = self.eye_transmission.domain();
        let (s0, s1) = self.stack.domain();
        (self.mpe.min_nm.max(e0).max(s0), self.mpe.max_nm.min(e1).min(s1))
    }

    pub fn mp_phi(&self, nm: f64) -> Result<f64, SpectralError> {
        self.mpe.mp_phi(nm, self.spot_area_mm2)
    }

    pub fn eye_transmission(&self, nm: f64) -> Result<f64, SpectralError> {
        self.eye_transmission.eval(nm)
    }

    pub fn pv_eqe_scaled(&self, nm: f64) -> Result<f64, SpectralError> {
        self.stack.pv_eqe_scaled(nm)
    }

    /// `MPΦ(λ) · T_eye(λ) · EQE(λ)`, mW.
    pub fn power_delivery_capacity(&self, nm: f64) -> Result<f64, SpectralError> {
        Ok(self.mp_phi(nm)? * self.eye_transmission(nm)? * self.pv_eqe_scaled(nm)?)
    }

    /// Grid argmax of the delivery capacity over `[from, to]`. Ties go to the
    /// shorter wavelength.
    pub fn optimum_wavelength(
        &self,
        from_nm: f64,
        to_nm: f64,
        step_nm: f64,
    ) -> Result<WavelengthOptimum, SpectralError> {
        if !(step_nm > 0.0) || !(to_nm >= from_nm) {
            return Err(SpectralError::EmptyGrid {
                from_nm,
                to_nm,
                step_nm,
            });
        }
        let n = ((to_nm - from_nm) / step_nm + 1e-9).floor() as usize + 1;
        let mut best: Option<(f64, f64)> = None;
        for i in 0..n {
            let nm = from_nm + i as f64 * step_nm;
            let c = self.power_delivery_capacity(nm)?;
            if c > 0.0 && best.is_none_or(|(_, bc)| c > bc) {
                best = Some((nm, c));
            }
        }
        Ok(WavelengthOptimum {
            wavelength_nm: best.map(|(nm, _)| nm),
            capacity_mw: best.map_or(0.0, |(_, c)| c),
            grid_points: n,
        })
    }
}
