//! Unpolarized Fresnel reflectance and the two-interface diamond lid.

use serde::{Deserialize, Serialize};

use super::SpectralError;

pub const N_AIR: f64 = 1.0;
pub const N_AQUEOUS_HUMOUR: f64 = 1.336;
pub const N_DIAMOND: f64 = 2.4;

/// Average of the s and p power reflectances at a planar interface from
/// index `n1` into `n2`, angle of incidence in degrees.
pub fn fresnel_reflectance(n1: f64, n2: f64, angle_deg: f64) -> Result<f64, SpectralError> {
    if !(n1 >= 1.0 && n2 >= 1.0) {
        return Err(SpectralError::InvalidOptics(format!("indices {n1}, {n2} must be >= 1")));
    }
    if !(0.0..90.0).contains(&angle_deg) {
        return Err(SpectralError::InvalidOptics(format!("angle {angle_deg}° outside [0, 90)")));
    }
    let theta_i = angle_deg.to_radians();
    let sin_t = n1 / n2 * theta_i.sin();
    if sin_t >= 1.0 {
        return Err(SpectralError::TotalInternalReflection {
            n1,
            n2,
            angle_deg,
        });
    }
    let cos_i = theta_i.cos();
    let cos_t = (1.0 - sin_t * sin_t).sqrt();
    let rs = (n1 * cos_i - n2 * cos_t) / (n1 * cos_i + n2 * cos_t);
    let rp = (n2 * cos_i - n1 * cos_t) / (n2 * cos_i + n1 * cos_t);
    Ok(0.5 * (rs * rs + rp * rp))
}

/// Planar lid between an outer medium and the implant interior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LidOptics {
    pub n_outer: f64,
    pub n_lid: f64,
    pub n_inner: f64,
    pub angle_deg: f64,
    /// Lid thickness, µm. Bulk absorption is neglected so this does not
    /// enter the transmission.
    pub thickness_um: f64,
}

impl LidOptics {
    pub fn air_diamond_air(angle_deg: f64) -> Self {
        Self {
            n_outer: N_AIR,
            n_lid: N_DIAMOND,
            n_inner: N_AIR,
            angle_deg,
            thickness_um: 500.0,
        }
    }

    pub fn aqueous_diamond_air(angle_deg: f64) -> Self {
        Self {
            n_outer: N_AQUEOUS_HUMOUR,
            ..Self::air_diamond_air(angle_deg)
        }
    }

    pub fn validate(&self) -> Result<(), SpectralError> {
        if !(self.n_outer >= 1.0 && self.n_lid >= 1.0 && self.n_inner >= 1.0) {
            return Err(SpectralError::InvalidOptics("refractive indices must be >= 1".into()));
        }
        if !(0.0..90.0).contains(&self.angle_deg) {
            return Err(SpectralError::InvalidOptics(format!(
                "angle {}° outside [0, 90)",
                self.angle_deg
            )));
        }
        Ok(())
    }

    /// Single-pass transmission `(1 - R_outer)(1 - R_inner)`.
    ///
    /// Returns 0 when the ray is totally internally reflected at the inner face.
    pub fn transmission(&self) -> Result<f64, SpectralError> {
        self.validate()?;
        let r_outer = fresnel_reflectance(self.n_outer, self.n_lid, self.angle_deg)?;
        let sin_lid = self.n_outer / self.n_lid * self.angle_deg.to_radians().sin();
        let angle_lid = sin_lid.asin().to_degrees();
        match fresnel_reflectance(self.n_lid, self.n_inner, angle_lid) {
            Ok(r_inner) => Ok((1.0 - r_outer) * (1.0 - r_inner)),
            Err(SpectralError::TotalInternalReflection { .. }) => Ok(0.0),
            Err(e) => Err(e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_incidence_closed_form() {
        let r = fresnel_reflectance(1.0, 2.4, 0.0).unwrap();
        assert!((r - (1.4f64 / 3.4).powi(2)).abs() < 1e-15);
    }

    #[test]
    fn index_matched_interface_is_transparent() {
        for angle in [0.0, 10.0, 45.0, 80.0] {
            assert!(fresnel_reflectance(1.5, 1.5, angle).unwrap().abs() < 1e-15);
        }
    }

    #[test]
    fn total_internal_reflection_is_an_error() {
        // critical angle diamond→air is about 24.6°
        assert!(fresnel_reflectance(2.4, 1.0, 20.0).is_ok());
        assert!(matches!(
            fresnel_reflectance(2.4, 1.0, 30.0),
            Err(SpectralError::TotalInternalReflection { .. })
        ));
    }

    #[test]
    fn grazing_limit_reflects_strongly() {
        let r = fresnel_reflectance(1.0, 2.4, 89.9).unwrap();
        assert!(r > 0.95);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(fresnel_reflectance(0.9, 1.0, 0.0).is_err());
        assert!(fresnel_reflectance(1.0, 1.5, 90.0).is_err());
        assert!(fresnel_reflectance(1.0, 1.5, -1.0).is_err());
    }

    #[test]
    fn lid_trapping_gives_zero() {
        // aqueous side at 60° exceeds the diamond→air critical angle inside the lid
        let t = LidOptics::aqueous_diamond_air(60.0).transmission().unwrap();
        assert_eq!(t, 0.0);
    }
}
