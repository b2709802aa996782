//! Multi-junction PV absorption: Beer–Lambert cascade through series-connected
//! absorber layers and the current-matched quantum efficiency.

use serde::{Deserialize, Serialize};

use super::{SpectralCurve, SpectralError};

/// Bandgap cutoff of the GaAs-like absorber, nm.
pub const GAAS_CUTOFF_NM: f64 = 870.0;
/// Wavelength at which the layer thicknesses are current-matched, nm.
pub const DESIGN_WAVELENGTH_NM: f64 = 850.0;
/// Total absorption of the stack at the design wavelength.
pub const DESIGN_TOTAL_ABSORPTION: f64 = 0.93;

const ALPHA_AT_DESIGN_PER_UM: f64 = 1.0;
const ALPHA_EDGE_EXPONENT: f64 = 0.2;

/// Absorption coefficient of the absorber (1/µm) tabulated at 1 nm.
///
/// Power-law rise above the bandgap, normalised to `ALPHA_AT_DESIGN_PER_UM`
/// at the design wavelength and exactly zero beyond the cutoff.
pub fn gaas_like_absorption() -> SpectralCurve {
    SpectralCurve::tabulate(400.0, 1100.0, 1.0, |nm| {
        if nm >= GAAS_CUTOFF_NM {
            0.0
        } else {
            let x = (GAAS_CUTOFF_NM - nm) / (GAAS_CUTOFF_NM - DESIGN_WAVELENGTH_NM);
            ALPHA_AT_DESIGN_PER_UM * x.powf(ALPHA_EDGE_EXPONENT)
        }
    })
    .expect("absorption table is well formed")
}

/// Vertically stacked, series-connected photoabsorber segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JunctionStack {
    thicknesses_um: Vec<f64>,
    absorption_per_um: SpectralCurve,
    cutoff_nm: f64,
    design_nm: f64,
}

impl JunctionStack {
    pub fn new(
        thicknesses_um: Vec<f64>,
        absorption_per_um: SpectralCurve,
        cutoff_nm: f64,
        design_nm: f64,
    ) -> Result<Self, SpectralError> {
        if thicknesses_um.is_empty() {
            return Err(SpectralError::InvalidStack("stack needs at least one junction".into()));
        }
        if let Some(t) = thicknesses_um.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
            return Err(SpectralError::InvalidStack(format!("thickness {t} µm must be > 0")));
        }
        if let Some((nm, a)) = absorption_per_um.samples().find(|&(nm, a)| nm > cutoff_nm && a != 0.0) {
            return Err(SpectralError::InvalidStack(format!(
                "absorption {a} /µm at {nm} nm lies beyond the {cutoff_nm} nm cutoff"
            )));
        }
        Ok(Self {
            thicknesses_um,
            absorption_per_um,
            cutoff_nm,
            design_nm,
        })
    }

    /// Five GaAs-like junctions current-matched at 850 nm for 93 % total absorption.
    pub fn five_junction_gaas() -> Self {
        let absorption = gaas_like_absorption();
        let alpha = absorption
            .eval(DESIGN_WAVELENGTH_NM)
            .expect("design wavelength inside table");
        let thicknesses = solve_equal_thicknesses(alpha, 5, DESIGN_TOTAL_ABSORPTION)
            .expect("design target is feasible");
        Self::new(thicknesses, absorption, GAAS_CUTOFF_NM, DESIGN_WAVELENGTH_NM)
            .expect("default stack is valid")
    }

    pub fn n_junctions(&self) -> usize {
        self.thicknesses_um.len()
    }

    pub fn thicknesses_um(&self) -> &[f64] {
        &self.thicknesses_um
    }

    pub fn absorption_per_um(&self) -> &SpectralCurve {
        &self.absorption_per_um
    }

    pub fn cutoff_nm(&self) -> f64 {
        self.cutoff_nm
    }

    pub fn design_nm(&self) -> f64 {
        self.design_nm
    }

    pub fn domain(&self) -> (f64, f64) {
        self.absorption_per_um.domain()
    }

    /// Fraction of the incident light absorbed in each junction, top first.
    pub fn junction_absorptions(&self, nm: f64) -> Result<Vec<f64>, SpectralError> {
        let alpha = if nm > self.cutoff_nm {
            // still validate the domain
            self.absorption_per_um.eval(nm)?;
            0.0
        } else {
            self.absorption_per_um.eval(nm)?
        };
        Ok(cascade(alpha, &self.thicknesses_um))
    }

    /// Current-matched EQE scaled by the number of junctions:
    /// `n · min_i A_i`.
    pub fn pv_eqe_scaled(&self, nm: f64) -> Result<f64, SpectralError> {
        let a = self.junction_absorptions(nm)?;
        let min = a.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(a.len() as f64 * min)
    }
}

fn cascade(alpha_per_um: f64, thicknesses_um: &[f64]) -> Vec<f64> {
    let mut incident = 1.0;
    thicknesses_um
        .iter()
        .map(|t| {
            let absorbed = incident * (1.0 - (-alpha_per_um * t).exp());
            incident -= absorbed;
            absorbed
        })
        .collect()
}

/// Layer thicknesses (µm) giving each of `n` junctions an equal share of
/// `total_absorption` at absorption coefficient `alpha_per_um`.
///
/// Closed form, junction by junction: with `r_i` the light remaining above
/// junction `i` and `a = total/n`, `t_i = -ln(1 - a/r_i) / α`.
pub fn solve_equal_thicknesses(
    alpha_per_um: f64,
    n: usize,
    total_absorption: f64,
) -> Result<Vec<f64>, SpectralError> {
    if !(alpha_per_um > 0.0 && alpha_per_um.is_finite()) {
        return Err(SpectralError::InvalidStack(format!(
            "absorption coefficient {alpha_per_um} must be > 0"
        )));
    }
    if n == 0 {
        return Err(SpectralError::InvalidStack("need at least one junction".into()));
    }
    if !(0.0..1.0).contains(&total_absorption) {
        return Err(SpectralError::InfeasibleAbsorption(total_absorption));
    }
    let share = total_absorption / n as f64;
    let mut remaining = 1.0;
    Ok((0..n)
        .map(|_| {
            let t = -(1.0 - share / remaining).ln() / alpha_per_um;
            remaining -= share;
            t
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_absorption_beyond_cutoff() {
        let s = JunctionStack::five_junction_gaas();
        for nm in [871.0, 900.0, 1000.0, 1100.0] {
            assert!(s.junction_absorptions(nm).unwrap().iter().all(|&a| a == 0.0));
            assert_eq!(s.pv_eqe_scaled(nm).unwrap(), 0.0);
        }
    }

    #[test]
    fn design_wavelength_is_current_matched() {
        let s = JunctionStack::five_junction_gaas();
        let a = s.junction_absorptions(850.0).unwrap();
        for ai in &a {
            assert!((ai - 0.93 / 5.0).abs() < 1e-6, "{a:?}");
        }
        assert!((s.pv_eqe_scaled(850.0).unwrap() - 0.93).abs() < 1e-6);
    }

    #[test]
    fn opaque_top_junction_absorbs_everything() {
        let a = cascade(1e6, &[0.2, 0.3, 0.4]);
        assert!((a[0] - 1.0).abs() < 1e-12);
        assert!(a[1..].iter().all(|&x| x.abs() < 1e-12));
    }

    #[test]
    fn single_layer_is_analytic() {
        let t = solve_equal_thicknesses(2.5, 1, 0.6).unwrap();
        assert!((t[0] - (-(1.0f64 - 0.6).ln() / 2.5)).abs() < 1e-15);
    }

    #[test]
    fn zero_target_gives_zero_thickness() {
        assert_eq!(solve_equal_thicknesses(1.0, 5, 0.0).unwrap(), vec![0.0; 5]);
    }

    #[test]
    fn infeasible_targets_rejected() {
        assert!(matches!(
            solve_equal_thicknesses(1.0, 5, 1.0),
            Err(SpectralError::InfeasibleAbsorption(_))
        ));
        assert!(solve_equal_thicknesses(0.0, 5, 0.5).is_err());
    }

    #[test]
    fn deeper_junctions_are_thicker() {
        let t = solve_equal_thicknesses(1.0, 5, 0.93).unwrap();
        assert!(t.windows(2).all(|w| w[1] > w[0]), "{t:?}");
        // residual of the closed form against the cascade
        let a = cascade(1.0, &t);
        assert!(a.iter().all(|ai| (ai - 0.186).abs() < 1e-9));
    }

    #[test]
    fn stack_validation() {
        let abs = gaas_like_absorption();
        assert!(JunctionStack::new(vec![], abs.clone(), 870.0, 850.0).is_err());
        assert!(JunctionStack::new(vec![0.1, 0.0], abs.clone(), 870.0, 850.0).is_err());
        // absorption past a lower cutoff violates the invariant
        assert!(JunctionStack::new(vec![0.1], abs, 800.0, 780.0).is_err());
    }
}
