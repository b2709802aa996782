//! Static model of the series-connected multi-junction PV cell.

use serde::{Deserialize, Serialize};

use super::AnalogError;
use crate::numeric::{bisect, golden_max, nelder_mead};

/// Electrical load seen by the PV cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Load {
    /// Resistance in kΩ. `f64::INFINITY` is an open circuit.
    Resistive { kohm: f64 },
    /// Constant power draw in mW.
    ConstantPower { mw: f64 },
}

impl Load {
    /// Resistive equivalent of the implant electronics (stimulator ASIC plus
    /// interface circuit) with all electrodes disabled: 3.4 V at 2.98 mA.
    pub fn implant_base() -> Self {
        Load::Resistive { kohm: 3.4 / 2.98 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IvPoint {
    pub voltage: f64,
    pub current_ma: f64,
    pub power_mw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaxPowerPoint {
    pub voltage: f64,
    pub current_ma: f64,
    pub power_mw: f64,
    /// Electrical power over incident optical power.
    pub efficiency: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub voltage: f64,
    pub current_ma: f64,
    pub power_mw: f64,
}

/// Stack of identical single-diode junctions in series.
///
/// `I(V) = k·P − i0·(exp(V / (n·m·V_T)) − 1)` with `P` the optical power
/// incident on the cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PvModel {
    pub n_junctions: u32,
    /// Photocurrent per mW of incident light, mA/mW.
    pub i_ph_per_mw: f64,
    /// Diode saturation current, mA.
    pub i0_ma: f64,
    pub ideality: f64,
    /// V_T at the operating temperature, V.
    pub thermal_voltage: f64,
    /// Nameplate open-circuit voltage, V. Informational only.
    pub v_oc_nominal: f64,
    pub tau_rise_ns: f64,
    pub tau_fall_ns: f64,
}

impl Default for PvModel {
    /// Parameters fitted by [`calibrate`] to the [`PvAnchors::default`] set.
    fn default() -> Self {
        Self {
            n_junctions: 5,
            i_ph_per_mw: CALIBRATED_I_PH_PER_MW,
            i0_ma: CALIBRATED_I0_MA,
            ideality: CALIBRATED_IDEALITY,
            thermal_voltage: 0.02585,
            v_oc_nominal: 5.0,
            tau_rise_ns: 370.0 / (7.0f64 / 3.0).ln(),
            tau_fall_ns: 190.0 / (7.0f64 / 3.0).ln(),
        }
    }
}

pub(crate) const CALIBRATED_I_PH_PER_MW: f64 = 0.124_398_085_000_655_2;
pub(crate) const CALIBRATED_I0_MA: f64 = 4.444_569_767_894_154e-7;
pub(crate) const CALIBRATED_IDEALITY: f64 = 2.735_987_808_966_713;

impl PvModel {
    pub fn validate(&self) -> Result<(), AnalogError> {
        let ok = self.n_junctions > 0
            && self.i_ph_per_mw >= 0.0
            && self.i0_ma > 0.0
            && self.ideality >= 1.0
            && self.thermal_voltage > 0.0
            && self.tau_rise_ns > 0.0
            && self.tau_fall_ns > 0.0
            && [self.i_ph_per_mw, self.i0_ma, self.ideality, self.tau_rise_ns, self.tau_fall_ns]
                .iter()
                .all(|x| x.is_finite());
        if ok {
            Ok(())
        } else {
            Err(AnalogError::InvalidModel(format!("{self:?}")))
        }
    }

    pub fn to_toml_string(&self) -> Result<String, AnalogError> {
        toml::to_string(self).map_err(|e| AnalogError::Config(e.to_string()))
    }

    pub fn from_toml_str(text: &str) -> Result<Self, AnalogError> {
        let model: Self = toml::from_str(text).map_err(|e| AnalogError::Config(e.to_string()))?;
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), AnalogError> {
        std::fs::write(path, self.to_toml_string()?).map_err(|e| AnalogError::Config(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self, AnalogError> {
        let text = std::fs::read_to_string(path).map_err(|e| AnalogError::Config(e.to_string()))?;
        Self::from_toml_str(&text)
    }

    /// `n · m · V_T`, the exponential scale of the whole stack.
    pub fn stack_voltage_scale(&self) -> f64 {
        self.n_junctions as f64 * self.ideality * self.thermal_voltage
    }

    pub fn photocurrent(&self, p_mw: f64) -> f64 {
        self.i_ph_per_mw * p_mw
    }

    pub fn current(&self, voltage: f64, p_mw: f64) -> f64 {
        self.photocurrent(p_mw) - self.i0_ma * (voltage / self.stack_voltage_scale()).exp_m1()
    }

    fn current_slope(&self, voltage: f64) -> f64 {
        let s = self.stack_voltage_scale();
        -self.i0_ma / s * (voltage / s).exp()
    }

    pub fn open_circuit_voltage(&self, p_mw: f64) -> f64 {
        self.stack_voltage_scale() * (self.photocurrent(p_mw) / self.i0_ma).ln_1p()
    }

    /// `points` evenly spaced samples of the illuminated curve on `[0, V_oc]`.
    pub fn iv_curve(&self, p_mw: f64, points: usize) -> Result<Vec<IvPoint>, AnalogError> {
        check_power(p_mw)?;
        let voc = self.open_circuit_voltage(p_mw);
        let points = points.max(2);
        Ok((0..points)
            .map(|k| {
                let v = voc * k as f64 / (points - 1) as f64;
                let i = self.current(v, p_mw).max(0.0);
                IvPoint {
                    voltage: v,
                    current_ma: i,
                    power_mw: v * i,
                }
            })
            .collect())
    }

    /// Peak of `V·I` on `[0, V_oc]`. `incident_mw` sets the efficiency
    /// denominator and defaults to `p_mw`.
    pub fn max_power_point(&self, p_mw: f64, incident_mw: Option<f64>) -> Result<MaxPowerPoint, AnalogError> {
        check_power(p_mw)?;
        if p_mw <= 0.0 {
            return Err(AnalogError::InvalidInput("max power point needs p > 0".into()));
        }
        let voc = self.open_circuit_voltage(p_mw);
        let v = golden_max(|v| v * self.current(v, p_mw), 0.0, voc, 1e-12 * voc.max(1.0));
        let i = self.current(v, p_mw);
        if !(v.is_finite() && i.is_finite()) {
            return Err(AnalogError::NonConvergence("max power point".into()));
        }
        Ok(MaxPowerPoint {
            voltage: v,
            current_ma: i,
            power_mw: v * i,
            efficiency: v * i / incident_mw.unwrap_or(p_mw),
        })
    }

    /// Intersection of the I-V curve with the load line.
    ///
    /// A constant-power load meets the curve twice; the higher-voltage,
    /// stable intersection is returned. Demand above the maximum power
    /// point is a brown-out.
    pub fn operating_point(&self, p_mw: f64, load: Load) -> Result<OperatingPoint, AnalogError> {
        check_power(p_mw)?;
        let v = match load {
            Load::Resistive { kohm } => {
                if !(kohm >= 0.0) {
                    return Err(AnalogError::InvalidInput(format!("load {kohm} kΩ")));
                }
                self.solve_resistive(p_mw, kohm, None)
            }
            Load::ConstantPower { mw } => {
                if !(mw >= 0.0 && mw.is_finite()) {
                    return Err(AnalogError::InvalidInput(format!("load {mw} mW")));
                }
                let voc = self.open_circuit_voltage(p_mw);
                if mw == 0.0 {
                    voc
                } else {
                    if p_mw <= 0.0 {
                        return Err(AnalogError::BrownOut {
                            demand_mw: mw,
                            available_mw: 0.0,
                        });
                    }
                    let mpp = self.max_power_point(p_mw, None)?;
                    if mw > mpp.power_mw {
                        return Err(AnalogError::BrownOut {
                            demand_mw: mw,
                            available_mw: mpp.power_mw,
                        });
                    }
                    bisect(|v| v * self.current(v, p_mw) - mw, mpp.voltage, voc, 1e-13)
                        .ok_or_else(|| AnalogError::NonConvergence("constant-power load".into()))?
                }
            }
        };
        let i = match load {
            Load::Resistive { kohm: 0.0 } => self.photocurrent(p_mw),
            Load::Resistive { kohm } if kohm.is_infinite() => 0.0,
            Load::Resistive { kohm } => v / kohm,
            Load::ConstantPower { .. } => self.current(v, p_mw).max(0.0),
        };
        Ok(OperatingPoint {
            voltage: v,
            current_ma: i,
            power_mw: v * i,
        })
    }

    /// Voltage across a resistive load, by safeguarded Newton iteration on
    /// `I(V) − V/R` bracketed in `[0, V_oc]`.
    pub(crate) fn solve_resistive(&self, p_mw: f64, kohm: f64, guess: Option<f64>) -> f64 {
        let voc = self.open_circuit_voltage(p_mw);
        if kohm == 0.0 || voc <= 0.0 {
            return 0.0;
        }
        if kohm.is_infinite() {
            return voc;
        }
        let g = 1.0 / kohm;
        let f = |v: f64| self.current(v, p_mw) - v * g;
        let (mut lo, mut hi) = (0.0, voc);
        let mut v = guess.unwrap_or(voc.min(self.photocurrent(p_mw) * kohm)).clamp(lo, hi);
        for _ in 0..100 {
            let fv = f(v);
            if fv > 0.0 {
                lo = v;
            } else {
                hi = v;
            }
            let step = fv / (self.current_slope(v) - g);
            let mut next = v - step;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - v).abs() <= 1e-13 * voc.max(1.0) {
                return next;
            }
            v = next;
        }
        v
    }

    /// Illumination that puts the cell at `voltage` across a `kohm` load.
    pub fn illumination_for_voltage(&self, voltage: f64, kohm: f64) -> Result<f64, AnalogError> {
        let f = |p: f64| self.solve_resistive(p, kohm, None) - voltage;
        let mut hi = 1.0;
        while f(hi) < 0.0 {
            hi *= 2.0;
            if hi > 1e6 {
                return Err(AnalogError::InvalidInput(format!(
                    "{voltage} V is unreachable across {kohm} kΩ"
                )));
            }
        }
        bisect(f, 0.0, hi, 1e-12).ok_or_else(|| AnalogError::NonConvergence("illumination inverse".into()))
    }
}

fn check_power(p_mw: f64) -> Result<(), AnalogError> {
    if p_mw >= 0.0 && p_mw.is_finite() {
        Ok(())
    } else {
        Err(AnalogError::InvalidInput(format!("optical power {p_mw} mW")))
    }
}

/// Target observables for fitting the PV parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PvAnchors {
    pub voc_illumination_mw: f64,
    pub voc_v: f64,
    pub voc_sigma_v: f64,
    pub mpp_illumination_mw: f64,
    pub mpp_v: f64,
    pub mpp_sigma_v: f64,
    pub mpp_power_mw: f64,
    pub mpp_sigma_mw: f64,
    pub op_illumination_mw: f64,
    pub op_v: f64,
    pub op_sigma_v: f64,
    pub op_current_ma: f64,
    pub op_sigma_ma: f64,
}

impl Default for PvAnchors {
    /// Nominal 5 V stack, peak 16.3 mW at 4.7 V under 30 mW, and
    /// 3.4 V / 2.98 mA into the implant under 24 mW. The open-circuit
    /// anchor is soft.
    fn default() -> Self {
        Self {
            voc_illumination_mw: 30.0,
            voc_v: 5.0,
            voc_sigma_v: 1.0,
            mpp_illumination_mw: 30.0,
            mpp_v: 4.7,
            mpp_sigma_v: 0.1 / 3.0,
            mpp_power_mw: 16.3,
            mpp_sigma_mw: 0.1,
            op_illumination_mw: 24.0,
            op_v: 3.4,
            op_sigma_v: 0.1 / 3.0,
            op_current_ma: 2.98,
            op_sigma_ma: 0.1 / 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorResidual {
    pub name: String,
    pub target: f64,
    pub achieved: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PvCalibration {
    pub model: PvModel,
    pub residuals: Vec<AnchorResidual>,
    /// Weighted sum of squared residuals.
    pub cost: f64,
}

fn anchor_residuals(model: &PvModel, a: &PvAnchors) -> Result<Vec<AnchorResidual>, AnalogError> {
    let voc = model.open_circuit_voltage(a.voc_illumination_mw);
    let mpp = model.max_power_point(a.mpp_illumination_mw, None)?;
    let op = model.operating_point(
        a.op_illumination_mw,
        Load::Resistive {
            kohm: a.op_v / a.op_current_ma,
        },
    )?;
    let r = |name: &str, target: f64, achieved: f64| AnchorResidual {
        name: name.to_string(),
        target,
        achieved,
    };
    Ok(vec![
        r("voc_v", a.voc_v, voc),
        r("mpp_v", a.mpp_v, mpp.voltage),
        r("mpp_power_mw", a.mpp_power_mw, mpp.power_mw),
        r("op_v", a.op_v, op.voltage),
        r("op_current_ma", a.op_current_ma, op.current_ma),
    ])
}

fn weighted_cost(res: &[AnchorResidual], a: &PvAnchors) -> f64 {
    let sigmas = [a.voc_sigma_v, a.mpp_sigma_v, a.mpp_sigma_mw, a.op_sigma_v, a.op_sigma_ma];
    res.iter()
        .zip(sigmas)
        .map(|(r, s)| ((r.achieved - r.target) / s).powi(2))
        .sum()
}

/// Weighted least-squares fit of photocurrent scale, saturation current and
/// ideality to `anchors`. Other fields are taken from `template`.
pub fn calibrate(anchors: &PvAnchors, template: &PvModel) -> Result<PvCalibration, AnalogError> {
    let build = |x: &[f64]| PvModel {
        i_ph_per_mw: x[0],
        i0_ma: x[1].exp(),
        ideality: x[2],
        ..*template
    };
    let objective = |x: &[f64]| {
        let m = build(x);
        if m.validate().is_err() {
            return f64::INFINITY;
        }
        match anchor_residuals(&m, anchors) {
            Ok(res) => weighted_cost(&res, anchors),
            Err(_) => f64::INFINITY,
        }
    };
    // start from the flat-region photocurrent and a moderate ideality
    let k0 = anchors.op_current_ma / anchors.op_illumination_mw;
    let m0 = 2.5;
    let scale0 = template.n_junctions as f64 * m0 * template.thermal_voltage;
    let i_diode_guess = (k0 * anchors.mpp_illumination_mw - anchors.mpp_power_mw / anchors.mpp_v).max(1e-3);
    let ln_i0 = i_diode_guess.ln() - anchors.mpp_v / scale0;
    let mut x = vec![k0, ln_i0, m0];
    let mut best = nelder_mead(objective, &x, &[0.005, 0.5, 0.2], 4000, 1e-15);
    // restart once from the optimum to escape a collapsed simplex
    for _ in 0..3 {
        x = best.x.clone();
        let again = nelder_mead(objective, &x, &[0.001, 0.1, 0.05], 4000, 1e-15);
        if again.value >= best.value {
            break;
        }
        best = again;
    }
    let model = build(&best.x);
    model.validate()?;
    let residuals = anchor_residuals(&model, anchors)?;
    let cost = weighted_cost(&residuals, anchors);
    Ok(PvCalibration {
        model,
        residuals,
        cost,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn model() -> PvModel {
        PvModel::default()
    }

    #[test]
    fn dark_cell_is_dead() {
        let m = model();
        assert_eq!(m.open_circuit_voltage(0.0), 0.0);
        for pt in m.iv_curve(0.0, 11).unwrap() {
            assert_eq!(pt.current_ma, 0.0);
            assert_eq!(pt.power_mw, 0.0);
        }
    }

    #[test]
    fn short_circuit_current_is_linear() {
        let m = model();
        assert_relative_eq!(m.current(0.0, 20.0), 2.0 * m.current(0.0, 10.0), max_relative = 1e-12);
    }

    #[test]
    fn peak_power_matches_dense_scan() {
        let m = model();
        let mpp = m.max_power_point(30.0, None).unwrap();
        let scan = m
            .iv_curve(30.0, 200_001)
            .unwrap()
            .into_iter()
            .map(|p| p.power_mw)
            .fold(0.0, f64::max);
        assert!(mpp.power_mw >= scan - 1e-9);
        assert!(mpp.power_mw - scan < 1e-6);
    }

    #[test]
    fn calibrated_anchors_at_thirty_milliwatts() {
        let mpp = model().max_power_point(30.0, None).unwrap();
        assert!((mpp.voltage - 4.7).abs() < 0.1, "{mpp:?}");
        assert!((mpp.power_mw - 16.3).abs() < 0.3, "{mpp:?}");
        assert!((mpp.efficiency - 0.54).abs() < 0.01, "{mpp:?}");
        assert!((mpp.current_ma - 3.47).abs() < 0.05, "{mpp:?}");
    }

    #[test]
    fn peak_power_at_twenty_four_milliwatts() {
        let p = model().max_power_point(24.0, None).unwrap().power_mw;
        assert!((12.0..14.0).contains(&p), "{p}");
    }

    #[test]
    fn implant_operating_point() {
        let op = model().operating_point(24.0, Load::implant_base()).unwrap();
        assert!((op.voltage - 3.4).abs() < 0.1);
        assert!((op.current_ma - 2.98).abs() < 0.1);
        assert!((op.power_mw - 10.1).abs() < 0.2);
    }

    #[test]
    fn resistive_point_satisfies_both_equations() {
        let m = model();
        for &(p, r) in &[(1.0, 0.1), (24.0, 1.141), (30.0, 1.5), (60.0, 100.0)] {
            let op = m.operating_point(p, Load::Resistive { kohm: r }).unwrap();
            let diode = m.current(op.voltage, p);
            assert!(((diode - op.current_ma) / op.current_ma).abs() < 1e-6);
            assert!(((op.voltage / r - op.current_ma) / op.current_ma).abs() < 1e-12);
        }
    }

    #[test]
    fn open_and_short_circuit() {
        let m = model();
        let open = m.operating_point(30.0, Load::Resistive { kohm: f64::INFINITY }).unwrap();
        assert_relative_eq!(open.voltage, m.open_circuit_voltage(30.0));
        assert_eq!(open.current_ma, 0.0);
        let short = m.operating_point(30.0, Load::Resistive { kohm: 0.0 }).unwrap();
        assert_eq!(short.voltage, 0.0);
        assert_relative_eq!(short.current_ma, m.photocurrent(30.0));
    }

    #[test]
    fn constant_power_load() {
        let m = model();
        let op = m.operating_point(30.0, Load::ConstantPower { mw: 10.0 }).unwrap();
        assert_relative_eq!(op.power_mw, 10.0, max_relative = 1e-9);
        assert!(op.voltage > m.max_power_point(30.0, None).unwrap().voltage);
        match m.operating_point(30.0, Load::ConstantPower { mw: 20.0 }) {
            Err(AnalogError::BrownOut { available_mw, .. }) => assert!((available_mw - 16.3).abs() < 0.3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn illumination_inverse_round_trips() {
        let m = model();
        let p = m.illumination_for_voltage(4.0, 1.5).unwrap();
        assert_relative_eq!(m.solve_resistive(p, 1.5, None), 4.0, max_relative = 1e-9);
    }

    #[test]
    fn calibration_reaches_frozen_defaults() {
        let start = PvModel {
            i_ph_per_mw: 0.1,
            i0_ma: 1e-7,
            ideality: 2.0,
            ..model()
        };
        let anchors = PvAnchors::default();
        let fit = calibrate(&anchors, &start).unwrap();
        let frozen = weighted_cost(&anchor_residuals(&model(), &anchors).unwrap(), &anchors);
        assert!(fit.cost <= frozen + 1e-6, "{} vs {}", fit.cost, frozen);
        assert_relative_eq!(fit.model.ideality, model().ideality, max_relative = 1e-3);
        assert_relative_eq!(fit.model.i_ph_per_mw, model().i_ph_per_mw, max_relative = 1e-3);
    }

    #[test]
    fn toml_round_trip() {
        let m = model();
        let text = m.to_toml_string().unwrap();
        assert!(text.contains("ideality"));
        assert_eq!(PvModel::from_toml_str(&text).unwrap(), m);
        assert!(PvModel::from_toml_str(&text.replace("ideality = 2", "ideality = 0")).is_err());
    }

    #[test]
    fn rejects_negative_power() {
        assert!(model().iv_curve(-1.0, 10).is_err());
        assert!(model().max_power_point(0.0, None).is_err());
    }
}
