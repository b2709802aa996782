//! Time-domain response of the PV cell and of the decoupled supply node.

use super::{AnalogError, PvModel};
use crate::waveform::{ElectricalWaveform, Waveform};

/// Streaming first-order relaxation of the PV terminal voltage toward the
/// static operating point across a resistive load.
///
/// Voltage rises with `tau_rise_ns` and falls with `tau_fall_ns`; each step
/// uses the exact exponential update for a target held over the step.
#[derive(Debug, Clone)]
pub struct PvRelaxation {
    model: PvModel,
    load_kohm: f64,
    rise_keep: f64,
    fall_keep: f64,
    voltage: f64,
    target: f64,
}

impl PvRelaxation {
    /// Starts in steady state under `initial_p_mw`.
    pub fn new(model: PvModel, load_kohm: f64, sample_period_ns: f64, initial_p_mw: f64) -> Result<Self, AnalogError> {
        model.validate()?;
        if !(load_kohm > 0.0) {
            return Err(AnalogError::InvalidInput(format!("load {load_kohm} kΩ")));
        }
        if !(sample_period_ns > 0.0 && sample_period_ns.is_finite()) {
            return Err(AnalogError::InvalidInput(format!("sample period {sample_period_ns} ns")));
        }
        let limit_ns = model.tau_rise_ns.min(model.tau_fall_ns) / 10.0;
        if sample_period_ns > limit_ns {
            return Err(AnalogError::SampleTooCoarse {
                sample_period_ns,
                limit_ns,
            });
        }
        if !(initial_p_mw >= 0.0 && initial_p_mw.is_finite()) {
            return Err(AnalogError::InvalidInput(format!("optical power {initial_p_mw} mW")));
        }
        let target = model.solve_resistive(initial_p_mw, load_kohm, None);
        Ok(Self {
            model,
            load_kohm,
            rise_keep: (-sample_period_ns / model.tau_rise_ns).exp(),
            fall_keep: (-sample_period_ns / model.tau_fall_ns).exp(),
            voltage: target,
            target,
        })
    }

    pub fn voltage(&self) -> f64 {
        self.voltage
    }

    /// Advances one sample under `p_mw`; returns (V, mA).
    pub fn step(&mut self, p_mw: f64) -> (f64, f64) {
        let p_mw = p_mw.max(0.0);
        self.target = self.model.solve_resistive(p_mw, self.load_kohm, Some(self.target));
        let keep = if self.target > self.voltage {
            self.rise_keep
        } else {
            self.fall_keep
        };
        self.voltage = self.target + (self.voltage - self.target) * keep;
        (self.voltage, self.voltage / self.load_kohm)
    }
}

/// Terminal voltage and load current of the PV cell under `p_in`.
pub fn pv_transient(model: &PvModel, p_in: &Waveform, load_kohm: f64) -> Result<ElectricalWaveform, AnalogError> {
    if p_in.is_empty() {
        return Err(AnalogError::InvalidInput("empty optical waveform".into()));
    }
    if let Some(bad) = p_in.samples.iter().find(|p| !(**p >= 0.0 && p.is_finite())) {
        return Err(AnalogError::InvalidInput(format!("optical power {bad} mW")));
    }
    let mut relax = PvRelaxation::new(*model, load_kohm, p_in.sample_period_ns, p_in.samples[0])?;
    let (voltage, current_ma) = p_in.samples.iter().map(|&p| relax.step(p)).unzip();
    Ok(ElectricalWaveform {
        t0_ns: p_in.t0_ns,
        sample_period_ns: p_in.sample_period_ns,
        voltage,
        current_ma,
    })
}

/// Implant supply rail: the PV cell charging a decoupling capacitor that
/// feeds a resistive load. Integrated with linearised backward Euler.
#[derive(Debug, Clone)]
pub struct SupplyNode {
    model: PvModel,
    load_kohm: f64,
    capacitance_nf: f64,
    voltage: f64,
}

impl SupplyNode {
    /// Starts at the static operating point under `initial_p_mw`.
    pub fn new(model: PvModel, load_kohm: f64, capacitance_nf: f64, initial_p_mw: f64) -> Result<Self, AnalogError> {
        model.validate()?;
        if !(load_kohm > 0.0) || !(capacitance_nf > 0.0 && capacitance_nf.is_finite()) {
            return Err(AnalogError::InvalidInput(format!(
                "supply node with {load_kohm} kΩ and {capacitance_nf} nF"
            )));
        }
        let voltage = model.solve_resistive(initial_p_mw.max(0.0), load_kohm, None);
        Ok(Self {
            model,
            load_kohm,
            capacitance_nf,
            voltage,
        })
    }

    pub fn voltage(&self) -> f64 {
        self.voltage
    }

    /// Load current at the present voltage, mA.
    pub fn load_current_ma(&self) -> f64 {
        self.voltage / self.load_kohm
    }

    /// Advances by `dt_ns` under `p_mw`; returns the new voltage.
    pub fn step(&mut self, p_mw: f64, dt_ns: f64) -> f64 {
        let p_mw = p_mw.max(0.0);
        let g = 1.0 / self.load_kohm;
        let v = self.voltage;
        let f = self.model.current(v, p_mw) - v * g;
        let scale = self.model.stack_voltage_scale();
        let df = -self.model.i0_ma / scale * (v / scale).exp() - g;
        // 1 nF · 1 V/ns = 1000 mA
        let c = 1000.0 * self.capacitance_nf;
        let next = v + f * dt_ns / (c - df * dt_ns);
        let voc = self.model.open_circuit_voltage(p_mw);
        self.voltage = next.clamp(0.0, voc.max(v));
        self.voltage
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analog::{measure_rise_fall, Load};

    fn square(lo: f64, hi: f64, half_period_ns: f64, periods: usize, dt: f64) -> Waveform {
        let n = (2.0 * half_period_ns * periods as f64 / dt) as usize;
        Waveform::from_fn(dt, n, |t| if (t / half_period_ns) as usize % 2 == 1 { hi } else { lo })
    }

    #[test]
    fn square_illumination_edges_and_swing() {
        let m = PvModel::default();
        let lo = m.illumination_for_voltage(3.6, 1.5).unwrap();
        let hi = m.illumination_for_voltage(4.25, 1.5).unwrap();
        let out = pv_transient(&m, &square(lo, hi, 5000.0, 4, 1.0), 1.5).unwrap();
        let v = out.voltage_waveform();
        assert!((v.min() - 3.6).abs() < 1e-3 && (v.max() - 4.25).abs() < 1e-3);
        let rf = measure_rise_fall(&v, 0.3, 0.7).unwrap();
        assert!((rf.rise_ns.unwrap() - 370.0).abs() < 20.0, "{rf:?}");
        assert!((rf.fall_ns.unwrap() - 190.0).abs() < 20.0, "{rf:?}");
    }

    #[test]
    fn settles_to_static_operating_point() {
        let m = PvModel::default();
        let step = Waveform::from_fn(5.0, 2000, |t| if t < 100.0 { 5.0 } else { 24.0 });
        let out = pv_transient(&m, &step, 3.4 / 2.98).unwrap();
        let op = m.operating_point(24.0, Load::implant_base()).unwrap();
        let last = *out.voltage.last().unwrap();
        assert!(((last - op.voltage) / op.voltage).abs() < 1e-3);
    }

    #[test]
    fn fast_limit_tracks_static_trajectory() {
        // steady tracking lag on a ramp is proportional to tau
        let lag = |tau: f64| {
            let m = PvModel {
                tau_rise_ns: tau,
                tau_fall_ns: tau,
                ..PvModel::default()
            };
            let p = Waveform::from_fn(tau / 10.0, 400, |t| 10.0 + 4.0 * t);
            let out = pv_transient(&m, &p, 1.5).unwrap();
            let v = out.voltage.last().unwrap();
            (v - m.solve_resistive(*p.samples.last().unwrap(), 1.5, None)).abs()
        };
        let (a, b) = (lag(1e-3), lag(1e-4));
        assert!(b < 1e-4, "{b}");
        assert!((8.0..12.0).contains(&(a / b)), "{a} {b}");
    }

    #[test]
    fn coarse_sampling_is_rejected() {
        let m = PvModel::default();
        let p = Waveform::from_fn(50.0, 10, |_| 20.0);
        assert!(matches!(pv_transient(&m, &p, 1.5), Err(AnalogError::SampleTooCoarse { .. })));
    }

    #[test]
    fn supply_node_settles_to_operating_point() {
        let m = PvModel::default();
        let mut node = SupplyNode::new(m, 1.141, 10.0, 0.0).unwrap();
        for _ in 0..20_000 {
            node.step(24.0, 10.0);
        }
        let op = m.operating_point(24.0, Load::Resistive { kohm: 1.141 }).unwrap();
        assert!((node.voltage() - op.voltage).abs() < 1e-6);
    }
}
