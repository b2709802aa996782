//! Photodiode interface: sense resistor, AC coupling, Schmitt trigger and
//! complementary rail-to-rail outputs.

use serde::{Deserialize, Serialize};

use super::AnalogError;
use crate::waveform::Waveform;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InterfaceCircuit {
    pub r_sense_kohm: f64,
    pub c_couple_pf: f64,
    pub r_feedback_kohm: f64,
    /// Upper threshold on the AC-coupled sense voltage, V.
    pub schmitt_high_v: f64,
    /// Lower threshold on the AC-coupled sense voltage, V.
    pub schmitt_low_v: f64,
    /// 10–90 % output rise time, ns.
    pub out_rise_ns: f64,
    /// 90–10 % output fall time, ns.
    pub out_fall_ns: f64,
    pub responsivity_ma_per_mw: f64,
    /// Below this supply both outputs are held low, V.
    pub min_supply_v: f64,
    pub quiescent_current_ma: f64,
}

impl Default for InterfaceCircuit {
    fn default() -> Self {
        Self {
            r_sense_kohm: 8.2,
            c_couple_pf: 150.0,
            r_feedback_kohm: 820.0,
            schmitt_high_v: 0.03,
            schmitt_low_v: -0.03,
            out_rise_ns: 112.0,
            out_fall_ns: 160.0,
            responsivity_ma_per_mw: 0.55,
            min_supply_v: 2.0,
            quiescent_current_ma: 0.96,
        }
    }
}

impl InterfaceCircuit {
    pub fn validate(&self) -> Result<(), AnalogError> {
        let positive = [
            self.r_sense_kohm,
            self.c_couple_pf,
            self.r_feedback_kohm,
            self.out_rise_ns,
            self.out_fall_ns,
            self.responsivity_ma_per_mw,
        ]
        .iter()
        .all(|x| *x > 0.0 && x.is_finite());
        if positive
            && self.schmitt_high_v > self.schmitt_low_v
            && self.min_supply_v >= 0.0
            && self.quiescent_current_ma >= 0.0
        {
            Ok(())
        } else {
            Err(AnalogError::InvalidModel(format!("{self:?}")))
        }
    }

    /// High-pass time constant, ns (kΩ · pF = ns).
    pub fn coupling_time_constant_ns(&self) -> f64 {
        self.r_feedback_kohm * self.c_couple_pf
    }

    pub fn coupling_corner_hz(&self) -> f64 {
        1e9 / (2.0 * std::f64::consts::PI * self.coupling_time_constant_ns())
    }

    pub fn hysteresis_v(&self) -> f64 {
        self.schmitt_high_v - self.schmitt_low_v
    }
}

/// Constant-current consumption at `supply` volts, mW.
pub fn interface_quiescent_power(circ: &InterfaceCircuit, supply: f64) -> f64 {
    circ.quiescent_current_ma * supply.max(0.0)
}

/// Streaming digitizer, one photocurrent sample in, one output pair out.
#[derive(Debug, Clone)]
pub struct Digitizer {
    circ: InterfaceCircuit,
    hp_gain: f64,
    rise_keep: f64,
    fall_keep: f64,
    prev_sense: f64,
    coupled: f64,
    high: bool,
    pos: f64,
    neg: f64,
}

impl Digitizer {
    /// `precharge_sense_v` is the DC level the coupling capacitor starts at.
    pub fn new(circ: InterfaceCircuit, sample_period_ns: f64, precharge_sense_v: f64) -> Result<Self, AnalogError> {
        circ.validate()?;
        if !(sample_period_ns > 0.0 && sample_period_ns.is_finite()) {
            return Err(AnalogError::InvalidInput(format!("sample period {sample_period_ns} ns")));
        }
        let tau = circ.coupling_time_constant_ns();
        let ln9 = 9f64.ln();
        Ok(Self {
            circ,
            hp_gain: tau / (tau + sample_period_ns),
            rise_keep: (-sample_period_ns * ln9 / circ.out_rise_ns).exp(),
            fall_keep: (-sample_period_ns * ln9 / circ.out_fall_ns).exp(),
            prev_sense: precharge_sense_v,
            coupled: 0.0,
            high: false,
            pos: 0.0,
            neg: 0.0,
        })
    }

    /// Present AC-coupled sense voltage, V.
    pub fn coupled_v(&self) -> f64 {
        self.coupled
    }

    /// Advances one sample; returns (positive, negative) output voltages.
    pub fn step(&mut self, i_pd_ma: f64, supply_v: f64) -> (f64, f64) {
        let sense = i_pd_ma * self.circ.r_sense_kohm;
        self.coupled = self.hp_gain * (self.coupled + sense - self.prev_sense);
        self.prev_sense = sense;
        if self.coupled > self.circ.schmitt_high_v {
            self.high = true;
        } else if self.coupled < self.circ.schmitt_low_v {
            self.high = false;
        }
        if supply_v < self.circ.min_supply_v {
            self.pos = 0.0;
            self.neg = 0.0;
            return (0.0, 0.0);
        }
        let (pos_target, neg_target) = if self.high { (1.0, 0.0) } else { (0.0, 1.0) };
        let relax = |level: f64, target: f64, rise: f64, fall: f64| {
            let keep = if target > level { rise } else { fall };
            target + (level - target) * keep
        };
        self.pos = relax(self.pos, pos_target, self.rise_keep, self.fall_keep);
        self.neg = relax(self.neg, neg_target, self.rise_keep, self.fall_keep);
        (self.pos * supply_v, self.neg * supply_v)
    }
}

/// Complementary output pair of the interface circuit.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferentialPair {
    pub pos: Waveform,
    pub neg: Waveform,
}

/// A zero crossing of `pos − neg`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub time_ns: f64,
    pub rising: bool,
}

impl DifferentialPair {
    /// Differential zero crossings, linearly interpolated between samples.
    pub fn edges(&self) -> Vec<Edge> {
        let mut detector = EdgeDetector::new(self.pos.t0_ns, self.pos.sample_period_ns);
        self.pos
            .samples
            .iter()
            .zip(&self.neg.samples)
            .filter_map(|(p, n)| detector.push(p - n))
            .collect()
    }
}

/// Streaming zero-crossing detector on a differential signal.
#[derive(Debug, Clone)]
pub struct EdgeDetector {
    t0_ns: f64,
    dt_ns: f64,
    index: usize,
    last_sign: Option<bool>,
    last_nonzero: Option<(usize, f64)>,
}

impl EdgeDetector {
    pub fn new(t0_ns: f64, sample_period_ns: f64) -> Self {
        Self {
            t0_ns,
            dt_ns: sample_period_ns,
            index: 0,
            last_sign: None,
            last_nonzero: None,
        }
    }

    pub fn push(&mut self, diff: f64) -> Option<Edge> {
        let k = self.index;
        self.index += 1;
        if diff == 0.0 {
            return None;
        }
        let sign = diff > 0.0;
        let edge = match (self.last_sign, self.last_nonzero) {
            (Some(prev_sign), Some((j, prev_val))) if prev_sign != sign => {
                let frac = prev_val / (prev_val - diff);
                let t = self.t0_ns + (j as f64 + frac * (k - j) as f64) * self.dt_ns;
                Some(Edge { time_ns: t, rising: sign })
            }
            _ => None,
        };
        self.last_sign = Some(sign);
        self.last_nonzero = Some((k, diff));
        edge
    }
}

/// Digitizes a photocurrent waveform (mA) at a fixed supply.
///
/// The coupling capacitor starts charged to the mean sense voltage.
pub fn interface_digitize(circ: &InterfaceCircuit, i_pd: &Waveform, supply: f64) -> Result<DifferentialPair, AnalogError> {
    if !(supply >= 0.0 && supply.is_finite()) {
        return Err(AnalogError::InvalidInput(format!("supply {supply} V")));
    }
    if !i_pd.all_finite() {
        return Err(AnalogError::InvalidInput("non-finite photocurrent".into()));
    }
    let precharge = i_pd.mean() * circ.r_sense_kohm;
    let mut dig = Digitizer::new(*circ, i_pd.sample_period_ns, precharge)?;
    let (pos, neg): (Vec<f64>, Vec<f64>) = i_pd.samples.iter().map(|&i| dig.step(i, supply)).unzip();
    Ok(DifferentialPair {
        pos: Waveform::starting_at(i_pd.t0_ns, i_pd.sample_period_ns, pos),
        neg: Waveform::starting_at(i_pd.t0_ns, i_pd.sample_period_ns, neg),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analog::{measure_rise_fall, photodiode_current, Photodiode};

    const DT: f64 = 1.0;

    fn square_current(lo_ma: f64, hi_ma: f64, freq_khz: f64, duration_ns: f64) -> Waveform {
        let half = 0.5e6 / freq_khz;
        Waveform::from_fn(DT, (duration_ns / DT) as usize, |t| if ((t / half) as usize).is_multiple_of(2) { hi_ma } else { lo_ma })
    }

    #[test]
    fn coupling_corner() {
        let c = InterfaceCircuit::default();
        assert!((c.coupling_corner_hz() - 1294.0).abs() < 1.0);
        assert_eq!(interface_quiescent_power(&c, 0.0), 0.0);
        assert!((interface_quiescent_power(&c, 4.98) - 4.78).abs() < 0.005);
        assert!((interface_quiescent_power(&c, 3.4) - 3.264).abs() < 1e-9);
    }

    #[test]
    fn output_edge_times_at_600_khz() {
        let c = InterfaceCircuit::default();
        let out = interface_digitize(&c, &square_current(0.055, 0.077, 600.0, 40_000.0), 3.4).unwrap();
        let rf = measure_rise_fall(&out.pos, 0.1, 0.9).unwrap();
        assert!((rf.rise_ns.unwrap() - 112.0).abs() < 2.0, "{rf:?}");
        assert!((rf.fall_ns.unwrap() - 160.0).abs() < 2.0, "{rf:?}");
        assert!(out.edges().len() > 40);
    }

    #[test]
    fn constant_light_gives_no_edges() {
        let c = InterfaceCircuit::default();
        let out = interface_digitize(&c, &Waveform::new(DT, vec![0.07; 20_000]), 3.4).unwrap();
        assert!(out.edges().len() <= 1);
        assert!(out.pos.samples.iter().all(|&v| v == out.pos.samples[0] || v < 3.4));
    }

    #[test]
    fn ripple_inside_hysteresis_never_toggles() {
        let c = InterfaceCircuit::default();
        // 2·ripple·8.2 kΩ well under the 60 mV window
        let i = Waveform::from_fn(DT, 50_000, |t| 0.07 + 0.002 * (t / 300.0).sin());
        let out = interface_digitize(&c, &i, 3.4).unwrap();
        assert!(out.edges().len() <= 1);
    }

    #[test]
    fn low_supply_holds_outputs_low() {
        let c = InterfaceCircuit::default();
        let out = interface_digitize(&c, &square_current(0.055, 0.077, 600.0, 10_000.0), 1.5).unwrap();
        assert!(out.pos.samples.iter().chain(&out.neg.samples).all(|&v| v == 0.0));
    }

    #[test]
    fn dc_offset_does_not_move_edges() {
        let c = InterfaceCircuit::default();
        let pd = Photodiode::default();
        let light = Waveform::from_fn(DT, 30_000, |t| if ((t / 833.3) as usize).is_multiple_of(2) { 0.14 } else { 0.10 });
        let a = interface_digitize(&c, &photodiode_current(&pd, &light).unwrap(), 3.4).unwrap().edges();
        let b = interface_digitize(&c, &photodiode_current(&pd, &light.map(|p| p + 0.05)).unwrap(), 3.4)
            .unwrap()
            .edges();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.rising, y.rising);
            assert!((x.time_ns - y.time_ns).abs() < 1e-6);
        }
    }

    #[test]
    fn outputs_are_complementary_when_settled() {
        let c = InterfaceCircuit::default();
        let out = interface_digitize(&c, &square_current(0.055, 0.077, 600.0, 20_000.0), 3.4).unwrap();
        let edges = out.edges();
        for k in 0..out.pos.len() {
            let t = out.pos.time_ns(k);
            if edges.iter().all(|e| (e.time_ns - t).abs() > 400.0) && t > 400.0 {
                assert!((out.pos.samples[k] + out.neg.samples[k] - 3.4).abs() < 0.05, "t={t}");
            }
        }
    }
}
