//! Electrode loads and the voltage they develop under a current pulse.

use serde::{Deserialize, Serialize};

use super::AsicError;
use crate::numeric::bisect;
use crate::waveform::Waveform;

/// Electrode-tissue load. Resistances in kΩ, capacitance in nF.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ElectrodeLoad {
    Resistive { kohm: f64 },
    /// Series resistance plus charge-transfer resistance in parallel with
    /// the double-layer capacitance.
    Randles { rs_kohm: f64, rct_kohm: f64, cdl_nf: f64 },
}

impl ElectrodeLoad {
    pub fn validate(&self) -> Result<(), AsicError> {
        let ok = match *self {
            ElectrodeLoad::Resistive { kohm } => kohm > 0.0 && kohm.is_finite(),
            ElectrodeLoad::Randles { rs_kohm, rct_kohm, cdl_nf } => {
                rs_kohm > 0.0 && rct_kohm > 0.0 && cdl_nf > 0.0 && [rs_kohm, rct_kohm, cdl_nf].iter().all(|x| x.is_finite())
            }
        };
        if ok {
            Ok(())
        } else {
            Err(AsicError::InvalidParams(format!("{self:?}")))
        }
    }

    /// Impedance magnitude at `freq_hz`, kΩ.
    pub fn impedance_magnitude_kohm(&self, freq_hz: f64) -> f64 {
        match *self {
            ElectrodeLoad::Resistive { kohm } => kohm,
            ElectrodeLoad::Randles { rs_kohm, rct_kohm, cdl_nf } => {
                // R_ct / (1 + jωR_ct·C)
                let wrc = 2.0 * std::f64::consts::PI * freq_hz * rct_kohm * 1e3 * cdl_nf * 1e-9;
                let den = 1.0 + wrc * wrc;
                let re = rs_kohm + rct_kohm / den;
                let im = -rct_kohm * wrc / den;
                re.hypot(im)
            }
        }
    }

    /// Randles cell with `rs_kohm` and `rct_kohm` whose capacitance puts
    /// `|Z(freq_hz)|` at `target_kohm`.
    pub fn randles_calibrated(rs_kohm: f64, rct_kohm: f64, freq_hz: f64, target_kohm: f64) -> Result<Self, AsicError> {
        if !(target_kohm > rs_kohm && target_kohm < rs_kohm + rct_kohm) {
            return Err(AsicError::InvalidParams(format!(
                "|Z| = {target_kohm} kΩ is outside ({rs_kohm}, {}) kΩ",
                rs_kohm + rct_kohm
            )));
        }
        let z = |log_c: f64| {
            ElectrodeLoad::Randles {
                rs_kohm,
                rct_kohm,
                cdl_nf: 10f64.powf(log_c),
            }
            .impedance_magnitude_kohm(freq_hz)
                - target_kohm
        };
        let log_c = bisect(z, -6.0, 9.0, 1e-14).ok_or_else(|| AsicError::InvalidParams("Randles calibration".into()))?;
        Ok(ElectrodeLoad::Randles {
            rs_kohm,
            rct_kohm,
            cdl_nf: 10f64.powf(log_c),
        })
    }

    /// Retinal electrode averaged over the array: 3.1 kΩ at 1 kHz.
    pub fn retinal_default() -> Self {
        Self::randles_calibrated(1.5, 1000.0, 1000.0, 3.1).expect("default Randles parameters are consistent")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplianceEvent {
    pub time_ns: f64,
    pub requested_ua: f64,
    pub delivered_ua: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElectrodeDrive {
    /// Delivered current, µA.
    pub current_ua: Waveform,
    /// Electrode voltage, V.
    pub voltage: Waveform,
    pub compliance_events: Vec<ComplianceEvent>,
}

/// Drives `load` with the programmed current `i_ua`, clamping the electrode
/// voltage at `±compliance_v`. A clamped sample delivers the reduced current
/// that holds the voltage at the limit. `initial_vc_v` is the charge stored
/// on a Randles double layer at the start.
pub fn drive_electrode(i_ua: &Waveform, load: &ElectrodeLoad, compliance_v: f64, initial_vc_v: f64) -> Result<ElectrodeDrive, AsicError> {
    load.validate()?;
    let dt = i_ua.sample_period_ns;
    let mut vc = initial_vc_v;
    let mut current = Vec::with_capacity(i_ua.len());
    let mut voltage = Vec::with_capacity(i_ua.len());
    let mut events = Vec::new();
    for (k, &requested) in i_ua.samples.iter().enumerate() {
        // µA · kΩ = mV
        let (series_kohm, stored_v) = match *load {
            ElectrodeLoad::Resistive { kohm } => (kohm, 0.0),
            ElectrodeLoad::Randles { rs_kohm, .. } => (rs_kohm, vc),
        };
        let mut delivered = requested;
        let mut v = requested * series_kohm * 1e-3 + stored_v;
        if v.abs() > compliance_v + 1e-9 {
            v = compliance_v.copysign(v);
            delivered = (v - stored_v) / (series_kohm * 1e-3);
            events.push(ComplianceEvent {
                time_ns: i_ua.time_ns(k),
                requested_ua: requested,
                delivered_ua: delivered,
            });
        }
        if let ElectrodeLoad::Randles { rct_kohm, cdl_nf, .. } = *load {
            // kΩ · nF = µs
            let tau_ns = rct_kohm * cdl_nf * 1e3;
            let settle = delivered * rct_kohm * 1e-3;
            vc = settle + (vc - settle) * (-dt / tau_ns).exp();
        }
        current.push(delivered);
        voltage.push(v);
    }
    Ok(ElectrodeDrive {
        current_ua: Waveform::starting_at(i_ua.t0_ns, dt, current),
        voltage: Waveform::starting_at(i_ua.t0_ns, dt, voltage),
        compliance_events: events,
    })
}

/// Electrode voltage with no compliance limit.
pub fn electrode_voltage(i_ua: &Waveform, load: &ElectrodeLoad) -> Result<Waveform, AsicError> {
    Ok(drive_electrode(i_ua, load, f64::INFINITY, 0.0)?.voltage)
}
