//! Browser bindings: the wavelength capacity curve, the PV I-V curve and a
//! stimulation pulse into an electrode load.
//!
//! The `*_checked` functions are plain Rust and carry the logic; the exported
//! wrappers only turn their errors into JavaScript exceptions.

use optolink_core::analog::PvModel;
use optolink_core::asic::{
    charge_balance, drive_electrode, generate_pulse, DacModel, ElectrodeLoad, PowerConfig, StimParams, CLOCK_KHZ,
    COMPLIANCE_HEADROOM_V,
};
use optolink_core::spectral::LinkSpectrum;
use wasm_bindgen::prelude::*;

#[wasm_bindgen]
pub struct CapacityCurve {
    wavelengths_nm: Vec<f64>,
    capacity_mw: Vec<f64>,
    optimum_nm: f64,
    optimum_mw: f64,
}

#[wasm_bindgen]
impl CapacityCurve {
    #[wasm_bindgen(getter)]
    pub fn wavelengths_nm(&self) -> Vec<f64> {
        self.wavelengths_nm.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn capacity_mw(&self) -> Vec<f64> {
        self.capacity_mw.clone()
    }
    /// NaN when every point has zero capacity.
    #[wasm_bindgen(getter)]
    pub fn optimum_nm(&self) -> f64 {
        self.optimum_nm
    }
    #[wasm_bindgen(getter)]
    pub fn optimum_mw(&self) -> f64 {
        self.optimum_mw
    }
}

pub fn capacity_curve_checked(from_nm: f64, to_nm: f64, step_nm: f64) -> Result<CapacityCurve, String> {
    let s = LinkSpectrum::default();
    let opt = s.optimum_wavelength(from_nm, to_nm, step_nm).map_err(|e| e.to_string())?;
    let wavelengths_nm: Vec<f64> = (0..opt.grid_points).map(|k| from_nm + k as f64 * step_nm).collect();
    let capacity_mw = wavelengths_nm
        .iter()
        .map(|&nm| s.power_delivery_capacity(nm))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    Ok(CapacityCurve {
        wavelengths_nm,
        capacity_mw,
        optimum_nm: opt.wavelength_nm.unwrap_or(f64::NAN),
        optimum_mw: opt.capacity_mw,
    })
}

/// Power deliverable to the PV cell over a wavelength grid.
#[wasm_bindgen]
pub fn capacity_curve(from_nm: f64, to_nm: f64, step_nm: f64) -> Result<CapacityCurve, JsError> {
    capacity_curve_checked(from_nm, to_nm, step_nm).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub struct PvCurve {
    voltage: Vec<f64>,
    current_ma: Vec<f64>,
    power_mw: Vec<f64>,
    mpp_voltage: f64,
    mpp_power_mw: f64,
    efficiency: f64,
    open_circuit_voltage: f64,
}

#[wasm_bindgen]
impl PvCurve {
    #[wasm_bindgen(getter)]
    pub fn voltage(&self) -> Vec<f64> {
        self.voltage.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn current_ma(&self) -> Vec<f64> {
        self.current_ma.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn power_mw(&self) -> Vec<f64> {
        self.power_mw.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn mpp_voltage(&self) -> f64 {
        self.mpp_voltage
    }
    #[wasm_bindgen(getter)]
    pub fn mpp_power_mw(&self) -> f64 {
        self.mpp_power_mw
    }
    #[wasm_bindgen(getter)]
    pub fn efficiency(&self) -> f64 {
        self.efficiency
    }
    #[wasm_bindgen(getter)]
    pub fn open_circuit_voltage(&self) -> f64 {
        self.open_circuit_voltage
    }
}

pub fn pv_curve_checked(incident_mw: f64, points: usize) -> Result<PvCurve, String> {
    let pv = PvModel::default();
    let iv = pv.iv_curve(incident_mw, points).map_err(|e| e.to_string())?;
    let mpp = pv.max_power_point(incident_mw, None).map_err(|e| e.to_string())?;
    Ok(PvCurve {
        voltage: iv.iter().map(|p| p.voltage).collect(),
        current_ma: iv.iter().map(|p| p.current_ma).collect(),
        power_mw: iv.iter().map(|p| p.power_mw).collect(),
        mpp_voltage: mpp.voltage,
        mpp_power_mw: mpp.power_mw,
        efficiency: mpp.efficiency,
        open_circuit_voltage: pv.open_circuit_voltage(incident_mw),
    })
}

/// Static I-V curve and maximum power point of the PV stack.
#[wasm_bindgen]
pub fn pv_curve(incident_mw: f64, points: usize) -> Result<PvCurve, JsError> {
    pv_curve_checked(incident_mw, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub struct PulseTrace {
    time_us: Vec<f64>,
    current_ua: Vec<f64>,
    voltage: Vec<f64>,
    peak_voltage: f64,
    net_charge_nc: f64,
    compliance_samples: usize,
}

#[wasm_bindgen]
impl PulseTrace {
    #[wasm_bindgen(getter)]
    pub fn time_us(&self) -> Vec<f64> {
        self.time_us.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn current_ua(&self) -> Vec<f64> {
        self.current_ua.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn voltage(&self) -> Vec<f64> {
        self.voltage.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn peak_voltage(&self) -> f64 {
        self.peak_voltage
    }
    #[wasm_bindgen(getter)]
    pub fn net_charge_nc(&self) -> f64 {
        self.net_charge_nc
    }
    #[wasm_bindgen(getter)]
    pub fn compliance_samples(&self) -> usize {
        self.compliance_samples
    }
}

/// Biphasic pulse into a resistor (`cdl_nf <= 0`) or a Randles load with
/// `rs_kohm`, `rct_kohm` and `cdl_nf`.
pub fn stimulation_pulse_checked(
    amplitude_ua: f64,
    phase_us: f64,
    gain_error: f64,
    rs_kohm: f64,
    rct_kohm: f64,
    cdl_nf: f64,
) -> Result<PulseTrace, String> {
    let dac = DacModel {
        gain_error,
        ..DacModel::default()
    };
    let params = StimParams::biphasic(amplitude_ua, phase_us, &dac);
    let load = if cdl_nf > 0.0 {
        ElectrodeLoad::Randles { rs_kohm, rct_kohm, cdl_nf }
    } else {
        ElectrodeLoad::Resistive { kohm: rs_kohm }
    };
    let i = generate_pulse(&params, &dac, CLOCK_KHZ).map_err(|e| e.to_string())?;
    let compliance = PowerConfig::default().analog_rail_v - COMPLIANCE_HEADROOM_V;
    let d = drive_electrode(&i, &load, compliance, 0.0).map_err(|e| e.to_string())?;
    let peak = d.voltage.samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(PulseTrace {
        time_us: (0..d.current_ua.len()).map(|k| d.current_ua.time_ns(k) / 1e3).collect(),
        net_charge_nc: charge_balance(&d.current_ua),
        current_ua: d.current_ua.samples,
        voltage: d.voltage.samples,
        peak_voltage: peak,
        compliance_samples: d.compliance_events.len(),
    })
}

#[wasm_bindgen]
pub fn stimulation_pulse(
    amplitude_ua: f64,
    phase_us: f64,
    gain_error: f64,
    rs_kohm: f64,
    rct_kohm: f64,
    cdl_nf: f64,
) -> Result<PulseTrace, JsError> {
    stimulation_pulse_checked(amplitude_ua, phase_us, gain_error, rs_kohm, rct_kohm, cdl_nf).map_err(|e| JsError::new(&e))
}
