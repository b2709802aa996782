//! Scenario description, TOML persistence and validation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::analog::{InterfaceCircuit, Photodiode, PvModel};
use crate::asic::{Command, DacModel, ElectrodeLoad, ElectrodeRole, Polarity, PowerConfig, PulseShape, StimParams, N_ELECTRODES};
use crate::spectral::LinkSpectrum;
use crate::telemetry::{AskParams, Frame};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Modulation {
    /// `(p_high − p_low) / (p_high + p_low)`.
    pub depth: f64,
    /// 10–90 % laser edge time, ns.
    pub edge_time_ns: f64,
}

impl Default for Modulation {
    fn default() -> Self {
        Self {
            depth: 1.0 / 6.0,
            edge_time_ns: 50.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Noise {
    /// Standard deviation of additive Gaussian noise on the optical power
    /// at the implant, mW. Zero disables noise.
    pub sigma_mw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrontEnd {
    /// Fraction of the beam that lands on the photodiode.
    pub pd_coupling: f64,
    pub photodiode: Photodiode,
    pub interface: InterfaceCircuit,
    pub pv: PvModel,
    /// Decoupling capacitance on the implant supply, nF.
    pub supply_capacitance_nf: f64,
    /// Resistive equivalent of the ASIC plus interface circuit, kΩ.
    pub supply_load_kohm: f64,
}

impl Default for FrontEnd {
    fn default() -> Self {
        Self {
            pd_coupling: 0.005,
            photodiode: Photodiode::default(),
            interface: InterfaceCircuit::default(),
            pv: PvModel::default(),
            supply_capacitance_nf: 10.0,
            supply_load_kohm: 3.4 / 2.98,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AsicSettings {
    pub dac: DacModel,
    pub power: PowerConfig,
    /// Electrode compliance limit below the analog rail, V.
    pub compliance_headroom_v: f64,
}

impl Default for AsicSettings {
    fn default() -> Self {
        Self {
            dac: DacModel::default(),
            power: PowerConfig::default(),
            compliance_headroom_v: crate::asic::COMPLIANCE_HEADROOM_V,
        }
    }
}

impl AsicSettings {
    pub fn compliance_v(&self) -> f64 {
        self.power.analog_rail_v - self.compliance_headroom_v
    }
}

fn default_interphase() -> f64 {
    crate::asic::DEFAULT_INTERPHASE_US
}

fn cathodic_first() -> Polarity {
    Polarity::CathodicFirst
}

fn biphasic() -> PulseShape {
    PulseShape::Biphasic
}

/// One scripted downlink command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum CommandSpec {
    SetElectrodeRole {
        index: u16,
        role: ElectrodeRole,
    },
    SetWaveform {
        amplitude_ua: f64,
        phase1_us: f64,
        #[serde(default = "default_interphase")]
        interphase_us: f64,
        /// Defaults to `phase1_us`.
        #[serde(default)]
        phase2_us: Option<f64>,
        #[serde(default = "cathodic_first")]
        polarity: Polarity,
        #[serde(default = "biphasic")]
        shape: PulseShape,
    },
    Trigger,
    DisableAll,
    QueryStatus,
    /// Arbitrary frame, for fault injection.
    Raw {
        opcode: u8,
        #[serde(default)]
        payload_hex: String,
    },
}

impl CommandSpec {
    pub fn to_frame(&self, dac: &DacModel) -> Result<Frame, HarnessError> {
        Ok(match self {
            CommandSpec::SetElectrodeRole { index, role } => Command::SetElectrodeRole {
                index: *index,
                role: *role,
            }
            .to_frame(),
            CommandSpec::SetWaveform {
                amplitude_ua,
                phase1_us,
                interphase_us,
                phase2_us,
                polarity,
                shape,
            } => {
                let params = StimParams {
                    amplitude_code: dac.code_for(*amplitude_ua),
                    phase1_us: *phase1_us,
                    interphase_us: *interphase_us,
                    phase2_us: phase2_us.unwrap_or(*phase1_us),
                    polarity: *polarity,
                    shape: *shape,
                };
                params.validate().map_err(|e| HarnessError::Validation(e.to_string()))?;
                Command::SetWaveform(params).to_frame()
            }
            CommandSpec::Trigger => Command::Trigger.to_frame(),
            CommandSpec::DisableAll => Command::DisableAll.to_frame(),
            CommandSpec::QueryStatus => Command::QueryStatus.to_frame(),
            CommandSpec::Raw { opcode, payload_hex } => {
                let payload = hex::decode(payload_hex).map_err(|e| HarnessError::Validation(format!("payload_hex: {e}")))?;
                Frame::new(*opcode, payload).map_err(|e| HarnessError::Validation(e.to_string()))?
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptCommand {
    /// Earliest transmit time; frames go out in script order, back to back
    /// if the previous one is still being sent.
    pub at_us: f64,
    #[serde(flatten)]
    pub spec: CommandSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadSpec {
    pub electrode: u16,
    #[serde(flatten)]
    pub load: ElectrodeLoad,
}

fn default_bitrate() -> f64 {
    crate::telemetry::DEFAULT_BITRATE_KBPS
}

fn default_time_step() -> f64 {
    10.0
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub wavelength_nm: f64,
    /// Mean laser power entering the pupil, mW.
    pub p_pupil_mw: f64,
    #[serde(default = "default_bitrate")]
    pub bitrate_kbps: f64,
    #[serde(default = "default_time_step")]
    pub time_step_ns: f64,
    pub duration_us: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "yes")]
    pub record_traces: bool,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub modulation: Modulation,
    #[serde(default)]
    pub noise: Noise,
    #[serde(default)]
    pub front_end: FrontEnd,
    #[serde(default)]
    pub asic: AsicSettings,
    #[serde(default)]
    pub commands: Vec<ScriptCommand>,
    /// Electrodes without an entry use the default retinal Randles load.
    #[serde(default)]
    pub loads: Vec<LoadSpec>,
}

impl Scenario {
    /// 30 mW at 850 nm, then role, waveform and trigger commands for a
    /// 250 µA / 500 µs biphasic pulse into a 10 kΩ resistor on electrode 0.
    pub fn nominal() -> Self {
        let at = |at_us: f64, spec: CommandSpec| ScriptCommand { at_us, spec };
        Self {
            name: "nominal".into(),
            wavelength_nm: 850.0,
            p_pupil_mw: 30.0,
            bitrate_kbps: default_bitrate(),
            time_step_ns: default_time_step(),
            duration_us: 1800.0,
            seed: 1,
            record_traces: true,
            output_dir: None,
            modulation: Modulation::default(),
            noise: Noise::default(),
            front_end: FrontEnd::default(),
            asic: AsicSettings::default(),
            commands: vec![
                at(
                    100.0,
                    CommandSpec::SetElectrodeRole {
                        index: 0,
                        role: ElectrodeRole::Active,
                    },
                ),
                at(
                    100.0,
                    CommandSpec::SetElectrodeRole {
                        index: 1,
                        role: ElectrodeRole::Return,
                    },
                ),
                at(
                    100.0,
                    CommandSpec::SetWaveform {
                        amplitude_ua: 250.0,
                        phase1_us: 500.0,
                        interphase_us: default_interphase(),
                        phase2_us: None,
                        polarity: Polarity::CathodicFirst,
                        shape: PulseShape::Biphasic,
                    },
                ),
                at(100.0, CommandSpec::Trigger),
            ],
            loads: vec![LoadSpec {
                electrode: 0,
                load: ElectrodeLoad::Resistive { kohm: 10.0 },
            }],
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        let s: Self = toml::from_str(text).map_err(|e| HarnessError::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String, HarnessError> {
        toml::to_string(self).map_err(|e| HarnessError::Parse(e.to_string()))
    }

    pub fn bit_period_ns(&self) -> f64 {
        1e6 / self.bitrate_kbps
    }

    pub fn ask_params(&self, mean_mw: f64) -> AskParams {
        AskParams {
            edge_time_ns: self.modulation.edge_time_ns,
            sample_period_ns: self.time_step_ns,
            ..AskParams::default()
        }
        .with_mean_and_depth(mean_mw, self.modulation.depth)
    }

    pub fn load_for(&self, electrode: u16) -> ElectrodeLoad {
        self.loads
            .iter()
            .rev()
            .find(|l| l.electrode == electrode)
            .map_or_else(ElectrodeLoad::retinal_default, |l| l.load)
    }

    /// Script frames with their earliest transmit times.
    pub fn frames(&self) -> Result<Vec<(f64, Frame)>, HarnessError> {
        self.commands
            .iter()
            .map(|c| Ok((c.at_us, c.spec.to_frame(&self.asic.dac)?)))
            .collect()
    }

    /// Fastest configured edge, ns.
    pub fn fastest_edge_ns(&self) -> f64 {
        let i = &self.front_end.interface;
        self.modulation.edge_time_ns.min(i.out_rise_ns).min(i.out_fall_ns)
    }

    /// Rejects inconsistent configurations before anything runs.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let fail = |msg: String| Err(HarnessError::Validation(msg));
        let (lo, hi) = LinkSpectrum::default().domain();
        if !(self.wavelength_nm >= lo && self.wavelength_nm <= hi) {
            return fail(format!("wavelength_nm = {} outside [{lo}, {hi}]", self.wavelength_nm));
        }
        if !(self.p_pupil_mw >= 0.0 && self.p_pupil_mw.is_finite()) {
            return fail(format!("p_pupil_mw = {}", self.p_pupil_mw));
        }
        if !(self.bitrate_kbps > 0.0 && self.bitrate_kbps.is_finite()) {
            return fail(format!("bitrate_kbps = {}", self.bitrate_kbps));
        }
        if !(self.modulation.edge_time_ns > 0.0) {
            return fail(format!("modulation.edge_time_ns = {}", self.modulation.edge_time_ns));
        }
        let max_step = self.fastest_edge_ns() / 5.0;
        if !(self.time_step_ns > 0.0 && self.time_step_ns <= max_step + 1e-12) {
            return fail(format!(
                "time_step_ns = {} must be in (0, {max_step}] (one fifth of the fastest edge)",
                self.time_step_ns
            ));
        }
        if self.time_step_ns > self.bit_period_ns() / 8.0 {
            return fail(format!("time_step_ns = {} gives under 8 samples per bit", self.time_step_ns));
        }
        if !(self.duration_us > 0.0 && self.duration_us.is_finite()) {
            return fail(format!("duration_us = {}", self.duration_us));
        }
        if !(0.0..1.0).contains(&self.modulation.depth) {
            return fail(format!("modulation.depth = {} outside [0, 1)", self.modulation.depth));
        }
        if !(self.noise.sigma_mw >= 0.0 && self.noise.sigma_mw.is_finite()) {
            return fail(format!("noise.sigma_mw = {}", self.noise.sigma_mw));
        }
        let fe = &self.front_end;
        if !(fe.pd_coupling >= 0.0 && fe.pd_coupling <= 1.0) {
            return fail(format!("front_end.pd_coupling = {}", fe.pd_coupling));
        }
        if !(fe.supply_capacitance_nf > 0.0 && fe.supply_load_kohm > 0.0) {
            return fail("front_end supply capacitance and load must be positive".into());
        }
        fe.photodiode.validate().map_err(|e| HarnessError::Validation(e.to_string()))?;
        fe.interface.validate().map_err(|e| HarnessError::Validation(e.to_string()))?;
        fe.pv.validate().map_err(|e| HarnessError::Validation(e.to_string()))?;
        self.asic.dac.validate().map_err(|e| HarnessError::Validation(e.to_string()))?;
        let p = &self.asic.power;
        if !(p.smoothing_ns > 0.0 && p.rail_down_v <= p.rail_up_v && self.asic.compliance_v() > 0.0) {
            return fail(format!("asic.power = {p:?}"));
        }
        for l in &self.loads {
            if l.electrode as usize >= N_ELECTRODES {
                return fail(format!("load on electrode {} (array has {N_ELECTRODES})", l.electrode));
            }
            l.load.validate().map_err(|e| HarnessError::Validation(e.to_string()))?;
        }
        for c in &self.commands {
            if !(c.at_us >= 0.0 && c.at_us.is_finite()) {
                return fail(format!("command at_us = {}", c.at_us));
            }
        }
        self.frames()?;
        Ok(())
    }
}
