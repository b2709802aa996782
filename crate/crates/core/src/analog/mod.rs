//! Electrical front end: PV cell, photodiode receiver and interface circuit.

mod interface;
mod measure;
mod photodiode;
mod pv;
mod transient;

use thiserror::Error;

pub use interface::{interface_digitize, interface_quiescent_power, DifferentialPair, Digitizer, Edge, EdgeDetector, InterfaceCircuit};
pub use measure::{measure_rise_fall, RiseFall};
pub use photodiode::{photodiode_current, Photodiode, PhotodiodeFilter};
pub use transient::{pv_transient, PvRelaxation, SupplyNode};
pub use pv::{calibrate, AnchorResidual, IvPoint, Load, MaxPowerPoint, OperatingPoint, PvAnchors, PvCalibration, PvModel};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalogError {
    #[error("invalid model parameters: {0}")]
    InvalidModel(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("brown-out: load demands {demand_mw} mW, cell can deliver at most {available_mw} mW")]
    BrownOut { demand_mw: f64, available_mw: f64 },
    #[error("sample period {sample_period_ns} ns is coarser than {limit_ns} ns")]
    SampleTooCoarse { sample_period_ns: f64, limit_ns: f64 },
    #[error("no transitions found")]
    NoTransitions,
    #[error("config: {0}")]
    Config(String),
    #[error("solver did not converge: {0}")]
    NonConvergence(String),
}

