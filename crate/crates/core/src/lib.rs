//! Behavioral simulator for a laser-powered, optically programmed retinal
//! stimulator implant.
//!
//! The crate follows the signal from the external laser to the electrodes:
//!
//! - [`spectral`]: ocular safety limit, eye transmission, multi-junction PV
//!   quantum efficiency, diamond-lid optics and the wavelength optimizer.
//! - [`analog`]: PV cell static and transient models, photodiode receiver
//!   and the Schmitt-trigger interface circuit.
//! - [`telemetry`]: frame format, Manchester line code, ASK laser modulation,
//!   clock/data recovery and bit-error measurement.
//! - [`asic`]: stimulator power conditioning, power-on-reset, command
//!   interpretation and constant-current pulse generation.
//! - [`budget`]: power flow from pupil to dissipation and the thermal limits.
//! - [`harness`]: scenario files, end-to-end runs, sweeps and output files.

pub mod analog;
pub mod asic;
pub mod budget;
pub mod harness;
pub mod numeric;
pub mod spectral;
pub mod telemetry;
pub mod waveform;

pub use waveform::{ElectricalWaveform, Waveform};
