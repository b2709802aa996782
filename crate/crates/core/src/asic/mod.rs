//! Behavioural model of the 256-electrode stimulator ASIC.

mod load;
mod machine;
mod power;
mod pulse;

use thiserror::Error;

pub use load::{drive_electrode, electrode_voltage, ComplianceEvent, ElectrodeDrive, ElectrodeLoad};
pub use machine::{
    electrode_position_um, opcode, por_frame, Asic, Command, CommandOutcome, ElectrodeRole, NackReason, TriggeredPulse,
    ELECTRODE_PITCH_UM, ELECTRODE_SIZE_UM, N_ELECTRODES,
};
pub use power::{clock_lock_time, por_times, power_conditioning, PowerConditioner, PowerConfig, PowerTimeline, RailState, RailTransition};
pub use pulse::{
    charge_balance, frame_schedule, generate_pulse, tick_ns, to_ticks, DacModel, Polarity, PulseShape, SchedulePlan, StimParams,
    CLOCK_KHZ, DEFAULT_INTERPHASE_US, MAX_REFRESH_HZ,
};

use crate::telemetry::TelemetryError;

/// Headroom between the analog rail and the electrode compliance limit, V.
pub const COMPLIANCE_HEADROOM_V: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AsicError {
    #[error("rails are down")]
    Unpowered,
    #[error("no recovered clock")]
    NoClock,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("schedule rejected: {0}")]
    Schedule(String),
    #[error(transparent)]
    Telemetry(#[from] TelemetryError),
}
