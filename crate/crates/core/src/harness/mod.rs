//! Scenario orchestration: end-to-end runs, sweeps and output bundles.

mod emit;
mod run;
mod scenario;
mod sweep;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use emit::{emit_bundle, emit_table, render_bundle, BundleFormat, Manifest, ManifestEntry, SCHEMA_VERSION};
pub use run::{
    link_ber, plan_transmission, run_end_to_end, time_aligned_ber, BerStats, ElectrodeTrace, Event, EventKind, FrontEndSample,
    FrontEndTraces, LinkFrontEnd, RunSummary, TraceBundle, TxFrame, TxPlan,
};
pub use scenario::{AsicSettings, CommandSpec, FrontEnd, LoadSpec, Modulation, Noise, Scenario, ScriptCommand};
pub use sweep::{sweep, SweepOptions, SweepParam, SweepRow, SweepTable};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid scenario: {0}")]
    Validation(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Spectral(#[from] crate::spectral::SpectralError),
    #[error(transparent)]
    Analog(#[from] crate::analog::AnalogError),
    #[error(transparent)]
    Telemetry(#[from] crate::telemetry::TelemetryError),
    #[error(transparent)]
    Asic(#[from] crate::asic::AsicError),
    #[error(transparent)]
    Budget(#[from] crate::budget::BudgetError),
}

impl HarnessError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
