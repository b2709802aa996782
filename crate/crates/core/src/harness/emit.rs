//! Output files for trace bundles and sweep tables.
//!
//! Bundle layout (schema version 1):
//!
//! - `summary.json`, `budget.json`, `events.json`: reports as JSON.
//! - CSV format: one `time_ns,<signal>` file per front-end trace
//!   (`optical_mw.csv`, `pv_voltage.csv`, `sense_voltage.csv`,
//!   `interface_pos.csv`, `interface_neg.csv`, `rail_dc.csv`),
//!   `clock_edges.csv`, `rail_timeline.csv` and
//!   `electrode_<n>_pulse_<k>.csv` with `time_ns,current_ua,voltage_v`.
//! - JSON format: the same signals in `traces.json`.
//! - `manifest.json`: schema version, per-file SHA-256 and a bundle hash
//!   over all file names and digests.
//!
//! Everything is rendered in memory before the first file is written.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::run::TraceBundle;
use super::sweep::SweepTable;
use super::HarnessError;
use crate::waveform::Waveform;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BundleFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for BundleFormat {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(BundleFormat::Csv),
            "json" => Ok(BundleFormat::Json),
            _ => Err(HarnessError::Validation(format!("unknown format {s:?} (csv or json)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub files: Vec<ManifestEntry>,
    pub bundle_sha256: String,
}

impl Manifest {
    fn of(files: &BTreeMap<String, Vec<u8>>) -> Self {
        let mut all = Sha256::new();
        let entries = files
            .iter()
            .map(|(name, bytes)| {
                let digest = hex::encode(Sha256::digest(bytes));
                all.update(name.as_bytes());
                all.update([0]);
                all.update(digest.as_bytes());
                all.update(*b"\n");
                ManifestEntry {
                    name: name.clone(),
                    bytes: bytes.len(),
                    sha256: digest,
                }
            })
            .collect();
        Manifest {
            schema_version: SCHEMA_VERSION,
            files: entries,
            bundle_sha256: hex::encode(all.finalize()),
        }
    }
}

fn json<T: Serialize>(v: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(v).expect("report types serialize");
    out.push(b'\n');
    out
}

fn waveform_csv(w: &Waveform, column: &str) -> Vec<u8> {
    let mut out = Vec::with_capacity(w.len() * 24);
    w.write_csv(&mut out, column).expect("in-memory write");
    out
}

#[derive(Serialize)]
struct Versioned<'a, T> {
    schema_version: u32,
    #[serde(flatten)]
    body: &'a T,
}

/// File name to contents, manifest included.
pub fn render_bundle(b: &TraceBundle, format: BundleFormat) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    files.insert(
        "summary.json".into(),
        json(&Versioned {
            schema_version: SCHEMA_VERSION,
            body: &b.summary,
        }),
    );
    files.insert("budget.json".into(), json(&b.budget));
    files.insert("events.json".into(), json(&b.events));
    match format {
        BundleFormat::Json => {
            #[derive(Serialize)]
            struct Traces<'a> {
                schema_version: u32,
                time_step_ns: f64,
                front_end: &'a Option<super::run::FrontEndTraces>,
                clock_edges_ns: &'a [f64],
                rail_transitions: &'a [crate::asic::RailTransition],
                electrodes: &'a [super::run::ElectrodeTrace],
            }
            files.insert(
                "traces.json".into(),
                json(&Traces {
                    schema_version: SCHEMA_VERSION,
                    time_step_ns: b.time_step_ns,
                    front_end: &b.traces,
                    clock_edges_ns: &b.clock_edges_ns,
                    rail_transitions: &b.rail_transitions,
                    electrodes: &b.electrodes,
                }),
            );
        }
        BundleFormat::Csv => {
            if let Some(t) = &b.traces {
                for (name, w) in [
                    ("optical_mw", &t.optical_mw),
                    ("pv_voltage", &t.pv_voltage),
                    ("sense_voltage", &t.sense_voltage),
                    ("interface_pos", &t.interface_pos),
                    ("interface_neg", &t.interface_neg),
                    ("rail_dc", &t.rail_dc),
                ] {
                    files.insert(format!("{name}.csv"), waveform_csv(w, name));
                }
            }
            let mut s = String::from("time_ns\n");
            for t in &b.clock_edges_ns {
                writeln!(s, "{t}").unwrap();
            }
            files.insert("clock_edges.csv".into(), s.into_bytes());
            let mut s = String::from("time_ns,rails_up\n");
            for t in &b.rail_transitions {
                writeln!(s, "{},{}", t.time_ns, t.up).unwrap();
            }
            files.insert("rail_timeline.csv".into(), s.into_bytes());
            let mut seen: BTreeMap<u16, usize> = BTreeMap::new();
            for e in &b.electrodes {
                let k = seen.entry(e.electrode).or_default();
                let mut s = String::from("time_ns,current_ua,voltage_v\n");
                for (i, (c, v)) in e.current_ua.samples.iter().zip(&e.voltage.samples).enumerate() {
                    writeln!(s, "{},{c},{v}", e.current_ua.time_ns(i)).unwrap();
                }
                files.insert(format!("electrode_{}_pulse_{k}.csv", e.electrode), s.into_bytes());
                *k += 1;
            }
        }
    }
    let manifest = Manifest::of(&files);
    files.insert("manifest.json".into(), json(&manifest));
    files
}

fn write_all(dir: &Path, files: &BTreeMap<String, Vec<u8>>) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    for (name, bytes) in files {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(|e| HarnessError::io(&path, e))?;
    }
    Ok(())
}

/// Writes the bundle into `dir`, creating it if needed.
pub fn emit_bundle(b: &TraceBundle, dir: &Path, format: BundleFormat) -> Result<Manifest, HarnessError> {
    let files = render_bundle(b, format);
    write_all(dir, &files)?;
    let manifest: Manifest = serde_json::from_slice(&files["manifest.json"]).expect("rendered above");
    Ok(manifest)
}

/// Writes `sweep_<param>.csv` (or `.json`) into `dir` and returns its path.
pub fn emit_table(t: &SweepTable, dir: &Path, format: BundleFormat) -> Result<std::path::PathBuf, HarnessError> {
    let (name, bytes) = match format {
        BundleFormat::Csv => (format!("sweep_{}.csv", t.param), t.to_csv().into_bytes()),
        BundleFormat::Json => (format!("sweep_{}.json", t.param), json(t)),
    };
    let files = BTreeMap::from([(name.clone(), bytes)]);
    write_all(dir, &files)?;
    Ok(dir.join(name))
}
