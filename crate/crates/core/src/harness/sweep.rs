//! One-parameter sweeps over a base scenario.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::run::run_end_to_end;
use super::scenario::Scenario;
use super::HarnessError;
use crate::analog::Load;
use crate::budget::{verdict, BudgetConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    WavelengthNm,
    PPupilMw,
    BitrateKbps,
    ModulationDepth,
    LoadKohm,
}

impl SweepParam {
    pub const ALL: [SweepParam; 5] = [
        SweepParam::WavelengthNm,
        SweepParam::PPupilMw,
        SweepParam::BitrateKbps,
        SweepParam::ModulationDepth,
        SweepParam::LoadKohm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepParam::WavelengthNm => "wavelength_nm",
            SweepParam::PPupilMw => "p_pupil_mw",
            SweepParam::BitrateKbps => "bitrate_kbps",
            SweepParam::ModulationDepth => "modulation_depth",
            SweepParam::LoadKohm => "load_kohm",
        }
    }

    /// Copy of `base` with this parameter set to `value`.
    pub fn apply(self, base: &Scenario, value: f64) -> Scenario {
        let mut s = base.clone();
        match self {
            SweepParam::WavelengthNm => s.wavelength_nm = value,
            SweepParam::PPupilMw => s.p_pupil_mw = value,
            SweepParam::BitrateKbps => s.bitrate_kbps = value,
            SweepParam::ModulationDepth => s.modulation.depth = value,
            SweepParam::LoadKohm => s.front_end.supply_load_kohm = value,
        }
        s
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParam {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| {
            let known: Vec<_> = Self::ALL.iter().map(|p| p.name()).collect();
            HarnessError::Validation(format!("unknown sweep parameter {s:?} (known: {})", known.join(", ")))
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    /// Also run the end-to-end simulation for every row.
    pub simulate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub capacity_mw: f64,
    pub mp_phi_mw: f64,
    pub safety_margin_mw: f64,
    pub p_dissipated_mw: f64,
    pub thermal_margin_mw: f64,
    pub p_mpp_mw: f64,
    pub p_electrical_mw: f64,
    pub pv_voltage: f64,
    pub pass: bool,
    pub ber: Option<f64>,
    pub por_latency_us: Option<f64>,
    pub frames_received: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub param: SweepParam,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub const COLUMNS: [&'static str; 12] = [
        "capacity_mw",
        "mp_phi_mw",
        "safety_margin_mw",
        "p_dissipated_mw",
        "thermal_margin_mw",
        "p_mpp_mw",
        "p_electrical_mw",
        "pv_voltage",
        "pass",
        "ber",
        "por_latency_us",
        "frames_received",
    ];

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec![self.param.name()];
        header.extend(Self::COLUMNS);
        w.write_record(&header).expect("in-memory write");
        let opt = |v: Option<String>| v.unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                r.value.to_string(),
                r.capacity_mw.to_string(),
                r.mp_phi_mw.to_string(),
                r.safety_margin_mw.to_string(),
                r.p_dissipated_mw.to_string(),
                r.thermal_margin_mw.to_string(),
                r.p_mpp_mw.to_string(),
                r.p_electrical_mw.to_string(),
                r.pv_voltage.to_string(),
                r.pass.to_string(),
                opt(r.ber.map(|b| b.to_string())),
                opt(r.por_latency_us.map(|b| b.to_string())),
                opt(r.frames_received.map(|b| b.to_string())),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
    }
}

fn sweep_row(s: &Scenario, value: f64, opts: SweepOptions) -> Result<SweepRow, HarnessError> {
    s.validate()?;
    let cfg = BudgetConfig {
        pv: s.front_end.pv,
        load: Load::Resistive {
            kohm: s.front_end.supply_load_kohm,
        },
        ..BudgetConfig::default()
    };
    let nm = s.wavelength_nm;
    let report = cfg.power_chain(s.p_pupil_mw, nm)?;
    let p_eq = cfg.pv_equivalent_power(report.p_at_pv_mw, nm)?;
    let p_mpp = if p_eq > 0.0 { cfg.pv.max_power_point(p_eq, None)?.power_mw } else { 0.0 };
    let mut row = SweepRow {
        value,
        capacity_mw: cfg.spectrum.power_delivery_capacity(nm)?,
        mp_phi_mw: report.mp_phi_mw,
        safety_margin_mw: report.safety_margin_mw,
        p_dissipated_mw: report.p_dissipated_mw,
        thermal_margin_mw: report.thermal_verdicts.limit_2d_mw - report.p_dissipated_mw,
        p_mpp_mw: p_mpp,
        p_electrical_mw: report.p_electrical_mw,
        pv_voltage: report.pv_voltage,
        pass: verdict(&report).pass,
        ber: None,
        por_latency_us: None,
        frames_received: None,
    };
    if opts.simulate {
        let summary = run_end_to_end(s)?.summary;
        row.ber = Some(summary.ber.ber);
        row.por_latency_us = summary.first_por_us;
        row.frames_received = Some(summary.frames_received);
    }
    Ok(row)
}

/// Evaluates `base` with `param` set to each of `values`. Rows are
/// independent and computed in parallel; their order follows `values`.
pub fn sweep(base: &Scenario, param: SweepParam, values: &[f64], opts: SweepOptions) -> Result<SweepTable, HarnessError> {
    let rows = values
        .par_iter()
        .map(|&v| sweep_row(&param.apply(base, v), v, opts))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SweepTable { param, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_names_round_trip() {
        for p in SweepParam::ALL {
            assert_eq!(p.name().parse::<SweepParam>().unwrap(), p);
        }
        assert!(matches!("laser_colour".parse::<SweepParam>(), Err(HarnessError::Validation(_))));
    }

    #[test]
    fn empty_sweep_is_empty_table() {
        let t = sweep(&Scenario::nominal(), SweepParam::PPupilMw, &[], SweepOptions::default()).unwrap();
        assert!(t.rows.is_empty());
        assert_eq!(t.to_csv().lines().count(), 1);
    }

    #[test]
    fn wavelength_sweep_peaks_at_850() {
        let values: Vec<f64> = (600..=1000).step_by(10).map(f64::from).collect();
        let t = sweep(&Scenario::nominal(), SweepParam::WavelengthNm, &values, SweepOptions::default()).unwrap();
        let best = t.rows.iter().max_by(|a, b| a.capacity_mw.total_cmp(&b.capacity_mw)).unwrap();
        assert_eq!(best.value, 850.0);
    }

    #[test]
    fn pupil_power_sweep_is_monotone() {
        let values: Vec<f64> = (0..=10).map(|k| 10.0 + 2.65 * k as f64).collect();
        let t = sweep(&Scenario::nominal(), SweepParam::PPupilMw, &values, SweepOptions::default()).unwrap();
        for w in t.rows.windows(2) {
            assert!(w[1].p_electrical_mw > w[0].p_electrical_mw);
            assert!(w[1].p_mpp_mw > w[0].p_mpp_mw);
        }
    }
}
