//! Rectification, rail detection and power-on-reset timing.

use serde::{Deserialize, Serialize};

use crate::analog::{DifferentialPair, Edge};
use crate::telemetry::{decode_edges, CdrConfig};
use crate::waveform::Waveform;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PowerConfig {
    /// Smoothing time constant of the rectified input, ns.
    pub smoothing_ns: f64,
    /// Rails assert when the DC estimate reaches this level, V.
    pub rail_up_v: f64,
    /// Rails drop when the DC estimate falls below this level, V.
    pub rail_down_v: f64,
    pub analog_rail_v: f64,
    pub digital_rail_v: f64,
}

impl Default for PowerConfig {
    fn default() -> Self {
        Self {
            smoothing_ns: 2000.0,
            rail_up_v: 3.0,
            rail_down_v: 2.8,
            analog_rail_v: 3.0,
            digital_rail_v: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RailState {
    pub v_input_dc: f64,
    pub analog_rail: f64,
    pub digital_rail: f64,
    pub rails_up: bool,
    pub por_emitted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RailTransition {
    pub time_ns: f64,
    pub up: bool,
}

/// Streaming full-wave rectifier with first-order smoothing and a
/// hysteretic rail detector.
#[derive(Debug, Clone)]
pub struct PowerConditioner {
    cfg: PowerConfig,
    keep: f64,
    dc: f64,
    rails_up: bool,
}

impl PowerConditioner {
    pub fn new(cfg: PowerConfig, sample_period_ns: f64) -> Self {
        Self {
            cfg,
            keep: (-sample_period_ns / cfg.smoothing_ns).exp(),
            dc: 0.0,
            rails_up: false,
        }
    }

    pub fn config(&self) -> &PowerConfig {
        &self.cfg
    }

    /// Advances one sample; returns `Some(up)` when the rails change state.
    pub fn step(&mut self, v_pos: f64, v_neg: f64) -> Option<bool> {
        let rectified = (v_pos - v_neg).abs();
        self.dc = rectified + (self.dc - rectified) * self.keep;
        let next = if self.rails_up {
            self.dc >= self.cfg.rail_down_v
        } else {
            self.dc >= self.cfg.rail_up_v
        };
        let changed = next != self.rails_up;
        self.rails_up = next;
        changed.then_some(next)
    }

    pub fn dc(&self) -> f64 {
        self.dc
    }

    pub fn state(&self, por_emitted: bool) -> RailState {
        RailState {
            v_input_dc: self.dc,
            analog_rail: if self.rails_up { self.cfg.analog_rail_v } else { 0.0 },
            digital_rail: if self.rails_up { self.cfg.digital_rail_v } else { 0.0 },
            rails_up: self.rails_up,
            por_emitted,
        }
    }
}

/// Time the recovered clock first locks on edges at or after `from_ns`.
pub fn clock_lock_time(edges: &[Edge], from_ns: f64, bitrate_kbps: f64) -> Option<f64> {
    let start = edges.partition_point(|e| e.time_ns < from_ns);
    decode_edges(&edges[start..], bitrate_kbps, &CdrConfig::default())
        .ok()
        .and_then(|d| d.lock_times_ns.first().copied())
}

/// POR instants: in each powered interval, the first clock lock acquired
/// after the rails came up.
pub fn por_times(transitions: &[RailTransition], edges: &[Edge], bitrate_kbps: f64) -> Vec<f64> {
    let mut out = Vec::new();
    for (k, tr) in transitions.iter().enumerate().filter(|(_, t)| t.up) {
        let down = transitions[k + 1..].iter().find(|t| !t.up).map_or(f64::INFINITY, |t| t.time_ns);
        let within: Vec<Edge> = edges.iter().copied().filter(|e| e.time_ns < down).collect();
        if let Some(lock) = clock_lock_time(&within, tr.time_ns, bitrate_kbps) {
            out.push(lock);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerTimeline {
    pub dc: Waveform,
    pub transitions: Vec<RailTransition>,
    pub por_times_ns: Vec<f64>,
}

/// Rail and POR timeline for a differential input pair.
pub fn power_conditioning(pair: &DifferentialPair, cfg: &PowerConfig, bitrate_kbps: f64) -> PowerTimeline {
    let dt = pair.pos.sample_period_ns;
    let mut pc = PowerConditioner::new(*cfg, dt);
    let mut transitions = Vec::new();
    let dc: Vec<f64> = pair
        .pos
        .samples
        .iter()
        .zip(&pair.neg.samples)
        .enumerate()
        .map(|(k, (&p, &n))| {
            if let Some(up) = pc.step(p, n) {
                transitions.push(RailTransition {
                    time_ns: pair.pos.time_ns(k),
                    up,
                });
            }
            pc.dc()
        })
        .collect();
    let por_times_ns = por_times(&transitions, &pair.edges(), bitrate_kbps);
    PowerTimeline {
        dc: Waveform::starting_at(pair.pos.t0_ns, dt, dc),
        transitions,
        por_times_ns,
    }
}
