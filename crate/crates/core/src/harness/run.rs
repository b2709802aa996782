//! End-to-end simulation of one scenario.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::scenario::Scenario;
use super::HarnessError;
use crate::analog::{Digitizer, Edge, EdgeDetector, Load, PhotodiodeFilter, SupplyNode};
use crate::asic::{
    charge_balance, drive_electrode, generate_pulse, opcode, por_frame, por_times, tick_ns, Asic, PowerConditioner,
    RailTransition, CLOCK_KHZ,
};
use crate::budget::{verdict, BudgetConfig, BudgetReport, Verdict};
use crate::spectral::LinkSpectrum;
use crate::telemetry::{decode_edges, frame_encode_bits, manchester_encode, scan_frames, AskSampler, CdrConfig, Frame, ManchesterDecoded};
use crate::waveform::Waveform;

/// A frame placed in the transmitted bit stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TxFrame {
    pub start_bit: usize,
    pub end_bit: usize,
    pub frame: Frame,
}

/// The downlink bit stream: alternating idle bits with frames inserted.
#[derive(Debug, Clone, PartialEq)]
pub struct TxPlan {
    pub bits: Vec<bool>,
    pub frames: Vec<TxFrame>,
}

/// Idle bit at absolute position `k`, so idle runs stay in phase.
fn idle_bit(k: usize) -> bool {
    k.is_multiple_of(2)
}

pub fn plan_transmission(s: &Scenario) -> Result<TxPlan, HarnessError> {
    let period = s.bit_period_ns();
    let total = (s.duration_us * 1e3 / period).floor() as usize;
    let mut bits = Vec::with_capacity(total);
    let mut frames = Vec::new();
    for (at_us, frame) in s.frames()? {
        let start = ((at_us * 1e3 / period).ceil() as usize).max(bits.len());
        let encoded = frame_encode_bits(&frame);
        if start + encoded.len() > total {
            return Err(HarnessError::Validation(format!(
                "command at {at_us} µs does not fit in duration_us = {}",
                s.duration_us
            )));
        }
        while bits.len() < start {
            bits.push(idle_bit(bits.len()));
        }
        bits.extend(&encoded);
        frames.push(TxFrame {
            start_bit: start,
            end_bit: bits.len(),
            frame,
        });
    }
    while bits.len() < total.max(1) {
        bits.push(idle_bit(bits.len()));
    }
    Ok(TxPlan { bits, frames })
}

/// One time step of the optical and analog front end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontEndSample {
    pub time_ns: f64,
    /// Optical power at the implant, mW.
    pub optical_mw: f64,
    pub supply_v: f64,
    pub sense_v: f64,
    pub pos: f64,
    pub neg: f64,
    pub rail_dc: f64,
    pub edge: Option<Edge>,
    pub rails_changed: Option<bool>,
}

/// Laser, PV supply node, photodiode, interface circuit and rectifier,
/// advanced together one sample at a time.
pub struct LinkFrontEnd {
    dt: f64,
    k: usize,
    ask: AskSampler,
    noise: Option<(ChaCha8Rng, Normal<f64>)>,
    pv_scale: f64,
    supply: SupplyNode,
    pd: PhotodiodeFilter,
    pd_coupling: f64,
    r_sense_kohm: f64,
    digitizer: Digitizer,
    edges: EdgeDetector,
    power: PowerConditioner,
}

impl LinkFrontEnd {
    /// Starts dark: the laser switches on at t = 0 with the supply at 0 V.
    pub fn new(s: &Scenario, bits: &[bool]) -> Result<Self, HarnessError> {
        let spectrum = LinkSpectrum::default();
        let mean_mw = s.p_pupil_mw * spectrum.eye_transmission(s.wavelength_nm)?;
        let params = s.ask_params(mean_mw);
        let ask = AskSampler::new(manchester_encode(bits)?, s.bitrate_kbps, &params, 0.0)?;
        let fe = &s.front_end;
        let budget = BudgetConfig {
            pv: fe.pv,
            ..BudgetConfig::default()
        };
        let pv_scale = if mean_mw > 0.0 {
            budget.pv_equivalent_power(1.0, s.wavelength_nm)?
        } else {
            0.0
        };
        let noise = (s.noise.sigma_mw > 0.0).then(|| {
            (
                ChaCha8Rng::seed_from_u64(s.seed),
                Normal::new(0.0, s.noise.sigma_mw).expect("validated sigma"),
            )
        });
        // coupling capacitor settled at the mean illumination
        let precharge = mean_mw * fe.pd_coupling * fe.photodiode.responsivity_ma_per_mw * fe.interface.r_sense_kohm;
        Ok(Self {
            dt: s.time_step_ns,
            k: 0,
            ask,
            noise,
            pv_scale,
            supply: SupplyNode::new(fe.pv, fe.supply_load_kohm, fe.supply_capacitance_nf, 0.0)?,
            pd: PhotodiodeFilter::new(fe.photodiode, s.time_step_ns, 0.0)?,
            pd_coupling: fe.pd_coupling,
            r_sense_kohm: fe.interface.r_sense_kohm,
            digitizer: Digitizer::new(fe.interface, s.time_step_ns, precharge)?,
            edges: EdgeDetector::new(0.0, s.time_step_ns),
            power: PowerConditioner::new(s.asic.power, s.time_step_ns),
        })
    }

    pub fn supply_load_kohm(&self, s: &Scenario) -> f64 {
        s.front_end.supply_load_kohm
    }

    pub fn step(&mut self) -> FrontEndSample {
        let t = self.k as f64 * self.dt;
        self.k += 1;
        let mut p = self.ask.sample(t);
        if let Some((rng, dist)) = &mut self.noise {
            p = (p + dist.sample(rng)).max(0.0);
        }
        let supply_v = self.supply.step(p * self.pv_scale, self.dt);
        let i_pd = self.pd.step(p * self.pd_coupling);
        let (pos, neg) = self.digitizer.step(i_pd, supply_v);
        let edge = self.edges.push(pos - neg);
        let rails_changed = self.power.step(pos, neg);
        FrontEndSample {
            time_ns: t,
            optical_mw: p,
            supply_v,
            sense_v: i_pd * self.r_sense_kohm,
            pos,
            neg,
            rail_dc: self.power.dc(),
            edge,
            rails_changed,
        }
    }
}

/// Bit errors of a decoded stream against the transmitted bits, matched by
/// recovered clock time. Bits in `region` that were never decoded count as
/// errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BerStats {
    pub region_start_bit: usize,
    pub region_bits: usize,
    pub decoded_bits: usize,
    pub bit_errors: usize,
    pub missing_bits: usize,
    pub ber: f64,
}

pub fn time_aligned_ber(
    tx: &[bool],
    decoded: &ManchesterDecoded,
    bit_period_ns: f64,
    region: std::ops::Range<usize>,
) -> BerStats {
    let mut seen = vec![false; region.len()];
    let mut errors = 0;
    let mut decoded_bits = 0;
    for (&bit, &t) in decoded.bits.iter().zip(&decoded.clock_edges_ns) {
        let k = (t / bit_period_ns).floor();
        if k < region.start as f64 || k >= region.end as f64 {
            continue;
        }
        let k = k as usize;
        let slot = &mut seen[k - region.start];
        if *slot {
            errors += 1;
            continue;
        }
        *slot = true;
        decoded_bits += 1;
        if bit != tx[k] {
            errors += 1;
        }
    }
    let missing = seen.iter().filter(|s| !**s).count();
    BerStats {
        region_start_bit: region.start,
        region_bits: region.len(),
        decoded_bits,
        bit_errors: errors,
        missing_bits: missing,
        ber: if region.is_empty() { 0.0 } else { (errors + missing) as f64 / region.len() as f64 },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    RailsUp,
    RailsDown,
    Por { frame_hex: String },
    FrameReceived { opcode: u8, payload_hex: String },
    FrameRejected { error: String },
    FrameDropped { opcode: u8, reason: String },
    Reply { opcode: u8, payload_hex: String },
    Nack { command_opcode: u8, reason: u8 },
    Pulse {
        active: Vec<u16>,
        returns: Vec<u16>,
        amplitude_ua: f64,
        duration_us: f64,
    },
    PulseTruncated { electrode: u16 },
    ComplianceLimit { electrode: u16, samples: usize },
    LossOfSignal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time_ns: f64,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElectrodeTrace {
    pub electrode: u16,
    pub current_ua: Waveform,
    pub voltage: Waveform,
    pub peak_voltage: f64,
    pub net_charge_nc: f64,
}

/// Sampled front-end signals on the simulation time base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontEndTraces {
    pub optical_mw: Waveform,
    pub pv_voltage: Waveform,
    pub sense_voltage: Waveform,
    pub interface_pos: Waveform,
    pub interface_neg: Waveform,
    pub rail_dc: Waveform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scenario: String,
    pub duration_us: f64,
    pub samples: usize,
    pub powered: bool,
    pub rails_up_us: Option<f64>,
    pub por_count: usize,
    pub first_por_us: Option<f64>,
    pub frames_sent: usize,
    pub frames_received: usize,
    pub frames_rejected: usize,
    pub nacks: usize,
    pub pulses: usize,
    pub recovered_bitrate_kbps: Option<f64>,
    pub ber: BerStats,
    /// Mean V²/R on the supply over the second half of the run, mW.
    pub electrical_mean_mw: f64,
    pub electrical_budget_mw: f64,
    /// `|mean − budget| / budget`, 0 when both vanish.
    pub electrical_mismatch: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceBundle {
    pub time_step_ns: f64,
    pub traces: Option<FrontEndTraces>,
    pub clock_edges_ns: Vec<f64>,
    pub rail_transitions: Vec<RailTransition>,
    pub events: Vec<Event>,
    pub electrodes: Vec<ElectrodeTrace>,
    pub budget: BudgetReport,
    pub summary: RunSummary,
}

/// Edges, rail activity and supply statistics of a front-end run.
struct FrontEndRun {
    edges: Vec<Edge>,
    transitions: Vec<RailTransition>,
    traces: Option<FrontEndTraces>,
    electrical_mean_mw: f64,
    samples: usize,
}

fn run_front_end(s: &Scenario, bits: &[bool], n_samples: usize, record: bool) -> Result<FrontEndRun, HarnessError> {
    let mut fe = LinkFrontEnd::new(s, bits)?;
    let dt = s.time_step_ns;
    let cap = if record { n_samples } else { 0 };
    let mut rec: [Vec<f64>; 6] = std::array::from_fn(|_| Vec::with_capacity(cap));
    let mut edges = Vec::new();
    let mut transitions = Vec::new();
    let load = fe.supply_load_kohm(s);
    let settle_from = n_samples / 2;
    let mut power_sum = 0.0;
    for k in 0..n_samples {
        let x = fe.step();
        if let Some(e) = x.edge {
            edges.push(e);
        }
        if let Some(up) = x.rails_changed {
            transitions.push(RailTransition { time_ns: x.time_ns, up });
        }
        if k >= settle_from {
            power_sum += x.supply_v * x.supply_v / load;
        }
        if record {
            for (buf, v) in rec.iter_mut().zip([x.optical_mw, x.supply_v, x.sense_v, x.pos, x.neg, x.rail_dc]) {
                buf.push(v);
            }
        }
    }
    let traces = record.then(|| {
        let [optical_mw, pv_voltage, sense_voltage, interface_pos, interface_neg, rail_dc] = rec.map(|v| Waveform::new(dt, v));
        FrontEndTraces {
            optical_mw,
            pv_voltage,
            sense_voltage,
            interface_pos,
            interface_neg,
            rail_dc,
        }
    });
    Ok(FrontEndRun {
        edges,
        transitions,
        traces,
        electrical_mean_mw: if n_samples > settle_from { power_sum / (n_samples - settle_from) as f64 } else { 0.0 },
        samples: n_samples,
    })
}

fn empty_decode() -> ManchesterDecoded {
    ManchesterDecoded {
        bits: vec![],
        clock_edges_ns: vec![],
        flagged_bits: vec![],
        lock_times_ns: vec![],
        loss_of_signal_ns: vec![],
    }
}

/// Timed inputs to the ASIC, processed in time order.
#[derive(Debug, Clone)]
enum Stimulus {
    Rails(bool),
    Por,
    Frame(Frame),
}

impl Stimulus {
    fn rank(&self) -> u8 {
        match self {
            Stimulus::Rails(_) => 0,
            Stimulus::Por => 1,
            Stimulus::Frame(_) => 2,
        }
    }
}

/// Runs the whole chain for `s`.
pub fn run_end_to_end(s: &Scenario) -> Result<TraceBundle, HarnessError> {
    s.validate()?;
    let plan = plan_transmission(s)?;
    let period = s.bit_period_ns();
    let n_samples = (s.duration_us * 1e3 / s.time_step_ns).round() as usize;
    let fe = run_front_end(s, &plan.bits, n_samples, s.record_traces)?;

    let decoded = decode_edges(&fe.edges, s.bitrate_kbps, &CdrConfig::default()).unwrap_or_else(|_| empty_decode());
    let por = por_times(&fe.transitions, &fe.edges, s.bitrate_kbps);

    let mut events = Vec::new();
    let mut timeline: Vec<(f64, Stimulus)> = Vec::new();
    timeline.extend(fe.transitions.iter().map(|t| (t.time_ns, Stimulus::Rails(t.up))));
    timeline.extend(por.iter().map(|&t| (t, Stimulus::Por)));
    let mut frames_rejected = 0;
    for scanned in scan_frames(&decoded.bits) {
        let t = decoded.clock_edges_ns[scanned.end_bit - 1] + period / 2.0;
        match scanned.result {
            Ok(f) => timeline.push((t, Stimulus::Frame(f))),
            Err(e) => {
                frames_rejected += 1;
                events.push(Event {
                    time_ns: t,
                    kind: EventKind::FrameRejected { error: e.to_string() },
                });
            }
        }
    }
    for &t in &decoded.loss_of_signal_ns {
        if t < s.duration_us * 1e3 {
            events.push(Event {
                time_ns: t,
                kind: EventKind::LossOfSignal,
            });
        }
    }
    timeline.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.rank().cmp(&b.1.rank())));

    let rail_downs: Vec<f64> = fe.transitions.iter().filter(|t| !t.up).map(|t| t.time_ns).collect();
    let compliance_v = s.asic.compliance_v();
    let tick = tick_ns(CLOCK_KHZ);
    let mut asic = Asic::new();
    let mut electrodes = Vec::new();
    let mut frames_received = 0;
    let mut nacks = 0;
    let mut pulses = 0;
    for (t, stim) in timeline {
        match stim {
            Stimulus::Rails(up) => {
                asic.set_power(up);
                events.push(Event {
                    time_ns: t,
                    kind: if up { EventKind::RailsUp } else { EventKind::RailsDown },
                });
            }
            Stimulus::Por => {
                asic.set_clock_locked(true);
                if let Ok(Some(_)) = asic.por_message() {
                    events.push(Event {
                        time_ns: t,
                        kind: EventKind::Por {
                            frame_hex: hex::encode(por_frame().to_bytes()),
                        },
                    });
                }
            }
            Stimulus::Frame(f) => {
                if !asic.is_powered() || !asic.por_sent() {
                    events.push(Event {
                        time_ns: t,
                        kind: EventKind::FrameDropped {
                            opcode: f.opcode,
                            reason: "receiver not ready".into(),
                        },
                    });
                    continue;
                }
                frames_received += 1;
                events.push(Event {
                    time_ns: t,
                    kind: EventKind::FrameReceived {
                        opcode: f.opcode,
                        payload_hex: hex::encode(&f.payload),
                    },
                });
                let out = asic.apply_command(&f)?;
                if out.is_nack() {
                    nacks += 1;
                    events.push(Event {
                        time_ns: t,
                        kind: EventKind::Nack {
                            command_opcode: out.reply.payload[0],
                            reason: out.reply.payload[1],
                        },
                    });
                } else if out.reply.opcode != opcode::ACK {
                    events.push(Event {
                        time_ns: t,
                        kind: EventKind::Reply {
                            opcode: out.reply.opcode,
                            payload_hex: hex::encode(&out.reply.payload),
                        },
                    });
                }
                let Some(pulse) = out.pulse else { continue };
                pulses += 1;
                let start = (t / tick).ceil() * tick;
                let current = generate_pulse(&pulse.params, &s.asic.dac, CLOCK_KHZ)?;
                events.push(Event {
                    time_ns: start,
                    kind: EventKind::Pulse {
                        active: pulse.active.clone(),
                        returns: pulse.returns.clone(),
                        amplitude_ua: s.asic.dac.target_ua(pulse.params.amplitude_code),
                        duration_us: pulse.params.duration_us(),
                    },
                });
                let cutoff = rail_downs.iter().copied().find(|&d| d >= start);
                for &e in &pulse.active {
                    let mut i = Waveform::starting_at(start, current.sample_period_ns, current.samples.clone());
                    if let Some(down) = cutoff {
                        let keep = ((down - start) / tick).floor().max(0.0) as usize;
                        if keep < i.len() {
                            i.samples.truncate(keep);
                            events.push(Event {
                                time_ns: down,
                                kind: EventKind::PulseTruncated { electrode: e },
                            });
                        }
                    }
                    let drive = drive_electrode(&i, &s.load_for(e), compliance_v, 0.0)?;
                    if !drive.compliance_events.is_empty() {
                        events.push(Event {
                            time_ns: drive.compliance_events[0].time_ns,
                            kind: EventKind::ComplianceLimit {
                                electrode: e,
                                samples: drive.compliance_events.len(),
                            },
                        });
                    }
                    let peak = drive.voltage.samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                    electrodes.push(ElectrodeTrace {
                        electrode: e,
                        net_charge_nc: charge_balance(&drive.current_ua),
                        current_ua: drive.current_ua,
                        voltage: drive.voltage,
                        peak_voltage: peak,
                    });
                }
            }
        }
    }
    events.sort_by(|a, b| a.time_ns.total_cmp(&b.time_ns));

    let budget_cfg = BudgetConfig {
        pv: s.front_end.pv,
        load: Load::Resistive {
            kohm: s.front_end.supply_load_kohm,
        },
        ..BudgetConfig::default()
    };
    let budget = budget_cfg.power_chain(s.p_pupil_mw, s.wavelength_nm)?;
    let region_start = decoded
        .clock_edges_ns
        .first()
        .map_or(plan.bits.len(), |&t| ((t / period).floor() as usize).min(plan.bits.len()));
    let ber = time_aligned_ber(&plan.bits, &decoded, period, region_start..plan.bits.len());
    let electrical_budget_mw = budget.p_electrical_mw;
    let mismatch = if electrical_budget_mw > 0.0 {
        (fe.electrical_mean_mw - electrical_budget_mw).abs() / electrical_budget_mw
    } else if fe.electrical_mean_mw > 0.0 {
        1.0
    } else {
        0.0
    };
    let rails_up_us = fe.transitions.iter().find(|t| t.up).map(|t| t.time_ns / 1e3);
    let summary = RunSummary {
        scenario: s.name.clone(),
        duration_us: s.duration_us,
        samples: fe.samples,
        powered: rails_up_us.is_some(),
        rails_up_us,
        por_count: events.iter().filter(|e| matches!(e.kind, EventKind::Por { .. })).count(),
        first_por_us: events
            .iter()
            .find(|e| matches!(e.kind, EventKind::Por { .. }))
            .map(|e| e.time_ns / 1e3),
        frames_sent: plan.frames.len(),
        frames_received,
        frames_rejected,
        nacks,
        pulses,
        recovered_bitrate_kbps: decoded.recovered_bitrate_kbps(),
        ber,
        electrical_mean_mw: fe.electrical_mean_mw,
        electrical_budget_mw,
        electrical_mismatch: mismatch,
        verdict: verdict(&budget),
    };
    Ok(TraceBundle {
        time_step_ns: s.time_step_ns,
        traces: fe.traces,
        clock_edges_ns: decoded.clock_edges_ns,
        rail_transitions: fe.transitions,
        events,
        electrodes,
        budget,
        summary,
    })
}

/// Noise-free (unless the scenario adds noise) link test: `n_bits` random
/// bits from the scenario seed after a 64-bit idle lead-in, through the full
/// optical and analog chain. Every payload bit must be decoded.
pub fn link_ber(s: &Scenario, n_bits: usize) -> Result<BerStats, HarnessError> {
    use rand::Rng;
    s.validate()?;
    const LEAD: usize = 64;
    const TAIL: usize = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed ^ 0x5eed_b175);
    let mut bits: Vec<bool> = (0..LEAD).map(idle_bit).collect();
    bits.extend((0..n_bits).map(|_| rng.random::<bool>()));
    bits.extend((0..TAIL).map(|k| idle_bit(LEAD + n_bits + k)));
    let period = s.bit_period_ns();
    let n_samples = (bits.len() as f64 * period / s.time_step_ns).ceil() as usize;
    let fe = run_front_end(s, &bits, n_samples, false)?;
    let decoded = decode_edges(&fe.edges, s.bitrate_kbps, &CdrConfig::default()).unwrap_or_else(|_| empty_decode());
    Ok(time_aligned_ber(&bits, &decoded, period, LEAD..LEAD + n_bits))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transmission_plan_places_frames() {
        let s = Scenario::nominal();
        let plan = plan_transmission(&s).unwrap();
        assert_eq!(plan.frames.len(), 4);
        assert_eq!(plan.frames[0].start_bit, 60);
        for w in plan.frames.windows(2) {
            assert_eq!(w[0].end_bit, w[1].start_bit);
        }
        let f = &plan.frames[2];
        assert_eq!(crate::telemetry::frame_decode_bits(&plan.bits[f.start_bit..f.end_bit]).unwrap(), f.frame);
    }

    #[test]
    fn script_must_fit() {
        let s = Scenario {
            duration_us: 120.0,
            ..Scenario::nominal()
        };
        assert!(matches!(plan_transmission(&s), Err(HarnessError::Validation(_))));
    }

    #[test]
    fn ber_alignment() {
        let tx = vec![true, false, true, true];
        let dec = ManchesterDecoded {
            bits: vec![false, true, false],
            clock_edges_ns: vec![1.5, 2.5, 3.5],
            ..empty_decode()
        };
        let b = time_aligned_ber(&tx, &dec, 1.0, 0..4);
        assert_eq!((b.decoded_bits, b.bit_errors, b.missing_bits), (3, 1, 1));
        assert_eq!(b.ber, 0.5);
    }
}
