//! Manchester line code (1 = low→high at mid-bit) and edge-based clock and
//! data recovery.

use serde::{Deserialize, Serialize};

use super::TelemetryError;
use crate::analog::{Edge, EdgeDetector};
use crate::waveform::Waveform;

/// Half-bit levels, `true` = high. Two per input bit.
pub fn manchester_encode(bits: &[bool]) -> Result<Vec<bool>, TelemetryError> {
    if bits.is_empty() {
        return Err(TelemetryError::EmptyStream);
    }
    Ok(bits.iter().flat_map(|&b| [!b, b]).collect())
}

/// Tuning of the clock and data recovery loop, in units of the bit period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdrConfig {
    /// Consecutive mid-bit intervals needed to lock.
    pub lock_intervals: usize,
    /// Allowed spread of lock intervals around their mean.
    pub lock_spread: f64,
    /// Accepted lock period range relative to nominal.
    pub lock_range: (f64, f64),
    /// Mid-bit acceptance window after the previous mid-bit.
    pub mid_window: (f64, f64),
    /// Silence after the last edge that drops lock.
    pub los_periods: f64,
    /// First-order period tracking gain.
    pub loop_gain: f64,
}

impl Default for CdrConfig {
    fn default() -> Self {
        Self {
            lock_intervals: 4,
            lock_spread: 0.25,
            lock_range: (0.7, 1.3),
            mid_window: (0.75, 1.25),
            los_periods: 2.0,
            loop_gain: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManchesterDecoded {
    pub bits: Vec<bool>,
    /// Recovered mid-bit clock instants, one per decoded bit, ns.
    pub clock_edges_ns: Vec<f64>,
    /// Bits decoded without a mid-bit transition (flywheel), by index.
    pub flagged_bits: Vec<usize>,
    /// Times at which lock was acquired, one per tracked segment, ns.
    pub lock_times_ns: Vec<f64>,
    /// Times at which lock was lost, ns.
    pub loss_of_signal_ns: Vec<f64>,
}

impl ManchesterDecoded {
    /// Mean recovered clock frequency, kHz.
    pub fn recovered_bitrate_kbps(&self) -> Option<f64> {
        let c = &self.clock_edges_ns;
        (c.len() >= 2).then(|| 1e6 * (c.len() - 1) as f64 / (c[c.len() - 1] - c[0]))
    }
}

/// Recovers bits from a sampled logic waveform, thresholded halfway between
/// its extremes.
pub fn manchester_decode(levels: &Waveform, expected_bitrate_kbps: f64) -> Result<ManchesterDecoded, TelemetryError> {
    if !(expected_bitrate_kbps > 0.0) {
        return Err(TelemetryError::InvalidParams(format!("bitrate {expected_bitrate_kbps}")));
    }
    let period = 1e6 / expected_bitrate_kbps;
    if levels.sample_period_ns > period / 8.0 {
        return Err(TelemetryError::InvalidParams(format!(
            "sample period {} ns is under 8 samples per bit",
            levels.sample_period_ns
        )));
    }
    let threshold = 0.5 * (levels.min() + levels.max());
    let mut det = EdgeDetector::new(levels.t0_ns, levels.sample_period_ns);
    let edges: Vec<Edge> = levels.samples.iter().filter_map(|&v| det.push(v - threshold)).collect();
    decode_edges(&edges, expected_bitrate_kbps, &CdrConfig::default())
}

/// Recovers bits from transition times.
///
/// Lock needs `lock_intervals` consecutive edge spacings near one bit period,
/// which only mid-bit edges can produce. From there the loop tracks forward,
/// treating edges near half a period as bit boundaries; a missing mid-bit
/// edge is bridged at the predicted time and flagged. Bits before the lock
/// point are recovered by tracking backward. After loss of signal the
/// decoder searches for a new lock.
pub fn decode_edges(edges: &[Edge], expected_bitrate_kbps: f64, cfg: &CdrConfig) -> Result<ManchesterDecoded, TelemetryError> {
    if !(expected_bitrate_kbps > 0.0) {
        return Err(TelemetryError::InvalidParams(format!("bitrate {expected_bitrate_kbps}")));
    }
    let nominal = 1e6 / expected_bitrate_kbps;
    let mut out = ManchesterDecoded {
        bits: Vec::new(),
        clock_edges_ns: Vec::new(),
        flagged_bits: Vec::new(),
        lock_times_ns: Vec::new(),
        loss_of_signal_ns: Vec::new(),
    };
    let mut search_from = 0;
    let mut floor = 0;
    while let Some((lock, period)) = find_lock(edges, search_from, nominal, cfg) {
        out.lock_times_ns.push(edges[lock + cfg.lock_intervals].time_ns);
        let (bits, clocks) = track_backward(edges, lock, floor, period, cfg);
        out.bits.extend(bits);
        out.clock_edges_ns.extend(clocks);
        let next = track_forward(edges, lock, period, cfg, &mut out);
        search_from = next;
        floor = next;
    }
    if out.bits.is_empty() {
        return Err(TelemetryError::LossOfSignal);
    }
    Ok(out)
}

fn find_lock(edges: &[Edge], from: usize, nominal: f64, cfg: &CdrConfig) -> Option<(usize, f64)> {
    let n = cfg.lock_intervals;
    (from..edges.len().saturating_sub(n)).find_map(|j| {
        let span = &edges[j..=j + n];
        let mean = (span[n].time_ns - span[0].time_ns) / n as f64;
        let steady = span
            .windows(2)
            .all(|w| ((w[1].time_ns - w[0].time_ns) - mean).abs() <= cfg.lock_spread * mean);
        let in_range = mean >= cfg.lock_range.0 * nominal && mean <= cfg.lock_range.1 * nominal;
        (steady && in_range).then_some((j, mean))
    })
}

/// Bits strictly before `lock`, in time order, down to edge index `floor`.
fn track_backward(edges: &[Edge], lock: usize, floor: usize, period: f64, cfg: &CdrConfig) -> (Vec<bool>, Vec<f64>) {
    let mut bits = Vec::new();
    let mut clocks = Vec::new();
    let mut t_mid = edges[lock].time_ns;
    let mut k = lock;
    while k > floor {
        let lo = t_mid - cfg.mid_window.1 * period;
        let hi = t_mid - cfg.mid_window.0 * period;
        let mut found = None;
        let mut j = k;
        while j > floor {
            j -= 1;
            let t = edges[j].time_ns;
            if t < lo {
                break;
            }
            if t <= hi {
                found = Some(j);
                break;
            }
        }
        match found {
            Some(j) => {
                bits.push(edges[j].rising);
                clocks.push(edges[j].time_ns);
                t_mid = edges[j].time_ns;
                k = j;
            }
            None => break,
        }
    }
    bits.reverse();
    clocks.reverse();
    (bits, clocks)
}

/// Decodes from `lock` onward; returns the index of the first unused edge.
fn track_forward(edges: &[Edge], lock: usize, mut period: f64, cfg: &CdrConfig, out: &mut ManchesterDecoded) -> usize {
    let mut t_mid = edges[lock].time_ns;
    let mut level = edges[lock].rising;
    out.bits.push(edges[lock].rising);
    out.clock_edges_ns.push(t_mid);
    let mut last_edge = t_mid;
    let mut k = lock + 1;
    loop {
        while k < edges.len() && edges[k].time_ns < t_mid + cfg.mid_window.0 * period {
            level = edges[k].rising;
            last_edge = edges[k].time_ns;
            k += 1;
        }
        if k >= edges.len() {
            out.loss_of_signal_ns.push(last_edge + cfg.los_periods * period);
            return k;
        }
        let t = edges[k].time_ns;
        if t <= t_mid + cfg.mid_window.1 * period {
            period += cfg.loop_gain * ((t - t_mid) - period);
            t_mid = t;
            level = edges[k].rising;
            last_edge = t;
            out.bits.push(level);
            out.clock_edges_ns.push(t);
            k += 1;
        } else if t - last_edge > cfg.los_periods * period {
            out.loss_of_signal_ns.push(last_edge + cfg.los_periods * period);
            return k;
        } else {
            t_mid += period;
            out.flagged_bits.push(out.bits.len());
            out.bits.push(!level);
            out.clock_edges_ns.push(t_mid);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const T: f64 = 1e6 / 600.0;

    /// Ideal transition list for a half-symbol stream.
    fn edges_of(symbols: &[bool], period: f64, jitter: impl Fn(usize) -> f64) -> Vec<Edge> {
        symbols
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[0] != w[1])
            .map(|(k, w)| Edge {
                time_ns: (k + 1) as f64 * period / 2.0 + jitter(k),
                rising: w[1],
            })
            .collect()
    }

    fn random_bits(n: usize, seed: u64) -> Vec<bool> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut bits = crate::telemetry::frame::idle_bits(16);
        bits.extend((0..n).map(|_| rng.random::<bool>()));
        bits
    }

    #[test]
    fn encode_examples() {
        assert_eq!(manchester_encode(&[true]).unwrap(), vec![false, true]);
        assert_eq!(manchester_encode(&[true, false]).unwrap(), vec![false, true, true, false]);
        assert!(manchester_encode(&[]).is_err());
    }

    #[test]
    fn round_trip_ten_thousand_bits() {
        let bits = random_bits(10_000, 1);
        let edges = edges_of(&manchester_encode(&bits).unwrap(), T, |_| 0.0);
        let dec = decode_edges(&edges, 600.0, &CdrConfig::default()).unwrap();
        assert_eq!(dec.bits, bits);
        assert!(dec.flagged_bits.is_empty());
        let f = dec.recovered_bitrate_kbps().unwrap();
        assert!((f - 600.0).abs() < 6.0, "{f}");
    }

    #[test]
    fn tolerates_frequency_offset_and_jitter() {
        let bits = random_bits(2000, 2);
        let symbols = manchester_encode(&bits).unwrap();
        for scale in [0.8, 1.2] {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let jitter: Vec<f64> = (0..symbols.len()).map(|_| rng.random_range(-0.1..0.1) * T * scale).collect();
            let edges = edges_of(&symbols, T * scale, |k| jitter[k]);
            let dec = decode_edges(&edges, 600.0, &CdrConfig::default()).unwrap();
            assert_eq!(dec.bits, bits, "scale {scale}");
            // locks on the first preamble edges
            assert_eq!(dec.clock_edges_ns.len(), bits.len());
        }
    }

    #[test]
    fn flipped_half_symbol_is_flagged() {
        let bits = random_bits(200, 4);
        let mut symbols = manchester_encode(&bits).unwrap();
        let victim = 100;
        symbols[2 * victim + 1] = !symbols[2 * victim + 1];
        let edges = edges_of(&symbols, T, |_| 0.0);
        let dec = decode_edges(&edges, 600.0, &CdrConfig::default()).unwrap();
        assert_eq!(dec.flagged_bits, vec![victim]);
        assert_eq!(dec.bits.len(), bits.len());
    }

    #[test]
    fn silence_is_loss_of_signal() {
        assert_eq!(decode_edges(&[], 600.0, &CdrConfig::default()), Err(TelemetryError::LossOfSignal));
        let bits = random_bits(50, 5);
        let mut edges = edges_of(&manchester_encode(&bits).unwrap(), T, |_| 0.0);
        let gap = 10.0 * T;
        let tail: Vec<Edge> = edges.iter().map(|e| Edge { time_ns: e.time_ns + 67.0 * T + gap, ..*e }).collect();
        edges.extend(tail);
        let dec = decode_edges(&edges, 600.0, &CdrConfig::default()).unwrap();
        assert_eq!(dec.loss_of_signal_ns.len(), 2);
        assert_eq!(dec.lock_times_ns.len(), 2);
        assert!((dec.lock_times_ns[0] - 4.5 * T).abs() < 1e-9);
        assert_eq!(dec.bits.len(), 2 * bits.len());
    }

    #[test]
    fn sampled_waveform_decode() {
        let bits = random_bits(300, 6);
        let symbols = manchester_encode(&bits).unwrap();
        let dt = T / 20.0;
        let w = Waveform::from_fn(dt, symbols.len() * 10, |t| if symbols[(t / (T / 2.0)) as usize] { 1.0 } else { 0.0 });
        assert_eq!(manchester_decode(&w, 600.0).unwrap().bits, bits);
        let coarse = Waveform::new(T / 4.0, vec![0.0, 1.0]);
        assert!(manchester_decode(&coarse, 600.0).is_err());
    }
}
