//! Bit streams, their hex text form, and bit-error measurement.

use serde::{Deserialize, Serialize};

use super::TelemetryError;

pub const DEFAULT_BITRATE_KBPS: f64 = 600.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BitStream {
    pub bits: Vec<bool>,
    pub bitrate_kbps: f64,
}

impl BitStream {
    pub fn new(bits: Vec<bool>, bitrate_kbps: f64) -> Result<Self, TelemetryError> {
        if !(bitrate_kbps > 0.0 && bitrate_kbps.is_finite()) {
            return Err(TelemetryError::InvalidParams(format!("bitrate {bitrate_kbps} kbit/s")));
        }
        Ok(Self { bits, bitrate_kbps })
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bit_period_ns(&self) -> f64 {
        1e6 / self.bitrate_kbps
    }

    /// `bits=`, `bitrate_kbps=` and `hex=` lines; bits packed MSB first,
    /// zero-padded to a whole byte.
    pub fn to_hex_text(&self) -> String {
        format!(
            "bits={}\nbitrate_kbps={}\nhex={}\n",
            self.bits.len(),
            self.bitrate_kbps,
            hex::encode(pack_bits(&self.bits))
        )
    }

    pub fn from_hex_text(text: &str) -> Result<Self, TelemetryError> {
        let mut n_bits = None;
        let mut bitrate = DEFAULT_BITRATE_KBPS;
        let mut hex_digits = None;
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| TelemetryError::Parse(format!("expected key=value, got {line:?}")))?;
            let value = value.trim();
            match key.trim() {
                "bits" => n_bits = Some(value.parse::<usize>().map_err(|e| TelemetryError::Parse(e.to_string()))?),
                "bitrate_kbps" => bitrate = value.parse().map_err(|e: std::num::ParseFloatError| TelemetryError::Parse(e.to_string()))?,
                "hex" => hex_digits = Some(value.to_string()),
                other => return Err(TelemetryError::Parse(format!("unknown key {other:?}"))),
            }
        }
        let hex_digits = hex_digits.ok_or_else(|| TelemetryError::Parse("missing hex=".into()))?;
        let bytes = hex::decode(&hex_digits).map_err(|e| TelemetryError::Parse(e.to_string()))?;
        let available = bytes.len() * 8;
        let n_bits = n_bits.unwrap_or(available);
        if n_bits > available || available - n_bits >= 8 {
            return Err(TelemetryError::Parse(format!("bits={n_bits} does not match {} hex bytes", bytes.len())));
        }
        let mut bits = unpack_bits(&bytes);
        bits.truncate(n_bits);
        Self::new(bits, bitrate)
    }
}

pub fn pack_bits(bits: &[bool]) -> Vec<u8> {
    bits.chunks(8)
        .map(|chunk| chunk.iter().enumerate().fold(0u8, |acc, (i, &b)| acc | ((b as u8) << (7 - i))))
        .collect()
}

pub fn unpack_bits(bytes: &[u8]) -> Vec<bool> {
    bytes.iter().flat_map(|&byte| (0..8).map(move |i| byte & (0x80 >> i) != 0)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BerResult {
    pub errors: usize,
    pub compared: usize,
    pub ber: f64,
    /// Position of `tx[0]` within `rx`.
    pub offset: usize,
}

/// Hamming distance over length. Equal-length streams are compared directly;
/// otherwise `rx` is aligned on the first occurrence of `tx`'s leading
/// header (preamble and sync) and the overlap must cover all of `tx`.
pub fn ber_measure(tx: &[bool], rx: &[bool]) -> Result<BerResult, TelemetryError> {
    if tx.is_empty() {
        return Err(TelemetryError::Alignment("empty transmit stream".into()));
    }
    let offset = if tx.len() == rx.len() {
        0
    } else {
        let header = &tx[..tx.len().min(super::frame::HEADER_BITS)];
        rx.windows(header.len())
            .position(|w| w == header)
            .filter(|&off| off + tx.len() <= rx.len())
            .ok_or_else(|| TelemetryError::Alignment("transmit header not found in received stream".into()))?
    };
    let errors = tx.iter().zip(&rx[offset..]).filter(|(a, b)| a != b).count();
    Ok(BerResult {
        errors,
        compared: tx.len(),
        ber: errors as f64 / tx.len() as f64,
        offset,
    })
}
