//! Forward telemetry: framing, Manchester line code, ASK modulation and
//! clock/data recovery.

mod ask;
mod bits;
pub mod frame;
mod manchester;

use thiserror::Error;

pub use ask::{ask_modulate, AskParams, AskSampler};
pub use bits::{ber_measure, pack_bits, unpack_bits, BerResult, BitStream, DEFAULT_BITRATE_KBPS};
pub use frame::{crc8, frame_decode_bits, frame_encode_bits, idle_bits, scan_frames, Frame, FrameError, ScannedFrame};
pub use manchester::{decode_edges, manchester_decode, manchester_encode, CdrConfig, ManchesterDecoded};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TelemetryError {
    #[error("empty bit stream")]
    EmptyStream,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("loss of signal: no lock on the received edges")]
    LossOfSignal,
    #[error("alignment failure: {0}")]
    Alignment(String),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error("parse error: {0}")]
    Parse(String),
}

/// Serializes a frame to a bit stream at `bitrate_kbps`.
pub fn frame_encode(f: &Frame, bitrate_kbps: f64) -> Result<BitStream, TelemetryError> {
    BitStream::new(frame_encode_bits(f), bitrate_kbps)
}

pub fn frame_decode(bits: &BitStream) -> Result<Frame, TelemetryError> {
    Ok(frame_decode_bits(&bits.bits)?)
}
