//! Command frame format.
//!
//! `preamble 0xAAAA | sync 0xB8 | opcode | len | payload[len] | crc`, bytes
//! MSB first. The CRC-8 (polynomial 0x07, init 0) covers opcode, len and
//! payload.

use serde::{Deserialize, Serialize};

use super::bits::{pack_bits, unpack_bits};
use super::TelemetryError;

pub const PREAMBLE: u16 = 0xAAAA;
pub const SYNC: u8 = 0xB8;
pub const MAX_PAYLOAD: usize = 32;
/// Preamble plus sync.
pub const HEADER_BITS: usize = 24;
pub const MIN_FRAME_BITS: usize = 48;

const CRC8: crc::Crc<u8> = crc::Crc::<u8>::new(&crc::CRC_8_SMBUS);

pub fn crc8(bytes: &[u8]) -> u8 {
    CRC8.checksum(bytes)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Frame {
    pub opcode: u8,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(opcode: u8, payload: Vec<u8>) -> Result<Self, TelemetryError> {
        if payload.len() > MAX_PAYLOAD {
            return Err(TelemetryError::Frame(FrameError::LengthOverflow { declared: payload.len() }));
        }
        Ok(Self { opcode, payload })
    }

    pub fn bit_len(&self) -> usize {
        MIN_FRAME_BITS + 8 * self.payload.len()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let [hi, lo] = PREAMBLE.to_be_bytes();
        let mut bytes = vec![hi, lo, SYNC, self.opcode, self.payload.len() as u8];
        bytes.extend(&self.payload);
        bytes.push(crc8(&bytes[3..]));
        bytes
    }
}

/// Frame-layer decode failures, in the order they are checked.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize, Deserialize)]
pub enum FrameError {
    #[error("truncated frame: {bits} bits")]
    Truncated { bits: usize },
    #[error("bad preamble {found:#06x}")]
    BadPreamble { found: u16 },
    #[error("bad sync word {found:#04x}")]
    BadSync { found: u8 },
    #[error("CRC mismatch: computed {computed:#04x}, received {received:#04x}")]
    CrcMismatch { computed: u8, received: u8 },
    #[error("payload length {declared} exceeds maximum")]
    LengthOverflow { declared: usize },
    #[error("declared payload length {declared}, frame carries {actual}")]
    LengthMismatch { declared: usize, actual: usize },
}

pub fn frame_encode_bits(f: &Frame) -> Vec<bool> {
    unpack_bits(&f.to_bytes())
}

/// Decodes exactly one frame occupying all of `bits`.
pub fn frame_decode_bits(bits: &[bool]) -> Result<Frame, FrameError> {
    if bits.len() < MIN_FRAME_BITS || !bits.len().is_multiple_of(8) {
        return Err(FrameError::Truncated { bits: bits.len() });
    }
    let bytes = pack_bits(bits);
    let preamble = u16::from_be_bytes([bytes[0], bytes[1]]);
    if preamble != PREAMBLE {
        return Err(FrameError::BadPreamble { found: preamble });
    }
    if bytes[2] != SYNC {
        return Err(FrameError::BadSync { found: bytes[2] });
    }
    let n = bytes.len();
    let computed = crc8(&bytes[3..n - 1]);
    if computed != bytes[n - 1] {
        return Err(FrameError::CrcMismatch {
            computed,
            received: bytes[n - 1],
        });
    }
    let declared = bytes[4] as usize;
    if declared > MAX_PAYLOAD {
        return Err(FrameError::LengthOverflow { declared });
    }
    let actual = n - 6;
    if declared != actual {
        return Err(FrameError::LengthMismatch { declared, actual });
    }
    Ok(Frame {
        opcode: bytes[3],
        payload: bytes[5..n - 1].to_vec(),
    })
}

/// A frame candidate located in a continuous bit stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScannedFrame {
    /// Index of the first sync bit.
    pub sync_bit: usize,
    /// Index one past the last bit consumed.
    pub end_bit: usize,
    pub result: Result<Frame, FrameError>,
}

/// Finds frames in a continuous stream by the last preamble byte followed by
/// the sync word. After a good frame scanning resumes at its end; after a
/// bad one it resumes one bit past the sync position.
pub fn scan_frames(bits: &[bool]) -> Vec<ScannedFrame> {
    let marker = unpack_bits(&[PREAMBLE as u8, SYNC]);
    let byte_at = |start: usize| -> u8 { pack_bits(&bits[start..start + 8])[0] };
    let mut found = Vec::new();
    let mut k = 0;
    while k + marker.len() <= bits.len() {
        if bits[k..k + marker.len()] != marker[..] {
            k += 1;
            continue;
        }
        let sync_bit = k + 8;
        let body = sync_bit + 8;
        let fail = |result, end_bit| ScannedFrame {
            sync_bit,
            end_bit,
            result: Err(result),
        };
        if body + 16 > bits.len() {
            found.push(fail(FrameError::Truncated { bits: bits.len() - k + 8 }, bits.len()));
            break;
        }
        let opcode = byte_at(body);
        let declared = byte_at(body + 8) as usize;
        if declared > MAX_PAYLOAD {
            found.push(fail(FrameError::LengthOverflow { declared }, body + 16));
            k = sync_bit - 7;
            continue;
        }
        let end_bit = body + 16 + 8 * declared + 8;
        if end_bit > bits.len() {
            found.push(fail(FrameError::Truncated { bits: bits.len() - k + 8 }, bits.len()));
            break;
        }
        let payload: Vec<u8> = (0..declared).map(|j| byte_at(body + 16 + 8 * j)).collect();
        let received = byte_at(end_bit - 8);
        let mut covered = vec![opcode, declared as u8];
        covered.extend(&payload);
        let computed = crc8(&covered);
        if computed == received {
            found.push(ScannedFrame {
                sync_bit,
                end_bit,
                result: Ok(Frame { opcode, payload }),
            });
            k = end_bit;
        } else {
            found.push(fail(FrameError::CrcMismatch { computed, received }, end_bit));
            k = sync_bit - 7;
        }
    }
    found
}

/// `n` bits of alternating 1/0 filler.
pub fn idle_bits(n: usize) -> Vec<bool> {
    (0..n).map(|i| i % 2 == 0).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crc_check_value() {
        // published check value of CRC-8/SMBUS
        assert_eq!(crc8(b"123456789"), 0xF4);
        // bitwise long division, independent of the table
        let slow = |data: &[u8]| {
            let mut c = 0u8;
            for &b in data {
                c ^= b;
                for _ in 0..8 {
                    c = if c & 0x80 != 0 { (c << 1) ^ 0x07 } else { c << 1 };
                }
            }
            c
        };
        for data in [&b""[..], b"\x01", b"\x03\x00", b"\xff\x10\x22"] {
            assert_eq!(crc8(data), slow(data));
        }
    }

    #[test]
    fn empty_payload_is_48_bits() {
        let f = Frame::new(0x03, vec![]).unwrap();
        let bits = frame_encode_bits(&f);
        assert_eq!(bits.len(), MIN_FRAME_BITS);
        assert_eq!(frame_decode_bits(&bits).unwrap(), f);
    }

    #[test]
    fn every_single_bit_flip_is_rejected() {
        let f = Frame::new(0x02, vec![0x12, 0x34, 0x56]).unwrap();
        let bits = frame_encode_bits(&f);
        for k in 0..bits.len() {
            let mut bad = bits.clone();
            bad[k] = !bad[k];
            let err = frame_decode_bits(&bad).unwrap_err();
            match k {
                0..=15 => assert!(matches!(err, FrameError::BadPreamble { .. })),
                16..=23 => assert!(matches!(err, FrameError::BadSync { .. })),
                _ => assert!(matches!(err, FrameError::CrcMismatch { .. }), "bit {k}: {err:?}"),
            }
        }
    }

    #[test]
    fn length_errors_are_distinct() {
        let mut bytes = Frame::new(1, vec![9; 2]).unwrap().to_bytes();
        bytes[4] = 5;
        let n = bytes.len();
        bytes[n - 1] = crc8(&bytes[3..n - 1]);
        assert_eq!(
            frame_decode_bits(&unpack_bits(&bytes)),
            Err(FrameError::LengthMismatch { declared: 5, actual: 2 })
        );
        bytes[4] = 40;
        bytes[n - 1] = crc8(&bytes[3..n - 1]);
        assert_eq!(
            frame_decode_bits(&unpack_bits(&bytes)),
            Err(FrameError::LengthOverflow { declared: 40 })
        );
        assert!(matches!(frame_decode_bits(&[true; 47]), Err(FrameError::Truncated { .. })));
        assert!(Frame::new(1, vec![0; 33]).is_err());
    }

    #[test]
    fn scanner_finds_frames_in_idle() {
        let a = Frame::new(0x01, vec![0, 3, 1]).unwrap();
        let b = Frame::new(0x05, vec![]).unwrap();
        let mut stream = idle_bits(37);
        stream.extend(frame_encode_bits(&a));
        stream.extend(idle_bits(20));
        stream.extend(frame_encode_bits(&b));
        stream.extend(idle_bits(9));
        let ok: Vec<Frame> = scan_frames(&stream).into_iter().filter_map(|s| s.result.ok()).collect();
        assert_eq!(ok, vec![a, b]);
    }
}
