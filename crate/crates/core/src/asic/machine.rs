//! Command interpreter and electrode configuration state.
//!
//! Wire format (opcode, payload bytes, big-endian):
//!
//! | opcode | command            | payload                                             |
//! |--------|--------------------|-----------------------------------------------------|
//! | 0x01   | SET_ELECTRODE_ROLE | index u16, role (0 disabled, 1 active, 2 return)    |
//! | 0x02   | SET_WAVEFORM       | amp code, phase1 u16, interphase u16, phase2 u16 ticks, flags (bit0 anodic first, bit1 monophasic) |
//! | 0x03   | TRIGGER            | none                                                |
//! | 0x04   | DISABLE_ALL        | none                                                |
//! | 0x05   | QUERY_STATUS       | none                                                |
//! | 0x80   | POR (uplink)       | none                                                |
//! | 0x81   | ACK (uplink)       | echoed opcode                                       |
//! | 0x82   | NACK (uplink)      | echoed opcode, reason                               |
//! | 0x83   | STATUS (uplink)    | flags, active count u16, return count u16, amp code, waveform flags, temperature (0 nominal) |

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::pulse::{to_ticks, PulseShape, StimParams, CLOCK_KHZ, DEFAULT_INTERPHASE_US};
use super::{AsicError, Polarity};
use crate::telemetry::{frame_encode, BitStream, Frame};

pub const N_ELECTRODES: usize = 256;
pub const ELECTRODE_PITCH_UM: f64 = 150.0;
pub const ELECTRODE_SIZE_UM: f64 = 120.0;

pub mod opcode {
    pub const SET_ELECTRODE_ROLE: u8 = 0x01;
    pub const SET_WAVEFORM: u8 = 0x02;
    pub const TRIGGER: u8 = 0x03;
    pub const DISABLE_ALL: u8 = 0x04;
    pub const QUERY_STATUS: u8 = 0x05;
    pub const POR: u8 = 0x80;
    pub const ACK: u8 = 0x81;
    pub const NACK: u8 = 0x82;
    pub const STATUS: u8 = 0x83;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElectrodeRole {
    Disabled,
    Active,
    Return,
}

impl ElectrodeRole {
    fn from_wire(b: u8) -> Option<Self> {
        match b {
            0 => Some(Self::Disabled),
            1 => Some(Self::Active),
            2 => Some(Self::Return),
            _ => None,
        }
    }

    fn to_wire(self) -> u8 {
        match self {
            Self::Disabled => 0,
            Self::Active => 1,
            Self::Return => 2,
        }
    }
}

/// Centre of electrode `index` on the 16 × 16 grid, µm.
pub fn electrode_position_um(index: u16) -> (f64, f64) {
    let (row, col) = (index / 16, index % 16);
    (col as f64 * ELECTRODE_PITCH_UM, row as f64 * ELECTRODE_PITCH_UM)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[repr(u8)]
pub enum NackReason {
    UnknownOpcode = 1,
    BadLength = 2,
    BadIndex = 3,
    BadRole = 4,
    NoActiveElectrode = 5,
    NoReturnElectrode = 6,
    InvalidWaveform = 7,
}

/// Decoded downlink command.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Command {
    SetElectrodeRole { index: u16, role: ElectrodeRole },
    SetWaveform(StimParams),
    Trigger,
    DisableAll,
    QueryStatus,
}

impl Command {
    pub fn to_frame(&self) -> Frame {
        let (op, payload) = match *self {
            Command::SetElectrodeRole { index, role } => {
                let [hi, lo] = index.to_be_bytes();
                (opcode::SET_ELECTRODE_ROLE, vec![hi, lo, role.to_wire()])
            }
            Command::SetWaveform(p) => {
                let mut payload = vec![p.amplitude_code];
                for us in [p.phase1_us, p.interphase_us, p.phase2_us] {
                    payload.extend((to_ticks(us, CLOCK_KHZ).min(u16::MAX as u32) as u16).to_be_bytes());
                }
                payload.push(waveform_flags(&p));
                (opcode::SET_WAVEFORM, payload)
            }
            Command::Trigger => (opcode::TRIGGER, vec![]),
            Command::DisableAll => (opcode::DISABLE_ALL, vec![]),
            Command::QueryStatus => (opcode::QUERY_STATUS, vec![]),
        };
        Frame { opcode: op, payload }
    }

    pub fn parse(f: &Frame) -> Result<Self, NackReason> {
        let p = &f.payload;
        let expect = |n: usize| if p.len() == n { Ok(()) } else { Err(NackReason::BadLength) };
        match f.opcode {
            opcode::SET_ELECTRODE_ROLE => {
                expect(3)?;
                let index = u16::from_be_bytes([p[0], p[1]]);
                if index as usize >= N_ELECTRODES {
                    return Err(NackReason::BadIndex);
                }
                let role = ElectrodeRole::from_wire(p[2]).ok_or(NackReason::BadRole)?;
                Ok(Command::SetElectrodeRole { index, role })
            }
            opcode::SET_WAVEFORM => {
                expect(8)?;
                let ticks = |k: usize| u16::from_be_bytes([p[k], p[k + 1]]) as f64 * 1e3 / CLOCK_KHZ;
                let flags = p[7];
                if flags & !0b11 != 0 {
                    return Err(NackReason::InvalidWaveform);
                }
                let shape = if flags & 0b10 != 0 { PulseShape::Monophasic } else { PulseShape::Biphasic };
                let params = StimParams {
                    amplitude_code: p[0],
                    phase1_us: ticks(1),
                    interphase_us: ticks(3),
                    phase2_us: ticks(5),
                    polarity: if flags & 1 != 0 { Polarity::AnodicFirst } else { Polarity::CathodicFirst },
                    shape,
                };
                if params.phase1_us == 0.0 || (shape == PulseShape::Biphasic && params.phase2_us == 0.0) {
                    return Err(NackReason::InvalidWaveform);
                }
                Ok(Command::SetWaveform(params))
            }
            opcode::TRIGGER => expect(0).map(|_| Command::Trigger),
            opcode::DISABLE_ALL => expect(0).map(|_| Command::DisableAll),
            opcode::QUERY_STATUS => expect(0).map(|_| Command::QueryStatus),
            _ => Err(NackReason::UnknownOpcode),
        }
    }
}

fn waveform_flags(p: &StimParams) -> u8 {
    (p.polarity == Polarity::AnodicFirst) as u8 | (((p.shape == PulseShape::Monophasic) as u8) << 1)
}

/// A stimulation pulse released by TRIGGER.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriggeredPulse {
    pub params: StimParams,
    pub active: Vec<u16>,
    pub returns: Vec<u16>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutcome {
    /// Uplink reply frame (ACK, NACK or STATUS).
    pub reply: Frame,
    pub pulse: Option<TriggeredPulse>,
}

impl CommandOutcome {
    pub fn is_nack(&self) -> bool {
        self.reply.opcode == opcode::NACK
    }
}

/// Sequential ASIC state machine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Asic {
    powered: bool,
    clock_locked: bool,
    por_sent: bool,
    roles: Vec<ElectrodeRole>,
    waveform: StimParams,
    triggers: u32,
}

impl Default for Asic {
    fn default() -> Self {
        Self::new()
    }
}

impl Asic {
    pub fn new() -> Self {
        Self {
            powered: false,
            clock_locked: false,
            por_sent: false,
            roles: vec![ElectrodeRole::Disabled; N_ELECTRODES],
            waveform: StimParams {
                interphase_us: DEFAULT_INTERPHASE_US,
                ..StimParams::default()
            },
            triggers: 0,
        }
    }

    pub fn is_powered(&self) -> bool {
        self.powered
    }

    pub fn por_sent(&self) -> bool {
        self.por_sent
    }

    pub fn roles(&self) -> &[ElectrodeRole] {
        &self.roles
    }

    pub fn waveform(&self) -> &StimParams {
        &self.waveform
    }

    /// Rails up starts a power cycle; rails down resets all state.
    pub fn set_power(&mut self, rails_up: bool) {
        if rails_up == self.powered {
            return;
        }
        if rails_up {
            self.powered = true;
        } else {
            *self = Self::new();
        }
    }

    pub fn set_clock_locked(&mut self, locked: bool) {
        self.clock_locked = locked && self.powered;
    }

    /// The POR uplink frame, once per power cycle.
    pub fn por_message(&mut self) -> Result<Option<BitStream>, AsicError> {
        if !self.powered {
            return Err(AsicError::Unpowered);
        }
        if !self.clock_locked {
            return Err(AsicError::NoClock);
        }
        if self.por_sent {
            return Ok(None);
        }
        self.por_sent = true;
        Ok(Some(frame_encode(&por_frame(), CLOCK_KHZ)?))
    }

    pub fn apply_command(&mut self, f: &Frame) -> Result<CommandOutcome, AsicError> {
        if !self.powered {
            return Err(AsicError::Unpowered);
        }
        let nack = |reason: NackReason| CommandOutcome {
            reply: Frame {
                opcode: opcode::NACK,
                payload: vec![f.opcode, reason as u8],
            },
            pulse: None,
        };
        let ack = CommandOutcome {
            reply: Frame {
                opcode: opcode::ACK,
                payload: vec![f.opcode],
            },
            pulse: None,
        };
        let cmd = match Command::parse(f) {
            Ok(c) => c,
            Err(reason) => return Ok(nack(reason)),
        };
        Ok(match cmd {
            Command::SetElectrodeRole { index, role } => {
                self.roles[index as usize] = role;
                ack
            }
            Command::SetWaveform(p) => {
                self.waveform = p;
                ack
            }
            Command::DisableAll => {
                self.roles.fill(ElectrodeRole::Disabled);
                ack
            }
            Command::QueryStatus => CommandOutcome {
                reply: self.status_frame(),
                pulse: None,
            },
            Command::Trigger => {
                let active = self.indices(ElectrodeRole::Active);
                let returns = self.indices(ElectrodeRole::Return);
                if active.is_empty() {
                    nack(NackReason::NoActiveElectrode)
                } else if returns.is_empty() {
                    nack(NackReason::NoReturnElectrode)
                } else {
                    self.triggers += 1;
                    CommandOutcome {
                        pulse: Some(TriggeredPulse {
                            params: self.waveform,
                            active,
                            returns,
                        }),
                        ..ack
                    }
                }
            }
        })
    }

    fn indices(&self, role: ElectrodeRole) -> Vec<u16> {
        (0..N_ELECTRODES as u16).filter(|&i| self.roles[i as usize] == role).collect()
    }

    fn status_frame(&self) -> Frame {
        let flags = self.powered as u8 | (self.clock_locked as u8) << 1 | (self.por_sent as u8) << 2;
        let mut payload = vec![flags];
        payload.extend((self.indices(ElectrodeRole::Active).len() as u16).to_be_bytes());
        payload.extend((self.indices(ElectrodeRole::Return).len() as u16).to_be_bytes());
        payload.push(self.waveform.amplitude_code);
        payload.push(waveform_flags(&self.waveform));
        // temperature monitor is a stub: always nominal
        payload.push(0);
        Frame {
            opcode: opcode::STATUS,
            payload,
        }
    }

    /// SHA-256 of the serialized state, hex.
    pub fn state_digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("state serializes");
        hex::encode(Sha256::digest(&json))
    }
}

pub fn por_frame() -> Frame {
    Frame {
        opcode: opcode::POR,
        payload: vec![],
    }
}
