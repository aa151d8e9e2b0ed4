//! Compact framing modeled on MAVLink 2:
//!
//! ```text
//! 0xFD | len | seq | sysid | compid | msgid (u16 LE) | payload[len] | crc (u16 LE)
//! ```
//!
//! The CRC is CRC-16/CCITT-FALSE over everything from `len` through the
//! payload. Payload fields are little-endian.

use crc::{Crc, CRC_16_IBM_3740};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flightsim::Setpoint;

pub const SYNC: u8 = 0xFD;
pub const HEADER_LEN: usize = 7;
pub const CRC_LEN: usize = 2;
pub const MAX_PAYLOAD: usize = 255;

const CRC16: Crc<u16> = Crc::<u16>::new(&CRC_16_IBM_3740);

pub const MSG_HEARTBEAT: u16 = 0;
pub const MSG_ATTITUDE: u16 = 30;
pub const MSG_LOCAL_POSITION: u16 = 32;
pub const MSG_SET_POSITION_TARGET: u16 = 85;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("buffer too short: need {needed} bytes, got {got}")]
    Short { needed: usize, got: usize },
    #[error("bad sync byte 0x{0:02X}")]
    BadSync(u8),
    #[error("CRC mismatch: frame carries 0x{received:04X}, computed 0x{computed:04X}")]
    BadCrc { received: u16, computed: u16 },
    #[error("unknown message id {0}")]
    UnknownMessage(u16),
    #[error("message {id} needs a {expected}-byte payload, got {got}")]
    PayloadLength { id: u16, expected: usize, got: usize },
    #[error("{0} trailing bytes after frame")]
    Trailing(usize),
}

/// Position/velocity target in local NED (wire form of [`Setpoint`]).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SetPositionTarget {
    pub type_mask: u16,
    pub x: f32,
    pub y: f32,
    pub z: f32,
    pub vx: f32,
    pub vy: f32,
    pub vz: f32,
    pub yaw: f32,
    pub yaw_rate: f32,
    pub timestamp_ms: u32,
}

impl SetPositionTarget {
    pub const LEN: usize = 38;

    /// Acceleration members are not carried on the wire and are marked ignored.
    pub fn from_setpoint(sp: &Setpoint) -> Self {
        Self {
            type_mask: sp.type_mask | crate::flightsim::type_mask::IGNORE_ACCELERATION,
            x: sp.position[0] as f32,
            y: sp.position[1] as f32,
            z: sp.position[2] as f32,
            vx: sp.velocity[0] as f32,
            vy: sp.velocity[1] as f32,
            vz: sp.velocity[2] as f32,
            yaw: sp.yaw as f32,
            yaw_rate: sp.yaw_rate as f32,
            timestamp_ms: sp.timestamp_ms,
        }
    }

    pub fn to_setpoint(&self) -> Setpoint {
        Setpoint {
            type_mask: self.type_mask,
            position: [self.x.into(), self.y.into(), self.z.into()],
            velocity: [self.vx.into(), self.vy.into(), self.vz.into()],
            acceleration: [0.0; 3],
            yaw: self.yaw.into(),
            yaw_rate: self.yaw_rate.into(),
            timestamp_ms: self.timestamp_ms,
        }
    }
}

/// NED position and velocity report.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LocalPosition {
    pub timestamp_ms: u32,
    pub x: f32,
    pub y: f32,
    pub z: f32,
    pub vx: f32,
    pub vy: f32,
    pub vz: f32,
}

impl LocalPosition {
    pub const LEN: usize = 28;
}

/// Euler angles and body rates report.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Attitude {
    pub timestamp_ms: u32,
    pub roll: f32,
    pub pitch: f32,
    pub yaw: f32,
    pub rollspeed: f32,
    pub pitchspeed: f32,
    pub yawspeed: f32,
}

impl Attitude {
    pub const LEN: usize = 28;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Message {
    Heartbeat,
    SetPositionTarget(SetPositionTarget),
    LocalPosition(LocalPosition),
    Attitude(Attitude),
}

impl Message {
    pub fn id(&self) -> u16 {
        match self {
            Message::Heartbeat => MSG_HEARTBEAT,
            Message::SetPositionTarget(_) => MSG_SET_POSITION_TARGET,
            Message::LocalPosition(_) => MSG_LOCAL_POSITION,
            Message::Attitude(_) => MSG_ATTITUDE,
        }
    }

    fn write_payload(&self, out: &mut Vec<u8>) {
        let f = |out: &mut Vec<u8>, v: f32| out.extend_from_slice(&v.to_le_bytes());
        match self {
            Message::Heartbeat => {}
            Message::SetPositionTarget(m) => {
                out.extend_from_slice(&m.type_mask.to_le_bytes());
                for v in [m.x, m.y, m.z, m.vx, m.vy, m.vz, m.yaw, m.yaw_rate] {
                    f(out, v);
                }
                out.extend_from_slice(&m.timestamp_ms.to_le_bytes());
            }
            Message::LocalPosition(m) => {
                out.extend_from_slice(&m.timestamp_ms.to_le_bytes());
                for v in [m.x, m.y, m.z, m.vx, m.vy, m.vz] {
                    f(out, v);
                }
            }
            Message::Attitude(m) => {
                out.extend_from_slice(&m.timestamp_ms.to_le_bytes());
                for v in [m.roll, m.pitch, m.yaw, m.rollspeed, m.pitchspeed, m.yawspeed] {
                    f(out, v);
                }
            }
        }
    }

    fn read_payload(id: u16, p: &[u8]) -> Result<Self, DecodeError> {
        let expected = match id {
            MSG_HEARTBEAT => 0,
            MSG_SET_POSITION_TARGET => SetPositionTarget::LEN,
            MSG_LOCAL_POSITION => LocalPosition::LEN,
            MSG_ATTITUDE => Attitude::LEN,
            other => return Err(DecodeError::UnknownMessage(other)),
        };
        if p.len() != expected {
            return Err(DecodeError::PayloadLength {
                id,
                expected,
                got: p.len(),
            });
        }
        let u32_at = |i: usize| u32::from_le_bytes(p[i..i + 4].try_into().expect("4 bytes"));
        let f32_at = |i: usize| f32::from_le_bytes(p[i..i + 4].try_into().expect("4 bytes"));
        Ok(match id {
            MSG_HEARTBEAT => Message::Heartbeat,
            MSG_SET_POSITION_TARGET => Message::SetPositionTarget(SetPositionTarget {
                type_mask: u16::from_le_bytes([p[0], p[1]]),
                x: f32_at(2),
                y: f32_at(6),
                z: f32_at(10),
                vx: f32_at(14),
                vy: f32_at(18),
                vz: f32_at(22),
                yaw: f32_at(26),
                yaw_rate: f32_at(30),
                timestamp_ms: u32_at(34),
            }),
            MSG_LOCAL_POSITION => Message::LocalPosition(LocalPosition {
                timestamp_ms: u32_at(0),
                x: f32_at(4),
                y: f32_at(8),
                z: f32_at(12),
                vx: f32_at(16),
                vy: f32_at(20),
                vz: f32_at(24),
            }),
            _ => Message::Attitude(Attitude {
                timestamp_ms: u32_at(0),
                roll: f32_at(4),
                pitch: f32_at(8),
                yaw: f32_at(12),
                rollspeed: f32_at(16),
                pitchspeed: f32_at(20),
                yawspeed: f32_at(24),
            }),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub sequence: u8,
    pub system_id: u8,
    pub component_id: u8,
    pub message: Message,
}

pub fn crc16(bytes: &[u8]) -> u16 {
    CRC16.checksum(bytes)
}

pub fn encode_frame(frame: &Frame) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + SetPositionTarget::LEN + CRC_LEN);
    out.extend_from_slice(&[SYNC, 0, frame.sequence, frame.system_id, frame.component_id]);
    out.extend_from_slice(&frame.message.id().to_le_bytes());
    frame.message.write_payload(&mut out);
    let len = out.len() - HEADER_LEN;
    debug_assert!(len <= MAX_PAYLOAD);
    out[1] = len as u8;
    let crc = crc16(&out[1..]);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

/// Decodes exactly one frame occupying the whole buffer.
pub fn decode_frame(bytes: &[u8]) -> Result<Frame, DecodeError> {
    if bytes.is_empty() {
        return Err(DecodeError::Short { needed: 1, got: 0 });
    }
    if bytes[0] != SYNC {
        return Err(DecodeError::BadSync(bytes[0]));
    }
    if bytes.len() < HEADER_LEN + CRC_LEN {
        return Err(DecodeError::Short {
            needed: HEADER_LEN + CRC_LEN,
            got: bytes.len(),
        });
    }
    let len = usize::from(bytes[1]);
    let total = HEADER_LEN + len + CRC_LEN;
    if bytes.len() < total {
        return Err(DecodeError::Short {
            needed: total,
            got: bytes.len(),
        });
    }
    if bytes.len() > total {
        return Err(DecodeError::Trailing(bytes.len() - total));
    }
    let received = u16::from_le_bytes([bytes[total - 2], bytes[total - 1]]);
    let computed = crc16(&bytes[1..total - 2]);
    if received != computed {
        return Err(DecodeError::BadCrc { received, computed });
    }
    let id = u16::from_le_bytes([bytes[5], bytes[6]]);
    let message = Message::read_payload(id, &bytes[HEADER_LEN..HEADER_LEN + len])?;
    Ok(Frame {
        sequence: bytes[2],
        system_id: bytes[3],
        component_id: bytes[4],
        message,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crc_check_value() {
        assert_eq!(crc16(b"123456789"), 0x29B1);
    }

    #[test]
    fn heartbeat_round_trip() {
        let f = Frame {
            sequence: 255,
            system_id: 1,
            component_id: 1,
            message: Message::Heartbeat,
        };
        let bytes = encode_frame(&f);
        assert_eq!(bytes.len(), HEADER_LEN + CRC_LEN);
        assert_eq!(decode_frame(&bytes).unwrap(), f);
    }

    #[test]
    fn distinct_errors() {
        let f = Frame {
            sequence: 3,
            system_id: 1,
            component_id: 2,
            message: Message::SetPositionTarget(SetPositionTarget::default()),
        };
        let bytes = encode_frame(&f);
        assert!(matches!(decode_frame(&bytes[..5]), Err(DecodeError::Short { .. })));
        let mut b = bytes.clone();
        b[0] = 0xFE;
        assert_eq!(decode_frame(&b), Err(DecodeError::BadSync(0xFE)));
        let mut b = bytes.clone();
        b[HEADER_LEN + 3] ^= 0x10;
        assert!(matches!(decode_frame(&b), Err(DecodeError::BadCrc { .. })));
        // Unknown id with a valid CRC.
        let mut b = bytes.clone();
        b[5] = 99;
        let n = b.len();
        let crc = crc16(&b[1..n - 2]).to_le_bytes();
        b[n - 2..].copy_from_slice(&crc);
        assert_eq!(decode_frame(&b), Err(DecodeError::UnknownMessage(99)));
        let mut b = bytes;
        b.push(0);
        assert_eq!(decode_frame(&b), Err(DecodeError::Trailing(1)));
    }

    #[test]
    fn setpoint_conversion_preserves_mask() {
        let sp = Setpoint::velocity([1.0, -2.0, 0.5], 0.25).with_timestamp(1234);
        let wire = SetPositionTarget::from_setpoint(&sp);
        let back = wire.to_setpoint();
        assert_eq!(back.type_mask, sp.type_mask);
        assert_eq!(back.velocity, [1.0, -2.0, 0.5]);
        assert_eq!(back.timestamp_ms, 1234);
    }
}
