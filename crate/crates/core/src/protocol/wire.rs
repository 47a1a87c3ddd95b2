//! Datagram wire format.
//!
//! Every message starts with a four byte header:
//!
//! ```text
//! 0x48 0x53 | version (=1) | type
//! ```
//!
//! followed by a fixed-size payload. All multi-byte fields are
//! little-endian. A datagram never exceeds [`MAX_DATAGRAM`] bytes.
//!
//! | type | name       | payload                                                   |
//! |------|------------|-----------------------------------------------------------|
//! | 1    | SENSOR     | seq u32, t_send_us u64, thumb_cdeg i16, middle_cdeg i16,  |
//! |      |            | grip_milli u16, wrist_mm 3 x i32, phase u8 (31 bytes)     |
//! | 2    | CLOCK_PING | nonce u32, t1 u64 (12 bytes)                              |
//! | 3    | CLOCK_PONG | nonce u32, t1 u64, t2 u64, t3 u64 (28 bytes)              |
//! | 4    | HELLO      | peer_id u32, tick_hz u16 (6 bytes)                        |
//! | 5    | BYE        | empty                                                     |

use thiserror::Error;

pub const MAGIC: [u8; 2] = [0x48, 0x53];
pub const VERSION: u8 = 1;
pub const MAX_DATAGRAM: usize = 512;
const HEADER_LEN: usize = 4;

pub const TYPE_SENSOR: u8 = 1;
pub const TYPE_CLOCK_PING: u8 = 2;
pub const TYPE_CLOCK_PONG: u8 = 3;
pub const TYPE_HELLO: u8 = 4;
pub const TYPE_BYE: u8 = 5;

pub const SENSOR_PAYLOAD_LEN: usize = 31;
const PING_PAYLOAD_LEN: usize = 12;
const PONG_PAYLOAD_LEN: usize = 28;
const HELLO_PAYLOAD_LEN: usize = 6;

/// One sensor reading from one party.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct SensorSample {
    pub seq: u32,
    /// Sender-monotonic clock.
    pub t_send_us: u64,
    pub thumb_cdeg: i16,
    pub middle_cdeg: i16,
    /// 0..=1000
    pub grip_milli: u16,
    pub wrist_mm: [i32; 3],
    /// Sender's contact phase (0 idle, 1 clasped, 2 released).
    pub phase: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WireMessage {
    Sensor(SensorSample),
    ClockPing { nonce: u32, t1: u64 },
    ClockPong { nonce: u32, t1: u64, t2: u64, t3: u64 },
    Hello { peer_id: u32, tick_hz: u16 },
    Bye,
}

impl WireMessage {
    pub fn type_byte(&self) -> u8 {
        match self {
            WireMessage::Sensor(_) => TYPE_SENSOR,
            WireMessage::ClockPing { .. } => TYPE_CLOCK_PING,
            WireMessage::ClockPong { .. } => TYPE_CLOCK_PONG,
            WireMessage::Hello { .. } => TYPE_HELLO,
            WireMessage::Bye => TYPE_BYE,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecodeError {
    #[error("empty datagram")]
    Empty,
    #[error("datagram of {0} bytes exceeds the 512 byte limit")]
    Oversize(usize),
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported version {0}")]
    BadVersion(u8),
    #[error("unknown message type {0}")]
    UnknownType(u8),
    #[error("short payload: need {need} bytes, got {got}")]
    ShortPayload { need: usize, got: usize },
    #[error("{0} trailing bytes after payload")]
    TrailingBytes(usize),
    #[error("invalid field: {0}")]
    InvalidField(&'static str),
}

impl DecodeError {
    /// Stable category name for counters and logs.
    pub fn category(&self) -> &'static str {
        match self {
            DecodeError::Empty => "empty",
            DecodeError::Oversize(_) => "oversize",
            DecodeError::BadMagic => "bad_magic",
            DecodeError::BadVersion(_) => "bad_version",
            DecodeError::UnknownType(_) => "unknown_type",
            DecodeError::ShortPayload { .. } => "short_payload",
            DecodeError::TrailingBytes(_) => "trailing_bytes",
            DecodeError::InvalidField(_) => "invalid_field",
        }
    }
}

pub fn encode_message(msg: &WireMessage) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + SENSOR_PAYLOAD_LEN);
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(msg.type_byte());
    match *msg {
        WireMessage::Sensor(s) => {
            out.extend_from_slice(&s.seq.to_le_bytes());
            out.extend_from_slice(&s.t_send_us.to_le_bytes());
            out.extend_from_slice(&s.thumb_cdeg.to_le_bytes());
            out.extend_from_slice(&s.middle_cdeg.to_le_bytes());
            out.extend_from_slice(&s.grip_milli.to_le_bytes());
            for axis in s.wrist_mm {
                out.extend_from_slice(&axis.to_le_bytes());
            }
            out.push(s.phase);
        }
        WireMessage::ClockPing { nonce, t1 } => {
            out.extend_from_slice(&nonce.to_le_bytes());
            out.extend_from_slice(&t1.to_le_bytes());
        }
        WireMessage::ClockPong { nonce, t1, t2, t3 } => {
            out.extend_from_slice(&nonce.to_le_bytes());
            out.extend_from_slice(&t1.to_le_bytes());
            out.extend_from_slice(&t2.to_le_bytes());
            out.extend_from_slice(&t3.to_le_bytes());
        }
        WireMessage::Hello { peer_id, tick_hz } => {
            out.extend_from_slice(&peer_id.to_le_bytes());
            out.extend_from_slice(&tick_hz.to_le_bytes());
        }
        WireMessage::Bye => {}
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take<const N: usize>(&mut self) -> [u8; N] {
        let mut a = [0u8; N];
        a.copy_from_slice(&self.buf[self.pos..self.pos + N]);
        self.pos += N;
        a
    }
    fn u8(&mut self) -> u8 {
        self.take::<1>()[0]
    }
    fn u16(&mut self) -> u16 {
        u16::from_le_bytes(self.take())
    }
    fn i16(&mut self) -> i16 {
        i16::from_le_bytes(self.take())
    }
    fn u32(&mut self) -> u32 {
        u32::from_le_bytes(self.take())
    }
    fn i32(&mut self) -> i32 {
        i32::from_le_bytes(self.take())
    }
    fn u64(&mut self) -> u64 {
        u64::from_le_bytes(self.take())
    }
}

pub fn decode_message(bytes: &[u8]) -> Result<WireMessage, DecodeError> {
    if bytes.is_empty() {
        return Err(DecodeError::Empty);
    }
    if bytes.len() > MAX_DATAGRAM {
        return Err(DecodeError::Oversize(bytes.len()));
    }
    if bytes.len() < 2 || bytes[..2] != MAGIC {
        return Err(DecodeError::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(DecodeError::ShortPayload {
            need: HEADER_LEN,
            got: bytes.len(),
        });
    }
    if bytes[2] != VERSION {
        return Err(DecodeError::BadVersion(bytes[2]));
    }
    let ty = bytes[3];
    let payload = &bytes[HEADER_LEN..];
    let need = match ty {
        TYPE_SENSOR => SENSOR_PAYLOAD_LEN,
        TYPE_CLOCK_PING => PING_PAYLOAD_LEN,
        TYPE_CLOCK_PONG => PONG_PAYLOAD_LEN,
        TYPE_HELLO => HELLO_PAYLOAD_LEN,
        TYPE_BYE => 0,
        other => return Err(DecodeError::UnknownType(other)),
    };
    if payload.len() < need {
        return Err(DecodeError::ShortPayload {
            need,
            got: payload.len(),
        });
    }
    if payload.len() > need {
        return Err(DecodeError::TrailingBytes(payload.len() - need));
    }
    let mut r = Reader {
        buf: payload,
        pos: 0,
    };
    let msg = match ty {
        TYPE_SENSOR => {
            let s = SensorSample {
                seq: r.u32(),
                t_send_us: r.u64(),
                thumb_cdeg: r.i16(),
                middle_cdeg: r.i16(),
                grip_milli: r.u16(),
                wrist_mm: [r.i32(), r.i32(), r.i32()],
                phase: r.u8(),
            };
            if s.grip_milli > 1000 {
                return Err(DecodeError::InvalidField("grip_milli above 1000"));
            }
            if s.phase > 2 {
                return Err(DecodeError::InvalidField("phase out of range"));
            }
            WireMessage::Sensor(s)
        }
        TYPE_CLOCK_PING => WireMessage::ClockPing {
            nonce: r.u32(),
            t1: r.u64(),
        },
        TYPE_CLOCK_PONG => WireMessage::ClockPong {
            nonce: r.u32(),
            t1: r.u64(),
            t2: r.u64(),
            t3: r.u64(),
        },
        TYPE_HELLO => WireMessage::Hello {
            peer_id: r.u32(),
            tick_hz: r.u16(),
        },
        _ => WireMessage::Bye,
    };
    Ok(msg)
}
