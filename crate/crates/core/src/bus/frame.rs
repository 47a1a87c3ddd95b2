//! Servo bus packet framing.
//!
//! ```text
//! FF FF FD 00 | id | len_lo len_hi | instruction | params (stuffed) | crc_lo crc_hi
//! ```
//!
//! `len` counts the instruction byte, the stuffed parameter bytes and the two
//! CRC bytes. The CRC covers every byte before the CRC field. Inside the
//! parameters any `FF FF FD` run is followed by an extra `FD` so the header
//! pattern never appears in the body.

use super::crc::crc16;
use super::BusError;

pub const HEADER: [u8; 4] = [0xFF, 0xFF, 0xFD, 0x00];
pub const MAX_MOTOR_ID: u8 = 252;
pub const BROADCAST_ID: u8 = 0xFE;

pub const INST_PING: u8 = 0x01;
pub const INST_READ: u8 = 0x02;
pub const INST_WRITE: u8 = 0x03;

/// Goal Position register of the XC330 control table (4 bytes, signed).
pub const ADDR_GOAL_POSITION: u16 = 116;

/// id + length + instruction + crc around the header.
const MIN_FRAME_LEN: usize = HEADER.len() + 1 + 2 + 1 + 2;

/// An encoded frame. Only constructed by the encoder or a successful
/// [`BusFrame::from_bytes`] length check; CRC is verified on decode.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BusFrame(Vec<u8>);

impl BusFrame {
    /// Wraps raw bytes without validating them.
    pub fn from_raw(bytes: Vec<u8>) -> Self {
        BusFrame(bytes)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn crc_ok(&self) -> bool {
        let b = &self.0;
        if b.len() < MIN_FRAME_LEN {
            return false;
        }
        let n = b.len();
        crc16(&b[..n - 2]) == u16::from_le_bytes([b[n - 2], b[n - 1]])
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Packet {
    pub id: u8,
    pub instruction: u8,
    pub params: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GoalWrite {
    pub id: u8,
    pub goal: i32,
}

pub fn stuff(params: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(params.len() + params.len() / 3 + 1);
    for (i, &b) in params.iter().enumerate() {
        out.push(b);
        if i >= 2 && params[i - 2] == 0xFF && params[i - 1] == 0xFF && b == 0xFD {
            out.push(0xFD);
        }
    }
    out
}

/// Inverse of [`stuff`]. Rejects input that `stuff` could not have produced.
pub fn unstuff(stuffed: &[u8]) -> Result<Vec<u8>, BusError> {
    let mut out: Vec<u8> = Vec::with_capacity(stuffed.len());
    let mut iter = stuffed.iter().copied();
    while let Some(b) = iter.next() {
        out.push(b);
        let n = out.len();
        if n >= 3 && out[n - 3] == 0xFF && out[n - 2] == 0xFF && out[n - 1] == 0xFD {
            match iter.next() {
                Some(0xFD) => {}
                _ => return Err(BusError::Malformed("missing stuffing byte")),
            }
        }
    }
    Ok(out)
}

pub fn encode_packet(id: u8, instruction: u8, params: &[u8]) -> Result<BusFrame, BusError> {
    if id > MAX_MOTOR_ID && id != BROADCAST_ID {
        return Err(BusError::InvalidId(id));
    }
    let body = stuff(params);
    let len = body.len() + 3;
    let len16 = u16::try_from(len).map_err(|_| BusError::Malformed("packet too long"))?;
    let mut bytes = Vec::with_capacity(HEADER.len() + 3 + len);
    bytes.extend_from_slice(&HEADER);
    bytes.push(id);
    bytes.extend_from_slice(&len16.to_le_bytes());
    bytes.push(instruction);
    bytes.extend_from_slice(&body);
    let crc = crc16(&bytes);
    bytes.extend_from_slice(&crc.to_le_bytes());
    Ok(BusFrame(bytes))
}

pub fn decode_packet(frame: &[u8]) -> Result<Packet, BusError> {
    if frame.len() < MIN_FRAME_LEN {
        return Err(BusError::Malformed("frame shorter than minimum"));
    }
    if frame[..4] != HEADER {
        return Err(BusError::Malformed("bad header"));
    }
    let id = frame[4];
    let len = u16::from_le_bytes([frame[5], frame[6]]) as usize;
    if len < 3 || frame.len() != 7 + len {
        return Err(BusError::Malformed("length field does not match frame size"));
    }
    let n = frame.len();
    let expected = crc16(&frame[..n - 2]);
    let got = u16::from_le_bytes([frame[n - 2], frame[n - 1]]);
    if expected != got {
        return Err(BusError::BadCrc { expected, got });
    }
    let params = unstuff(&frame[8..n - 2])?;
    Ok(Packet {
        id,
        instruction: frame[7],
        params,
    })
}

/// Write of the 4-byte goal position register.
pub fn encode_goal_write(id: u8, goal: i32) -> Result<BusFrame, BusError> {
    if id > MAX_MOTOR_ID {
        return Err(BusError::InvalidId(id));
    }
    let mut params = Vec::with_capacity(6);
    params.extend_from_slice(&ADDR_GOAL_POSITION.to_le_bytes());
    params.extend_from_slice(&goal.to_le_bytes());
    encode_packet(id, INST_WRITE, &params)
}

pub fn decode_goal_write(frame: &BusFrame) -> Result<GoalWrite, BusError> {
    let p = decode_packet(frame.as_bytes())?;
    if p.instruction != INST_WRITE {
        return Err(BusError::Unsupported("instruction is not WRITE"));
    }
    if p.params.len() != 6 {
        return Err(BusError::Malformed("goal write needs address + 4 data bytes"));
    }
    let addr = u16::from_le_bytes([p.params[0], p.params[1]]);
    if addr != ADDR_GOAL_POSITION {
        return Err(BusError::Unsupported("write to a register other than goal position"));
    }
    let goal = i32::from_le_bytes([p.params[2], p.params[3], p.params[4], p.params[5]]);
    Ok(GoalWrite { id: p.id, goal })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ping_frame_matches_published_bytes() {
        let f = encode_packet(1, INST_PING, &[]).unwrap();
        assert_eq!(
            f.as_bytes(),
            &[0xFF, 0xFF, 0xFD, 0x00, 0x01, 0x03, 0x00, 0x01, 0x19, 0x4E]
        );
    }

    #[test]
    fn goal_write_round_trip() {
        let f = encode_goal_write(3, 2560).unwrap();
        assert_eq!(f.len(), 16);
        assert_eq!(decode_goal_write(&f).unwrap(), GoalWrite { id: 3, goal: 2560 });
    }

    #[test]
    fn stuffing_adds_one_byte() {
        // little-endian FF FF FD 00
        let goal = 0x00FD_FFFF;
        let f = encode_goal_write(1, goal).unwrap();
        let plain = encode_goal_write(1, 0x0000_0001).unwrap();
        assert_eq!(f.len(), plain.len() + 1);
        assert_eq!(&f.as_bytes()[10..15], &[0xFF, 0xFF, 0xFD, 0xFD, 0x00]);
        assert_eq!(decode_goal_write(&f).unwrap().goal, goal);
    }

    #[test]
    fn pattern_spanning_address_and_goal() {
        // address bytes 74 00 then goal FF FF FD FF: pattern inside, plus tail FF
        let goal = i32::from_le_bytes([0xFF, 0xFF, 0xFD, 0xFF]);
        let f = encode_goal_write(7, goal).unwrap();
        assert_eq!(decode_goal_write(&f).unwrap().goal, goal);
    }

    #[test]
    fn distinct_goals_distinct_frames() {
        assert_ne!(
            encode_goal_write(1, 100).unwrap(),
            encode_goal_write(1, 101).unwrap()
        );
    }

    #[test]
    fn invalid_ids() {
        assert!(matches!(
            encode_goal_write(253, 0),
            Err(BusError::InvalidId(253))
        ));
        assert!(matches!(
            encode_goal_write(BROADCAST_ID, 0),
            Err(BusError::InvalidId(_))
        ));
        assert!(encode_goal_write(0, 0).is_ok());
        assert!(encode_goal_write(252, 0).is_ok());
    }

    #[test]
    fn corrupted_crc_rejected() {
        let mut bytes = encode_goal_write(2, 1234).unwrap().into_bytes();
        let n = bytes.len();
        bytes[n - 1] ^= 0x01;
        assert!(matches!(
            decode_packet(&bytes),
            Err(BusError::BadCrc { .. })
        ));
        assert!(!BusFrame::from_raw(bytes).crc_ok());
    }

    #[test]
    fn truncated_and_garbage_rejected() {
        let bytes = encode_goal_write(2, 1234).unwrap().into_bytes();
        assert!(decode_packet(&bytes[..bytes.len() - 1]).is_err());
        assert!(decode_packet(&[]).is_err());
        assert!(decode_packet(&[0u8; 12]).is_err());
    }

    #[test]
    fn unstuff_rejects_missing_stuff_byte() {
        assert!(unstuff(&[0xFF, 0xFF, 0xFD, 0x00]).is_err());
        assert!(unstuff(&[0xFF, 0xFF, 0xFD]).is_err());
        assert_eq!(unstuff(&[0xFF, 0xFF, 0xFD, 0xFD]).unwrap(), vec![0xFF, 0xFF, 0xFD]);
    }

    #[test]
    fn overlapping_patterns() {
        let p = [0xFF, 0xFF, 0xFD, 0xFD, 0xFF, 0xFF, 0xFD, 0xFF, 0xFF, 0xFD];
        let s = stuff(&p);
        assert_eq!(s.len(), p.len() + 3);
        assert_eq!(unstuff(&s).unwrap(), p);
    }
}
