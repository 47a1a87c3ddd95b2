//! CRC-16 used by the servo bus: polynomial 0x8005, initial value 0, no
//! reflection, no final XOR.

const POLY: u16 = 0x8005;

const TABLE: [u16; 256] = build_table();

const fn build_table() -> [u16; 256] {
    let mut table = [0u16; 256];
    let mut i = 0;
    while i < 256 {
        let mut crc = (i as u16) << 8;
        let mut bit = 0;
        while bit < 8 {
            crc = if crc & 0x8000 != 0 {
                (crc << 1) ^ POLY
            } else {
                crc << 1
            };
            bit += 1;
        }
        table[i] = crc;
        i += 1;
    }
    table
}

pub fn crc16(bytes: &[u8]) -> u16 {
    crc16_update(0, bytes)
}

/// Continues a running CRC over more bytes.
pub fn crc16_update(mut crc: u16, bytes: &[u8]) -> u16 {
    for &b in bytes {
        let idx = ((crc >> 8) as u8 ^ b) as usize;
        crc = (crc << 8) ^ TABLE[idx];
    }
    crc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_is_zero() {
        assert_eq!(crc16(&[]), 0x0000);
    }

    #[test]
    fn standard_check_value() {
        // CRC-16/UMTS (a.k.a. BUYPASS) check value
        assert_eq!(crc16(b"123456789"), 0xFEE8);
    }

    #[test]
    fn incremental_matches_one_shot() {
        let data = b"\xFF\xFF\xFD\x00\x01\x07\x00\x03\x74\x00\x00\x08\x00\x00";
        let (a, b) = data.split_at(5);
        assert_eq!(crc16_update(crc16(a), b), crc16(data));
    }
}
