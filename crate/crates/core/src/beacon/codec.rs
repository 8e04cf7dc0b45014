//! 27-octet position beacon carried in a Wi-Fi SSID (and reused as the LoRa
//! and ADS-B payload).
//!
//! Layout, big-endian:
//!
//! | offset | len | field                                   |
//! |-------:|----:|-----------------------------------------|
//! | 0      | 2   | magic `"UB"`                            |
//! | 2      | 1   | version (1)                             |
//! | 3      | 4   | drone id                                |
//! | 7      | 4   | east, signed, 0.1 m                     |
//! | 11     | 4   | north, signed, 0.1 m                    |
//! | 15     | 3   | up, signed 24-bit, 0.1 m                |
//! | 18     | 2   | sequence                                |
//! | 20     | 4   | timestamp, 0.01 s, wrapping             |
//! | 24     | 2   | CRC-16/CCITT-FALSE over octets 0..24    |
//! | 26     | 1   | reserved (0)                            |

use crc::{Crc, CRC_16_IBM_3740};
use thiserror::Error;

use crate::error::Error as CoreError;
use crate::geometry::EnuPosition;

pub const FRAME_LEN: usize = 27;
pub const SSID_MAX_LEN: usize = 32;
pub const MAGIC: [u8; 2] = *b"UB";
pub const VERSION: u8 = 1;
/// Largest encodable |coordinate|, meters.
pub const COORDINATE_LIMIT_M: f64 = 200_000.0;

const POSITION_SCALE: f64 = 10.0;
const TIME_SCALE: f64 = 100.0;
const CHECKSUM_OFFSET: usize = 24;

// CRC-16/IBM-3740 is the catalogue name of CRC-16/CCITT-FALSE.
const CRC16: Crc<u16> = Crc::<u16>::new(&CRC_16_IBM_3740);

/// Position report broadcast by a drone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionBeacon {
    pub drone_id: u32,
    pub position: EnuPosition,
    pub sequence: u16,
    /// Sender clock, seconds.
    pub timestamp: f64,
}

impl PositionBeacon {
    /// The beacon as it reads after one encode/decode pass.
    pub fn quantized(&self) -> PositionBeacon {
        let q = |x: f64| (x * POSITION_SCALE).round() / POSITION_SCALE;
        let ticks = (self.timestamp * TIME_SCALE).round() as i64;
        PositionBeacon {
            drone_id: self.drone_id,
            position: EnuPosition::new(q(self.position.east), q(self.position.north), q(self.position.up)),
            sequence: self.sequence,
            timestamp: ticks.rem_euclid(1 << 32) as f64 / TIME_SCALE,
        }
    }
}

/// SSID payload octets.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SsidFrame(Vec<u8>);

impl SsidFrame {
    pub fn from_bytes(bytes: impl Into<Vec<u8>>) -> Self {
        Self(bytes.into())
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Reasons a received SSID is not a position beacon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("frame is {0} octets, expected {FRAME_LEN}")]
    BadLength(usize),
    #[error("checksum mismatch: computed {computed:#06x}, frame carries {carried:#06x}")]
    Checksum { computed: u16, carried: u16 },
    #[error("magic bytes do not match")]
    BadMagic,
    #[error("unsupported version {0}")]
    UnsupportedVersion(u8),
}

fn fixed_point(axis: &'static str, value: f64) -> Result<i32, CoreError> {
    if !value.is_finite() || value.abs() > COORDINATE_LIMIT_M {
        return Err(CoreError::CoordinateOutOfRange { axis, value });
    }
    Ok((value * POSITION_SCALE).round() as i32)
}

pub fn encode_ssid(beacon: &PositionBeacon) -> Result<SsidFrame, CoreError> {
    let east = fixed_point("east", beacon.position.east)?;
    let north = fixed_point("north", beacon.position.north)?;
    let up = fixed_point("up", beacon.position.up)?;
    if !beacon.timestamp.is_finite() {
        return Err(CoreError::InvalidParameter("beacon timestamp must be finite".into()));
    }
    let ticks = ((beacon.timestamp * TIME_SCALE).round() as i64).rem_euclid(1 << 32) as u32;

    let mut out = Vec::with_capacity(FRAME_LEN);
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&beacon.drone_id.to_be_bytes());
    out.extend_from_slice(&east.to_be_bytes());
    out.extend_from_slice(&north.to_be_bytes());
    out.extend_from_slice(&up.to_be_bytes()[1..]);
    out.extend_from_slice(&beacon.sequence.to_be_bytes());
    out.extend_from_slice(&ticks.to_be_bytes());
    let crc = CRC16.checksum(&out);
    out.extend_from_slice(&crc.to_be_bytes());
    out.push(0);
    debug_assert_eq!(out.len(), FRAME_LEN);
    Ok(SsidFrame(out))
}

pub fn decode_ssid(frame: &SsidFrame) -> Result<PositionBeacon, DecodeError> {
    let b = frame.as_bytes();
    if b.len() != FRAME_LEN {
        return Err(DecodeError::BadLength(b.len()));
    }
    let computed = CRC16.checksum(&b[..CHECKSUM_OFFSET]);
    let carried = u16::from_be_bytes([b[24], b[25]]);
    if computed != carried {
        return Err(DecodeError::Checksum { computed, carried });
    }
    if b[0..2] != MAGIC {
        return Err(DecodeError::BadMagic);
    }
    if b[2] != VERSION {
        return Err(DecodeError::UnsupportedVersion(b[2]));
    }
    let i32_at = |o: usize| i32::from_be_bytes([b[o], b[o + 1], b[o + 2], b[o + 3]]);
    // Sign-extend the 24-bit altitude.
    let up = i32::from_be_bytes([b[15], b[16], b[17], 0]) >> 8;
    Ok(PositionBeacon {
        drone_id: u32::from_be_bytes([b[3], b[4], b[5], b[6]]),
        position: EnuPosition::new(
            i32_at(7) as f64 / POSITION_SCALE,
            i32_at(11) as f64 / POSITION_SCALE,
            up as f64 / POSITION_SCALE,
        ),
        sequence: u16::from_be_bytes([b[18], b[19]]),
        timestamp: u32::from_be_bytes([b[20], b[21], b[22], b[23]]) as f64 / TIME_SCALE,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn beacon(id: u32, e: f64, n: f64, u: f64, seq: u16, t: f64) -> PositionBeacon {
        PositionBeacon { drone_id: id, position: EnuPosition::new(e, n, u), sequence: seq, timestamp: t }
    }

    #[test]
    fn crc_matches_catalogue_check_value() {
        assert_eq!(CRC16.checksum(b"123456789"), 0x29B1);
    }

    #[test]
    fn zero_beacon_golden_bytes() {
        let frame = encode_ssid(&beacon(0, 0.0, 0.0, 0.0, 0, 0.0)).unwrap();
        // Checksum computed independently over "UB" 0x01 followed by 21 zero octets.
        let expected: [u8; 27] =
            [0x55, 0x42, 0x01, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0x33, 0xAD, 0];
        assert_eq!(frame.as_bytes(), &expected);
        assert!(frame.len() <= SSID_MAX_LEN);
    }

    #[test]
    fn populated_beacon_golden_bytes() {
        let frame = encode_ssid(&beacon(0x0102_0304, 1234.5, -678.9, 120.3, 0xBEEF, 3600.25)).unwrap();
        let expected: [u8; 27] = [
            0x55, 0x42, 0x01, // magic, version
            0x01, 0x02, 0x03, 0x04, // id
            0x00, 0x00, 0x30, 0x39, // east 12345
            0xFF, 0xFF, 0xE5, 0x7B, // north -6789
            0x00, 0x04, 0xB3, // up 1203
            0xBE, 0xEF, // sequence
            0x00, 0x05, 0x7E, 0x59, // 360025 cs
            0xFE, 0x2F, // crc
            0x00,
        ];
        assert_eq!(frame.as_bytes(), &expected);
    }

    #[test]
    fn negative_altitude_sign_extends() {
        let b = beacon(9, 0.0, 0.0, -12.3, 1, 1.0);
        let back = decode_ssid(&encode_ssid(&b).unwrap()).unwrap();
        assert!((back.position.up + 12.3).abs() < 1e-9);
    }

    #[test]
    fn out_of_range_coordinate_rejected() {
        assert!(matches!(
            encode_ssid(&beacon(1, 200_000.1, 0.0, 0.0, 0, 0.0)),
            Err(CoreError::CoordinateOutOfRange { axis: "east", .. })
        ));
        assert!(encode_ssid(&beacon(1, 0.0, -250_000.0, 0.0, 0, 0.0)).is_err());
        assert!(encode_ssid(&beacon(1, 0.0, 0.0, f64::NAN, 0, 0.0)).is_err());
        assert!(encode_ssid(&beacon(1, 200_000.0, -200_000.0, 200_000.0, 0, 0.0)).is_ok());
    }

    #[test]
    fn length_and_checksum_errors_are_distinct() {
        let good = encode_ssid(&beacon(5, 10.0, 20.0, 30.0, 7, 8.0)).unwrap();
        let mut long = good.as_bytes().to_vec();
        long.extend_from_slice(&[0; 4]);
        assert_eq!(decode_ssid(&SsidFrame::from_bytes(long)), Err(DecodeError::BadLength(31)));
        let mut flipped = good.as_bytes().to_vec();
        flipped[8] ^= 0x10;
        assert!(matches!(decode_ssid(&SsidFrame::from_bytes(flipped)), Err(DecodeError::Checksum { .. })));
    }

    #[test]
    fn bad_magic_and_version_detected_after_checksum() {
        let mut bytes = encode_ssid(&beacon(5, 1.0, 2.0, 3.0, 7, 8.0)).unwrap().as_bytes().to_vec();
        bytes[0] = b'X';
        let crc = CRC16.checksum(&bytes[..24]).to_be_bytes();
        bytes[24..26].copy_from_slice(&crc);
        assert_eq!(decode_ssid(&SsidFrame::from_bytes(bytes.clone())), Err(DecodeError::BadMagic));
        bytes[0] = b'U';
        bytes[2] = 9;
        let crc = CRC16.checksum(&bytes[..24]).to_be_bytes();
        bytes[24..26].copy_from_slice(&crc);
        assert_eq!(decode_ssid(&SsidFrame::from_bytes(bytes)), Err(DecodeError::UnsupportedVersion(9)));
    }

    #[test]
    fn timestamp_wraps() {
        let t = (1u64 << 32) as f64 / 100.0 + 5.0;
        let back = decode_ssid(&encode_ssid(&beacon(1, 0.0, 0.0, 0.0, 0, t)).unwrap()).unwrap();
        assert!((back.timestamp - 5.0).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn roundtrip_within_quantization(
            id in any::<u32>(),
            e in -200_000.0..200_000.0f64,
            n in -200_000.0..200_000.0f64,
            u in -200_000.0..200_000.0f64,
            seq in any::<u16>(),
            t in 0.0..4.0e7f64,
        ) {
            let b = beacon(id, e, n, u, seq, t);
            let back = decode_ssid(&encode_ssid(&b).unwrap()).unwrap();
            prop_assert_eq!(back.drone_id, id);
            prop_assert_eq!(back.sequence, seq);
            prop_assert!((back.position.east - e).abs() <= 0.05 + 1e-9);
            prop_assert!((back.position.north - n).abs() <= 0.05 + 1e-9);
            prop_assert!((back.position.up - u).abs() <= 0.05 + 1e-9);
            prop_assert!((back.timestamp - t).abs() <= 0.005 + 1e-6);
            prop_assert_eq!(back, b.quantized());
            // Idempotent on the quantized domain.
            let again = decode_ssid(&encode_ssid(&back).unwrap()).unwrap();
            prop_assert_eq!(again, back);
        }
    }
}
