//! Binary frame encoding of protocol messages.
//!
//! Frame layout:
//!
//! ```text
//! magic "FLRP" (4) | version 0x01 (1) | type tag (1) |
//! epoch u32 BE (4) | sender u16 BE (2) | payload length u32 BE (4) | payload
//! ```
//!
//! Parameter payloads (tags 1-3) are a count as u64 BE followed by that many
//! f32 values in little-endian order. Loss payloads (tags 4-5) are a single
//! f64 little-endian. EpochEnd and Shutdown carry an empty payload.

use super::Message;
use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"FLRP";
pub const VERSION: u8 = 0x01;
pub const HEADER_LEN: usize = 16;

/// Upper bound on accepted payload sizes; keeps corrupted or hostile length
/// fields from forcing huge allocations.
pub const MAX_PAYLOAD: u32 = 256 * 1024 * 1024;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WireError {
    #[error("truncated frame at offset {offset}: {needed} more bytes needed")]
    Truncated { offset: usize, needed: usize },
    #[error("bad magic at offset 0")]
    BadMagic,
    #[error("unsupported protocol version {found} at offset 4")]
    UnsupportedVersion { found: u8 },
    #[error("unknown message type {tag} at offset 5")]
    UnknownType { tag: u8 },
    #[error("payload length {declared} at offset 10 exceeds the {max}-byte limit")]
    PayloadTooLarge { declared: u32, max: u32 },
    #[error("length mismatch at offset {offset}: {detail}")]
    LengthMismatch { offset: usize, detail: String },
}

/// Encodes a message as one frame.
pub fn encode_message(msg: &Message) -> Vec<u8> {
    let payload = match msg {
        Message::GlobalModel { params, .. }
        | Message::LocalModel { params, .. }
        | Message::EvalAssignment { params, .. } => {
            let mut payload = Vec::with_capacity(8 + 4 * params.len());
            payload.extend_from_slice(&(params.len() as u64).to_be_bytes());
            for v in params {
                payload.extend_from_slice(&v.to_le_bytes());
            }
            payload
        }
        Message::EvalLoss { loss, .. } | Message::ValSumLoss { loss, .. } => {
            loss.to_le_bytes().to_vec()
        }
        Message::EpochEnd { .. } | Message::Shutdown { .. } => Vec::new(),
    };

    let mut frame = Vec::with_capacity(HEADER_LEN + payload.len());
    frame.extend_from_slice(&MAGIC);
    frame.push(VERSION);
    frame.push(msg.tag());
    frame.extend_from_slice(&msg.epoch().to_be_bytes());
    frame.extend_from_slice(&msg.sender().to_be_bytes());
    frame.extend_from_slice(&(payload.len() as u32).to_be_bytes());
    frame.extend_from_slice(&payload);
    frame
}

/// Decodes exactly one frame. Trailing bytes, truncation, bad magic,
/// unsupported versions, unknown tags and inconsistent lengths are all
/// rejected with the offending offset.
pub fn decode_message(bytes: &[u8]) -> Result<Message, WireError> {
    if bytes.len() < HEADER_LEN {
        return Err(WireError::Truncated {
            offset: bytes.len(),
            needed: HEADER_LEN - bytes.len(),
        });
    }
    if bytes[0..4] != MAGIC {
        return Err(WireError::BadMagic);
    }
    if bytes[4] != VERSION {
        return Err(WireError::UnsupportedVersion { found: bytes[4] });
    }
    let tag = bytes[5];
    let epoch = u32::from_be_bytes(bytes[6..10].try_into().unwrap());
    let sender = u16::from_be_bytes(bytes[10..12].try_into().unwrap());
    let payload_len = u32::from_be_bytes(bytes[12..16].try_into().unwrap());
    if payload_len > MAX_PAYLOAD {
        return Err(WireError::PayloadTooLarge {
            declared: payload_len,
            max: MAX_PAYLOAD,
        });
    }
    let payload_len = payload_len as usize;
    let total = HEADER_LEN + payload_len;
    if bytes.len() < total {
        return Err(WireError::Truncated {
            offset: bytes.len(),
            needed: total - bytes.len(),
        });
    }
    if bytes.len() > total {
        return Err(WireError::LengthMismatch {
            offset: total,
            detail: format!("{} trailing bytes after the frame", bytes.len() - total),
        });
    }
    let payload = &bytes[HEADER_LEN..total];

    match tag {
        1..=3 => {
            if payload.len() < 8 {
                return Err(WireError::LengthMismatch {
                    offset: HEADER_LEN,
                    detail: format!(
                        "parameter payload needs an 8-byte count, got {} bytes",
                        payload.len()
                    ),
                });
            }
            let count = u64::from_be_bytes(payload[0..8].try_into().unwrap());
            let expected = count
                .checked_mul(4)
                .and_then(|b| b.checked_add(8))
                .ok_or(WireError::LengthMismatch {
                    offset: HEADER_LEN,
                    detail: format!("parameter count {count} overflows the payload length"),
                })?;
            if expected != payload.len() as u64 {
                return Err(WireError::LengthMismatch {
                    offset: HEADER_LEN,
                    detail: format!(
                        "count {count} implies {expected} payload bytes, frame declares {}",
                        payload.len()
                    ),
                });
            }
            let params: Vec<f32> = payload[8..]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            Ok(match tag {
                1 => Message::GlobalModel { epoch, sender, params },
                2 => Message::LocalModel { epoch, sender, params },
                _ => Message::EvalAssignment { epoch, sender, params },
            })
        }
        4 | 5 => {
            if payload.len() != 8 {
                return Err(WireError::LengthMismatch {
                    offset: HEADER_LEN,
                    detail: format!("loss payload must be 8 bytes, got {}", payload.len()),
                });
            }
            let loss = f64::from_le_bytes(payload.try_into().unwrap());
            Ok(if tag == 4 {
                Message::EvalLoss { epoch, sender, loss }
            } else {
                Message::ValSumLoss { epoch, sender, loss }
            })
        }
        6 | 7 => {
            if !payload.is_empty() {
                return Err(WireError::LengthMismatch {
                    offset: HEADER_LEN,
                    detail: format!("expected empty payload, got {} bytes", payload.len()),
                });
            }
            Ok(if tag == 6 {
                Message::EpochEnd { epoch, sender }
            } else {
                Message::Shutdown { epoch, sender }
            })
        }
        tag => Err(WireError::UnknownType { tag }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_frames_round_trip_bit_exactly() {
        let msg = Message::GlobalModel {
            epoch: 3,
            sender: 0,
            params: vec![1.0, -2.5, 0.0],
        };
        let frame = encode_message(&msg);
        assert_eq!(decode_message(&frame).unwrap(), msg);
    }

    #[test]
    fn loss_frames_round_trip() {
        let msg = Message::ValSumLoss {
            epoch: 9,
            sender: 4,
            loss: 1234.5678901234,
        };
        assert_eq!(decode_message(&encode_message(&msg)).unwrap(), msg);
    }

    #[test]
    fn epoch_end_has_empty_payload() {
        let msg = Message::EpochEnd { epoch: 7, sender: 0 };
        let frame = encode_message(&msg);
        assert_eq!(frame.len(), HEADER_LEN);
        assert_eq!(u32::from_be_bytes(frame[12..16].try_into().unwrap()), 0);
        assert_eq!(decode_message(&frame).unwrap(), msg);
    }

    #[test]
    fn corrupted_length_field_is_an_error_not_a_panic() {
        let msg = Message::LocalModel {
            epoch: 1,
            sender: 2,
            params: vec![0.5; 16],
        };
        let mut frame = encode_message(&msg);
        frame[12..16].copy_from_slice(&u32::MAX.to_be_bytes());
        assert!(matches!(
            decode_message(&frame),
            Err(WireError::PayloadTooLarge { .. })
        ));
        frame[12..16].copy_from_slice(&5u32.to_be_bytes());
        assert!(decode_message(&frame).is_err());
    }

    #[test]
    fn bad_magic_version_and_tag_are_rejected() {
        let msg = Message::EpochEnd { epoch: 0, sender: 0 };
        let good = encode_message(&msg);

        let mut bad = good.clone();
        bad[0] = b'X';
        assert_eq!(decode_message(&bad), Err(WireError::BadMagic));

        let mut bad = good.clone();
        bad[4] = 2;
        assert_eq!(
            decode_message(&bad),
            Err(WireError::UnsupportedVersion { found: 2 })
        );

        let mut bad = good;
        bad[5] = 99;
        assert_eq!(decode_message(&bad), Err(WireError::UnknownType { tag: 99 }));
    }

    #[test]
    fn truncated_frames_name_the_missing_bytes() {
        let msg = Message::EvalLoss { epoch: 1, sender: 1, loss: 2.0 };
        let frame = encode_message(&msg);
        for cut in [0, 4, HEADER_LEN - 1, frame.len() - 1] {
            assert!(matches!(
                decode_message(&frame[..cut]),
                Err(WireError::Truncated { .. })
            ));
        }
    }
}
