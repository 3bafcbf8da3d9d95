//! Access-layer message codec. Messages are real byte strings (so
//! segmentation and end-to-end checks operate on actual payloads) with a
//! one-byte opcode followed by little-endian fields, zero-padded to the
//! requested on-air size.

use crate::types::Address;

const OP_COMMAND: u8 = 1;
const OP_STATUS: u8 = 2;
const OP_BEACON: u8 = 3;
const OP_CANDIDACY: u8 = 4;
const OP_RECRUIT: u8 = 5;
const OP_VOLUNTEER: u8 = 6;
const OP_CONFIRM: u8 = 7;
const OP_DATA: u8 = 8;

/// Most neighbor entries one beacon can piggyback (keeps beacons within one
/// legacy advertisement).
pub const BEACON_MAX_NEIGHBORS: usize = 4;

/// Decoded application message.
#[derive(Debug, Clone, PartialEq)]
pub enum AccessMsg {
    /// Acked-exchange command.
    Command { exchange: u32 },
    /// Acked-exchange status (the acknowledgement).
    Status { exchange: u32 },
    /// Coverage beacon: sender id plus piggybacked (neighbor id, rssi dBm)
    /// entries the sender heard.
    Beacon {
        sender: u16,
        heard: Vec<(u16, i8)>,
    },
    /// Election candidacy.
    Candidacy { node: u16, fitness: f32 },
    /// Leader asks for `k` volunteers to join `formation`.
    Recruit { k: u8, formation: Address },
    Volunteer { node: u16 },
    /// Leader confirms one volunteer into `formation`.
    Confirm { node: u16, formation: Address },
    /// Plain payload identified by a tag.
    Data { tag: u32 },
}

/// Encode `msg`, zero-padding to `pad_to` bytes. Panics if the message does
/// not fit, which is a scenario configuration fault.
pub fn encode(msg: &AccessMsg, pad_to: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(pad_to);
    match msg {
        AccessMsg::Command { exchange } => {
            out.push(OP_COMMAND);
            out.extend_from_slice(&exchange.to_le_bytes());
        }
        AccessMsg::Status { exchange } => {
            out.push(OP_STATUS);
            out.extend_from_slice(&exchange.to_le_bytes());
        }
        AccessMsg::Beacon { sender, heard } => {
            assert!(heard.len() <= BEACON_MAX_NEIGHBORS);
            out.push(OP_BEACON);
            out.extend_from_slice(&sender.to_le_bytes());
            out.push(heard.len() as u8);
            for (id, rssi) in heard {
                out.extend_from_slice(&id.to_le_bytes());
                out.push(*rssi as u8);
            }
        }
        AccessMsg::Candidacy { node, fitness } => {
            out.push(OP_CANDIDACY);
            out.extend_from_slice(&node.to_le_bytes());
            out.extend_from_slice(&fitness.to_le_bytes());
        }
        AccessMsg::Recruit { k, formation } => {
            out.push(OP_RECRUIT);
            out.push(*k);
            out.extend_from_slice(&formation.0.to_le_bytes());
        }
        AccessMsg::Volunteer { node } => {
            out.push(OP_VOLUNTEER);
            out.extend_from_slice(&node.to_le_bytes());
        }
        AccessMsg::Confirm { node, formation } => {
            out.push(OP_CONFIRM);
            out.extend_from_slice(&node.to_le_bytes());
            out.extend_from_slice(&formation.0.to_le_bytes());
        }
        AccessMsg::Data { tag } => {
            out.push(OP_DATA);
            out.extend_from_slice(&tag.to_le_bytes());
        }
    }
    assert!(
        out.len() <= pad_to,
        "message of {} bytes does not fit in {pad_to}",
        out.len()
    );
    out.resize(pad_to, 0);
    out
}

/// Decode the access payload; None for malformed bytes.
pub fn decode(bytes: &[u8]) -> Option<AccessMsg> {
    let op = *bytes.first()?;
    let rest = &bytes[1..];
    let u32_at = |off: usize| -> Option<u32> {
        Some(u32::from_le_bytes(rest.get(off..off + 4)?.try_into().ok()?))
    };
    let u16_at = |off: usize| -> Option<u16> {
        Some(u16::from_le_bytes(rest.get(off..off + 2)?.try_into().ok()?))
    };
    match op {
        OP_COMMAND => Some(AccessMsg::Command { exchange: u32_at(0)? }),
        OP_STATUS => Some(AccessMsg::Status { exchange: u32_at(0)? }),
        OP_BEACON => {
            let sender = u16_at(0)?;
            let n = usize::from(*rest.get(2)?);
            if n > BEACON_MAX_NEIGHBORS {
                return None;
            }
            let mut heard = Vec::with_capacity(n);
            for i in 0..n {
                let off = 3 + i * 3;
                heard.push((u16_at(off)?, *rest.get(off + 2)? as i8));
            }
            Some(AccessMsg::Beacon { sender, heard })
        }
        OP_CANDIDACY => {
            let node = u16_at(0)?;
            let fitness = f32::from_le_bytes(rest.get(2..6)?.try_into().ok()?);
            Some(AccessMsg::Candidacy { node, fitness })
        }
        OP_RECRUIT => Some(AccessMsg::Recruit {
            k: *rest.first()?,
            formation: Address(u16_at(1)?),
        }),
        OP_VOLUNTEER => Some(AccessMsg::Volunteer { node: u16_at(0)? }),
        OP_CONFIRM => Some(AccessMsg::Confirm {
            node: u16_at(0)?,
            formation: Address(u16_at(2)?),
        }),
        OP_DATA => Some(AccessMsg::Data { tag: u32_at(0)? }),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_status_roundtrip_at_11_bytes() {
        for msg in [
            AccessMsg::Command { exchange: 0xDEAD_BEEF },
            AccessMsg::Status { exchange: 42 },
        ] {
            let bytes = encode(&msg, 11);
            assert_eq!(bytes.len(), 11);
            assert_eq!(decode(&bytes), Some(msg));
        }
    }

    #[test]
    fn beacon_roundtrip_with_piggyback() {
        let msg = AccessMsg::Beacon {
            sender: 3,
            heard: vec![(1, -62), (7, -85)],
        };
        let bytes = encode(&msg, 15);
        assert_eq!(decode(&bytes), Some(msg));
    }

    #[test]
    fn control_messages_roundtrip() {
        for msg in [
            AccessMsg::Candidacy { node: 5, fitness: 7.25 },
            AccessMsg::Recruit { k: 2, formation: Address(0xC010) },
            AccessMsg::Volunteer { node: 9 },
            AccessMsg::Confirm { node: 9, formation: Address(0xC010) },
            AccessMsg::Data { tag: 1234 },
        ] {
            let bytes = encode(&msg, 11);
            assert_eq!(decode(&bytes), Some(msg.clone()), "{msg:?}");
        }
    }

    #[test]
    fn padding_grows_to_requested_size() {
        let bytes = encode(&AccessMsg::Data { tag: 1 }, 50);
        assert_eq!(bytes.len(), 50);
        assert!(bytes[5..].iter().all(|&b| b == 0));
    }

    #[test]
    fn garbage_decodes_to_none() {
        assert_eq!(decode(&[]), None);
        assert_eq!(decode(&[0xFF, 1, 2, 3]), None);
        assert_eq!(decode(&[OP_COMMAND]), None); // truncated
    }
}
