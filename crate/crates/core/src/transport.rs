//! Lower-transport functions: segmentation and reassembly with block
//! acknowledgements, plus the state kept by acknowledged exchanges.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::SimTime;
use crate::types::Address;

/// Segment payload size in bytes.
pub const SEG_SIZE: usize = 12;
/// Largest unsegmented transport payload in a legacy advertisement.
pub const UNSEG_MAX_LEGACY: usize = 15;
/// Largest unsegmented transport payload in an extended advertisement.
pub const UNSEG_MAX_EXT: usize = 255;
/// Hard cap on segments per message.
pub const MAX_SEGMENTS: usize = 32;
/// On-air overhead of a segment header (tag, index, count).
pub const SEG_HEADER_BYTES: u16 = 3;
/// On-air size of a block acknowledgement.
pub const BLOCK_ACK_WIRE_BYTES: u16 = 6;

/// Default delay before a receiver acks an incomplete block.
pub const BLOCK_ACK_TIMER_US: u64 = 150_000;
/// Default sender retry timer for unacked segments.
pub const SEG_RETRY_TIMER_US: u64 = 300_000;
/// Default retry budget for a segmented message.
pub const MAX_BLOCK_RETRIES: u8 = 4;
/// Receiver-side reassembly abandon timeout.
pub const REASSEMBLY_TIMEOUT_US: u64 = 10_000_000;

/// Transport-layer payload of one network PDU.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransportPdu {
    Unsegmented(Vec<u8>),
    Segment {
        /// Shared tag tying the segments of one upper payload together.
        seqauth: u64,
        index: u8,
        count: u8,
        chunk: Vec<u8>,
    },
    BlockAck {
        seqauth: u64,
        /// Bit i set = segment i received.
        bitmap: u32,
    },
}

impl TransportPdu {
    pub fn wire_bytes(&self) -> u16 {
        match self {
            TransportPdu::Unsegmented(data) => data.len() as u16,
            TransportPdu::Segment { chunk, .. } => SEG_HEADER_BYTES + chunk.len() as u16,
            TransportPdu::BlockAck { .. } => BLOCK_ACK_WIRE_BYTES,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TransportError {
    #[error("payload of {0} bytes exceeds the {MAX_SEGMENTS}-segment cap")]
    PayloadTooLarge(usize),
    #[error("payload must be at least one byte")]
    EmptyPayload,
}

/// Split `payload` into transport units. Payloads up to `max_unsegmented`
/// bytes travel as a single unsegmented unit; larger ones become
/// `ceil(len / 12)` segments sharing `seqauth`.
pub fn segment_payload(
    payload: &[u8],
    max_unsegmented: usize,
    seqauth: u64,
) -> Result<Vec<TransportPdu>, TransportError> {
    if payload.is_empty() {
        return Err(TransportError::EmptyPayload);
    }
    if payload.len() <= max_unsegmented {
        return Ok(vec![TransportPdu::Unsegmented(payload.to_vec())]);
    }
    let count = payload.len().div_ceil(SEG_SIZE);
    if count > MAX_SEGMENTS {
        return Err(TransportError::PayloadTooLarge(payload.len()));
    }
    Ok(payload
        .chunks(SEG_SIZE)
        .enumerate()
        .map(|(index, chunk)| TransportPdu::Segment {
            seqauth,
            index: index as u8,
            count: count as u8,
            chunk: chunk.to_vec(),
        })
        .collect())
}

/// What the receiver should do after taking in one segment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentIntake {
    /// Full payload, emitted exactly once per seqauth.
    pub completed: Option<Vec<u8>>,
    /// Send a block ack now (last-index segment seen or block complete).
    pub ack_now: bool,
    /// Arm a block-ack timer for this segment (newly stored, block still
    /// incomplete). One timer per stored segment bounds the ack traffic.
    pub arm_ack_timer: bool,
}

#[derive(Debug)]
struct ReassemblyBlock {
    chunks: Vec<Option<Vec<u8>>>,
    bitmap: u32,
    completed: bool,
    pub deadline: SimTime,
    last_ack_sent: Option<SimTime>,
}

impl ReassemblyBlock {
    fn missing(&self) -> bool {
        self.chunks.iter().any(Option::is_none)
    }
}

/// Per-node reassembly buffers keyed by `(src, seqauth)`.
#[derive(Debug, Default)]
pub struct Reassembler {
    blocks: BTreeMap<(Address, u64), ReassemblyBlock>,
    pub timeouts: u64,
}

impl Reassembler {
    pub fn new() -> Self {
        Self::default()
    }

    /// Buffer one segment. Duplicates are idempotent; the payload is emitted
    /// exactly once even if trailing duplicates arrive.
    pub fn on_segment(
        &mut self,
        src: Address,
        seqauth: u64,
        index: u8,
        count: u8,
        chunk: &[u8],
        now: SimTime,
    ) -> SegmentIntake {
        let key = (src, seqauth);
        let block = self.blocks.entry(key).or_insert_with(|| ReassemblyBlock {
            chunks: vec![None; usize::from(count)],
            bitmap: 0,
            completed: false,
            deadline: now.plus_micros(REASSEMBLY_TIMEOUT_US),
            last_ack_sent: None,
        });
        if block.completed {
            // Late duplicate after completion: ack again so the sender stops.
            return SegmentIntake {
                completed: None,
                ack_now: true,
                arm_ack_timer: false,
            };
        }
        let idx = usize::from(index);
        let stored_new = idx < block.chunks.len() && block.chunks[idx].is_none();
        if stored_new {
            block.chunks[idx] = Some(chunk.to_vec());
            block.bitmap |= 1 << idx;
        }
        block.deadline = now.plus_micros(REASSEMBLY_TIMEOUT_US);
        let complete = !block.missing();
        let last_index_seen = usize::from(index) + 1 == block.chunks.len();
        let completed = if complete {
            block.completed = true;
            Some(block.chunks.iter().flatten().flatten().copied().collect())
        } else {
            None
        };
        SegmentIntake {
            completed,
            ack_now: complete || last_index_seen,
            arm_ack_timer: stored_new && !complete,
        }
    }

    /// Current receive bitmap for a block, if the block is known.
    pub fn bitmap(&self, src: Address, seqauth: u64) -> Option<u32> {
        self.blocks.get(&(src, seqauth)).map(|b| b.bitmap)
    }

    pub fn is_incomplete(&self, src: Address, seqauth: u64) -> bool {
        self.blocks
            .get(&(src, seqauth))
            .map(|b| !b.completed)
            .unwrap_or(false)
    }

    pub fn deadline(&self, src: Address, seqauth: u64) -> Option<SimTime> {
        self.blocks.get(&(src, seqauth)).map(|b| b.deadline)
    }

    /// Rate limit: at most one block ack per block per ack-timer window.
    pub fn ack_allowed(&self, src: Address, seqauth: u64, now: SimTime) -> bool {
        match self.blocks.get(&(src, seqauth)) {
            None => false,
            Some(block) => match block.last_ack_sent {
                None => true,
                Some(t) => now.saturating_sub(t) >= BLOCK_ACK_TIMER_US,
            },
        }
    }

    pub fn note_ack_sent(&mut self, src: Address, seqauth: u64, now: SimTime) {
        if let Some(block) = self.blocks.get_mut(&(src, seqauth)) {
            block.last_ack_sent = Some(now);
        }
    }

    /// Drop a partial block whose timeout expired. Completed blocks are kept
    /// (cheaply) as duplicate guards until their deadline lapses too.
    pub fn expire(&mut self, src: Address, seqauth: u64, now: SimTime) {
        if let Some(block) = self.blocks.get(&(src, seqauth)) {
            if block.deadline <= now {
                if !block.completed {
                    self.timeouts += 1;
                }
                self.blocks.remove(&(src, seqauth));
            }
        }
    }
}

/// Sender-side state of one segmented message awaiting block acks.
#[derive(Debug, Clone)]
pub struct SegTxState {
    pub seqauth: u64,
    pub dst: Address,
    pub segments: Vec<TransportPdu>,
    /// Bit i set = segment i acknowledged.
    pub acked: u32,
    pub retries_left: u8,
    pub ttl: u8,
    pub n_events: u8,
    pub msg_id: u64,
    pub done: bool,
    /// When the receiver last acked anything; the retry timer only
    /// retransmits after a full window of ack silence.
    pub last_ack_at: Option<SimTime>,
}

impl SegTxState {
    pub fn all_acked(&self) -> bool {
        let want = (1u32 << self.segments.len()) - 1;
        self.acked & want == want
    }

    /// Indexes still missing according to the latest block ack.
    pub fn missing_indexes(&self) -> Vec<usize> {
        (0..self.segments.len())
            .filter(|i| self.acked & (1 << i) == 0)
            .collect()
    }
}

/// Delivery mode of an acknowledged exchange.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExchangeMode {
    /// Retransmit the command until a status arrives.
    Unicast,
    /// Publish the command over exactly two advertising events, no retry.
    Group,
}

/// Unicast retry schedule: initial backoff, doubling, capped.
pub const UNICAST_RETRY_INITIAL_US: u64 = 200_000;
pub const UNICAST_RETRY_CAP_US: u64 = 1_600_000;
/// Advertising events used for a group-mode command.
pub const GROUP_COMMAND_EVENTS: u8 = 2;

/// Client-side state of one acknowledged exchange.
#[derive(Debug, Clone)]
pub struct ExchangeState {
    pub exchange: u32,
    pub dst: Address,
    pub payload: Vec<u8>,
    pub mode: ExchangeMode,
    pub msg_id: u64,
    pub t_first_publish: SimTime,
    pub next_retry_us: u64,
    pub done: bool,
}

impl ExchangeState {
    /// Double the backoff, capped.
    pub fn bump_retry(&mut self) {
        self.next_retry_us = (self.next_retry_us * 2).min(UNICAST_RETRY_CAP_US);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{RandomStream, StreamPurpose};
    use crate::types::NodeId;

    #[test]
    fn eleven_bytes_travel_unsegmented() {
        let units = segment_payload(&[7u8; 11], UNSEG_MAX_LEGACY, 1).unwrap();
        assert_eq!(units, vec![TransportPdu::Unsegmented(vec![7u8; 11])]);
    }

    #[test]
    fn threshold_boundary_at_15_and_16_bytes() {
        let at = segment_payload(&[0u8; 15], UNSEG_MAX_LEGACY, 1).unwrap();
        assert_eq!(at.len(), 1);
        let over = segment_payload(&[0u8; 16], UNSEG_MAX_LEGACY, 1).unwrap();
        assert_eq!(over.len(), 2);
    }

    #[test]
    fn fifty_bytes_split_into_five_segments() {
        let payload: Vec<u8> = (0..50u8).collect();
        let units = segment_payload(&payload, UNSEG_MAX_LEGACY, 9).unwrap();
        assert_eq!(units.len(), 5);
        let sizes: Vec<usize> = units
            .iter()
            .map(|u| match u {
                TransportPdu::Segment { chunk, .. } => chunk.len(),
                other => panic!("expected segment, got {other:?}"),
            })
            .collect();
        assert_eq!(sizes, vec![12, 12, 12, 12, 2]);
    }

    #[test]
    fn oversized_payload_faults() {
        assert_eq!(
            segment_payload(&[0u8; 385], UNSEG_MAX_LEGACY, 1),
            Err(TransportError::PayloadTooLarge(385))
        );
        assert!(segment_payload(&[0u8; 384], UNSEG_MAX_LEGACY, 1).is_ok());
    }

    #[test]
    fn extended_threshold_keeps_50_bytes_whole() {
        let units = segment_payload(&[1u8; 50], UNSEG_MAX_EXT, 1).unwrap();
        assert_eq!(units.len(), 1);
    }

    #[test]
    fn segment_wire_size_fits_legacy_frame() {
        let units = segment_payload(&[0u8; 50], UNSEG_MAX_LEGACY, 1).unwrap();
        for unit in units {
            assert!(usize::from(unit.wire_bytes()) <= UNSEG_MAX_LEGACY);
        }
    }

    fn feed(reassembler: &mut Reassembler, payload: &[u8], order: &[usize]) -> Vec<Vec<u8>> {
        let src = Address(1);
        let units = segment_payload(payload, UNSEG_MAX_LEGACY, 5).unwrap();
        let mut emitted = Vec::new();
        for &i in order {
            if let TransportPdu::Segment {
                seqauth,
                index,
                count,
                chunk,
            } = &units[i]
            {
                let intake =
                    reassembler.on_segment(src, *seqauth, *index, *count, chunk, SimTime::ZERO);
                if let Some(done) = intake.completed {
                    emitted.push(done);
                }
            }
        }
        emitted
    }

    #[test]
    fn reassembly_completes_once_for_any_order() {
        let payload: Vec<u8> = (0..30u8).collect();
        for order in [vec![0, 1, 2], vec![2, 1, 0], vec![1, 2, 0]] {
            let mut r = Reassembler::new();
            let emitted = feed(&mut r, &payload, &order);
            assert_eq!(emitted, vec![payload.clone()], "order {order:?}");
        }
    }

    #[test]
    fn duplicate_segments_are_idempotent() {
        let payload: Vec<u8> = (0..30u8).collect();
        let mut r = Reassembler::new();
        let emitted = feed(&mut r, &payload, &[0, 1, 1, 0, 2, 2]);
        assert_eq!(emitted, vec![payload]);
    }

    #[test]
    fn random_permutations_with_duplicates_emit_exactly_once() {
        // Seeded property sweep over arrival orders.
        let payload: Vec<u8> = (0..95u8).collect(); // 8 segments
        let mut stream = RandomStream::derive(11, NodeId(0), StreamPurpose::Traffic);
        for _ in 0..200 {
            let mut order: Vec<usize> = (0..8).collect();
            // Add duplicates then shuffle.
            for _ in 0..4 {
                let dup = stream.draw_range(0, 7) as usize;
                order.push(dup);
            }
            for i in (1..order.len()).rev() {
                let j = stream.draw_range(0, i as u64) as usize;
                order.swap(i, j);
            }
            let mut r = Reassembler::new();
            let emitted = feed(&mut r, &payload, &order);
            assert_eq!(emitted.len(), 1, "order {order:?}");
            assert_eq!(emitted[0], payload);
        }
    }

    #[test]
    fn last_index_segment_requests_ack_with_gap_bitmap() {
        let payload: Vec<u8> = (0..30u8).collect(); // 3 segments
        let units = segment_payload(&payload, UNSEG_MAX_LEGACY, 5).unwrap();
        let mut r = Reassembler::new();
        let src = Address(1);
        // Deliver segments 0 and 2; 1 is lost.
        for i in [0usize, 2] {
            if let TransportPdu::Segment {
                seqauth,
                index,
                count,
                chunk,
            } = &units[i]
            {
                let intake = r.on_segment(src, *seqauth, *index, *count, chunk, SimTime::ZERO);
                if i == 2 {
                    assert!(intake.ack_now, "last-index segment triggers an ack");
                }
            }
        }
        assert_eq!(r.bitmap(src, 5), Some(0b101));
    }

    #[test]
    fn sender_retransmits_only_missing_indexes() {
        let payload: Vec<u8> = (0..30u8).collect();
        let segments = segment_payload(&payload, UNSEG_MAX_LEGACY, 5).unwrap();
        let mut tx = SegTxState {
            seqauth: 5,
            dst: Address(2),
            segments,
            acked: 0b101,
            retries_left: MAX_BLOCK_RETRIES,
            ttl: 8,
            n_events: 3,
            msg_id: 1,
            done: false,
            last_ack_at: None,
        };
        assert_eq!(tx.missing_indexes(), vec![1]);
        tx.acked = 0b111;
        assert!(tx.all_acked());
    }

    #[test]
    fn reassembly_timeout_discards_partial_state() {
        let payload: Vec<u8> = (0..30u8).collect();
        let units = segment_payload(&payload, UNSEG_MAX_LEGACY, 5).unwrap();
        let mut r = Reassembler::new();
        let src = Address(1);
        if let TransportPdu::Segment {
            seqauth,
            index,
            count,
            chunk,
        } = &units[0]
        {
            r.on_segment(src, *seqauth, *index, *count, chunk, SimTime::ZERO);
        }
        r.expire(src, 5, SimTime::from_micros(REASSEMBLY_TIMEOUT_US));
        assert_eq!(r.timeouts, 1);
        assert!(!r.is_incomplete(src, 5));
    }

    #[test]
    fn unicast_backoff_doubles_to_cap() {
        let mut ex = ExchangeState {
            exchange: 1,
            dst: Address(2),
            payload: vec![0; 11],
            mode: ExchangeMode::Unicast,
            msg_id: 1,
            t_first_publish: SimTime::ZERO,
            next_retry_us: UNICAST_RETRY_INITIAL_US,
            done: false,
        };
        let mut seen = vec![ex.next_retry_us];
        for _ in 0..5 {
            ex.bump_retry();
            seen.push(ex.next_retry_us);
        }
        assert_eq!(
            seen,
            vec![200_000, 400_000, 800_000, 1_600_000, 1_600_000, 1_600_000]
        );
    }
}
