//! Managed-flooding network layer: subnet/epoch filtering, cache dedupe,
//! replay protection, destination filtering, and the TTL-bounded relay rule.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::types::{
    Address, CacheOutcome, MessageCache, NetworkPdu, ReplayOutcome, ReplayTable, SubnetId,
};

/// Relay behavior knobs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelayPolicy {
    pub relay_n_events: u8,
    pub ttl_initial_default: u8,
}

impl Default for RelayPolicy {
    fn default() -> Self {
        RelayPolicy {
            relay_n_events: 2,
            ttl_initial_default: 8,
        }
    }
}

/// Why the network layer dropped a frame. Mirrored into `drops.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum DropReason {
    SubnetMismatch,
    EpochMismatch,
    CacheDuplicate,
    ReplayReject,
    TtlFloor,
}

impl DropReason {
    pub const ALL: [DropReason; 5] = [
        DropReason::SubnetMismatch,
        DropReason::EpochMismatch,
        DropReason::CacheDuplicate,
        DropReason::ReplayReject,
        DropReason::TtlFloor,
    ];

    pub fn label(self) -> &'static str {
        match self {
            DropReason::SubnetMismatch => "subnet_mismatch",
            DropReason::EpochMismatch => "epoch_mismatch",
            DropReason::CacheDuplicate => "cache_duplicate",
            DropReason::ReplayReject => "replay_reject",
            DropReason::TtlFloor => "ttl_floor",
        }
    }
}

/// The slice of per-node state the network layer reads and writes.
#[derive(Debug)]
pub struct NetState {
    pub unicast_addr: Address,
    pub subscriptions: BTreeSet<Address>,
    /// Subnet membership with the current key-refresh epoch per subnet.
    pub subnets: BTreeMap<SubnetId, u16>,
    pub relay_enabled: bool,
    pub cache: MessageCache,
    pub replay: ReplayTable,
}

impl NetState {
    pub fn current_epoch(&self, subnet: SubnetId) -> Option<u16> {
        self.subnets.get(&subnet).copied()
    }
}

/// What to do with one received frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameDecision {
    pub drop: Option<DropReason>,
    /// Hand the transport payload up.
    pub deliver: bool,
    /// Re-broadcast this PDU with TTL decremented.
    pub relay: Option<NetworkPdu>,
    /// A relay would have happened but TTL was below the floor.
    pub ttl_floor_hit: bool,
}

impl FrameDecision {
    fn dropped(reason: DropReason) -> Self {
        FrameDecision {
            drop: Some(reason),
            deliver: false,
            relay: None,
            ttl_floor_hit: false,
        }
    }
}

/// Run the managed-flooding receive pipeline over one frame.
///
/// Order: subnet gate, epoch gate, message-cache dedupe, replay check, then
/// the independent deliver and relay decisions.
pub fn process_frame(state: &mut NetState, pdu: &NetworkPdu, relay_policy: &RelayPolicy) -> FrameDecision {
    let epoch = match state.current_epoch(pdu.subnet) {
        None => return FrameDecision::dropped(DropReason::SubnetMismatch),
        Some(e) => e,
    };
    if epoch != pdu.epoch {
        return FrameDecision::dropped(DropReason::EpochMismatch);
    }
    if state.cache.check_insert(pdu.src, pdu.seq) == CacheOutcome::Duplicate {
        return FrameDecision::dropped(DropReason::CacheDuplicate);
    }
    if state.replay.check_update(pdu.src, pdu.epoch, pdu.seq) == ReplayOutcome::Reject {
        return FrameDecision::dropped(DropReason::ReplayReject);
    }
    let to_self = pdu.dst == state.unicast_addr;
    let deliver = to_self || state.subscriptions.contains(&pdu.dst);
    let mut relay = None;
    let mut ttl_floor_hit = false;
    // A frame addressed to a local unicast address terminates here; group
    // and foreign-unicast traffic keeps flooding.
    if state.relay_enabled && !to_self {
        if pdu.ttl >= 2 {
            let mut relayed = pdu.clone();
            relayed.ttl -= 1;
            relay = Some(relayed);
        } else {
            ttl_floor_hit = true;
        }
    }
    let _ = relay_policy; // events-per-relay applied by the bearer enqueue
    FrameDecision {
        drop: None,
        deliver,
        relay,
        ttl_floor_hit,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::TransportPdu;
    use crate::types::PduMeta;

    fn state() -> NetState {
        NetState {
            unicast_addr: Address(0x0002),
            subscriptions: [Address(0xC000)].into_iter().collect(),
            subnets: [(SubnetId(0), 0u16)].into_iter().collect(),
            relay_enabled: true,
            cache: MessageCache::default(),
            replay: ReplayTable::new(),
        }
    }

    fn pdu(seq: u32, ttl: u8, dst: Address) -> NetworkPdu {
        NetworkPdu {
            subnet: SubnetId(0),
            epoch: 0,
            ttl,
            seq,
            src: Address(0x0001),
            dst,
            transport: TransportPdu::Unsegmented(vec![1, 2, 3]),
            meta: PduMeta { msg_id: 1, ttl_initial: ttl },
        }
    }

    #[test]
    fn subscribed_frame_delivers_and_relays() {
        let mut s = state();
        let d = process_frame(&mut s, &pdu(1, 8, Address(0xC000)), &RelayPolicy::default());
        assert_eq!(d.drop, None);
        assert!(d.deliver);
        let relayed = d.relay.expect("relay");
        assert_eq!(relayed.ttl, 7);
        assert_eq!(relayed.seq, 1);
    }

    #[test]
    fn ttl_one_delivers_but_never_relays() {
        let mut s = state();
        let d = process_frame(&mut s, &pdu(1, 1, Address(0xC000)), &RelayPolicy::default());
        assert!(d.deliver);
        assert!(d.relay.is_none());
        assert!(d.ttl_floor_hit);
    }

    #[test]
    fn duplicate_neither_delivers_nor_relays() {
        let mut s = state();
        let p = pdu(1, 8, Address(0xC000));
        let first = process_frame(&mut s, &p, &RelayPolicy::default());
        assert!(first.deliver);
        let dup = process_frame(&mut s, &p, &RelayPolicy::default());
        assert_eq!(dup.drop, Some(DropReason::CacheDuplicate));
        assert!(!dup.deliver);
        assert!(dup.relay.is_none());
    }

    #[test]
    fn unsubscribed_group_is_relayed_but_not_delivered() {
        let mut s = state();
        let d = process_frame(&mut s, &pdu(1, 8, Address(0xC001)), &RelayPolicy::default());
        assert!(!d.deliver);
        assert!(d.relay.is_some());
    }

    #[test]
    fn own_unicast_address_delivers_and_terminates() {
        let mut s = state();
        let d = process_frame(&mut s, &pdu(1, 8, Address(0x0002)), &RelayPolicy::default());
        assert!(d.deliver);
        assert!(d.relay.is_none(), "frames for a local address are not relayed");
    }

    #[test]
    fn foreign_unicast_is_relayed_but_not_delivered() {
        let mut s = state();
        let d = process_frame(&mut s, &pdu(1, 8, Address(0x0042)), &RelayPolicy::default());
        assert!(!d.deliver);
        assert!(d.relay.is_some());
    }

    #[test]
    fn foreign_subnet_is_dropped() {
        let mut s = state();
        let mut p = pdu(1, 8, Address(0xC000));
        p.subnet = SubnetId(9);
        let d = process_frame(&mut s, &p, &RelayPolicy::default());
        assert_eq!(d.drop, Some(DropReason::SubnetMismatch));
    }

    #[test]
    fn stale_epoch_is_dropped() {
        let mut s = state();
        s.subnets.insert(SubnetId(0), 1);
        let d = process_frame(&mut s, &pdu(1, 8, Address(0xC000)), &RelayPolicy::default());
        assert_eq!(d.drop, Some(DropReason::EpochMismatch));
    }

    #[test]
    fn replay_reject_counts_and_blocks() {
        let mut s = state();
        process_frame(&mut s, &pdu(5, 8, Address(0xC000)), &RelayPolicy::default());
        // Lower seq from the same source: fresh for the cache, stale for
        // replay protection.
        let d = process_frame(&mut s, &pdu(4, 8, Address(0xC000)), &RelayPolicy::default());
        assert_eq!(d.drop, Some(DropReason::ReplayReject));
        assert!(!d.deliver);
    }

    #[test]
    fn relay_disabled_never_relays() {
        let mut s = state();
        s.relay_enabled = false;
        let d = process_frame(&mut s, &pdu(1, 8, Address(0xC000)), &RelayPolicy::default());
        assert!(d.relay.is_none());
        assert!(!d.ttl_floor_hit);
    }
}
