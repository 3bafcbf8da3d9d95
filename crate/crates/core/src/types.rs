//! Addressing, network PDU structure, message cache and replay protection.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::transport::TransportPdu;

/// Index of a node in the run roster.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
pub struct NodeId(pub u16);

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "n{}", self.0)
    }
}

/// Logical subnet identifier; nodes only process traffic of subnets they
/// belong to.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
pub struct SubnetId(pub u16);

/// 16-bit mesh address.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
pub struct Address(pub u16);

/// Address classes partition the full 16-bit space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AddressClass {
    Unassigned,
    Unicast,
    Virtual,
    Group,
}

impl Address {
    pub const UNASSIGNED: Address = Address(0x0000);

    pub fn class(self) -> AddressClass {
        match self.0 {
            0x0000 => AddressClass::Unassigned,
            0x0001..=0x7FFF => AddressClass::Unicast,
            0x8000..=0xBFFF => AddressClass::Virtual,
            0xC000..=0xFFFF => AddressClass::Group,
        }
    }

    pub fn is_unicast(self) -> bool {
        self.class() == AddressClass::Unicast
    }

    /// Group or virtual: the subscribable classes.
    pub fn is_multicast(self) -> bool {
        matches!(self.class(), AddressClass::Group | AddressClass::Virtual)
    }
}

impl std::fmt::Display for Address {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "0x{:04X}", self.0)
    }
}

/// Simulator-side metadata riding along with a PDU; not part of the on-air
/// byte count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PduMeta {
    /// Correlates deliveries with the publish that created the message.
    pub msg_id: u64,
    /// TTL the source used, so receivers can report hops spent.
    pub ttl_initial: u8,
}

/// The unit flooded through the mesh.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkPdu {
    pub subnet: SubnetId,
    /// Key-refresh generation; stands in for the initialization-vector field.
    pub epoch: u16,
    pub ttl: u8,
    /// 24-bit per-source counter.
    pub seq: u32,
    pub src: Address,
    pub dst: Address,
    pub transport: TransportPdu,
    pub meta: PduMeta,
}

/// Fixed on-air overhead of a network PDU around its transport payload
/// (nid/ivi, ttl, seq, src, dst, mic).
pub const NET_PDU_OVERHEAD_BYTES: u16 = 13;

impl NetworkPdu {
    /// On-air size in bytes (network header + transport payload).
    pub fn wire_bytes(&self) -> u16 {
        NET_PDU_OVERHEAD_BYTES + self.transport.wire_bytes()
    }
}

/// Outcome of a message-cache lookup-and-insert.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheOutcome {
    Fresh,
    Duplicate,
}

/// FIFO cache of recently seen `(src, seq)` keys, used to stop re-relaying.
#[derive(Debug, Clone)]
pub struct MessageCache {
    ring: VecDeque<(Address, u32)>,
    lookup: BTreeSet<(Address, u32)>,
    capacity: usize,
}

pub const DEFAULT_CACHE_CAPACITY: usize = 255;

impl Default for MessageCache {
    fn default() -> Self {
        MessageCache::new(DEFAULT_CACHE_CAPACITY)
    }
}

impl MessageCache {
    pub fn new(capacity: usize) -> Self {
        MessageCache {
            ring: VecDeque::with_capacity(capacity.min(1024)),
            lookup: BTreeSet::new(),
            capacity,
        }
    }

    /// First sighting of a key returns `Fresh` and records it; repeats return
    /// `Duplicate` while the key is resident. Eviction is FIFO.
    pub fn check_insert(&mut self, src: Address, seq: u32) -> CacheOutcome {
        let key = (src, seq);
        if self.lookup.contains(&key) {
            return CacheOutcome::Duplicate;
        }
        if self.ring.len() == self.capacity {
            if let Some(evicted) = self.ring.pop_front() {
                self.lookup.remove(&evicted);
            }
        }
        self.ring.push_back(key);
        self.lookup.insert(key);
        CacheOutcome::Fresh
    }

    pub fn len(&self) -> usize {
        self.ring.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ring.is_empty()
    }
}

/// Replay-check verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReplayOutcome {
    Accept,
    Reject,
}

/// Per-source high-water mark of accepted `(epoch, seq)` pairs.
#[derive(Debug, Clone, Default)]
pub struct ReplayTable {
    highest: BTreeMap<Address, (u16, u32)>,
}

impl ReplayTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Accept iff `(epoch, seq)` is lexicographically above the stored pair;
    /// on accept the stored pair is updated.
    pub fn check_update(&mut self, src: Address, epoch: u16, seq: u32) -> ReplayOutcome {
        match self.highest.get(&src) {
            Some(&stored) if (epoch, seq) <= stored => ReplayOutcome::Reject,
            _ => {
                self.highest.insert(src, (epoch, seq));
                ReplayOutcome::Accept
            }
        }
    }

    pub fn highest_for(&self, src: Address) -> Option<(u16, u32)> {
        self.highest.get(&src).copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{RandomStream, StreamPurpose};

    #[test]
    fn address_class_boundaries() {
        assert_eq!(Address(0x0000).class(), AddressClass::Unassigned);
        assert_eq!(Address(0x0001).class(), AddressClass::Unicast);
        assert_eq!(Address(0x7FFF).class(), AddressClass::Unicast);
        assert_eq!(Address(0x8000).class(), AddressClass::Virtual);
        assert_eq!(Address(0xBFFF).class(), AddressClass::Virtual);
        assert_eq!(Address(0xC000).class(), AddressClass::Group);
        assert_eq!(Address(0xFFFF).class(), AddressClass::Group);
    }

    #[test]
    fn address_classes_partition_the_space() {
        // Exhaustive: every 16-bit value lands in exactly one class.
        let mut counts = [0usize; 4];
        for raw in 0..=u16::MAX {
            match Address(raw).class() {
                AddressClass::Unassigned => counts[0] += 1,
                AddressClass::Unicast => counts[1] += 1,
                AddressClass::Virtual => counts[2] += 1,
                AddressClass::Group => counts[3] += 1,
            }
        }
        assert_eq!(counts[0], 1);
        assert_eq!(counts[1], 0x7FFF);
        assert_eq!(counts[2], 0x4000);
        assert_eq!(counts[3], 0x4000);
        assert_eq!(counts.iter().sum::<usize>(), 0x1_0000);
    }

    #[test]
    fn cache_dedupes_and_keys_by_src_and_seq() {
        let mut cache = MessageCache::default();
        let a = Address(0x0001);
        let b = Address(0x0002);
        assert_eq!(cache.check_insert(a, 1), CacheOutcome::Fresh);
        assert_eq!(cache.check_insert(a, 1), CacheOutcome::Duplicate);
        assert_eq!(cache.check_insert(b, 1), CacheOutcome::Fresh);
        assert_eq!(cache.check_insert(a, 2), CacheOutcome::Fresh);
    }

    #[test]
    fn cache_evicts_fifo_beyond_capacity() {
        let mut cache = MessageCache::new(2);
        let a = Address(0x0001);
        cache.check_insert(a, 1);
        cache.check_insert(a, 2);
        cache.check_insert(a, 3); // evicts (a, 1)
        assert_eq!(cache.check_insert(a, 1), CacheOutcome::Fresh);
    }

    #[test]
    fn cache_with_enough_capacity_never_flags_distinct_keys() {
        let mut cache = MessageCache::new(512);
        for seq in 0..512u32 {
            assert_eq!(cache.check_insert(Address(0x0005), seq), CacheOutcome::Fresh);
        }
    }

    #[test]
    fn replay_rejects_equal_and_lower() {
        let mut table = ReplayTable::new();
        let src = Address(0x0001);
        assert_eq!(table.check_update(src, 0, 10), ReplayOutcome::Accept);
        assert_eq!(table.check_update(src, 0, 10), ReplayOutcome::Reject);
        assert_eq!(table.check_update(src, 0, 9), ReplayOutcome::Reject);
        assert_eq!(table.check_update(src, 0, 11), ReplayOutcome::Accept);
    }

    #[test]
    fn replay_epoch_dominates_seq() {
        let mut table = ReplayTable::new();
        let src = Address(0x0001);
        assert_eq!(table.check_update(src, 0, 10), ReplayOutcome::Accept);
        assert_eq!(table.check_update(src, 1, 1), ReplayOutcome::Accept);
        assert_eq!(table.check_update(src, 0, 500), ReplayOutcome::Reject);
    }

    #[test]
    fn replay_never_accepts_same_pair_twice_under_random_interleavings() {
        // Property: over random (src, epoch, seq) sequences, a pair accepted
        // once is rejected forever after.
        let mut stream = RandomStream::derive(42, NodeId(0), StreamPurpose::Traffic);
        for _ in 0..50 {
            let mut table = ReplayTable::new();
            let mut accepted: BTreeSet<(u16, u16, u32)> = BTreeSet::new();
            for _ in 0..400 {
                let src = Address(1 + stream.draw_range(0, 3) as u16);
                let epoch = stream.draw_range(0, 2) as u16;
                let seq = stream.draw_range(0, 30) as u32;
                let verdict = table.check_update(src, epoch, seq);
                if verdict == ReplayOutcome::Accept {
                    assert!(
                        accepted.insert((src.0, epoch, seq)),
                        "accepted ({src}, {epoch}, {seq}) twice"
                    );
                }
            }
        }
    }
}
