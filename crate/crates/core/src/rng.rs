//! Counter-based deterministic random streams.
//!
//! Every stream is keyed by `(master_seed, node, purpose)` and the n-th draw
//! is a pure function of the key and the draw index, so toggling one consumer
//! (say, mobility) never perturbs the draws seen by another (say, advertising
//! delays). No platform RNG is involved; results are identical across runs
//! and machines.

use crate::types::NodeId;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// splitmix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// What a stream is consumed for. Streams with different purposes are
/// statistically independent even for the same node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StreamPurpose {
    AdvDelay,
    Shadowing,
    ChannelPick,
    Mobility,
    Loss,
    Traffic,
    Topology,
}

impl StreamPurpose {
    fn tag(self) -> u64 {
        match self {
            StreamPurpose::AdvDelay => 1,
            StreamPurpose::Shadowing => 2,
            StreamPurpose::ChannelPick => 3,
            StreamPurpose::Mobility => 4,
            StreamPurpose::Loss => 5,
            StreamPurpose::Traffic => 6,
            StreamPurpose::Topology => 7,
        }
    }
}

/// A purpose-isolated deterministic stream of draws.
#[derive(Debug, Clone)]
pub struct RandomStream {
    key: u64,
    counter: u64,
}

impl RandomStream {
    pub fn derive(master_seed: u64, node: NodeId, purpose: StreamPurpose) -> Self {
        let mut key = mix64(master_seed ^ GOLDEN);
        key = mix64(key ^ (u64::from(node.0) << 16) ^ 0xA5A5_0000);
        key = mix64(key ^ purpose.tag().wrapping_mul(GOLDEN));
        RandomStream { key, counter: 0 }
    }

    /// The i-th draw of the stream, without advancing the counter.
    pub fn nth_u64(&self, index: u64) -> u64 {
        mix64(self.key.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN)))
    }

    /// The i-th draw mapped to [0, 1).
    pub fn nth_f64(&self, index: u64) -> f64 {
        (self.nth_u64(index) >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
    }

    pub fn next_u64(&mut self) -> u64 {
        let v = self.nth_u64(self.counter);
        self.counter += 1;
        v
    }

    /// Next draw in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        let v = self.nth_f64(self.counter);
        self.counter += 1;
        v
    }

    /// Uniform integer in the inclusive range [lo, hi].
    pub fn draw_range(&mut self, lo: u64, hi: u64) -> u64 {
        debug_assert!(lo <= hi);
        let span = hi - lo + 1;
        lo + self.next_u64() % span
    }

    /// Standard normal scaled by `sigma`, via Box-Muller on two draws.
    pub fn next_normal(&mut self, sigma: f64) -> f64 {
        let mut u1 = self.next_f64();
        let u2 = self.next_f64();
        if u1 <= 0.0 {
            u1 = f64::MIN_POSITIVE;
        }
        sigma * (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }
}

/// Per-link shadowing in dB, frozen for a whole run and symmetric in (a, b).
pub fn link_shadow_db(master_seed: u64, a: NodeId, b: NodeId, sigma_db: f64) -> f64 {
    if sigma_db == 0.0 {
        return 0.0;
    }
    let (lo, hi) = if a.0 <= b.0 { (a, b) } else { (b, a) };
    let stream = RandomStream::derive(master_seed, lo, StreamPurpose::Shadowing);
    let mut u1 = stream.nth_f64(2 * u64::from(hi.0));
    let u2 = stream.nth_f64(2 * u64::from(hi.0) + 1);
    if u1 <= 0.0 {
        u1 = f64::MIN_POSITIVE;
    }
    sigma_db * (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;

    const SEED: u64 = 1;

    #[test]
    fn same_triple_yields_identical_draws() {
        let mut a = RandomStream::derive(SEED, NodeId(3), StreamPurpose::AdvDelay);
        let mut b = RandomStream::derive(SEED, NodeId(3), StreamPurpose::AdvDelay);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn differing_purposes_diverge() {
        // Regression fixture for the shipped default seed: the first 100
        // draws of the adv-delay and loss streams must differ.
        let a = RandomStream::derive(SEED, NodeId(0), StreamPurpose::AdvDelay);
        let b = RandomStream::derive(SEED, NodeId(0), StreamPurpose::Loss);
        let first_a: Vec<u64> = (0..100).map(|i| a.nth_u64(i)).collect();
        let first_b: Vec<u64> = (0..100).map(|i| b.nth_u64(i)).collect();
        assert_ne!(first_a, first_b);
    }

    #[test]
    fn differing_nodes_diverge() {
        let a = RandomStream::derive(SEED, NodeId(0), StreamPurpose::Mobility);
        let b = RandomStream::derive(SEED, NodeId(1), StreamPurpose::Mobility);
        let first_a: Vec<u64> = (0..100).map(|i| a.nth_u64(i)).collect();
        let first_b: Vec<u64> = (0..100).map(|i| b.nth_u64(i)).collect();
        assert_ne!(first_a, first_b);
    }

    #[test]
    fn pinned_first_draws_for_default_seed() {
        // Frozen once from a reference run; guards against silent changes to
        // the key derivation or the mixer.
        let s = RandomStream::derive(1, NodeId(0), StreamPurpose::AdvDelay);
        let observed: Vec<u64> = (0..4).map(|i| s.nth_u64(i)).collect();
        assert_eq!(observed, PINNED_ADV_DELAY_SEED1_NODE0);
    }

    // Filled in from a reference run of this module; see pinned test above.
    const PINNED_ADV_DELAY_SEED1_NODE0: [u64; 4] = [
        0x3da23d83bd7f4d77,
        0x36d4207a2e63f7f2,
        0x353bb8c2237eff90,
        0x83ac13601be3a332,
    ];

    #[test]
    fn draw_range_respects_bounds() {
        let mut s = RandomStream::derive(SEED, NodeId(9), StreamPurpose::ChannelPick);
        for _ in 0..10_000 {
            let v = s.draw_range(0, 36);
            assert!(v <= 36);
        }
    }

    #[test]
    fn counter_matches_indexed_access() {
        let mut s = RandomStream::derive(SEED, NodeId(4), StreamPurpose::Loss);
        let snapshot = s.clone();
        for i in 0..16 {
            assert_eq!(s.next_u64(), snapshot.nth_u64(i));
        }
    }

    #[test]
    fn normal_draws_have_plausible_spread() {
        let mut s = RandomStream::derive(SEED, NodeId(2), StreamPurpose::Shadowing);
        let n = 20_000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..n {
            let v = s.next_normal(4.0);
            sum += v;
            sumsq += v * v;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        assert!(mean.abs() < 0.2, "mean {mean}");
        assert!((var.sqrt() - 4.0).abs() < 0.2, "sd {}", var.sqrt());
    }

    #[test]
    fn shadow_is_symmetric_and_frozen() {
        let ab = link_shadow_db(7, NodeId(2), NodeId(9), 4.0);
        let ba = link_shadow_db(7, NodeId(9), NodeId(2), 4.0);
        assert_eq!(ab, ba);
        assert_eq!(ab, link_shadow_db(7, NodeId(2), NodeId(9), 4.0));
        assert_ne!(ab, link_shadow_db(8, NodeId(2), NodeId(9), 4.0));
    }
}
