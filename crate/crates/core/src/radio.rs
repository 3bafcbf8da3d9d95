//! Physical layer model: on-air framing, log-distance path loss, and the
//! reception/collision decision for advertising frames.
//!
//! All framing constants live in one table below so tests and the run
//! manifest stay in sync.

use serde::{Deserialize, Serialize};

use crate::engine::SimTime;
use crate::types::NodeId;

// --- framing constants table -------------------------------------------------

/// Preamble + access address, uncoded 1 Mbps PHY.
pub const PREAMBLE_AA_BITS_1M: u64 = 40;
/// Preamble + access address, uncoded 2 Mbps PHY.
pub const PREAMBLE_AA_BITS_2M: u64 = 48;
/// Link-layer header bits counted into the payload body.
pub const HEADER_BITS: u64 = 16;
/// CRC bits counted into the payload body.
pub const CRC_BITS: u64 = 24;
/// Fixed preamble/term block of the coded PHYs, in microseconds.
pub const CODED_OVERHEAD_US: u64 = 430;
/// Payload-bit expansion factor of the 500 kbps coded PHY.
pub const CODED_FACTOR_500K: u64 = 2;
/// Payload-bit expansion factor of the 125 kbps coded PHY.
pub const CODED_FACTOR_125K: u64 = 8;

/// Primary advertising channels.
pub const PRIMARY_CHANNELS: [u8; 3] = [37, 38, 39];

/// Name/value pairs of every framing constant, echoed into run manifests so
/// reports are self-describing.
pub fn framing_constants() -> Vec<(&'static str, u64)> {
    vec![
        ("preamble_aa_bits_1m", PREAMBLE_AA_BITS_1M),
        ("preamble_aa_bits_2m", PREAMBLE_AA_BITS_2M),
        ("header_bits", HEADER_BITS),
        ("crc_bits", CRC_BITS),
        ("coded_overhead_us", CODED_OVERHEAD_US),
        ("coded_factor_500k", CODED_FACTOR_500K),
        ("coded_factor_125k", CODED_FACTOR_125K),
        ("net_pdu_overhead_bytes", u64::from(crate::types::NET_PDU_OVERHEAD_BYTES)),
    ]
}

// --- PHY modes ----------------------------------------------------------------

/// Advertising PHY. Uncoded modes differ in symbol rate; coded modes expand
/// payload bits for range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhyMode {
    Uncoded1M,
    Uncoded2M,
    Coded500k,
    Coded125k,
}

impl PhyMode {
    pub fn bit_rate_bps(self) -> u64 {
        match self {
            PhyMode::Uncoded1M => 1_000_000,
            PhyMode::Uncoded2M => 2_000_000,
            PhyMode::Coded500k => 500_000,
            PhyMode::Coded125k => 125_000,
        }
    }
}

/// On-air duration in microseconds of a frame carrying `pdu_bytes`.
pub fn airtime_us(pdu_bytes: u16, phy: PhyMode) -> u64 {
    debug_assert!(pdu_bytes >= 1);
    let body_bits = 8 * u64::from(pdu_bytes) + HEADER_BITS + CRC_BITS;
    match phy {
        PhyMode::Uncoded1M => PREAMBLE_AA_BITS_1M + body_bits,
        PhyMode::Uncoded2M => (PREAMBLE_AA_BITS_2M + body_bits).div_ceil(2),
        PhyMode::Coded500k => CODED_OVERHEAD_US + CODED_FACTOR_500K * body_bits,
        PhyMode::Coded125k => CODED_OVERHEAD_US + CODED_FACTOR_125K * body_bits,
    }
}

// --- positions and propagation --------------------------------------------------

/// Planar position plus floor index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Position {
    pub x: f64,
    pub y: f64,
    pub floor: u8,
}

impl Position {
    pub fn new(x: f64, y: f64, floor: u8) -> Self {
        Position { x, y, floor }
    }

    /// Horizontal distance in meters, clamped below at 0.1 m.
    pub fn distance(&self, other: &Position) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        (dx * dx + dy * dy).sqrt().max(0.1)
    }
}

/// Log-distance propagation parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationParams {
    pub tx_power_dbm: f64,
    /// Path loss at the 1 m reference distance.
    pub pl0_db: f64,
    pub path_loss_exponent: f64,
    /// Extra loss per floor crossed.
    pub floor_penalty_db: f64,
    /// Log-normal shadowing spread; the draw is frozen per link per run.
    pub shadowing_sigma_db: f64,
    pub sensitivity_dbm: f64,
    /// None disables capture: any overlapping same-channel arrival above
    /// sensitivity kills both frames.
    pub capture_margin_db: Option<f64>,
    /// Per-frame independent loss probability standing in for ambient
    /// interference.
    pub background_loss_prob: f64,
}

impl Default for PropagationParams {
    fn default() -> Self {
        PropagationParams {
            tx_power_dbm: 0.0,
            pl0_db: 40.0,
            path_loss_exponent: 2.7,
            floor_penalty_db: 25.0,
            shadowing_sigma_db: 4.0,
            sensitivity_dbm: -90.0,
            capture_margin_db: None,
            background_loss_prob: 0.05,
        }
    }
}

/// Received power over a link, log-distance model plus the frozen shadow draw.
pub fn link_rssi(
    params: &PropagationParams,
    a: &Position,
    b: &Position,
    shadow_db: f64,
) -> f64 {
    let d = a.distance(b);
    let floors = f64::from(a.floor.abs_diff(b.floor));
    params.tx_power_dbm
        - params.pl0_db
        - 10.0 * params.path_loss_exponent * d.log10()
        - params.floor_penalty_db * floors
        + shadow_db
}

// --- transmissions and reception -------------------------------------------------

/// One on-air emission.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransmissionRecord {
    pub tx_node: NodeId,
    pub channel: u8,
    pub phy: PhyMode,
    pub start: SimTime,
    pub airtime_us: u64,
    pub pdu_bytes: u16,
}

impl TransmissionRecord {
    pub fn end(&self) -> SimTime {
        self.start.plus_micros(self.airtime_us)
    }
}

/// Why a frame was not received.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum MissReason {
    WrongChannel,
    NotScanning,
    BelowSensitivity,
    Collision,
    BackgroundLoss,
}

impl MissReason {
    pub fn label(self) -> &'static str {
        match self {
            MissReason::WrongChannel => "wrong_channel",
            MissReason::NotScanning => "not_scanning",
            MissReason::BelowSensitivity => "below_sensitivity",
            MissReason::Collision => "collision",
            MissReason::BackgroundLoss => "background_loss",
        }
    }
}

/// Result of reception arbitration at one receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReceptionOutcome {
    Received { rssi: f64 },
    Miss { reason: MissReason },
}

/// Receiver's radio state relative to a frame's channel and window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelGate {
    /// Listening on the frame's channel for its whole window.
    OnChannel,
    /// Listening, but on another channel.
    WrongChannel,
    /// Not listening at all (idle window, own transmission, retuned away).
    NotScanning,
}

/// An overlapping same-channel transmission as seen by the receiver.
#[derive(Debug, Clone, Copy)]
pub struct Interferer {
    pub rssi_at_receiver: f64,
}

/// Half-open interval intersection.
pub fn intervals_overlap(start_a: SimTime, end_a: SimTime, start_b: SimTime, end_b: SimTime) -> bool {
    start_a < end_b && start_b < end_a
}

/// Decide whether one receiver captures one frame.
///
/// `interferers` must already be filtered to same-channel transmissions whose
/// air intervals intersect the frame's. `loss_draw` is the receiver's
/// background-loss uniform draw for this frame.
pub fn reception_outcome(
    params: &PropagationParams,
    gate: ChannelGate,
    rssi: f64,
    interferers: &[Interferer],
    loss_draw: f64,
) -> ReceptionOutcome {
    match gate {
        ChannelGate::WrongChannel => {
            return ReceptionOutcome::Miss {
                reason: MissReason::WrongChannel,
            }
        }
        ChannelGate::NotScanning => {
            return ReceptionOutcome::Miss {
                reason: MissReason::NotScanning,
            }
        }
        ChannelGate::OnChannel => {}
    }
    if rssi < params.sensitivity_dbm {
        return ReceptionOutcome::Miss {
            reason: MissReason::BelowSensitivity,
        };
    }
    let collided = interferers.iter().any(|other| match params.capture_margin_db {
        // Capture: a sufficiently weaker interferer is survivable.
        Some(margin) => other.rssi_at_receiver >= rssi - margin,
        // No capture: anything audible kills the frame.
        None => other.rssi_at_receiver >= params.sensitivity_dbm,
    });
    if collided {
        return ReceptionOutcome::Miss {
            reason: MissReason::Collision,
        };
    }
    if loss_draw < params.background_loss_prob {
        return ReceptionOutcome::Miss {
            reason: MissReason::BackgroundLoss,
        };
    }
    ReceptionOutcome::Received { rssi }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn airtime_matches_hand_sums() {
        // 37-byte PDU at 1M: 40 + (16 + 296 + 24) = 376 bits -> 376 us.
        assert_eq!(airtime_us(37, PhyMode::Uncoded1M), 376);
        // Same PDU at 2M: (48 + 336) / 2 = 192 us.
        assert_eq!(airtime_us(37, PhyMode::Uncoded2M), 192);
        // 50-byte PDU at 2M: (48 + 16 + 24 + 400) / 2 = 244 us.
        assert_eq!(airtime_us(50, PhyMode::Uncoded2M), 244);
    }

    #[test]
    fn airtime_coded_phys_expand_body_bits() {
        let body = 8 * 37 + 16 + 24;
        assert_eq!(airtime_us(37, PhyMode::Coded500k), 430 + 2 * body);
        assert_eq!(airtime_us(37, PhyMode::Coded125k), 430 + 8 * body);
    }

    #[test]
    fn airtime_strictly_increases_with_payload() {
        for phy in [
            PhyMode::Uncoded1M,
            PhyMode::Uncoded2M,
            PhyMode::Coded500k,
            PhyMode::Coded125k,
        ] {
            for n in 1..300u16 {
                assert!(airtime_us(n + 1, phy) > airtime_us(n, phy), "{phy:?} at {n}");
            }
        }
    }

    #[test]
    fn airtime_2m_always_beats_1m() {
        for n in 1..300u16 {
            assert!(airtime_us(n, PhyMode::Uncoded2M) < airtime_us(n, PhyMode::Uncoded1M));
        }
    }

    #[test]
    fn rssi_reference_distance() {
        let params = PropagationParams::default();
        let a = Position::new(0.0, 0.0, 0);
        let b = Position::new(1.0, 0.0, 0);
        let rssi = link_rssi(&params, &a, &b, 0.0);
        assert!((rssi - -40.0).abs() < 1e-9, "rssi {rssi}");
    }

    #[test]
    fn rssi_ten_meters_default_exponent() {
        // 0 - 40 - 27*log10(10) = -67 dBm.
        let params = PropagationParams::default();
        let a = Position::new(0.0, 0.0, 0);
        let b = Position::new(10.0, 0.0, 0);
        let rssi = link_rssi(&params, &a, &b, 0.0);
        assert!((rssi - -67.0).abs() < 1e-9, "rssi {rssi}");
    }

    #[test]
    fn rssi_floor_penalty_is_additive() {
        let params = PropagationParams::default();
        let a = Position::new(0.0, 0.0, 0);
        let same = Position::new(5.0, 0.0, 0);
        let other = Position::new(5.0, 0.0, 1);
        let diff = link_rssi(&params, &a, &same, 0.0) - link_rssi(&params, &a, &other, 0.0);
        assert!((diff - 25.0).abs() < 1e-9);
    }

    #[test]
    fn rssi_symmetric_under_shared_shadow() {
        let params = PropagationParams::default();
        let a = Position::new(1.0, 3.0, 0);
        let b = Position::new(7.5, -2.0, 1);
        assert_eq!(link_rssi(&params, &a, &b, 1.7), link_rssi(&params, &b, &a, 1.7));
    }

    #[test]
    fn reception_single_clean_frame_is_received() {
        let mut params = PropagationParams::default();
        params.background_loss_prob = 0.0;
        let out = reception_outcome(&params, ChannelGate::OnChannel, -60.0, &[], 0.9);
        assert_eq!(out, ReceptionOutcome::Received { rssi: -60.0 });
    }

    #[test]
    fn reception_wrong_channel_misses() {
        let params = PropagationParams::default();
        let out = reception_outcome(&params, ChannelGate::WrongChannel, -60.0, &[], 0.9);
        assert_eq!(
            out,
            ReceptionOutcome::Miss {
                reason: MissReason::WrongChannel
            }
        );
    }

    #[test]
    fn reception_below_sensitivity_misses() {
        let params = PropagationParams::default();
        let out = reception_outcome(&params, ChannelGate::OnChannel, -95.0, &[], 0.9);
        assert_eq!(
            out,
            ReceptionOutcome::Miss {
                reason: MissReason::BelowSensitivity
            }
        );
    }

    #[test]
    fn overlapping_frames_without_capture_kill_both() {
        // Two same-channel frames overlapping at one receiver, both audible:
        // evaluate each against the other, both collide.
        let mut params = PropagationParams::default();
        params.background_loss_prob = 0.0;
        let first = reception_outcome(
            &params,
            ChannelGate::OnChannel,
            -60.0,
            &[Interferer { rssi_at_receiver: -70.0 }],
            0.9,
        );
        let second = reception_outcome(
            &params,
            ChannelGate::OnChannel,
            -70.0,
            &[Interferer { rssi_at_receiver: -60.0 }],
            0.9,
        );
        for out in [first, second] {
            assert_eq!(
                out,
                ReceptionOutcome::Miss {
                    reason: MissReason::Collision
                }
            );
        }
    }

    #[test]
    fn capture_margin_lets_strong_frame_through() {
        let mut params = PropagationParams::default();
        params.background_loss_prob = 0.0;
        params.capture_margin_db = Some(8.0);
        let strong = reception_outcome(
            &params,
            ChannelGate::OnChannel,
            -60.0,
            &[Interferer { rssi_at_receiver: -75.0 }],
            0.9,
        );
        assert_eq!(strong, ReceptionOutcome::Received { rssi: -60.0 });
        let weak = reception_outcome(
            &params,
            ChannelGate::OnChannel,
            -75.0,
            &[Interferer { rssi_at_receiver: -60.0 }],
            0.9,
        );
        assert_eq!(
            weak,
            ReceptionOutcome::Miss {
                reason: MissReason::Collision
            }
        );
    }

    #[test]
    fn interference_below_sensitivity_is_ignored_without_capture() {
        let mut params = PropagationParams::default();
        params.background_loss_prob = 0.0;
        let out = reception_outcome(
            &params,
            ChannelGate::OnChannel,
            -60.0,
            &[Interferer { rssi_at_receiver: -95.0 }],
            0.9,
        );
        assert_eq!(out, ReceptionOutcome::Received { rssi: -60.0 });
    }

    #[test]
    fn background_loss_draw_below_prob_misses() {
        let params = PropagationParams::default(); // loss prob 0.05
        let out = reception_outcome(&params, ChannelGate::OnChannel, -60.0, &[], 0.01);
        assert_eq!(
            out,
            ReceptionOutcome::Miss {
                reason: MissReason::BackgroundLoss
            }
        );
    }

    #[test]
    fn overlap_predicate_is_symmetric_and_half_open() {
        let t = SimTime::from_micros;
        assert!(intervals_overlap(t(0), t(10), t(5), t(15)));
        assert!(intervals_overlap(t(5), t(15), t(0), t(10)));
        // Touching intervals do not overlap.
        assert!(!intervals_overlap(t(0), t(10), t(10), t(20)));
        assert!(!intervals_overlap(t(10), t(20), t(0), t(10)));
    }
}
