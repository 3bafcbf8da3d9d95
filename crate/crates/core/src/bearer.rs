//! Advertising and scanning bearer: event planning over the primary
//! channels, scan-channel rotation, extended-advertising parameters, and the
//! per-node transmit queue.
//!
//! An advertising event sends one PDU back-to-back over channels 37, 38, 39.
//! Consecutive events of the same PDU are spaced by `advInterval` plus a
//! uniform `advDelay` draw. Queued PDUs are served strictly FIFO: all events
//! of the head PDU finish before the next PDU's first event starts.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::engine::SimTime;
use crate::radio::{PhyMode, PRIMARY_CHANNELS};
use crate::rng::RandomStream;
use crate::types::NetworkPdu;

/// Advertiser timing parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdvParams {
    pub adv_interval_us: u64,
    /// Upper bound of the uniform advDelay draw.
    pub adv_delay_max_us: u64,
    /// Turnaround between the three frames of one event.
    pub inter_channel_gap_us: u64,
    pub n_events_source: u8,
    pub n_events_relay: u8,
    /// Transmit queue depth; enqueueing beyond it drops the newest PDU.
    pub queue_depth: usize,
}

impl Default for AdvParams {
    fn default() -> Self {
        AdvParams {
            adv_interval_us: 20_000,
            adv_delay_max_us: 10_000,
            inter_channel_gap_us: 400,
            n_events_source: 3,
            n_events_relay: 2,
            queue_depth: 32,
        }
    }
}

impl AdvParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.adv_interval_us < 1_000 {
            return Err("bearer.adv_interval_us must be >= 1000".into());
        }
        if self.n_events_source < 1 || self.n_events_relay < 1 {
            return Err("bearer.n_events must be >= 1".into());
        }
        Ok(())
    }
}

/// Scanner schedule mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanMode {
    /// Dwell on one primary channel per scan interval, rotating 37-38-39.
    Rotate,
    /// Listen on all primary channels at once.
    AllChannels,
}

/// Scanner timing parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanParams {
    pub scan_interval_us: u64,
    /// Listening portion of each interval; equal to the interval means
    /// continuous scanning.
    pub scan_window_us: u64,
    pub mode: ScanMode,
}

impl Default for ScanParams {
    fn default() -> Self {
        ScanParams {
            scan_interval_us: 2_000_000,
            scan_window_us: 2_000_000,
            mode: ScanMode::Rotate,
        }
    }
}

impl ScanParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.scan_window_us > self.scan_interval_us {
            return Err("scan.scan_window_us must be <= scan.scan_interval_us".into());
        }
        if self.scan_interval_us == 0 {
            return Err("scan.scan_interval_us must be > 0".into());
        }
        Ok(())
    }
}

/// What the scanner is doing at an instant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScannerState {
    Channel(u8),
    AllPrimary,
    Idle,
}

/// Scanner state at time `t` under the given schedule.
pub fn scanner_channel_at(params: &ScanParams, t: SimTime) -> ScannerState {
    let us = t.as_micros();
    let offset = us % params.scan_interval_us;
    if offset >= params.scan_window_us {
        return ScannerState::Idle;
    }
    match params.mode {
        ScanMode::AllChannels => ScannerState::AllPrimary,
        ScanMode::Rotate => {
            let idx = (us / params.scan_interval_us) % 3;
            ScannerState::Channel(PRIMARY_CHANNELS[idx as usize])
        }
    }
}

/// True iff the scanner dwells on `channel` for the whole half-open window
/// `[start, end)`.
pub fn scanner_covers(params: &ScanParams, channel: u8, start: SimTime, end: SimTime) -> bool {
    debug_assert!(end > start);
    let last = SimTime(end.as_micros() - 1);
    match (scanner_channel_at(params, start), scanner_channel_at(params, last)) {
        (ScannerState::Channel(a), ScannerState::Channel(b)) => {
            // Same dwell, not just the same channel value three intervals on.
            a == channel
                && b == channel
                && start.as_micros() / params.scan_interval_us
                    == last.as_micros() / params.scan_interval_us
        }
        (ScannerState::AllPrimary, ScannerState::AllPrimary) => {
            PRIMARY_CHANNELS.contains(&channel)
                && start.as_micros() / params.scan_interval_us
                    == last.as_micros() / params.scan_interval_us
        }
        _ => false,
    }
}

/// Extended-advertising parameters. The short indications go out on the
/// primary channels and point to a single data frame on a secondary channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtAdvParams {
    /// Offset from event start to the auxiliary data frame.
    pub aux_offset_us: u64,
    pub data_phy: PhyMode,
    /// On-air size of one short indication.
    pub ext_ind_bytes: u16,
}

impl Default for ExtAdvParams {
    fn default() -> Self {
        ExtAdvParams {
            aux_offset_us: 1_500,
            data_phy: PhyMode::Uncoded2M,
            ext_ind_bytes: 10,
        }
    }
}

/// Secondary channel for one extended event, uniform over 0-36.
pub fn draw_aux_channel(stream: &mut RandomStream) -> u8 {
    stream.draw_range(0, 36) as u8
}

/// Frame placement of one legacy advertising event.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdvEventPlan {
    /// (channel, frame start) for channels 37, 38, 39 in order.
    pub frames: [(u8, SimTime); 3],
    /// Due time of this PDU's next advertising event.
    pub next_event_start: SimTime,
}

/// Lay out the three frames of one advertising event starting at `t0` and
/// draw the advDelay for the following event.
pub fn plan_adv_event(
    params: &AdvParams,
    frame_airtime_us: u64,
    stream: &mut RandomStream,
    t0: SimTime,
) -> AdvEventPlan {
    let step = frame_airtime_us + params.inter_channel_gap_us;
    let frames = [
        (PRIMARY_CHANNELS[0], t0),
        (PRIMARY_CHANNELS[1], t0.plus_micros(step)),
        (PRIMARY_CHANNELS[2], t0.plus_micros(2 * step)),
    ];
    let delay = stream.draw_range(0, params.adv_delay_max_us);
    AdvEventPlan {
        frames,
        next_event_start: t0.plus_micros(params.adv_interval_us + delay),
    }
}

/// A queued PDU working through its advertising events.
#[derive(Debug, Clone)]
pub struct TxJob {
    /// Stable id, so an in-flight event can find its job afterwards.
    pub id: u64,
    pub pdu: NetworkPdu,
    pub remaining_events: u8,
    /// Earliest start of this PDU's next event.
    pub next_eligible: SimTime,
}

/// Per-node transmit queue and radio-busy flag.
#[derive(Debug, Default)]
pub struct BearerState {
    jobs: VecDeque<TxJob>,
    /// An advertising event is on the air right now.
    pub event_active: bool,
    pub overflow_drops: u64,
}

impl BearerState {
    pub fn new() -> Self {
        Self::default()
    }

    /// FIFO enqueue; beyond the configured depth the newest PDU is dropped
    /// and counted.
    pub fn enqueue_with_id(
        &mut self,
        id: u64,
        pdu: NetworkPdu,
        n_events: u8,
        now: SimTime,
        depth: usize,
    ) -> bool {
        if self.jobs.len() >= depth {
            self.overflow_drops += 1;
            return false;
        }
        self.jobs.push_back(TxJob {
            id,
            pdu,
            remaining_events: n_events,
            next_eligible: now,
        });
        true
    }

    /// The queue is strict FIFO: only the head PDU may advertise, and it
    /// holds the bearer until all of its events are done.
    pub fn eligible_job(&self, now: SimTime) -> Option<usize> {
        match self.jobs.front() {
            Some(job) if job.next_eligible <= now => Some(0),
            _ => None,
        }
    }

    /// When the head job's next event becomes due.
    pub fn next_wake(&self) -> Option<SimTime> {
        self.jobs.front().map(|job| job.next_eligible)
    }

    pub fn job_mut(&mut self, idx: usize) -> &mut TxJob {
        &mut self.jobs[idx]
    }

    pub fn position_of(&self, id: u64) -> Option<usize> {
        self.jobs.iter().position(|job| job.id == id)
    }

    /// Is a PDU of this message still waiting to (finish) air(ing)?
    pub fn holds_message(&self, msg_id: u64) -> bool {
        self.jobs.iter().any(|job| job.pdu.meta.msg_id == msg_id)
    }

    /// Is this exact segment still queued?
    pub fn holds_segment(&self, seqauth: u64, index: u8) -> bool {
        self.jobs.iter().any(|job| {
            matches!(
                &job.pdu.transport,
                crate::transport::TransportPdu::Segment {
                    seqauth: s,
                    index: i,
                    ..
                } if *s == seqauth && *i == index
            )
        })
    }

    pub fn remove_job(&mut self, idx: usize) -> TxJob {
        self.jobs.remove(idx).expect("bearer job index")
    }

    pub fn queue_len(&self) -> usize {
        self.jobs.len()
    }

    pub fn is_idle(&self) -> bool {
        !self.event_active && self.jobs.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamPurpose;
    use crate::types::NodeId;

    fn stream() -> RandomStream {
        RandomStream::derive(1, NodeId(0), StreamPurpose::AdvDelay)
    }

    #[test]
    fn event_plan_spaces_frames_by_airtime_plus_gap() {
        // 37-byte frame at 1M is 376 us; with a 400 us gap the starts are
        // 0, 776, 1552 on channels 37, 38, 39.
        let params = AdvParams::default();
        let plan = plan_adv_event(&params, 376, &mut stream(), SimTime::ZERO);
        assert_eq!(
            plan.frames,
            [
                (37, SimTime(0)),
                (38, SimTime(776)),
                (39, SimTime(1552)),
            ]
        );
    }

    #[test]
    fn next_event_start_is_interval_plus_delay() {
        let params = AdvParams::default();
        let mut s = stream();
        let probe = s.clone().draw_range(0, params.adv_delay_max_us);
        let plan = plan_adv_event(&params, 376, &mut s, SimTime::ZERO);
        assert_eq!(
            plan.next_event_start,
            SimTime(params.adv_interval_us + probe)
        );
    }

    #[test]
    fn adv_delay_draws_stay_in_range() {
        let params = AdvParams::default();
        let mut s = stream();
        for _ in 0..10_000 {
            let plan = plan_adv_event(&params, 376, &mut s, SimTime::ZERO);
            let spacing = plan.next_event_start.as_micros();
            assert!(spacing >= params.adv_interval_us);
            assert!(spacing <= params.adv_interval_us + params.adv_delay_max_us);
        }
    }

    #[test]
    fn scanner_rotates_across_intervals() {
        let params = ScanParams::default();
        assert_eq!(scanner_channel_at(&params, SimTime(0)), ScannerState::Channel(37));
        assert_eq!(
            scanner_channel_at(&params, SimTime::from_secs(2)),
            ScannerState::Channel(38)
        );
        assert_eq!(
            scanner_channel_at(&params, SimTime::from_secs(4)),
            ScannerState::Channel(39)
        );
        assert_eq!(
            scanner_channel_at(&params, SimTime::from_secs(6)),
            ScannerState::Channel(37)
        );
    }

    #[test]
    fn scanner_idles_outside_window() {
        let params = ScanParams {
            scan_interval_us: 2_000_000,
            scan_window_us: 1_000_000,
            mode: ScanMode::Rotate,
        };
        assert_eq!(
            scanner_channel_at(&params, SimTime::from_millis(1_500)),
            ScannerState::Idle
        );
        assert_eq!(
            scanner_channel_at(&params, SimTime::from_millis(500)),
            ScannerState::Channel(37)
        );
    }

    #[test]
    fn scanner_channel_constant_within_interval() {
        let params = ScanParams::default();
        let base = 4_000_000u64; // third interval: channel 39
        for offset in [0u64, 1, 999_999, 1_999_999] {
            assert_eq!(
                scanner_channel_at(&params, SimTime(base + offset)),
                ScannerState::Channel(39)
            );
        }
    }

    #[test]
    fn scanner_covers_requires_full_window_on_channel() {
        let params = ScanParams::default();
        assert!(scanner_covers(&params, 37, SimTime(100), SimTime(500)));
        assert!(!scanner_covers(&params, 38, SimTime(100), SimTime(500)));
        // A frame straddling the dwell boundary is not covered.
        assert!(!scanner_covers(
            &params,
            37,
            SimTime(1_999_900),
            SimTime(2_000_100)
        ));
    }

    #[test]
    fn all_channels_mode_covers_any_primary() {
        let params = ScanParams {
            mode: ScanMode::AllChannels,
            ..ScanParams::default()
        };
        for ch in PRIMARY_CHANNELS {
            assert!(scanner_covers(&params, ch, SimTime(0), SimTime(400)));
        }
        assert!(!scanner_covers(&params, 12, SimTime(0), SimTime(400)));
    }

    #[test]
    fn aux_channel_is_secondary() {
        let mut s = RandomStream::derive(1, NodeId(5), StreamPurpose::ChannelPick);
        for _ in 0..10_000 {
            let ch = draw_aux_channel(&mut s);
            assert!(ch <= 36);
        }
    }

    #[test]
    fn bearer_queue_drops_newest_beyond_depth() {
        use crate::transport::TransportPdu;
        use crate::types::{Address, PduMeta, SubnetId};

        let pdu = NetworkPdu {
            subnet: SubnetId(0),
            epoch: 0,
            ttl: 8,
            seq: 1,
            src: Address(1),
            dst: Address(0xC000),
            transport: TransportPdu::Unsegmented(vec![0u8; 11]),
            meta: PduMeta { msg_id: 1, ttl_initial: 8 },
        };
        let mut bearer = BearerState::new();
        for i in 0..32 {
            assert!(bearer.enqueue_with_id(i, pdu.clone(), 3, SimTime::ZERO, 32));
        }
        assert!(!bearer.enqueue_with_id(33, pdu, 3, SimTime::ZERO, 32));
        assert_eq!(bearer.overflow_drops, 1);
        assert_eq!(bearer.queue_len(), 32);
    }
}
