//! The simulated world: nodes with their full protocol state, the event
//! dispatch loop, radio arbitration between concurrent frames, and the
//! application behaviors the scenario harness drives (acked exchanges,
//! beacons, coverage control, leader election, follower recruitment).

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::bearer::{
    draw_aux_channel, scanner_channel_at, scanner_covers, AdvParams, BearerState, ExtAdvParams,
    ScanParams, ScannerState,
};
use crate::engine::{run, EventQueue, RunSummary, SimTime, Simulation};
use crate::messages::{decode, encode, AccessMsg, BEACON_MAX_NEIGHBORS};
use crate::metrics::{MetricsCollector, MsgMode};
use crate::mobility::{move_toward, MobilityModel, MobilityState};
use crate::network::{process_frame, DropReason, NetState, RelayPolicy};
use crate::radio::{
    airtime_us, intervals_overlap, link_rssi, reception_outcome, ChannelGate, Interferer, PhyMode,
    Position, PropagationParams, ReceptionOutcome, PRIMARY_CHANNELS,
};
use crate::rng::{link_shadow_db, RandomStream, StreamPurpose};
use crate::transport::{
    segment_payload, ExchangeMode, ExchangeState, Reassembler, SegTxState, TransportPdu,
    BLOCK_ACK_TIMER_US, GROUP_COMMAND_EVENTS, MAX_BLOCK_RETRIES, SEG_RETRY_TIMER_US,
    UNICAST_RETRY_INITIAL_US, UNSEG_MAX_EXT, UNSEG_MAX_LEGACY,
};
use crate::types::{Address, NetworkPdu, NodeId, PduMeta, SubnetId};

use thiserror::Error;

/// How long a finished frame stays visible for overlap checks.
const ACTIVE_RETENTION_US: u64 = 50_000;
/// Mobility integration step.
pub const MOBILITY_TICK_US: u64 = 100_000;
/// Neighbor-table entries expire after this many beacon periods.
pub const NEIGHBOR_EXPIRY_PERIODS: u64 = 3;
/// Default recruitment timeout.
pub const RECRUIT_TIMEOUT_US: u64 = 3_000_000;

#[derive(Debug, Error)]
pub enum PublishError {
    #[error("node {0} is not provisioned in any subnet")]
    Unprovisioned(u16),
    #[error(transparent)]
    Transport(#[from] crate::transport::TransportError),
    #[error("subscribing to non-multicast address {0}")]
    NotMulticast(Address),
}

// --- coverage / election / recruitment state ---------------------------------

/// Coverage-control knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageParams {
    pub rssi_threshold_dbm: f64,
    pub target_degree: usize,
    pub beacon_period_us: u64,
    pub move_step_m: f64,
}

impl Default for CoverageParams {
    fn default() -> Self {
        CoverageParams {
            rssi_threshold_dbm: -80.0,
            target_degree: 2,
            beacon_period_us: 1_000_000,
            move_step_m: 0.25,
        }
    }
}

/// One row of the neighbor table maintained from beacons.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborEntry {
    pub last_rssi_heard: f64,
    /// What the neighbor reported hearing from us (piggybacked).
    pub rssi_they_heard_me: Option<f64>,
    pub last_seen: SimTime,
}

/// Decision of one coverage tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoverageDecision {
    Stay,
    MoveToward(NodeId),
}

/// Mutual-connectivity degree: neighbors whose link is above threshold in
/// both directions.
pub fn coverage_degree(table: &BTreeMap<u16, NeighborEntry>, threshold_dbm: f64) -> usize {
    table
        .values()
        .filter(|e| {
            e.rssi_they_heard_me
                .map(|back| e.last_rssi_heard.min(back) >= threshold_dbm)
                .unwrap_or(false)
        })
        .count()
}

/// Coverage policy: stay when the mutual degree meets the target, otherwise
/// step toward the strongest-heard neighbor; with nothing heard, stay put
/// and keep beaconing.
pub fn coverage_decide(
    table: &BTreeMap<u16, NeighborEntry>,
    params: &CoverageParams,
) -> CoverageDecision {
    if coverage_degree(table, params.rssi_threshold_dbm) >= params.target_degree {
        return CoverageDecision::Stay;
    }
    let strongest = table
        .iter()
        .map(|(id, e)| (*id, e.last_rssi_heard))
        .max_by(|a, b| {
            a.1.partial_cmp(&b.1)
                .unwrap()
                .then_with(|| b.0.cmp(&a.0)) // tie: lowest id wins
        });
    match strongest {
        Some((id, _)) => CoverageDecision::MoveToward(NodeId(id)),
        None => CoverageDecision::Stay,
    }
}

/// Pick the election winner from heard candidacies: highest fitness, ties to
/// the lowest id. None when nothing was heard.
pub fn elect_leader(heard: &BTreeMap<u16, f32>) -> Option<u16> {
    heard
        .iter()
        .max_by(|a, b| {
            a.1.partial_cmp(b.1)
                .unwrap()
                .then_with(|| b.0.cmp(a.0)) // tie: lowest id wins
        })
        .map(|(id, _)| *id)
}

#[derive(Debug, Clone, Default)]
pub struct ElectionState {
    pub group: Address,
    pub fitness: f32,
    pub heard: BTreeMap<u16, f32>,
    pub decided: Option<u16>,
    pub done: bool,
}

#[derive(Debug, Clone)]
pub struct RecruitState {
    pub k: u8,
    pub formation: Address,
    pub volunteers: Vec<u16>,
    pub confirmed: Vec<u16>,
    pub deadline: SimTime,
    pub closed: bool,
}

/// Per-node application state used by the scenario behaviors.
#[derive(Debug, Default)]
pub struct AppState {
    pub neighbor_table: BTreeMap<u16, NeighborEntry>,
    pub beacon_group: Option<Address>,
    pub coverage: Option<CoverageParams>,
    pub coverage_moves: u64,
    pub coverage_converged_at: Option<SimTime>,
    pub election: Option<ElectionState>,
    pub recruit: Option<RecruitState>,
    pub volunteer_on_recruit: bool,
}

// --- node ---------------------------------------------------------------------

/// Everything one node owns.
pub struct Node {
    pub id: NodeId,
    pub unicast: Address,
    pub adv: AdvParams,
    pub scan: ScanParams,
    pub net: NetState,
    pub publish_subnet: SubnetId,
    pub blacklisted: bool,
    pub position: Position,
    pub mobility: MobilityState,
    pub bearer: BearerState,
    pub next_seq: u32,
    pub reassembler: Reassembler,
    pub seg_tx: BTreeMap<u64, SegTxState>,
    pub exchanges: BTreeMap<u32, ExchangeState>,
    /// Responds to commands with a status.
    pub responder: bool,
    pub aux_listens: Vec<AuxListen>,
    pub app: AppState,
    adv_delay_stream: RandomStream,
    channel_stream: RandomStream,
    loss_stream: RandomStream,
    mobility_stream: RandomStream,
}

impl Node {
    fn alloc_seq(&mut self) -> u32 {
        self.next_seq += 1;
        self.next_seq
    }
}

/// Pending retune to a secondary channel after catching an extended
/// indication.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AuxListen {
    pub aux_frame_id: u64,
    pub channel: u8,
    pub from: SimTime,
    pub until: SimTime,
    pub registered_at: SimTime,
}

/// Node roster entry handed to [`World::add_node`].
#[derive(Debug, Clone)]
pub struct NodeSetup {
    pub position: Position,
    pub relay_enabled: bool,
    pub subscriptions: Vec<Address>,
    pub subnets: Vec<(SubnetId, u16)>,
    pub mobility: MobilityModel,
    pub responder: bool,
}

impl Default for NodeSetup {
    fn default() -> Self {
        NodeSetup {
            position: Position::default(),
            relay_enabled: true,
            subscriptions: Vec::new(),
            subnets: vec![(SubnetId(0), 0)],
            mobility: MobilityModel::Static,
            responder: false,
        }
    }
}

// --- events -------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct FrameSpec {
    pub frame_id: u64,
    pub tx: NodeId,
    pub channel: u8,
    pub phy: PhyMode,
    pub start: SimTime,
    pub airtime_us: u64,
    pub body: FrameBody,
}

impl FrameSpec {
    pub fn end(&self) -> SimTime {
        self.start.plus_micros(self.airtime_us)
    }

    fn is_aux(&self) -> bool {
        !PRIMARY_CHANNELS.contains(&self.channel)
    }
}

#[derive(Debug, Clone)]
pub enum FrameBody {
    Network(NetworkPdu),
    ExtInd {
        aux_frame_id: u64,
        aux_channel: u8,
        aux_start: SimTime,
        aux_end: SimTime,
    },
}

#[derive(Debug, Clone)]
pub enum EventKind {
    AdvDue(NodeId),
    EventComplete { node: NodeId, job_id: u64 },
    FrameStart(Box<FrameSpec>),
    FrameEnd { frame_id: u64 },
    MobilityTick,
    StartExchange {
        node: NodeId,
        dst: Address,
        mode: ExchangeMode,
        payload_bytes: usize,
    },
    PublishData {
        node: NodeId,
        dst: Address,
        payload_bytes: usize,
        ttl: Option<u8>,
    },
    RetryExchange { node: NodeId, exchange: u32 },
    SegRetryTimer { node: NodeId, seqauth: u64 },
    BlockAckTimer { node: NodeId, src: Address, seqauth: u64 },
    ReassemblyExpire { node: NodeId, src: Address, seqauth: u64 },
    BeaconDue { node: NodeId },
    CoverageTick { node: NodeId },
    PublishCandidacy { node: NodeId, group: Address },
    ElectionDecide { node: NodeId },
    StartRecruit { leader: NodeId, k: u8, formation: Address },
    RecruitDeadline { leader: NodeId },
    /// Publish data into the formation group; only the recruiting leader
    /// acts on it.
    FormationData { node: NodeId, payload_bytes: usize },
}

struct ActiveFrame {
    spec: FrameSpec,
    end: SimTime,
    positions: Arc<Vec<Position>>,
}

// --- world --------------------------------------------------------------------

/// Run-wide parameters shared by every node.
#[derive(Debug, Clone)]
pub struct WorldParams {
    pub master_seed: u64,
    pub propagation: PropagationParams,
    pub adv: AdvParams,
    pub scan: ScanParams,
    pub ext: ExtAdvParams,
    pub ext_enabled: bool,
    pub relay: RelayPolicy,
    /// Payload size of generated command/status messages.
    pub message_bytes: usize,
    /// Extra status transmissions per received group command.
    pub group_status_retries: u8,
    pub rssi_sample_interval_us: u64,
}

impl Default for WorldParams {
    fn default() -> Self {
        WorldParams {
            master_seed: 1,
            propagation: PropagationParams::default(),
            adv: AdvParams::default(),
            scan: ScanParams::default(),
            ext: ExtAdvParams::default(),
            ext_enabled: false,
            relay: RelayPolicy::default(),
            message_bytes: 11,
            group_status_retries: 0,
            rssi_sample_interval_us: crate::metrics::DEFAULT_RSSI_SAMPLE_INTERVAL_US,
        }
    }
}

pub struct World {
    pub params: WorldParams,
    pub nodes: Vec<Node>,
    queue: EventQueue<EventKind>,
    active: Vec<ActiveFrame>,
    frame_ends_since_prune: u32,
    next_frame_id: u64,
    next_job_id: u64,
    next_msg_id: u64,
    next_seqauth: u64,
    next_exchange: u32,
    shadow: BTreeMap<(u16, u16), f64>,
    positions: Arc<Vec<Position>>,
    positions_dirty: bool,
    addr_index: BTreeMap<Address, usize>,
    pub metrics: MetricsCollector,
}

impl Simulation for World {
    type Event = EventKind;

    fn queue(&mut self) -> &mut EventQueue<EventKind> {
        &mut self.queue
    }

    fn handle(&mut self, at: SimTime, event: EventKind) {
        self.dispatch(at, event);
    }
}

impl World {
    pub fn new(params: WorldParams) -> Self {
        let mut metrics = MetricsCollector::new();
        metrics.rssi_sample_interval_us = params.rssi_sample_interval_us;
        World {
            params,
            nodes: Vec::new(),
            queue: EventQueue::new(),
            active: Vec::new(),
            frame_ends_since_prune: 0,
            next_frame_id: 0,
            next_job_id: 0,
            next_msg_id: 0,
            next_exchange: 0,
            next_seqauth: 0,
            shadow: BTreeMap::new(),
            positions: Arc::new(Vec::new()),
            positions_dirty: true,
            addr_index: BTreeMap::new(),
            metrics,
        }
    }

    pub fn now(&self) -> SimTime {
        self.queue.clock()
    }

    pub fn add_node(&mut self, setup: NodeSetup) -> NodeId {
        let idx = self.nodes.len();
        let id = NodeId(idx as u16);
        let unicast = Address(0x0001 + idx as u16);
        let seed = self.params.master_seed;
        let node = Node {
            id,
            unicast,
            adv: self.params.adv,
            scan: self.params.scan,
            net: NetState {
                unicast_addr: unicast,
                subscriptions: setup.subscriptions.into_iter().collect(),
                subnets: setup.subnets.into_iter().collect(),
                relay_enabled: setup.relay_enabled,
                cache: Default::default(),
                replay: Default::default(),
            },
            publish_subnet: SubnetId(0),
            blacklisted: false,
            position: setup.position,
            mobility: MobilityState::new(setup.mobility),
            bearer: BearerState::new(),
            next_seq: 0,
            reassembler: Reassembler::new(),
            seg_tx: BTreeMap::new(),
            exchanges: BTreeMap::new(),
            responder: setup.responder,
            aux_listens: Vec::new(),
            app: AppState::default(),
            adv_delay_stream: RandomStream::derive(seed, id, StreamPurpose::AdvDelay),
            channel_stream: RandomStream::derive(seed, id, StreamPurpose::ChannelPick),
            loss_stream: RandomStream::derive(seed, id, StreamPurpose::Loss),
            mobility_stream: RandomStream::derive(seed, id, StreamPurpose::Mobility),
        };
        let first_subnet = node.net.subnets.keys().next().copied();
        let mut node = node;
        if let Some(s) = first_subnet {
            node.publish_subnet = s;
        }
        self.addr_index.insert(unicast, idx);
        self.nodes.push(node);
        self.positions_dirty = true;
        id
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[usize::from(id.0)]
    }

    pub fn node_mut(&mut self, id: NodeId) -> &mut Node {
        &mut self.nodes[usize::from(id.0)]
    }

    pub fn node_by_addr(&self, addr: Address) -> Option<NodeId> {
        self.addr_index.get(&addr).map(|&i| NodeId(i as u16))
    }

    pub fn schedule(&mut self, at: SimTime, event: EventKind) {
        self.queue.schedule(at, event);
    }

    /// Kick off the periodic mobility integration if any node moves.
    pub fn start_mobility(&mut self) {
        if self.nodes.iter().any(|n| !n.mobility.model.is_static()) {
            let at = self.now().plus_micros(MOBILITY_TICK_US);
            self.queue.schedule(at, EventKind::MobilityTick);
        }
    }

    pub fn run_until(&mut self, until: SimTime) -> RunSummary {
        run(self, until)
    }

    fn alloc_msg_id(&mut self) -> u64 {
        self.next_msg_id += 1;
        self.next_msg_id
    }

    fn alloc_frame_id(&mut self) -> u64 {
        self.next_frame_id += 1;
        self.next_frame_id
    }

    fn shadow_db(&mut self, a: NodeId, b: NodeId) -> f64 {
        let sigma = self.params.propagation.shadowing_sigma_db;
        if sigma == 0.0 {
            return 0.0;
        }
        let key = if a.0 <= b.0 { (a.0, b.0) } else { (b.0, a.0) };
        let seed = self.params.master_seed;
        *self
            .shadow
            .entry(key)
            .or_insert_with(|| link_shadow_db(seed, a, b, sigma))
    }

    fn refresh_positions(&mut self) {
        if self.positions_dirty {
            self.positions = Arc::new(self.nodes.iter().map(|n| n.position).collect());
            self.positions_dirty = false;
        }
    }

    /// Current subscribers of a group address, minus the publisher.
    fn expected_recipients(&self, publisher: NodeId, dst: Address) -> Vec<Address> {
        if dst.is_unicast() {
            return vec![dst];
        }
        self.nodes
            .iter()
            .filter(|n| n.id != publisher && n.net.subscriptions.contains(&dst))
            .map(|n| n.unicast)
            .collect()
    }

    // --- publish path ---------------------------------------------------------

    /// Publish an access payload from `node` to `dst`. Registers the message
    /// for metrics unless `msg_id` names an already-registered message (a
    /// retry). Returns the message id.
    #[allow(clippy::too_many_arguments)]
    pub fn publish(
        &mut self,
        node_id: NodeId,
        dst: Address,
        payload: Vec<u8>,
        mode: MsgMode,
        ttl: Option<u8>,
        n_events: u8,
        msg_id: Option<u64>,
    ) -> Result<u64, PublishError> {
        let now = self.now();
        let idx = usize::from(node_id.0);
        if self.nodes[idx].net.subnets.is_empty() {
            return Err(PublishError::Unprovisioned(node_id.0));
        }
        let max_unseg = if self.params.ext_enabled {
            UNSEG_MAX_EXT
        } else {
            UNSEG_MAX_LEGACY
        };
        self.next_seqauth += 1;
        let seqauth = self.next_seqauth;
        let units = segment_payload(&payload, max_unseg, seqauth)?;
        let msg_id = match msg_id {
            Some(id) => id,
            None => self.alloc_msg_id(),
        };
        let ttl = ttl.unwrap_or(self.params.relay.ttl_initial_default);
        let expected = self.expected_recipients(node_id, dst);
        {
            let node = &self.nodes[idx];
            self.metrics.register_message(
                msg_id,
                node_id,
                node.unicast,
                dst,
                mode,
                now,
                expected,
            );
        }
        let segmented = units.len() > 1;
        for unit in &units {
            let pdu = self.build_pdu(idx, dst, ttl, unit.clone(), msg_id);
            self.enqueue_pdu(idx, pdu, n_events);
        }
        if segmented {
            let node = &mut self.nodes[idx];
            node.seg_tx.insert(
                seqauth,
                SegTxState {
                    seqauth,
                    dst,
                    segments: units,
                    acked: 0,
                    retries_left: MAX_BLOCK_RETRIES,
                    ttl,
                    n_events,
                    msg_id,
                    done: false,
                    last_ack_at: None,
                },
            );
            self.queue.schedule(
                now.plus_micros(SEG_RETRY_TIMER_US),
                EventKind::SegRetryTimer { node: node_id, seqauth },
            );
        }
        Ok(msg_id)
    }

    fn build_pdu(
        &mut self,
        idx: usize,
        dst: Address,
        ttl: u8,
        transport: TransportPdu,
        msg_id: u64,
    ) -> NetworkPdu {
        let node = &mut self.nodes[idx];
        let subnet = node.publish_subnet;
        let epoch = node.net.subnets.get(&subnet).copied().unwrap_or(0);
        let seq = node.alloc_seq();
        // Self-insert so echoes relayed back are cache duplicates and the
        // publisher never self-delivers.
        node.net.cache.check_insert(node.unicast, seq);
        NetworkPdu {
            subnet,
            epoch,
            ttl,
            seq,
            src: node.unicast,
            dst,
            transport,
            meta: PduMeta { msg_id, ttl_initial: ttl },
        }
    }

    fn enqueue_pdu(&mut self, idx: usize, pdu: NetworkPdu, n_events: u8) {
        let now = self.now();
        let node = &mut self.nodes[idx];
        let depth = node.adv.queue_depth;
        self.next_job_id += 1;
        let accepted = node
            .bearer
            .enqueue_with_id(self.next_job_id, pdu, n_events, now, depth);
        if accepted {
            self.kick_bearer(idx);
        } else {
            self.metrics.count_queue_drop(NodeId(idx as u16));
        }
    }

    /// Ensure an AdvDue is scheduled if the bearer has work.
    fn kick_bearer(&mut self, idx: usize) {
        let now = self.now();
        let node = &self.nodes[idx];
        if node.bearer.event_active {
            return; // EventComplete will kick again
        }
        let at = match node.bearer.eligible_job(now) {
            Some(_) => now,
            None => match node.bearer.next_wake() {
                Some(wake) => wake,
                None => return,
            },
        };
        self.queue
            .schedule(at, EventKind::AdvDue(NodeId(idx as u16)));
    }

    // --- event dispatch ---------------------------------------------------------

    fn dispatch(&mut self, now: SimTime, event: EventKind) {
        match event {
            EventKind::AdvDue(node) => self.on_adv_due(usize::from(node.0), now),
            EventKind::EventComplete { node, job_id } => {
                self.on_event_complete(usize::from(node.0), job_id)
            }
            EventKind::FrameStart(spec) => self.on_frame_start(*spec),
            EventKind::FrameEnd { frame_id } => self.on_frame_end(frame_id, now),
            EventKind::MobilityTick => self.on_mobility_tick(now),
            EventKind::StartExchange {
                node,
                dst,
                mode,
                payload_bytes,
            } => {
                self.start_exchange(node, dst, mode, payload_bytes);
            }
            EventKind::PublishData {
                node,
                dst,
                payload_bytes,
                ttl,
            } => {
                let msg_id = self.next_msg_id + 1;
                let payload = encode(&AccessMsg::Data { tag: msg_id as u32 }, payload_bytes);
                let n_events = self.nodes[usize::from(node.0)].adv.n_events_source;
                let _ = self.publish(node, dst, payload, MsgMode::Publish, ttl, n_events, None);
            }
            EventKind::RetryExchange { node, exchange } => self.on_retry_exchange(node, exchange, now),
            EventKind::SegRetryTimer { node, seqauth } => self.on_seg_retry(node, seqauth, now),
            EventKind::BlockAckTimer { node, src, seqauth } => {
                self.on_block_ack_timer(node, src, seqauth, now)
            }
            EventKind::ReassemblyExpire { node, src, seqauth } => {
                self.on_reassembly_expire(node, src, seqauth, now)
            }
            EventKind::BeaconDue { node } => self.on_beacon_due(node, now),
            EventKind::CoverageTick { node } => self.on_coverage_tick(node, now),
            EventKind::PublishCandidacy { node, group } => self.on_publish_candidacy(node, group),
            EventKind::ElectionDecide { node } => {
                let n = &mut self.nodes[usize::from(node.0)];
                if let Some(election) = n.app.election.as_mut() {
                    election.decided = elect_leader(&election.heard);
                    election.done = true;
                }
            }
            EventKind::StartRecruit { leader, k, formation } => {
                self.on_start_recruit(leader, k, formation, now)
            }
            EventKind::RecruitDeadline { leader } => {
                let n = &mut self.nodes[usize::from(leader.0)];
                if let Some(recruit) = n.app.recruit.as_mut() {
                    recruit.closed = true;
                }
            }
            EventKind::FormationData { node, payload_bytes } => {
                let idx = usize::from(node.0);
                if let Some(formation) = self.nodes[idx].app.recruit.as_ref().map(|r| r.formation)
                {
                    let msg_id = self.next_msg_id + 1;
                    let payload = encode(&AccessMsg::Data { tag: msg_id as u32 }, payload_bytes);
                    let n_events = self.nodes[idx].adv.n_events_source;
                    let _ =
                        self.publish(node, formation, payload, MsgMode::Publish, None, n_events, None);
                }
            }
        }
    }

    // --- bearer events ----------------------------------------------------------

    fn on_adv_due(&mut self, idx: usize, now: SimTime) {
        if self.nodes[idx].bearer.event_active {
            return;
        }
        let Some(job_pos) = self.nodes[idx].bearer.eligible_job(now) else {
            // Nothing due yet; wake when the earliest job becomes eligible.
            if let Some(wake) = self.nodes[idx].bearer.next_wake() {
                if wake > now {
                    self.queue
                        .schedule(wake, EventKind::AdvDue(NodeId(idx as u16)));
                }
            }
            return;
        };
        let ext = self.params.ext_enabled;
        let (job_id, pdu, delay) = {
            let node = &mut self.nodes[idx];
            let max_delay = node.adv.adv_delay_max_us;
            let delay = node.adv_delay_stream.draw_range(0, max_delay);
            let job = node.bearer.job_mut(job_pos);
            (job.id, job.pdu.clone(), delay)
        };
        let interval = self.nodes[idx].adv.adv_interval_us;
        let next_eligible = now.plus_micros(interval + delay);
        self.nodes[idx]
            .bearer
            .job_mut(job_pos)
            .next_eligible = next_eligible;
        self.nodes[idx].bearer.event_active = true;

        let event_end = if ext {
            self.plan_ext_event(idx, now, &pdu)
        } else {
            self.plan_legacy_event(idx, now, &pdu)
        };
        self.queue.schedule(
            event_end,
            EventKind::EventComplete {
                node: NodeId(idx as u16),
                job_id,
            },
        );
    }

    fn plan_legacy_event(&mut self, idx: usize, t0: SimTime, pdu: &NetworkPdu) -> SimTime {
        let gap = self.nodes[idx].adv.inter_channel_gap_us;
        let airtime = airtime_us(pdu.wire_bytes(), PhyMode::Uncoded1M);
        let step = airtime + gap;
        let mut end = t0;
        for (i, &channel) in PRIMARY_CHANNELS.iter().enumerate() {
            let start = t0.plus_micros(i as u64 * step);
            let frame_id = self.alloc_frame_id();
            end = start.plus_micros(airtime);
            self.queue.schedule(
                start,
                EventKind::FrameStart(Box::new(FrameSpec {
                    frame_id,
                    tx: NodeId(idx as u16),
                    channel,
                    phy: PhyMode::Uncoded1M,
                    start,
                    airtime_us: airtime,
                    body: FrameBody::Network(pdu.clone()),
                })),
            );
        }
        end
    }

    fn plan_ext_event(&mut self, idx: usize, t0: SimTime, pdu: &NetworkPdu) -> SimTime {
        let ext = self.params.ext;
        let gap = self.nodes[idx].adv.inter_channel_gap_us;
        let aux_channel = {
            let node = &mut self.nodes[idx];
            draw_aux_channel(&mut node.channel_stream)
        };
        let ind_airtime = airtime_us(ext.ext_ind_bytes, PhyMode::Uncoded1M);
        let aux_airtime = airtime_us(pdu.wire_bytes(), ext.data_phy);
        let aux_start = t0.plus_micros(ext.aux_offset_us);
        let aux_end = aux_start.plus_micros(aux_airtime);
        let aux_frame_id = self.alloc_frame_id();
        let step = ind_airtime + gap;
        let ind_end = t0.plus_micros(2 * step + ind_airtime);
        debug_assert!(
            ind_end <= aux_start,
            "ext indications must finish before the aux frame"
        );
        for (i, &channel) in PRIMARY_CHANNELS.iter().enumerate() {
            let start = t0.plus_micros(i as u64 * step);
            let frame_id = self.alloc_frame_id();
            self.queue.schedule(
                start,
                EventKind::FrameStart(Box::new(FrameSpec {
                    frame_id,
                    tx: NodeId(idx as u16),
                    channel,
                    phy: PhyMode::Uncoded1M,
                    start,
                    airtime_us: ind_airtime,
                    body: FrameBody::ExtInd {
                        aux_frame_id,
                        aux_channel,
                        aux_start,
                        aux_end,
                    },
                })),
            );
        }
        self.queue.schedule(
            aux_start,
            EventKind::FrameStart(Box::new(FrameSpec {
                frame_id: aux_frame_id,
                tx: NodeId(idx as u16),
                channel: aux_channel,
                phy: ext.data_phy,
                start: aux_start,
                airtime_us: aux_airtime,
                body: FrameBody::Network(pdu.clone()),
            })),
        );
        aux_end
    }

    fn on_event_complete(&mut self, idx: usize, job_id: u64) {
        {
            let node = &mut self.nodes[idx];
            node.bearer.event_active = false;
            if let Some(pos) = node.bearer.position_of(job_id) {
                let job = node.bearer.job_mut(pos);
                job.remaining_events = job.remaining_events.saturating_sub(1);
                if job.remaining_events == 0 {
                    node.bearer.remove_job(pos);
                }
            }
        }
        self.kick_bearer(idx);
    }

    // --- radio events -----------------------------------------------------------

    fn on_frame_start(&mut self, spec: FrameSpec) {
        self.refresh_positions();
        let end = spec.end();
        let frame_id = spec.frame_id;
        self.metrics.frames_transmitted += 1;
        if self.metrics.frame_log.is_some() {
            if let FrameBody::Network(pdu) = &spec.body {
                self.metrics.log_frame(crate::metrics::FrameLogEntry {
                    t: spec.start,
                    tx: spec.tx,
                    channel: spec.channel,
                    src: pdu.src,
                    seq: pdu.seq,
                    msg_id: pdu.meta.msg_id,
                });
            }
        }
        self.active.push(ActiveFrame {
            spec,
            end,
            positions: Arc::clone(&self.positions),
        });
        self.queue.schedule(end, EventKind::FrameEnd { frame_id });
    }

    fn on_frame_end(&mut self, frame_id: u64, now: SimTime) {
        let Some(pos) = self.active.iter().position(|f| f.spec.frame_id == frame_id) else {
            return;
        };
        let frame_positions = Arc::clone(&self.active[pos].positions);
        let spec = self.active[pos].spec.clone();
        let start = spec.start;
        let end = self.active[pos].end;
        let tx_idx = usize::from(spec.tx.0);
        let tx_pos = frame_positions[tx_idx];

        // One pass over the active list: who is transmitting during this
        // window (half-duplex gate) and which same-channel frames overlap it.
        let mut busy_tx: BTreeSet<u16> = BTreeSet::new();
        let mut interferer_frames: Vec<(usize, Position)> = Vec::new();
        for other in &self.active {
            if !intervals_overlap(other.spec.start, other.end, start, end) {
                continue;
            }
            busy_tx.insert(other.spec.tx.0);
            if other.spec.frame_id != frame_id && other.spec.channel == spec.channel {
                let o_tx = usize::from(other.spec.tx.0);
                interferer_frames.push((o_tx, other.positions[o_tx]));
            }
        }

        for rx_idx in 0..self.nodes.len() {
            if rx_idx == tx_idx {
                continue;
            }
            let rx_id = NodeId(rx_idx as u16);
            let rx_pos = frame_positions[rx_idx];
            let gate = if busy_tx.contains(&(rx_idx as u16)) {
                ChannelGate::NotScanning
            } else {
                self.channel_gate(rx_idx, &spec, start, end)
            };
            let shadow = self.shadow_db(spec.tx, rx_id);
            let rssi = link_rssi(&self.params.propagation, &tx_pos, &rx_pos, shadow);
            let mut interferers = Vec::with_capacity(interferer_frames.len());
            for (o_tx, o_pos) in &interferer_frames {
                if *o_tx == rx_idx {
                    continue; // own overlapping tx already gated
                }
                let o_shadow = self.shadow_db(NodeId(*o_tx as u16), rx_id);
                interferers.push(Interferer {
                    rssi_at_receiver: link_rssi(
                        &self.params.propagation,
                        o_pos,
                        &rx_pos,
                        o_shadow,
                    ),
                });
            }
            let loss_draw = self.nodes[rx_idx].loss_stream.next_f64();
            match reception_outcome(&self.params.propagation, gate, rssi, &interferers, loss_draw) {
                ReceptionOutcome::Received { rssi } => {
                    self.metrics.sample_rssi(now, spec.tx, rx_id, rssi);
                    match &spec.body {
                        FrameBody::Network(pdu) => {
                            self.network_receive(rx_idx, pdu.clone(), rssi, now);
                        }
                        FrameBody::ExtInd {
                            aux_frame_id,
                            aux_channel,
                            aux_start,
                            aux_end,
                        } => {
                            let node = &mut self.nodes[rx_idx];
                            let already = node
                                .aux_listens
                                .iter()
                                .any(|l| l.aux_frame_id == *aux_frame_id);
                            if !already {
                                node.aux_listens.push(AuxListen {
                                    aux_frame_id: *aux_frame_id,
                                    channel: *aux_channel,
                                    from: *aux_start,
                                    until: *aux_end,
                                    registered_at: now,
                                });
                            }
                        }
                    }
                }
                ReceptionOutcome::Miss { reason } => {
                    self.metrics.count_radio_miss(reason);
                }
            }
        }

        // Expired aux listens die with the frame that defined them.
        if spec.is_aux() {
            for node in &mut self.nodes {
                node.aux_listens.retain(|l| l.until > now);
            }
        }

        self.frame_ends_since_prune += 1;
        if self.frame_ends_since_prune >= 64 {
            self.frame_ends_since_prune = 0;
            self.active
                .retain(|f| f.end.as_micros() + ACTIVE_RETENTION_US >= now.as_micros());
        }
    }

    fn channel_gate(&self, rx_idx: usize, spec: &FrameSpec, start: SimTime, end: SimTime) -> ChannelGate {
        let node = &self.nodes[rx_idx];
        if spec.is_aux() {
            let matched = node.aux_listens.iter().any(|l| {
                l.aux_frame_id == spec.frame_id && l.registered_at <= start
            });
            return if matched {
                ChannelGate::OnChannel
            } else {
                ChannelGate::NotScanning
            };
        }
        // Retuned away to a secondary channel during this window?
        if node
            .aux_listens
            .iter()
            .any(|l| intervals_overlap(l.from, l.until, start, end))
        {
            return ChannelGate::NotScanning;
        }
        if scanner_covers(&node.scan, spec.channel, start, end) {
            return ChannelGate::OnChannel;
        }
        match scanner_channel_at(&node.scan, start) {
            ScannerState::Channel(ch) if ch != spec.channel => ChannelGate::WrongChannel,
            _ => ChannelGate::NotScanning,
        }
    }

    // --- network layer ------------------------------------------------------------

    fn network_receive(&mut self, rx_idx: usize, pdu: NetworkPdu, rssi: f64, now: SimTime) {
        let relay_policy = self.params.relay;
        let decision = {
            let node = &mut self.nodes[rx_idx];
            process_frame(&mut node.net, &pdu, &relay_policy)
        };
        let rx_id = NodeId(rx_idx as u16);
        if let Some(reason) = decision.drop {
            self.metrics.count_drop(rx_id, reason);
            return;
        }
        if decision.ttl_floor_hit {
            self.metrics.count_drop(rx_id, DropReason::TtlFloor);
        }
        if let Some(relayed) = decision.relay {
            let n_events = relay_policy.relay_n_events;
            self.enqueue_pdu(rx_idx, relayed, n_events);
        }
        if decision.deliver {
            self.transport_receive(rx_idx, &pdu, rssi, now);
        }
    }

    // --- transport layer ------------------------------------------------------------

    fn transport_receive(&mut self, rx_idx: usize, pdu: &NetworkPdu, rssi: f64, now: SimTime) {
        let rx_id = NodeId(rx_idx as u16);
        let hops = pdu.meta.ttl_initial - pdu.ttl;
        match &pdu.transport {
            TransportPdu::Unsegmented(bytes) => {
                let bytes = bytes.clone();
                self.access_deliver(rx_idx, pdu.src, bytes, rssi, now, hops, pdu.meta.msg_id);
            }
            TransportPdu::Segment {
                seqauth,
                index,
                count,
                chunk,
            } => {
                let (intake, first_seen) = {
                    let node = &mut self.nodes[rx_idx];
                    let first = node.reassembler.bitmap(pdu.src, *seqauth).is_none();
                    (
                        node.reassembler
                            .on_segment(pdu.src, *seqauth, *index, *count, chunk, now),
                        first,
                    )
                };
                if first_seen {
                    self.queue.schedule(
                        now.plus_micros(crate::transport::REASSEMBLY_TIMEOUT_US),
                        EventKind::ReassemblyExpire {
                            node: rx_id,
                            src: pdu.src,
                            seqauth: *seqauth,
                        },
                    );
                }
                if intake.arm_ack_timer {
                    self.queue.schedule(
                        now.plus_micros(BLOCK_ACK_TIMER_US),
                        EventKind::BlockAckTimer {
                            node: rx_id,
                            src: pdu.src,
                            seqauth: *seqauth,
                        },
                    );
                }
                if intake.ack_now {
                    self.send_block_ack(rx_idx, pdu.src, *seqauth);
                }
                if let Some(payload) = intake.completed {
                    self.access_deliver(rx_idx, pdu.src, payload, rssi, now, hops, pdu.meta.msg_id);
                }
            }
            TransportPdu::BlockAck { seqauth, bitmap } => {
                let rx_unicast = self.nodes[rx_idx].unicast;
                self.metrics
                    .record_delivery(pdu.meta.msg_id, rx_unicast, now, hops);
                self.on_block_ack(rx_idx, *seqauth, *bitmap, now);
            }
        }
    }

    /// Send the current receive bitmap for `(src, seqauth)` back to `src`,
    /// throttled to one ack per block per ack window.
    fn send_block_ack(&mut self, idx: usize, src: Address, seqauth: u64) {
        let now = self.now();
        if !self.nodes[idx].reassembler.ack_allowed(src, seqauth, now) {
            return;
        }
        self.nodes[idx].reassembler.note_ack_sent(src, seqauth, now);
        let to = src;
        let bitmap = self.nodes[idx].reassembler.bitmap(src, seqauth).unwrap_or(0);
        let node_id = NodeId(idx as u16);
        let msg_id = self.alloc_msg_id();
        {
            let node = &self.nodes[idx];
            self.metrics.register_message(
                msg_id,
                node_id,
                node.unicast,
                to,
                MsgMode::Control,
                self.now(),
                vec![to],
            );
        }
        let ttl = self.params.relay.ttl_initial_default;
        let n_events = self.nodes[idx].adv.n_events_source;
        let pdu = self.build_pdu(idx, to, ttl, TransportPdu::BlockAck { seqauth, bitmap }, msg_id);
        self.enqueue_pdu(idx, pdu, n_events);
    }

    fn on_block_ack(&mut self, idx: usize, seqauth: u64, bitmap: u32, now: SimTime) {
        let missing: Vec<TransportPdu> = {
            let node = &mut self.nodes[idx];
            let Some(seg) = node.seg_tx.get_mut(&seqauth) else {
                return;
            };
            if seg.done {
                return;
            }
            seg.acked |= bitmap;
            seg.last_ack_at = Some(now);
            if seg.all_acked() {
                seg.done = true;
                return;
            }
            if seg.retries_left == 0 {
                return;
            }
            // Retransmit only the gaps that are not still waiting on our own
            // bearer (an early ack can beat the tail segments onto the air).
            let pending: Vec<usize> = seg
                .missing_indexes()
                .into_iter()
                .filter(|i| !node.bearer.holds_segment(seqauth, *i as u8))
                .collect();
            if pending.is_empty() {
                return;
            }
            seg.retries_left -= 1;
            pending.iter().map(|i| seg.segments[*i].clone()).collect()
        };
        let (dst, ttl, n_events, msg_id) = {
            let seg = &self.nodes[idx].seg_tx[&seqauth];
            (seg.dst, seg.ttl, seg.n_events, seg.msg_id)
        };
        let _ = now;
        for unit in missing {
            let pdu = self.build_pdu(idx, dst, ttl, unit, msg_id);
            self.enqueue_pdu(idx, pdu, n_events);
        }
    }

    fn on_seg_retry(&mut self, node_id: NodeId, seqauth: u64, now: SimTime) {
        let idx = usize::from(node_id.0);
        let missing: Vec<TransportPdu> = {
            let node = &mut self.nodes[idx];
            let done = match node.seg_tx.get(&seqauth) {
                None => return,
                Some(seg) => seg.done || seg.retries_left == 0,
            };
            if done {
                node.seg_tx.remove(&seqauth);
                return;
            }
            let seg = node.seg_tx.get_mut(&seqauth).expect("checked above");
            // While acks are flowing, gap retransmission is ack-driven; the
            // timer only steps in after a silent window.
            let acks_alive = seg
                .last_ack_at
                .map(|t| now.saturating_sub(t) < SEG_RETRY_TIMER_US)
                .unwrap_or(false);
            let pending: Vec<usize> = if acks_alive {
                Vec::new()
            } else {
                seg.missing_indexes()
                    .into_iter()
                    .filter(|i| !node.bearer.holds_segment(seqauth, *i as u8))
                    .collect()
            };
            if !pending.is_empty() {
                seg.retries_left -= 1;
            }
            pending.iter().map(|i| seg.segments[*i].clone()).collect()
        };
        let (dst, ttl, n_events, msg_id) = {
            let seg = &self.nodes[idx].seg_tx[&seqauth];
            (seg.dst, seg.ttl, seg.n_events, seg.msg_id)
        };
        for unit in missing {
            let pdu = self.build_pdu(idx, dst, ttl, unit, msg_id);
            self.enqueue_pdu(idx, pdu, n_events);
        }
        self.queue.schedule(
            now.plus_micros(SEG_RETRY_TIMER_US),
            EventKind::SegRetryTimer { node: node_id, seqauth },
        );
    }

    fn on_block_ack_timer(&mut self, node_id: NodeId, src: Address, seqauth: u64, now: SimTime) {
        let _ = now;
        let idx = usize::from(node_id.0);
        if self.nodes[idx].reassembler.is_incomplete(src, seqauth) {
            self.send_block_ack(idx, src, seqauth);
        }
    }

    fn on_reassembly_expire(&mut self, node_id: NodeId, src: Address, seqauth: u64, now: SimTime) {
        let idx = usize::from(node_id.0);
        let node = &mut self.nodes[idx];
        if let Some(deadline) = node.reassembler.deadline(src, seqauth) {
            if deadline <= now {
                node.reassembler.expire(src, seqauth, now);
            } else {
                self.queue.schedule(
                    deadline,
                    EventKind::ReassemblyExpire { node: node_id, src, seqauth },
                );
            }
        }
    }

    // --- access layer / applications ---------------------------------------------

    #[allow(clippy::too_many_arguments)]
    fn access_deliver(
        &mut self,
        rx_idx: usize,
        src: Address,
        bytes: Vec<u8>,
        rssi: f64,
        now: SimTime,
        hops: u8,
        msg_id: u64,
    ) {
        let rx_id = NodeId(rx_idx as u16);
        let rx_unicast = self.nodes[rx_idx].unicast;
        self.metrics.record_delivery(msg_id, rx_unicast, now, hops);
        self.metrics.log_payload(msg_id, rx_id, &bytes);
        match decode(&bytes) {
            Some(AccessMsg::Command { exchange }) => {
                if self.nodes[rx_idx].responder {
                    let payload =
                        encode(&AccessMsg::Status { exchange }, self.params.message_bytes);
                    let n_events = self.nodes[rx_idx].adv.n_events_source;
                    let sends = 1 + u32::from(self.params.group_status_retries);
                    for _ in 0..sends {
                        let _ = self.publish(
                            rx_id,
                            src,
                            payload.clone(),
                            MsgMode::Status,
                            None,
                            n_events,
                            None,
                        );
                    }
                }
            }
            Some(AccessMsg::Status { exchange }) => {
                // Statuses are recorded against the responding server; a
                // unicast exchange completes on its first status, a group
                // exchange keeps collecting per-server statuses.
                let cmd_msg_id = {
                    let node = &mut self.nodes[rx_idx];
                    match node.exchanges.get_mut(&exchange) {
                        Some(ex) => {
                            if ex.mode == ExchangeMode::Unicast {
                                ex.done = true;
                            }
                            Some(ex.msg_id)
                        }
                        None => None,
                    }
                };
                if let Some(cmd_msg_id) = cmd_msg_id {
                    self.metrics.record_status(cmd_msg_id, src, now);
                }
            }
            Some(AccessMsg::Beacon { sender, heard }) => {
                let my_id = rx_idx as u16;
                let node = &mut self.nodes[rx_idx];
                let entry = node
                    .app
                    .neighbor_table
                    .entry(sender)
                    .or_insert(NeighborEntry {
                        last_rssi_heard: rssi,
                        rssi_they_heard_me: None,
                        last_seen: now,
                    });
                entry.last_rssi_heard = rssi;
                entry.last_seen = now;
                if let Some((_, back)) = heard.iter().find(|(id, _)| *id == my_id) {
                    entry.rssi_they_heard_me = Some(f64::from(*back));
                }
            }
            Some(AccessMsg::Candidacy { node, fitness }) => {
                let rx = &mut self.nodes[rx_idx];
                if let Some(election) = rx.app.election.as_mut() {
                    if !election.done {
                        election.heard.insert(node, fitness);
                    }
                }
            }
            Some(AccessMsg::Recruit { k: _, formation: _ }) => {
                if self.nodes[rx_idx].app.volunteer_on_recruit {
                    let payload = encode(
                        &AccessMsg::Volunteer { node: rx_idx as u16 },
                        self.params.message_bytes,
                    );
                    let n_events = self.nodes[rx_idx].adv.n_events_source;
                    let _ = self.publish(
                        rx_id,
                        src,
                        payload,
                        MsgMode::Control,
                        None,
                        n_events,
                        None,
                    );
                }
            }
            Some(AccessMsg::Volunteer { node: volunteer }) => {
                let confirm = {
                    let leader = &mut self.nodes[rx_idx];
                    match leader.app.recruit.as_mut() {
                        Some(r) if !r.closed && now <= r.deadline => {
                            if !r.volunteers.contains(&volunteer) {
                                r.volunteers.push(volunteer);
                            }
                            if r.confirmed.len() < usize::from(r.k)
                                && !r.confirmed.contains(&volunteer)
                            {
                                r.confirmed.push(volunteer);
                                Some(r.formation)
                            } else {
                                None
                            }
                        }
                        _ => None,
                    }
                };
                if let Some(formation) = confirm {
                    let payload = encode(
                        &AccessMsg::Confirm { node: volunteer, formation },
                        self.params.message_bytes,
                    );
                    let dst = Address(0x0001 + volunteer);
                    let n_events = self.nodes[rx_idx].adv.n_events_source;
                    let _ = self.publish(
                        rx_id,
                        dst,
                        payload,
                        MsgMode::Control,
                        None,
                        n_events,
                        None,
                    );
                }
            }
            Some(AccessMsg::Confirm { node, formation }) => {
                if node == rx_idx as u16 {
                    let _ = self.subscribe(rx_id, formation);
                }
            }
            Some(AccessMsg::Data { .. }) | None => {}
        }
    }

    // --- acked exchanges ------------------------------------------------------------

    pub fn start_exchange(
        &mut self,
        node_id: NodeId,
        dst: Address,
        mode: ExchangeMode,
        payload_bytes: usize,
    ) -> u32 {
        let now = self.now();
        self.next_exchange += 1;
        let exchange = self.next_exchange;
        let payload = encode(&AccessMsg::Command { exchange }, payload_bytes);
        let msg_id = self.alloc_msg_id();
        let (msg_mode, n_events) = match mode {
            ExchangeMode::Unicast => (
                MsgMode::Unicast,
                self.nodes[usize::from(node_id.0)].adv.n_events_source,
            ),
            ExchangeMode::Group => (MsgMode::Group, GROUP_COMMAND_EVENTS),
        };
        self.nodes[usize::from(node_id.0)].exchanges.insert(
            exchange,
            ExchangeState {
                exchange,
                dst,
                payload: payload.clone(),
                mode,
                msg_id,
                t_first_publish: now,
                next_retry_us: UNICAST_RETRY_INITIAL_US,
                done: false,
            },
        );
        let _ = self.publish(node_id, dst, payload, msg_mode, None, n_events, Some(msg_id));
        if mode == ExchangeMode::Unicast {
            self.queue.schedule(
                now.plus_micros(UNICAST_RETRY_INITIAL_US),
                EventKind::RetryExchange { node: node_id, exchange },
            );
        }
        exchange
    }

    fn on_retry_exchange(&mut self, node_id: NodeId, exchange: u32, now: SimTime) {
        let idx = usize::from(node_id.0);
        let retry = {
            let node = &mut self.nodes[idx];
            match node.exchanges.get_mut(&exchange) {
                Some(ex) if !ex.done => {
                    let payload = ex.payload.clone();
                    let msg_id = ex.msg_id;
                    let dst = ex.dst;
                    ex.bump_retry();
                    Some((payload, msg_id, dst, ex.next_retry_us))
                }
                _ => None,
            }
        };
        if let Some((payload, msg_id, dst, next_delay)) = retry {
            // Retransmitting is pointless while the previous command PDU is
            // still queued on our own bearer, or while the segment layer is
            // still working the block; just check back later.
            let node = &self.nodes[idx];
            let still_pending = node.bearer.holds_message(msg_id)
                || node
                    .seg_tx
                    .values()
                    .any(|s| s.msg_id == msg_id && !s.done && s.retries_left > 0);
            if !still_pending {
                let n_events = self.nodes[idx].adv.n_events_source;
                let _ = self.publish(
                    node_id,
                    dst,
                    payload,
                    MsgMode::Unicast,
                    None,
                    n_events,
                    Some(msg_id),
                );
            }
            self.queue.schedule(
                now.plus_micros(next_delay),
                EventKind::RetryExchange { node: node_id, exchange },
            );
        }
    }

    // --- subscriptions / security -----------------------------------------------------

    pub fn subscribe(&mut self, node_id: NodeId, addr: Address) -> Result<(), PublishError> {
        if !addr.is_multicast() {
            return Err(PublishError::NotMulticast(addr));
        }
        self.nodes[usize::from(node_id.0)]
            .net
            .subscriptions
            .insert(addr);
        Ok(())
    }

    pub fn unsubscribe(&mut self, node_id: NodeId, addr: Address) {
        self.nodes[usize::from(node_id.0)]
            .net
            .subscriptions
            .remove(&addr);
    }

    /// Exclude `bad` from every subnet it shares: all other members bump
    /// their epoch; `bad` keeps the stale one and is flagged.
    pub fn blacklist_and_refresh(&mut self, bad: NodeId) {
        let bad_idx = usize::from(bad.0);
        let bad_subnets: Vec<SubnetId> = self.nodes[bad_idx].net.subnets.keys().copied().collect();
        for (idx, node) in self.nodes.iter_mut().enumerate() {
            if idx == bad_idx || node.blacklisted {
                continue;
            }
            for subnet in &bad_subnets {
                if let Some(epoch) = node.net.subnets.get_mut(subnet) {
                    *epoch += 1;
                }
            }
        }
        self.nodes[bad_idx].blacklisted = true;
    }

    // --- mobility / beacons / coverage --------------------------------------------------

    fn on_mobility_tick(&mut self, now: SimTime) {
        let mut moved = false;
        for node in &mut self.nodes {
            if node.mobility.model.is_static() {
                continue;
            }
            let next = node
                .mobility
                .step(node.position, MOBILITY_TICK_US, now, &mut node.mobility_stream);
            if next != node.position {
                node.position = next;
                moved = true;
            }
        }
        if moved {
            self.positions_dirty = true;
        }
        self.queue
            .schedule(now.plus_micros(MOBILITY_TICK_US), EventKind::MobilityTick);
    }

    fn on_beacon_due(&mut self, node_id: NodeId, now: SimTime) {
        let idx = usize::from(node_id.0);
        let Some(group) = self.nodes[idx].app.beacon_group else {
            return;
        };
        let period = self.nodes[idx]
            .app
            .coverage
            .map(|c| c.beacon_period_us)
            .unwrap_or(1_000_000);
        // Expire stale neighbors before reporting them.
        {
            let node = &mut self.nodes[idx];
            node.app
                .neighbor_table
                .retain(|_, e| now.saturating_sub(e.last_seen) <= NEIGHBOR_EXPIRY_PERIODS * period);
        }
        let heard: Vec<(u16, i8)> = {
            let node = &self.nodes[idx];
            let mut entries: Vec<(u16, f64)> = node
                .app
                .neighbor_table
                .iter()
                .map(|(id, e)| (*id, e.last_rssi_heard))
                .collect();
            entries.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
            entries
                .into_iter()
                .take(BEACON_MAX_NEIGHBORS)
                .map(|(id, rssi)| (id, rssi.clamp(-127.0, 0.0) as i8))
                .collect()
        };
        let payload = encode(
            &AccessMsg::Beacon { sender: node_id.0, heard },
            (self.params.message_bytes).max(15),
        );
        let n_events = self.nodes[idx].adv.n_events_source;
        let _ = self.publish(node_id, group, payload, MsgMode::Beacon, None, n_events, None);
        self.queue
            .schedule(now.plus_micros(period), EventKind::BeaconDue { node: node_id });
    }

    fn on_coverage_tick(&mut self, node_id: NodeId, now: SimTime) {
        let idx = usize::from(node_id.0);
        let Some(params) = self.nodes[idx].app.coverage else {
            return;
        };
        let decision = coverage_decide(&self.nodes[idx].app.neighbor_table, &params);
        match decision {
            CoverageDecision::Stay => {
                let node = &mut self.nodes[idx];
                if node.app.coverage_converged_at.is_none()
                    && coverage_degree(&node.app.neighbor_table, params.rssi_threshold_dbm)
                        >= params.target_degree
                {
                    node.app.coverage_converged_at = Some(now);
                }
            }
            CoverageDecision::MoveToward(target) => {
                let target_pos = self.nodes[usize::from(target.0)].position;
                let node = &mut self.nodes[idx];
                let (next, _) = move_toward(
                    node.position,
                    (target_pos.x, target_pos.y),
                    params.move_step_m,
                );
                node.position = next;
                node.app.coverage_moves += 1;
                node.app.coverage_converged_at = None;
                self.positions_dirty = true;
            }
        }
        self.queue.schedule(
            now.plus_micros(params.beacon_period_us),
            EventKind::CoverageTick { node: node_id },
        );
    }

    fn on_publish_candidacy(&mut self, node_id: NodeId, group: Address) {
        let idx = usize::from(node_id.0);
        let fitness = match self.nodes[idx].app.election.as_ref() {
            Some(e) => e.fitness,
            None => return,
        };
        // Candidates trivially know their own candidacy.
        if let Some(e) = self.nodes[idx].app.election.as_mut() {
            e.heard.insert(node_id.0, fitness);
        }
        let payload = encode(
            &AccessMsg::Candidacy { node: node_id.0, fitness },
            self.params.message_bytes,
        );
        let n_events = self.nodes[idx].adv.n_events_source;
        let _ = self.publish(node_id, group, payload, MsgMode::Control, None, n_events, None);
    }

    fn on_start_recruit(&mut self, leader: NodeId, k: u8, formation: Address, now: SimTime) {
        let idx = usize::from(leader.0);
        // When an election ran, only the node that elected itself recruits.
        if let Some(election) = self.nodes[idx].app.election.as_ref() {
            if election.done && election.decided != Some(leader.0) {
                return;
            }
        }
        let group = self.nodes[idx]
            .app
            .election
            .as_ref()
            .map(|e| e.group)
            .unwrap_or(formation);
        self.nodes[idx].app.recruit = Some(RecruitState {
            k,
            formation,
            volunteers: Vec::new(),
            confirmed: Vec::new(),
            deadline: now.plus_micros(RECRUIT_TIMEOUT_US),
            closed: false,
        });
        let payload = encode(&AccessMsg::Recruit { k, formation }, self.params.message_bytes);
        let n_events = self.nodes[idx].adv.n_events_source;
        let _ = self.publish(leader, group, payload, MsgMode::Control, None, n_events, None);
        self.queue.schedule(
            now.plus_micros(RECRUIT_TIMEOUT_US),
            EventKind::RecruitDeadline { leader },
        );
    }
}
