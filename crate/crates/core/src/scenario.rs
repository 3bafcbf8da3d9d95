//! Scenario library: deterministic topology generators, role assignment, and
//! world builders for each scenario key.

use crate::bearer::ScanParams;
use crate::engine::SimTime;
use crate::harness::{EffectiveConfig, GroupVariant, TrafficMode};
use crate::mobility::{MobilityModel, Rect};
use crate::radio::{link_rssi, Position, PropagationParams};
use crate::rng::{link_shadow_db, RandomStream, StreamPurpose};
use crate::transport::ExchangeMode;
use crate::types::{Address, NodeId, SubnetId};
use crate::world::{CoverageParams, ElectionState, EventKind, NodeSetup, World, WorldParams};

// Group addresses used by the scenario library.
pub const GROUP_ALL: Address = Address(0xC0FF);
pub const GROUP_CMD_MULTI: Address = Address(0xC000);
pub const GROUP_CMD_SINGLE: Address = Address(0xC001);
pub const ELECTION_GROUP: Address = Address(0xC010);
pub const FORMATION_GROUP: Address = Address(0xC020);
pub const BEACON_GROUP: Address = Address(0xC030);
pub const LINE_GROUP: Address = Address(0xC040);

/// Scenario keys accepted in configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    OfficeTwoFloor,
    GroupUnicastVsGroup,
    ManyToMany,
    ExtVsLegacy,
    MobilityVsStatic,
    CoverageDemo,
    FormationDemo,
}

impl ScenarioKind {
    pub fn parse(key: &str) -> Option<ScenarioKind> {
        Some(match key {
            "office_two_floor" => ScenarioKind::OfficeTwoFloor,
            "group_unicast_vs_group" => ScenarioKind::GroupUnicastVsGroup,
            "many_to_many" => ScenarioKind::ManyToMany,
            "ext_vs_legacy" => ScenarioKind::ExtVsLegacy,
            "mobility_vs_static" => ScenarioKind::MobilityVsStatic,
            "coverage_demo" => ScenarioKind::CoverageDemo,
            "formation_demo" => ScenarioKind::FormationDemo,
            _ => return None,
        })
    }

    pub fn key(self) -> &'static str {
        match self {
            ScenarioKind::OfficeTwoFloor => "office_two_floor",
            ScenarioKind::GroupUnicastVsGroup => "group_unicast_vs_group",
            ScenarioKind::ManyToMany => "many_to_many",
            ScenarioKind::ExtVsLegacy => "ext_vs_legacy",
            ScenarioKind::MobilityVsStatic => "mobility_vs_static",
            ScenarioKind::CoverageDemo => "coverage_demo",
            ScenarioKind::FormationDemo => "formation_demo",
        }
    }

    pub const ALL: [ScenarioKind; 7] = [
        ScenarioKind::OfficeTwoFloor,
        ScenarioKind::GroupUnicastVsGroup,
        ScenarioKind::ManyToMany,
        ScenarioKind::ExtVsLegacy,
        ScenarioKind::MobilityVsStatic,
        ScenarioKind::CoverageDemo,
        ScenarioKind::FormationDemo,
    ];
}

/// Indoor propagation profile the office scenarios were calibrated with: a
/// high path-loss exponent stands in for interior walls so the two-floor
/// layout spans multiple hops, and shadowing is folded into the per-frame
/// loss probability.
pub fn indoor_office_profile() -> PropagationParams {
    PropagationParams {
        path_loss_exponent: 5.0,
        shadowing_sigma_db: 0.0,
        background_loss_prob: 0.08,
        ..PropagationParams::default()
    }
}

// --- link graph helpers -------------------------------------------------------

/// Adjacency over `positions`: an edge wherever RSSI clears sensitivity
/// (with the run's frozen shadow draws).
pub fn link_graph(
    positions: &[Position],
    prop: &PropagationParams,
    seed: u64,
) -> Vec<Vec<usize>> {
    let n = positions.len();
    let mut adj = vec![Vec::new(); n];
    for a in 0..n {
        for b in (a + 1)..n {
            let shadow = link_shadow_db(
                seed,
                NodeId(a as u16),
                NodeId(b as u16),
                prop.shadowing_sigma_db,
            );
            let rssi = link_rssi(prop, &positions[a], &positions[b], shadow);
            if rssi >= prop.sensitivity_dbm {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
    }
    adj
}

/// Max shortest-path hop count over all pairs; None when disconnected.
pub fn hop_diameter(adj: &[Vec<usize>]) -> Option<usize> {
    let n = adj.len();
    let mut diameter = 0;
    for start in 0..n {
        let mut dist = vec![usize::MAX; n];
        let mut queue = std::collections::VecDeque::new();
        dist[start] = 0;
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        let ecc = *dist.iter().max().unwrap();
        if ecc == usize::MAX {
            return None;
        }
        diameter = diameter.max(ecc);
    }
    Some(diameter)
}

// --- office topology ------------------------------------------------------------

/// The 20-node two-floor office layout with role assignments and the
/// calibrated floor penalty.
#[derive(Debug, Clone)]
pub struct OfficeTopology {
    pub positions: Vec<Position>,
    pub controller: usize,
    pub single_hop_slaves: Vec<usize>,
    pub multi_hop_slaves: Vec<usize>,
    /// (sender, destination) index pairs for many-to-many traffic.
    pub m2m_pairs: Vec<(usize, usize)>,
    pub floor_penalty_db: f64,
    pub hop_diameter: usize,
}

// Office layout (20 m x 15 m per floor): the controller cluster sits on the
// left of floor 0; two bridge relays near the stairwell carry traffic to the
// floor-1 node above them. The bridges sit at the edge of the cluster's
// radio range, so flood waves reach them through a handful of marginal,
// collision-prone links - the weak spot between the two floors.
fn office_positions(seed: u64) -> Vec<Position> {
    let mut positions = Vec::with_capacity(20);
    let jitter = |i: usize, base_x: f64, base_y: f64, floor: u8| {
        let stream = RandomStream::derive(seed, NodeId(i as u16), StreamPurpose::Topology);
        let dx = (stream.nth_f64(0) - 0.5) * 0.3;
        let dy = (stream.nth_f64(1) - 0.5) * 0.3;
        Position::new(base_x + dx, base_y + dy, floor)
    };
    // Floor 0: controller plus seven slaves in a ring.
    positions.push(jitter(0, 3.6, 7.5, 0)); // controller
    for k in 0..7 {
        let angle = 2.0 * std::f64::consts::PI * k as f64 / 7.0;
        positions.push(jitter(
            1 + k,
            3.6 + 1.8 * angle.cos(),
            7.5 + 1.8 * angle.sin(),
            0,
        ));
    }
    positions.push(jitter(8, 14.8, 6.9, 0)); // bridge relay
    positions.push(jitter(9, 14.8, 8.1, 0)); // bridge relay
    // Floor 1: the stairwell node right above the bridges, plus a 3x3 spread.
    positions.push(jitter(10, 14.8, 7.5, 1));
    let xs = [9.0, 12.0, 15.0];
    let ys = [11.0, 12.25, 13.5];
    let mut i = 11;
    for &y in &ys {
        for &x in &xs {
            positions.push(jitter(i, x, y, 1));
            i += 1;
        }
    }
    positions
}

/// Build the office layout and calibrate the floor penalty (within +-5 dB of
/// the configured value) until the link graph spans exactly four hops.
pub fn office_two_floor(
    seed: u64,
    base_prop: &PropagationParams,
) -> Result<OfficeTopology, String> {
    let positions = office_positions(seed);
    let base_penalty = base_prop.floor_penalty_db;
    let deltas: [f64; 11] = [0.0, -1.0, 1.0, -2.0, 2.0, -3.0, 3.0, -4.0, 4.0, -5.0, 5.0];
    for delta in deltas {
        let mut prop = *base_prop;
        prop.floor_penalty_db = base_penalty + delta;
        let adj = link_graph(&positions, &prop, seed);
        if hop_diameter(&adj) == Some(4) {
            return Ok(OfficeTopology {
                positions,
                controller: 0,
                single_hop_slaves: (1..=7).collect(),
                multi_hop_slaves: (1..=9).chain(11..=15).collect(),
                // Mixed hop depths: two flows stop at the bridges, five cross
                // to the far floor.
                m2m_pairs: vec![(1, 8), (2, 9), (3, 11), (4, 12), (5, 13), (6, 14), (7, 15)],
                floor_penalty_db: base_penalty + delta,
                hop_diameter: 4,
            });
        }
    }
    Err(format!(
        "office calibration failed: no floor penalty in [{:.1}, {:.1}] dB yields a 4-hop diameter",
        base_penalty - 5.0,
        base_penalty + 5.0
    ))
}

// --- other topologies -----------------------------------------------------------

/// Straight line of `n` nodes with adjacent-only links under the default
/// propagation profile.
pub fn line_positions(n: usize, spacing_m: f64) -> Vec<Position> {
    (0..n)
        .map(|i| Position::new(i as f64 * spacing_m, 0.0, 0))
        .collect()
}

/// Loss-free line world: every node relays and subscribes to the line group.
pub fn line_world(n: usize, spacing_m: f64, seed: u64) -> World {
    let mut prop = PropagationParams::default();
    prop.shadowing_sigma_db = 0.0;
    prop.background_loss_prob = 0.0;
    let params = WorldParams {
        master_seed: seed,
        propagation: prop,
        ..WorldParams::default()
    };
    let mut world = World::new(params);
    for pos in line_positions(n, spacing_m) {
        world.add_node(NodeSetup {
            position: pos,
            subscriptions: vec![LINE_GROUP],
            ..NodeSetup::default()
        });
    }
    world
}

// --- calibration record -----------------------------------------------------------

/// What topology calibration settled on; echoed into the run manifest.
#[derive(Debug, Clone, Default, serde::Serialize)]
pub struct Calibration {
    pub office_floor_penalty_db: Option<f64>,
    pub office_hop_diameter: Option<usize>,
}

/// A fully built world plus how long to run it.
pub struct BuiltScenario {
    pub world: World,
    pub duration: SimTime,
    pub calibration: Calibration,
}

/// Tail after the last scheduled iteration so retries and acks can finish.
const RUN_TAIL_US: u64 = 30_000_000;

/// Uniform start jitter so concurrent publishers do not align exactly.
fn publish_jitter(stream: &mut RandomStream, max_us: u64) -> u64 {
    if max_us == 0 {
        0
    } else {
        stream.draw_range(0, max_us)
    }
}

/// Build the world for `cfg` and schedule its traffic.
pub fn build(cfg: &EffectiveConfig) -> Result<BuiltScenario, String> {
    let kind = ScenarioKind::parse(&cfg.scenario)
        .ok_or_else(|| format!("unknown scenario key: {}", cfg.scenario))?;
    match kind {
        ScenarioKind::OfficeTwoFloor => build_office_smoke(cfg),
        ScenarioKind::GroupUnicastVsGroup => build_group_comm(cfg),
        ScenarioKind::ManyToMany => build_many_to_many(cfg),
        ScenarioKind::ExtVsLegacy => build_ext_vs_legacy(cfg),
        ScenarioKind::MobilityVsStatic => build_mobility(cfg),
        ScenarioKind::CoverageDemo => build_coverage_demo(cfg),
        ScenarioKind::FormationDemo => build_formation_demo(cfg),
    }
}

fn world_params(cfg: &EffectiveConfig) -> WorldParams {
    WorldParams {
        master_seed: cfg.master_seed,
        propagation: cfg.propagation,
        adv: cfg.bearer,
        scan: cfg.scan,
        ext: cfg.ext_adv,
        ext_enabled: cfg.ext_enabled,
        relay: cfg.relay,
        message_bytes: cfg.traffic.status_bytes,
        group_status_retries: cfg.group_status_retries,
        rssi_sample_interval_us: cfg.rssi_sample_interval_us,
    }
}

fn add_office_nodes(
    world: &mut World,
    topo: &OfficeTopology,
    subscriptions_of: impl Fn(usize) -> Vec<Address>,
    responder_of: impl Fn(usize) -> bool,
) {
    for (i, pos) in topo.positions.iter().enumerate() {
        world.add_node(NodeSetup {
            position: *pos,
            relay_enabled: true,
            subscriptions: subscriptions_of(i),
            responder: responder_of(i),
            ..NodeSetup::default()
        });
    }
}

fn office_calibrated(cfg: &EffectiveConfig) -> Result<(OfficeTopology, WorldParams), String> {
    let topo = office_two_floor(cfg.master_seed, &cfg.propagation)?;
    let mut params = world_params(cfg);
    params.propagation.floor_penalty_db = topo.floor_penalty_db;
    Ok((topo, params))
}

fn duration_for(cfg: &EffectiveConfig) -> SimTime {
    match cfg.duration_us {
        Some(d) => SimTime::from_micros(d),
        None => SimTime::from_micros(
            u64::from(cfg.traffic.iterations) * cfg.traffic.period_us + RUN_TAIL_US,
        ),
    }
}

fn calibration_of(topo: &OfficeTopology) -> Calibration {
    Calibration {
        office_floor_penalty_db: Some(topo.floor_penalty_db),
        office_hop_diameter: Some(topo.hop_diameter),
    }
}

/// Smoke scenario on the office floorplan: the controller publishes one
/// group message per iteration to every node.
fn build_office_smoke(cfg: &EffectiveConfig) -> Result<BuiltScenario, String> {
    let (topo, params) = office_calibrated(cfg)?;
    let mut world = World::new(params);
    add_office_nodes(
        &mut world,
        &topo,
        |i| if i == topo.controller { vec![] } else { vec![GROUP_ALL] },
        |_| false,
    );
    let controller = NodeId(topo.controller as u16);
    let mut jitter_stream =
        RandomStream::derive(cfg.master_seed, controller, StreamPurpose::Traffic);
    for iter in 0..cfg.traffic.iterations {
        let base = (u64::from(iter) + 1) * cfg.traffic.period_us;
        let jitter = publish_jitter(&mut jitter_stream, cfg.publish_jitter_max_us);
        world.schedule(
            SimTime::from_micros(base + jitter),
            EventKind::PublishData {
                node: controller,
                dst: GROUP_ALL,
                payload_bytes: cfg.traffic.message_bytes,
                ttl: None,
            },
        );
    }
    Ok(BuiltScenario {
        world,
        duration: duration_for(cfg),
        calibration: calibration_of(&topo),
    })
}

/// Group-communication scenario: one controller orders a slave group around,
/// in acked unicast mode or fixed-twice group mode.
fn build_group_comm(cfg: &EffectiveConfig) -> Result<BuiltScenario, String> {
    let (topo, params) = office_calibrated(cfg)?;
    let (slaves, group_addr) = match cfg.group_variant {
        GroupVariant::MultiHop => (topo.multi_hop_slaves.clone(), GROUP_CMD_MULTI),
        GroupVariant::SingleHop => (topo.single_hop_slaves.clone(), GROUP_CMD_SINGLE),
    };
    let slave_set: std::collections::BTreeSet<usize> = slaves.iter().copied().collect();
    let group_mode = cfg.traffic.mode == TrafficMode::Group;
    let mut world = World::new(params);
    add_office_nodes(
        &mut world,
        &topo,
        |i| {
            if group_mode && slave_set.contains(&i) {
                vec![group_addr]
            } else {
                vec![]
            }
        },
        |i| slave_set.contains(&i),
    );
    let controller = NodeId(topo.controller as u16);
    let mut jitter_stream =
        RandomStream::derive(cfg.master_seed, controller, StreamPurpose::Traffic);
    for iter in 0..cfg.traffic.iterations {
        let base = (u64::from(iter) + 1) * cfg.traffic.period_us;
        if group_mode {
            let jitter = publish_jitter(&mut jitter_stream, cfg.publish_jitter_max_us);
            world.schedule(
                SimTime::from_micros(base + jitter),
                EventKind::StartExchange {
                    node: controller,
                    dst: group_addr,
                    mode: ExchangeMode::Group,
                    payload_bytes: cfg.traffic.message_bytes,
                },
            );
        } else {
            for &slave in &slaves {
                let jitter = publish_jitter(&mut jitter_stream, cfg.publish_jitter_max_us);
                world.schedule(
                    SimTime::from_micros(base + jitter),
                    EventKind::StartExchange {
                        node: controller,
                        dst: Address(0x0001 + slave as u16),
                        mode: ExchangeMode::Unicast,
                        payload_bytes: cfg.traffic.message_bytes,
                    },
                );
            }
        }
    }
    Ok(BuiltScenario {
        world,
        duration: duration_for(cfg),
        calibration: calibration_of(&topo),
    })
}

/// Many-to-many: `senders` concurrent acked flows to distinct destinations
/// across the office floors.
fn build_many_to_many(cfg: &EffectiveConfig) -> Result<BuiltScenario, String> {
    let (topo, params) = office_calibrated(cfg)?;
    let pairs: Vec<(usize, usize)> = topo
        .m2m_pairs
        .iter()
        .take(cfg.senders as usize)
        .copied()
        .collect();
    let dsts: std::collections::BTreeSet<usize> = pairs.iter().map(|p| p.1).collect();
    let mut world = World::new(params);
    add_office_nodes(&mut world, &topo, |_| vec![], |i| dsts.contains(&i));
    for iter in 0..cfg.traffic.iterations {
        let base = (u64::from(iter) + 1) * cfg.traffic.period_us;
        for &(sender, dst) in &pairs {
            let stream = RandomStream::derive(
                cfg.master_seed,
                NodeId(sender as u16),
                StreamPurpose::Traffic,
            );
            let jitter = stream.nth_u64(u64::from(iter)) % (cfg.publish_jitter_max_us.max(1));
            world.schedule(
                SimTime::from_micros(base + jitter),
                EventKind::StartExchange {
                    node: NodeId(sender as u16),
                    dst: Address(0x0001 + dst as u16),
                    mode: ExchangeMode::Unicast,
                    payload_bytes: cfg.traffic.message_bytes,
                },
            );
        }
    }
    Ok(BuiltScenario {
        world,
        duration: duration_for(cfg),
        calibration: calibration_of(&topo),
    })
}

/// Extended-vs-legacy payload scenario: three concurrent 50-byte acked flows;
/// `ext_enabled` switches the bearer.
fn build_ext_vs_legacy(cfg: &EffectiveConfig) -> Result<BuiltScenario, String> {
    let mut cfg = cfg.clone();
    cfg.senders = cfg.senders.min(3);
    build_many_to_many(&cfg)
}

/// Sparse five-node scenario: a controller polls four robots, two of which
/// move when the `mobile` variant is on.
fn build_mobility(cfg: &EffectiveConfig) -> Result<BuiltScenario, String> {
    let params = world_params(cfg);
    let mut world = World::new(params);
    let mobile = cfg.mobile;
    let roster: Vec<(Position, MobilityModel)> = vec![
        (Position::new(0.0, 0.0, 0), MobilityModel::Static), // controller
        (Position::new(8.0, 0.0, 0), MobilityModel::Static), // passive relay
        (Position::new(-8.0, 0.0, 0), MobilityModel::Static), // passive relay
        (
            Position::new(7.0, 0.0, 0),
            if mobile {
                MobilityModel::RandomWaypoint {
                    bounds: Rect {
                        x_min: 7.0,
                        x_max: 16.5,
                        y_min: -4.5,
                        y_max: 4.5,
                    },
                    speed_mps: 0.5,
                    pause_us: 0,
                }
            } else {
                MobilityModel::Static
            },
        ),
        (
            Position::new(-7.0, 0.0, 0),
            if mobile {
                MobilityModel::BackAndForth {
                    p0: (-7.0, 0.0),
                    p1: (-16.5, 0.0),
                    speed_mps: 0.5,
                }
            } else {
                MobilityModel::Static
            },
        ),
    ];
    for (i, (pos, model)) in roster.into_iter().enumerate() {
        world.add_node(NodeSetup {
            position: pos,
            mobility: model,
            responder: i != 0,
            ..NodeSetup::default()
        });
    }
    world.start_mobility();
    let controller = NodeId(0);
    let mut jitter_stream =
        RandomStream::derive(cfg.master_seed, controller, StreamPurpose::Traffic);
    for iter in 0..cfg.traffic.iterations {
        let base = (u64::from(iter) + 1) * cfg.traffic.period_us;
        for slave in 1..=4u16 {
            // Poll the robots round-robin across the second so RTTs reflect
            // link quality rather than a burst's queue wait.
            let offset = u64::from(slave - 1) * (cfg.traffic.period_us / 5);
            let jitter = publish_jitter(&mut jitter_stream, cfg.publish_jitter_max_us);
            world.schedule(
                SimTime::from_micros(base + offset + jitter),
                EventKind::StartExchange {
                    node: controller,
                    dst: Address(0x0001 + slave),
                    mode: ExchangeMode::Unicast,
                    payload_bytes: cfg.traffic.message_bytes,
                },
            );
        }
    }
    Ok(BuiltScenario {
        world,
        duration: duration_for(cfg),
        calibration: Calibration::default(),
    })
}

/// Coverage optimization demo: two fixed clusters and one mobile bridge node
/// that moves to restore its mutual-RSSI degree.
fn build_coverage_demo(cfg: &EffectiveConfig) -> Result<BuiltScenario, String> {
    let params = world_params(cfg);
    let mut world = World::new(params);
    let positions = [
        Position::new(0.0, 0.0, 0),
        Position::new(2.0, 0.0, 0),
        Position::new(30.0, 0.0, 0),
        Position::new(32.0, 0.0, 0),
        Position::new(40.0, 0.0, 0), // mobile bridge
    ];
    for pos in positions {
        world.add_node(NodeSetup {
            position: pos,
            subscriptions: vec![BEACON_GROUP],
            ..NodeSetup::default()
        });
    }
    let coverage = CoverageParams::default();
    for i in 0..5u16 {
        world.node_mut(NodeId(i)).app.beacon_group = Some(BEACON_GROUP);
        // Stagger first beacons so they never align.
        world.schedule(
            SimTime::from_micros(100_000 + u64::from(i) * 150_000),
            EventKind::BeaconDue { node: NodeId(i) },
        );
    }
    world.node_mut(NodeId(4)).app.coverage = Some(coverage);
    world.schedule(
        SimTime::from_secs(2),
        EventKind::CoverageTick { node: NodeId(4) },
    );
    let duration = cfg
        .duration_us
        .map(SimTime::from_micros)
        .unwrap_or(SimTime::from_secs(60));
    Ok(BuiltScenario {
        world,
        duration,
        calibration: Calibration::default(),
    })
}

/// Leader election and follower recruitment over a single-hop cluster,
/// finishing with data published to the freshly formed group.
fn build_formation_demo(cfg: &EffectiveConfig) -> Result<BuiltScenario, String> {
    let params = world_params(cfg);
    let mut world = World::new(params);
    let n = 6u16;
    for k in 0..n {
        let angle = 2.0 * std::f64::consts::PI * f64::from(k) / f64::from(n);
        world.add_node(NodeSetup {
            position: Position::new(3.0 * angle.cos(), 3.0 * angle.sin(), 0),
            subscriptions: vec![ELECTION_GROUP],
            ..NodeSetup::default()
        });
    }
    for k in 0..n {
        let id = NodeId(k);
        let fitness_stream =
            RandomStream::derive(cfg.master_seed, id, StreamPurpose::Traffic);
        let fitness = (fitness_stream.nth_f64(0) * 100.0) as f32;
        let node = world.node_mut(id);
        node.app.election = Some(ElectionState {
            group: ELECTION_GROUP,
            fitness,
            heard: Default::default(),
            decided: None,
            done: false,
        });
        node.app.volunteer_on_recruit = true;
        let mut jitter_stream =
            RandomStream::derive(cfg.master_seed, id, StreamPurpose::Traffic);
        jitter_stream.next_u64(); // skip the fitness draw
        let jitter = jitter_stream.draw_range(0, 5_000);
        world.schedule(
            SimTime::from_micros(1_000_000 + jitter),
            EventKind::PublishCandidacy { node: id, group: ELECTION_GROUP },
        );
        world.schedule(SimTime::from_secs(3), EventKind::ElectionDecide { node: id });
        // Every node offers to recruit; only the one that elected itself
        // proceeds.
        world.schedule(
            SimTime::from_micros(3_100_000),
            EventKind::StartRecruit {
                leader: id,
                k: cfg.formation_k,
                formation: FORMATION_GROUP,
            },
        );
        world.schedule(
            SimTime::from_micros(7_000_000),
            EventKind::FormationData { node: id, payload_bytes: cfg.traffic.message_bytes },
        );
    }
    let duration = cfg
        .duration_us
        .map(SimTime::from_micros)
        .unwrap_or(SimTime::from_secs(12));
    Ok(BuiltScenario {
        world,
        duration,
        calibration: Calibration::default(),
    })
}

/// Scan parameters for the paper-style "enhanced" configuration.
pub fn enhanced_scan() -> ScanParams {
    ScanParams {
        scan_interval_us: 1_000_000,
        scan_window_us: 1_000_000,
        ..ScanParams::default()
    }
}

/// Subnet id helper for isolation tests.
pub fn subnet(n: u16) -> SubnetId {
    SubnetId(n)
}
