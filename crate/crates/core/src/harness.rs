//! Scenario configuration ingestion, run orchestration, file outputs, and
//! run-to-run comparison with ordering assertions.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bearer::{AdvParams, ExtAdvParams, ScanMode, ScanParams};
use crate::engine::SimTime;
use crate::metrics::{
    cdf_csv, drops_csv, messages_csv, rssi_csv, summary_text, write_file, MessageRow,
    MetricsReport, MsgMode, RssiSample,
};
use crate::network::RelayPolicy;
use crate::radio::{framing_constants, PhyMode, PropagationParams};
use crate::scenario::{self, ScenarioKind};
use crate::types::{Address, NodeId};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("validation failed:\n{}", .0.join("\n"))]
    Validation(Vec<String>),
    #[error("scenario error: {0}")]
    Scenario(String),
    #[error("io error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("comparison error: {0}")]
    Compare(String),
}

fn io_err(path: &Path, source: std::io::Error) -> HarnessError {
    HarnessError::Io {
        path: path.display().to_string(),
        source,
    }
}

// --- raw on-disk config ---------------------------------------------------------

/// Scenario configuration document as written by users (TOML). Every field
/// beyond the scenario key is optional and overrides the scenario's default.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: String,
    pub master_seed: Option<u64>,
    pub duration_us: Option<u64>,
    #[serde(default)]
    pub traffic: TrafficOverrides,
    #[serde(default)]
    pub bearer: BearerOverrides,
    #[serde(default)]
    pub scan: ScanOverrides,
    #[serde(default)]
    pub propagation: PropagationOverrides,
    #[serde(default)]
    pub ext_adv: ExtOverrides,
    #[serde(default)]
    pub relay: RelayOverrides,
    #[serde(default)]
    pub scenario_params: ScenarioParamOverrides,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficOverrides {
    pub message_bytes: Option<usize>,
    pub status_bytes: Option<usize>,
    pub period_us: Option<u64>,
    pub iterations: Option<u32>,
    /// unicast | group | publish
    pub mode: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BearerOverrides {
    pub adv_interval_us: Option<u64>,
    pub adv_delay_max_us: Option<u64>,
    pub inter_channel_gap_us: Option<u64>,
    pub n_events_source: Option<u8>,
    pub n_events_relay: Option<u8>,
    pub queue_depth: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanOverrides {
    pub scan_interval_us: Option<u64>,
    pub scan_window_us: Option<u64>,
    /// rotate | all_channels
    pub mode: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropagationOverrides {
    pub tx_power_dbm: Option<f64>,
    pub pl0_db: Option<f64>,
    pub path_loss_exponent: Option<f64>,
    pub floor_penalty_db: Option<f64>,
    pub shadowing_sigma_db: Option<f64>,
    pub sensitivity_dbm: Option<f64>,
    pub capture_margin_db: Option<f64>,
    pub background_loss_prob: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtOverrides {
    pub enabled: Option<bool>,
    pub aux_offset_us: Option<u64>,
    /// uncoded_1m | uncoded_2m | coded_500k | coded_125k
    pub data_phy: Option<String>,
    pub ext_ind_bytes: Option<u16>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelayOverrides {
    pub relay_n_events: Option<u8>,
    pub ttl_initial_default: Option<u8>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioParamOverrides {
    /// multi_hop | single_hop (group_unicast_vs_group)
    pub group: Option<String>,
    /// concurrent senders (many_to_many, ext_vs_legacy)
    pub senders: Option<u32>,
    /// moving nodes on/off (mobility_vs_static)
    pub mobile: Option<bool>,
    /// recruited followers (formation_demo)
    pub formation_k: Option<u8>,
    pub publish_jitter_max_us: Option<u64>,
    pub group_status_retries: Option<u8>,
    pub rssi_sample_interval_us: Option<u64>,
}

// --- effective config -------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TrafficMode {
    Unicast,
    Group,
    Publish,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupVariant {
    MultiHop,
    SingleHop,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TrafficSpec {
    pub message_bytes: usize,
    pub status_bytes: usize,
    pub period_us: u64,
    pub iterations: u32,
    pub mode: TrafficMode,
}

/// The fully resolved parameter set of one run; echoed verbatim into the
/// manifest.
#[derive(Debug, Clone, Serialize)]
pub struct EffectiveConfig {
    pub scenario: String,
    pub master_seed: u64,
    pub duration_us: Option<u64>,
    pub traffic: TrafficSpec,
    pub bearer: AdvParams,
    pub scan: ScanParams,
    pub propagation: PropagationParams,
    pub ext_enabled: bool,
    pub ext_adv: ExtAdvParams,
    pub relay: RelayPolicy,
    pub group_variant: GroupVariant,
    pub senders: u32,
    pub mobile: bool,
    pub formation_k: u8,
    pub publish_jitter_max_us: u64,
    pub group_status_retries: u8,
    pub rssi_sample_interval_us: u64,
}

/// Per-scenario defaults before user overrides.
pub fn default_effective(kind: ScenarioKind) -> EffectiveConfig {
    let office = matches!(
        kind,
        ScenarioKind::OfficeTwoFloor
            | ScenarioKind::GroupUnicastVsGroup
            | ScenarioKind::ManyToMany
            | ScenarioKind::ExtVsLegacy
    );
    let mut propagation = if office || matches!(kind, ScenarioKind::MobilityVsStatic) {
        scenario::indoor_office_profile()
    } else {
        PropagationParams {
            path_loss_exponent: 5.0,
            shadowing_sigma_db: 0.0,
            background_loss_prob: 0.0,
            ..PropagationParams::default()
        }
    };
    if matches!(kind, ScenarioKind::MobilityVsStatic) {
        propagation.background_loss_prob = 0.05;
    }
    EffectiveConfig {
        scenario: kind.key().to_string(),
        master_seed: 1,
        duration_us: None,
        traffic: TrafficSpec {
            message_bytes: if kind == ScenarioKind::ExtVsLegacy { 50 } else { 11 },
            status_bytes: 11,
            // Segmented 50-byte blocks need room for their ack rounds.
            period_us: if kind == ScenarioKind::ExtVsLegacy { 2_000_000 } else { 1_000_000 },
            iterations: 100,
            mode: match kind {
                ScenarioKind::GroupUnicastVsGroup => TrafficMode::Unicast,
                ScenarioKind::OfficeTwoFloor
                | ScenarioKind::CoverageDemo
                | ScenarioKind::FormationDemo => TrafficMode::Publish,
                _ => TrafficMode::Unicast,
            },
        },
        bearer: AdvParams::default(),
        scan: ScanParams::default(),
        propagation,
        ext_enabled: false,
        ext_adv: ExtAdvParams::default(),
        relay: RelayPolicy::default(),
        group_variant: GroupVariant::MultiHop,
        senders: if kind == ScenarioKind::ExtVsLegacy { 3 } else { 7 },
        mobile: true,
        formation_k: 2,
        publish_jitter_max_us: 5_000,
        group_status_retries: 0,
        rssi_sample_interval_us: crate::metrics::DEFAULT_RSSI_SAMPLE_INTERVAL_US,
    }
}

fn parse_phy(s: &str) -> Result<PhyMode, String> {
    Ok(match s {
        "uncoded_1m" => PhyMode::Uncoded1M,
        "uncoded_2m" => PhyMode::Uncoded2M,
        "coded_500k" => PhyMode::Coded500k,
        "coded_125k" => PhyMode::Coded125k,
        other => return Err(format!("ext_adv.data_phy: unknown phy '{other}'")),
    })
}

/// Merge user overrides over the scenario defaults and validate.
pub fn resolve_config(raw: &ScenarioConfig) -> Result<EffectiveConfig, HarnessError> {
    let kind = ScenarioKind::parse(&raw.scenario).ok_or_else(|| {
        HarnessError::Config(format!(
            "scenario: unknown key '{}' (expected one of {})",
            raw.scenario,
            ScenarioKind::ALL
                .iter()
                .map(|k| k.key())
                .collect::<Vec<_>>()
                .join(", ")
        ))
    })?;
    let mut cfg = default_effective(kind);
    let mut errors: Vec<String> = Vec::new();

    if let Some(seed) = raw.master_seed {
        cfg.master_seed = seed;
    }
    cfg.duration_us = raw.duration_us.or(cfg.duration_us);

    let t = &raw.traffic;
    if let Some(v) = t.message_bytes {
        cfg.traffic.message_bytes = v;
    }
    if let Some(v) = t.status_bytes {
        cfg.traffic.status_bytes = v;
    }
    if let Some(v) = t.period_us {
        cfg.traffic.period_us = v;
    }
    if let Some(v) = t.iterations {
        cfg.traffic.iterations = v;
    }
    if let Some(mode) = &t.mode {
        cfg.traffic.mode = match mode.as_str() {
            "unicast" => TrafficMode::Unicast,
            "group" => TrafficMode::Group,
            "publish" => TrafficMode::Publish,
            other => {
                errors.push(format!("traffic.mode: unknown mode '{other}'"));
                cfg.traffic.mode
            }
        };
    }

    let b = &raw.bearer;
    if let Some(v) = b.adv_interval_us {
        cfg.bearer.adv_interval_us = v;
    }
    if let Some(v) = b.adv_delay_max_us {
        cfg.bearer.adv_delay_max_us = v;
    }
    if let Some(v) = b.inter_channel_gap_us {
        cfg.bearer.inter_channel_gap_us = v;
    }
    if let Some(v) = b.n_events_source {
        cfg.bearer.n_events_source = v;
    }
    if let Some(v) = b.n_events_relay {
        cfg.bearer.n_events_relay = v;
    }
    if let Some(v) = b.queue_depth {
        cfg.bearer.queue_depth = v;
    }

    let s = &raw.scan;
    if let Some(v) = s.scan_interval_us {
        cfg.scan.scan_interval_us = v;
        if s.scan_window_us.is_none() {
            cfg.scan.scan_window_us = v; // continuous by default
        }
    }
    if let Some(v) = s.scan_window_us {
        cfg.scan.scan_window_us = v;
    }
    if let Some(mode) = &s.mode {
        cfg.scan.mode = match mode.as_str() {
            "rotate" => ScanMode::Rotate,
            "all_channels" => ScanMode::AllChannels,
            other => {
                errors.push(format!("scan.mode: unknown mode '{other}'"));
                cfg.scan.mode
            }
        };
    }

    let p = &raw.propagation;
    if let Some(v) = p.tx_power_dbm {
        cfg.propagation.tx_power_dbm = v;
    }
    if let Some(v) = p.pl0_db {
        cfg.propagation.pl0_db = v;
    }
    if let Some(v) = p.path_loss_exponent {
        cfg.propagation.path_loss_exponent = v;
    }
    if let Some(v) = p.floor_penalty_db {
        cfg.propagation.floor_penalty_db = v;
    }
    if let Some(v) = p.shadowing_sigma_db {
        cfg.propagation.shadowing_sigma_db = v;
    }
    if let Some(v) = p.sensitivity_dbm {
        cfg.propagation.sensitivity_dbm = v;
    }
    if let Some(v) = p.capture_margin_db {
        cfg.propagation.capture_margin_db = Some(v);
    }
    if let Some(v) = p.background_loss_prob {
        cfg.propagation.background_loss_prob = v;
    }

    let e = &raw.ext_adv;
    if let Some(v) = e.enabled {
        cfg.ext_enabled = v;
    }
    if let Some(v) = e.aux_offset_us {
        cfg.ext_adv.aux_offset_us = v;
    }
    if let Some(phy) = &e.data_phy {
        match parse_phy(phy) {
            Ok(p) => cfg.ext_adv.data_phy = p,
            Err(err) => errors.push(err),
        }
    }
    if let Some(v) = e.ext_ind_bytes {
        cfg.ext_adv.ext_ind_bytes = v;
    }

    let r = &raw.relay;
    if let Some(v) = r.relay_n_events {
        cfg.relay.relay_n_events = v;
    }
    if let Some(v) = r.ttl_initial_default {
        cfg.relay.ttl_initial_default = v;
    }

    let sp = &raw.scenario_params;
    if let Some(group) = &sp.group {
        cfg.group_variant = match group.as_str() {
            "multi_hop" => GroupVariant::MultiHop,
            "single_hop" => GroupVariant::SingleHop,
            other => {
                errors.push(format!("scenario_params.group: unknown variant '{other}'"));
                cfg.group_variant
            }
        };
    }
    if let Some(v) = sp.senders {
        cfg.senders = v;
    }
    if let Some(v) = sp.mobile {
        cfg.mobile = v;
    }
    if let Some(v) = sp.formation_k {
        cfg.formation_k = v;
    }
    if let Some(v) = sp.publish_jitter_max_us {
        cfg.publish_jitter_max_us = v;
    }
    if let Some(v) = sp.group_status_retries {
        cfg.group_status_retries = v;
    }
    if let Some(v) = sp.rssi_sample_interval_us {
        cfg.rssi_sample_interval_us = v;
    }

    errors.extend(validate(&cfg));
    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(HarnessError::Validation(errors))
    }
}

fn validate(cfg: &EffectiveConfig) -> Vec<String> {
    let mut errors = Vec::new();
    if cfg.traffic.iterations < 1 {
        errors.push("traffic.iterations: must be >= 1".into());
    }
    if cfg.traffic.message_bytes < 5 || cfg.traffic.message_bytes > 384 {
        errors.push("traffic.message_bytes: must be in [5, 384]".into());
    }
    if cfg.traffic.status_bytes < 5 || cfg.traffic.status_bytes > 15 {
        errors.push("traffic.status_bytes: must be in [5, 15]".into());
    }
    if let Err(e) = cfg.bearer.validate() {
        errors.push(e);
    }
    if let Err(e) = cfg.scan.validate() {
        errors.push(e);
    }
    let prob = cfg.propagation.background_loss_prob;
    if !(0.0..=1.0).contains(&prob) {
        errors.push("propagation.background_loss_prob: must be in [0, 1]".into());
    }
    if cfg.senders == 0 || cfg.senders > 7 {
        errors.push("scenario_params.senders: must be in [1, 7]".into());
    }
    if cfg.ext_enabled {
        // The three indications must finish before the aux frame starts.
        let ind = crate::radio::airtime_us(cfg.ext_adv.ext_ind_bytes, PhyMode::Uncoded1M);
        let ind_end = 2 * (ind + cfg.bearer.inter_channel_gap_us) + ind;
        if ind_end > cfg.ext_adv.aux_offset_us {
            errors.push(format!(
                "ext_adv.aux_offset_us: {} is too small for three indications ({} us)",
                cfg.ext_adv.aux_offset_us, ind_end
            ));
        }
    }
    errors
}

/// Parse a TOML config document.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, HarnessError> {
    toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_config(&text)
}

// --- running ------------------------------------------------------------------------

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    effective: &'a EffectiveConfig,
    constants: BTreeMap<&'static str, u64>,
    calibration: &'a scenario::Calibration,
}

/// Everything one run produces.
pub struct RunOutput {
    pub cfg: EffectiveConfig,
    pub report: MetricsReport,
    pub manifest: String,
    pub summary: String,
}

/// Execute one scenario deterministically.
pub fn run_scenario(cfg: &EffectiveConfig) -> Result<RunOutput, HarnessError> {
    let built = scenario::build(cfg).map_err(HarnessError::Scenario)?;
    let mut world = built.world;
    world.run_until(built.duration);
    let report = std::mem::take(&mut world.metrics).into_report();
    let manifest = Manifest {
        effective: cfg,
        constants: framing_constants().into_iter().collect(),
        calibration: &built.calibration,
    };
    let manifest = toml::to_string(&manifest)
        .map_err(|e| HarnessError::Config(format!("manifest serialization: {e}")))?;
    let summary = summary_text(&report, &cfg.scenario, cfg.master_seed);
    Ok(RunOutput {
        cfg: cfg.clone(),
        report,
        manifest,
        summary,
    })
}

impl RunOutput {
    /// Write `messages.csv`, `drops.csv`, `rssi.csv`, `manifest`, `summary`.
    pub fn write_to(&self, dir: &Path) -> Result<(), HarnessError> {
        let write = |name: &str, contents: &str| -> Result<(), HarnessError> {
            let path = dir.join(name);
            write_file(&path, contents).map_err(|e| io_err(&path, e))
        };
        write("messages.csv", &messages_csv(&self.report))?;
        write("drops.csv", &drops_csv(&self.report))?;
        write("rssi.csv", &rssi_csv(&self.report))?;
        write("manifest", &self.manifest)?;
        write("summary", &self.summary)?;
        Ok(())
    }
}

/// Write round-trip and one-way CDF files for a report.
pub fn write_cdfs(report: &MetricsReport, dir: &Path) -> Result<Vec<String>, HarnessError> {
    let mut written = Vec::new();
    let rtts: Vec<u64> = report.rows.iter().filter_map(|r| r.rtt_us).collect();
    let one_ways: Vec<u64> = report
        .rows
        .iter()
        .filter(|r| matches!(r.mode, MsgMode::Unicast | MsgMode::Group | MsgMode::Publish))
        .filter_map(|r| r.t_deliver_us.map(|t| t - r.t_publish_us))
        .collect();
    for (name, samples) in [("cdf_rtt.csv", rtts), ("cdf_oneway.csv", one_ways)] {
        if samples.is_empty() {
            continue;
        }
        let path = dir.join(name);
        write_file(&path, &cdf_csv(&samples)).map_err(|e| io_err(&path, e))?;
        written.push(name.to_string());
    }
    Ok(written)
}

// --- loading a run back from disk ------------------------------------------------------

fn parse_messages_csv(text: &str) -> Result<Vec<MessageRow>, HarnessError> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if header != crate::metrics::MESSAGES_CSV_HEADER {
        return Err(HarnessError::Compare(format!(
            "unexpected messages.csv header: {header}"
        )));
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(HarnessError::Compare(format!(
                "messages.csv line {}: expected 9 fields, got {}",
                lineno + 2,
                fields.len()
            )));
        }
        let opt = |s: &str| -> Option<u64> { s.parse().ok() };
        rows.push(MessageRow {
            msg_id: fields[0].parse().unwrap_or(0),
            src: Address(fields[1].parse().unwrap_or(0)),
            dst: Address(fields[2].parse().unwrap_or(0)),
            mode: MsgMode::parse(fields[3]).ok_or_else(|| {
                HarnessError::Compare(format!("messages.csv: unknown mode {}", fields[3]))
            })?,
            t_publish_us: fields[4].parse().unwrap_or(0),
            t_deliver_us: opt(fields[5]),
            rtt_us: opt(fields[6]),
            delivered: fields[7] == "1",
            ttl_spent: fields[8].parse().ok(),
        });
    }
    Ok(rows)
}

fn parse_rssi_csv(text: &str) -> Vec<RssiSample> {
    text.lines()
        .skip(1)
        .filter(|l| !l.is_empty())
        .filter_map(|line| {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return None;
            }
            let dbm: f64 = fields[3].parse().ok()?;
            Some(RssiSample {
                t: SimTime::from_micros(fields[0].parse().ok()?),
                tx: NodeId(fields[1].parse().ok()?),
                rx: NodeId(fields[2].parse().ok()?),
                rssi_cdbm: (dbm * 100.0).round() as i32,
            })
        })
        .collect()
}

/// Reconstruct a report from a run directory (messages.csv + rssi.csv).
pub fn load_report(dir: &Path) -> Result<MetricsReport, HarnessError> {
    let messages_path = dir.join("messages.csv");
    let text = std::fs::read_to_string(&messages_path).map_err(|e| io_err(&messages_path, e))?;
    let rows = parse_messages_csv(&text)?;
    let rssi_path = dir.join("rssi.csv");
    let rssi = match std::fs::read_to_string(&rssi_path) {
        Ok(text) => parse_rssi_csv(&text),
        Err(_) => Vec::new(),
    };
    Ok(MetricsReport {
        rows,
        rssi,
        ..MetricsReport::default()
    })
}

// --- comparison and assertions ------------------------------------------------------------

/// Named metrics exposed to `compare` assertions. Latencies are in
/// microseconds; `pdr` is a fraction; `mean_rssi` is dBm.
pub const COMPARE_METRICS: [&str; 9] = [
    "pdr",
    "mean_rtt",
    "median_rtt",
    "p95_rtt",
    "mean_oneway",
    "median_oneway",
    "p95_oneway",
    "mean_rssi",
    "delivered",
];

/// Metric values of one run, as used by `compare`.
#[derive(Debug, Clone, Default)]
pub struct RunMetrics {
    values: BTreeMap<&'static str, Option<f64>>,
}

impl RunMetrics {
    pub fn from_report(report: &MetricsReport) -> Self {
        let agg = report.aggregates();
        let mut values: BTreeMap<&'static str, Option<f64>> = BTreeMap::new();
        values.insert("pdr", agg.pdr);
        values.insert("delivered", Some(agg.delivered as f64));
        values.insert("mean_rtt", agg.rtt.map(|s| s.mean()));
        values.insert("median_rtt", agg.rtt.map(|s| s.median as f64));
        values.insert("p95_rtt", agg.rtt.map(|s| s.p95 as f64));
        values.insert("mean_oneway", agg.one_way.map(|s| s.mean()));
        values.insert("median_oneway", agg.one_way.map(|s| s.median as f64));
        values.insert("p95_oneway", agg.one_way.map(|s| s.p95 as f64));
        values.insert("mean_rssi", agg.mean_rssi_dbm);
        RunMetrics { values }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.get(name).copied().flatten()
    }
}

/// A parsed comparison assertion like `a.mean_rtt <= 0.6*b.mean_rtt`.
#[derive(Debug, Clone, PartialEq)]
pub struct Assertion {
    source: String,
    lhs: Operand,
    op: CmpOp,
    rhs: Operand,
}

#[derive(Debug, Clone, PartialEq)]
enum Operand {
    Metric { run: char, name: String, factor: f64 },
    Constant(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
}

impl Assertion {
    /// Grammar: `<operand> (< | <= | > | >=) <operand>` with operands either
    /// a number or `[factor*]{a|b}.<metric>`.
    pub fn parse(text: &str) -> Result<Assertion, HarnessError> {
        let bad = |msg: &str| HarnessError::Compare(format!("assertion '{text}': {msg}"));
        let (op, op_str) = if text.contains("<=") {
            (CmpOp::Le, "<=")
        } else if text.contains(">=") {
            (CmpOp::Ge, ">=")
        } else if text.contains('<') {
            (CmpOp::Lt, "<")
        } else if text.contains('>') {
            (CmpOp::Gt, ">")
        } else {
            return Err(bad("expected one of < <= > >="));
        };
        let mut parts = text.splitn(2, op_str);
        let lhs = Self::parse_operand(parts.next().unwrap_or_default().trim())
            .map_err(|m| bad(&m))?;
        let rhs = Self::parse_operand(parts.next().unwrap_or_default().trim())
            .map_err(|m| bad(&m))?;
        Ok(Assertion {
            source: text.to_string(),
            lhs,
            op,
            rhs,
        })
    }

    fn parse_operand(text: &str) -> Result<Operand, String> {
        if text.is_empty() {
            return Err("empty operand".into());
        }
        if let Ok(v) = text.parse::<f64>() {
            return Ok(Operand::Constant(v));
        }
        let (factor, rest) = match text.split_once('*') {
            Some((f, rest)) => (
                f.trim()
                    .parse::<f64>()
                    .map_err(|_| format!("bad factor '{f}'"))?,
                rest.trim(),
            ),
            None => (1.0, text),
        };
        let (run, name) = rest
            .split_once('.')
            .ok_or_else(|| format!("expected a.<metric> or b.<metric>, got '{rest}'"))?;
        let run = match run {
            "a" => 'a',
            "b" => 'b',
            other => return Err(format!("unknown run '{other}' (use a or b)")),
        };
        if !COMPARE_METRICS.contains(&name) {
            return Err(format!(
                "unknown metric '{name}' (expected one of {})",
                COMPARE_METRICS.join(", ")
            ));
        }
        Ok(Operand::Metric {
            run,
            name: name.to_string(),
            factor,
        })
    }

    fn eval_operand(op: &Operand, a: &RunMetrics, b: &RunMetrics) -> Result<f64, HarnessError> {
        match op {
            Operand::Constant(v) => Ok(*v),
            Operand::Metric { run, name, factor } => {
                let metrics = if *run == 'a' { a } else { b };
                metrics.get(name).map(|v| v * factor).ok_or_else(|| {
                    HarnessError::Compare(format!("metric {run}.{name} has no samples"))
                })
            }
        }
    }

    pub fn evaluate(&self, a: &RunMetrics, b: &RunMetrics) -> Result<bool, HarnessError> {
        let lhs = Self::eval_operand(&self.lhs, a, b)?;
        let rhs = Self::eval_operand(&self.rhs, a, b)?;
        Ok(match self.op {
            CmpOp::Lt => lhs < rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Gt => lhs > rhs,
            CmpOp::Ge => lhs >= rhs,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }
}

/// Paired aggregate table with a/b ratios.
pub fn comparison_table(a: &RunMetrics, b: &RunMetrics) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<16} {:>14} {:>14} {:>10}\n",
        "metric", "a", "b", "a/b"
    ));
    for name in COMPARE_METRICS {
        let va = a.get(name);
        let vb = b.get(name);
        let fmt = |v: Option<f64>| match v {
            Some(x) => format!("{x:.3}"),
            None => "-".to_string(),
        };
        let ratio = match (va, vb) {
            (Some(x), Some(y)) if y != 0.0 => format!("{:.4}", x / y),
            _ => "-".to_string(),
        };
        out.push_str(&format!(
            "{:<16} {:>14} {:>14} {:>10}\n",
            name,
            fmt(va),
            fmt(vb),
            ratio
        ));
    }
    out
}
