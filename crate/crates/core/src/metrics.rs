//! Metrics collection and reporting: per-message delivery records, drop
//! counters, RSSI traces, aggregate statistics, and the CSV/CDF writers.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::SimTime;
use crate::network::DropReason;
use crate::radio::MissReason;
use crate::types::{Address, NodeId};

pub const MESSAGES_CSV_HEADER: &str =
    "msg_id,src,dst,mode,t_publish_us,t_deliver_us,rtt_us,delivered,ttl_spent";
pub const DROPS_CSV_HEADER: &str = "node,reason,count";
pub const RSSI_CSV_HEADER: &str = "t_us,node_a,node_b,rssi_dbm";

/// Minimum spacing between recorded RSSI samples of one link.
pub const DEFAULT_RSSI_SAMPLE_INTERVAL_US: u64 = 500_000;

/// Role of a message in its scenario; drives the PDR definition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MsgMode {
    /// Acked command sent to one node (retried until its status arrives).
    Unicast,
    /// Command published once to a group address.
    Group,
    /// Plain publish (no acking semantics).
    Publish,
    /// Status flowing back to an exchange's client.
    Status,
    Beacon,
    /// Election/recruitment control traffic.
    Control,
}

impl MsgMode {
    pub fn label(self) -> &'static str {
        match self {
            MsgMode::Unicast => "unicast",
            MsgMode::Group => "group",
            MsgMode::Publish => "publish",
            MsgMode::Status => "status",
            MsgMode::Beacon => "beacon",
            MsgMode::Control => "control",
        }
    }

    pub fn parse(s: &str) -> Option<MsgMode> {
        Some(match s {
            "unicast" => MsgMode::Unicast,
            "group" => MsgMode::Group,
            "publish" => MsgMode::Publish,
            "status" => MsgMode::Status,
            "beacon" => MsgMode::Beacon,
            "control" => MsgMode::Control,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DeliveryRecord {
    pub t_deliver: SimTime,
    pub ttl_spent: u8,
}

/// Everything known about one published message.
#[derive(Debug, Clone)]
pub struct MsgRecord {
    pub src_node: NodeId,
    pub src_addr: Address,
    pub dst_addr: Address,
    pub mode: MsgMode,
    pub t_publish: SimTime,
    /// Unicast addresses of the recipients this message is counted against.
    pub expected: Vec<Address>,
    pub deliveries: BTreeMap<Address, DeliveryRecord>,
    /// Status arrival per recipient (round-trip completion).
    pub statuses: BTreeMap<Address, SimTime>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RssiSample {
    pub t: SimTime,
    pub tx: NodeId,
    pub rx: NodeId,
    /// Centi-dBm, so CSV emission never touches float formatting.
    pub rssi_cdbm: i32,
}

/// One on-air network frame, recorded when the frame log is enabled (trace
/// assertions in tests).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameLogEntry {
    pub t: SimTime,
    pub tx: NodeId,
    pub channel: u8,
    pub src: Address,
    pub seq: u32,
    pub msg_id: u64,
}

/// One access-layer delivery with its payload bytes, recorded when the
/// payload log is enabled (end-to-end byte checks in tests).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PayloadLogEntry {
    pub msg_id: u64,
    pub recipient: NodeId,
    pub bytes: Vec<u8>,
}

/// Run-wide collector, owned by the world.
#[derive(Debug, Default)]
pub struct MetricsCollector {
    pub messages: BTreeMap<u64, MsgRecord>,
    pub drops: BTreeMap<(u16, DropReason), u64>,
    pub radio_misses: BTreeMap<MissReason, u64>,
    pub queue_drops: BTreeMap<u16, u64>,
    pub rssi: Vec<RssiSample>,
    last_rssi: BTreeMap<(u16, u16), SimTime>,
    pub rssi_sample_interval_us: u64,
    pub frames_transmitted: u64,
    /// Test hook: per-frame trace, enabled on demand.
    pub frame_log: Option<Vec<FrameLogEntry>>,
    /// Test hook: delivered payload bytes, enabled on demand.
    pub payload_log: Option<Vec<PayloadLogEntry>>,
}

impl MetricsCollector {
    pub fn new() -> Self {
        MetricsCollector {
            rssi_sample_interval_us: DEFAULT_RSSI_SAMPLE_INTERVAL_US,
            ..Default::default()
        }
    }

    pub fn register_message(
        &mut self,
        msg_id: u64,
        src_node: NodeId,
        src_addr: Address,
        dst_addr: Address,
        mode: MsgMode,
        t_publish: SimTime,
        expected: Vec<Address>,
    ) {
        self.messages.entry(msg_id).or_insert(MsgRecord {
            src_node,
            src_addr,
            dst_addr,
            mode,
            t_publish,
            expected,
            deliveries: BTreeMap::new(),
            statuses: BTreeMap::new(),
        });
    }

    /// Record the first delivery of `msg_id` at `recipient`.
    pub fn record_delivery(&mut self, msg_id: u64, recipient: Address, t: SimTime, ttl_spent: u8) {
        if let Some(rec) = self.messages.get_mut(&msg_id) {
            rec.deliveries
                .entry(recipient)
                .or_insert(DeliveryRecord { t_deliver: t, ttl_spent });
        }
    }

    /// Record the first status completion of `msg_id` for `recipient`.
    pub fn record_status(&mut self, msg_id: u64, recipient: Address, t: SimTime) {
        if let Some(rec) = self.messages.get_mut(&msg_id) {
            rec.statuses.entry(recipient).or_insert(t);
        }
    }

    pub fn count_drop(&mut self, node: NodeId, reason: DropReason) {
        *self.drops.entry((node.0, reason)).or_insert(0) += 1;
    }

    pub fn count_radio_miss(&mut self, reason: MissReason) {
        *self.radio_misses.entry(reason).or_insert(0) += 1;
    }

    pub fn count_queue_drop(&mut self, node: NodeId) {
        *self.queue_drops.entry(node.0).or_insert(0) += 1;
    }

    pub fn enable_frame_log(&mut self) {
        self.frame_log = Some(Vec::new());
    }

    pub fn enable_payload_log(&mut self) {
        self.payload_log = Some(Vec::new());
    }

    pub fn log_frame(&mut self, entry: FrameLogEntry) {
        if let Some(log) = self.frame_log.as_mut() {
            log.push(entry);
        }
    }

    pub fn log_payload(&mut self, msg_id: u64, recipient: NodeId, bytes: &[u8]) {
        if let Some(log) = self.payload_log.as_mut() {
            log.push(PayloadLogEntry {
                msg_id,
                recipient,
                bytes: bytes.to_vec(),
            });
        }
    }

    /// Rate-limited RSSI trace: at most one sample per link per interval.
    pub fn sample_rssi(&mut self, t: SimTime, tx: NodeId, rx: NodeId, rssi_dbm: f64) {
        let key = (tx.0, rx.0);
        if let Some(last) = self.last_rssi.get(&key) {
            if t.saturating_sub(*last) < self.rssi_sample_interval_us {
                return;
            }
        }
        self.last_rssi.insert(key, t);
        self.rssi.push(RssiSample {
            t,
            tx,
            rx,
            rssi_cdbm: (rssi_dbm * 100.0).round() as i32,
        });
    }
}

/// One `messages.csv` row: a message against one expected recipient.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MessageRow {
    pub msg_id: u64,
    pub src: Address,
    pub dst: Address,
    pub mode: MsgMode,
    pub t_publish_us: u64,
    pub t_deliver_us: Option<u64>,
    pub rtt_us: Option<u64>,
    pub delivered: bool,
    pub ttl_spent: Option<u8>,
}

/// Finished, immutable report of one run.
#[derive(Debug, Clone, Default)]
pub struct MetricsReport {
    pub rows: Vec<MessageRow>,
    pub drops: BTreeMap<(u16, DropReason), u64>,
    pub radio_misses: BTreeMap<MissReason, u64>,
    pub queue_drops: BTreeMap<u16, u64>,
    pub rssi: Vec<RssiSample>,
    pub frames_transmitted: u64,
}

impl MetricsCollector {
    /// Freeze into a report; rows sorted by (msg_id, recipient).
    pub fn into_report(self) -> MetricsReport {
        let mut rows = Vec::new();
        for (msg_id, rec) in &self.messages {
            for recipient in &rec.expected {
                let delivery = rec.deliveries.get(recipient);
                let status = rec.statuses.get(recipient);
                rows.push(MessageRow {
                    msg_id: *msg_id,
                    src: rec.src_addr,
                    dst: *recipient,
                    mode: rec.mode,
                    t_publish_us: rec.t_publish.as_micros(),
                    t_deliver_us: delivery.map(|d| d.t_deliver.as_micros()),
                    rtt_us: status.map(|t| t.saturating_sub(rec.t_publish)),
                    delivered: delivery.is_some(),
                    ttl_spent: delivery.map(|d| d.ttl_spent),
                });
            }
        }
        MetricsReport {
            rows,
            drops: self.drops,
            radio_misses: self.radio_misses,
            queue_drops: self.queue_drops,
            rssi: self.rssi,
            frames_transmitted: self.frames_transmitted,
        }
    }
}

// --- aggregate statistics ----------------------------------------------------

/// Aggregate block over one latency sample set. Percentiles are
/// nearest-rank; the mean is an exact integer ratio carried as numerator and
/// count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub count: usize,
    pub sum: u64,
    pub min: u64,
    pub max: u64,
    pub median: u64,
    pub p25: u64,
    pub p75: u64,
    pub p95: u64,
}

impl Stats {
    pub fn mean(&self) -> f64 {
        self.sum as f64 / self.count as f64
    }
}

/// Nearest-rank percentile of a sorted slice: the ceil(q*n)-th smallest.
fn nearest_rank(sorted: &[u64], q: f64) -> u64 {
    debug_assert!(!sorted.is_empty());
    let n = sorted.len();
    let rank = (q * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// Aggregate a sample set; `None` for an empty set (never NaN).
pub fn compute_stats(samples: &[u64]) -> Option<Stats> {
    if samples.is_empty() {
        return None;
    }
    let mut sorted = samples.to_vec();
    sorted.sort_unstable();
    Some(Stats {
        count: sorted.len(),
        sum: sorted.iter().sum(),
        min: sorted[0],
        max: *sorted.last().unwrap(),
        median: nearest_rank(&sorted, 0.50),
        p25: nearest_rank(&sorted, 0.25),
        p75: nearest_rank(&sorted, 0.75),
        p95: nearest_rank(&sorted, 0.95),
    })
}

/// Scenario-level aggregates derived from the rows.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Aggregates {
    /// Delivered / expected per the mode's definition: status receptions for
    /// unicast commands, command deliveries for group/publish.
    pub pdr: Option<f64>,
    pub expected: usize,
    pub delivered: usize,
    pub rtt: Option<Stats>,
    pub one_way: Option<Stats>,
    pub mean_rssi_dbm: Option<f64>,
}

impl MetricsReport {
    /// Command rows: the rows PDR and latency aggregates are defined over.
    fn command_rows(&self) -> impl Iterator<Item = &MessageRow> {
        self.rows
            .iter()
            .filter(|r| matches!(r.mode, MsgMode::Unicast | MsgMode::Group | MsgMode::Publish))
    }

    pub fn aggregates(&self) -> Aggregates {
        let mut expected = 0usize;
        let mut delivered = 0usize;
        let mut rtts = Vec::new();
        let mut one_ways = Vec::new();
        for row in self.command_rows() {
            expected += 1;
            // Acked modes count completed round trips (what the commanding
            // node can actually observe); plain publishes count deliveries.
            let counted = match row.mode {
                MsgMode::Unicast | MsgMode::Group => row.rtt_us.is_some(),
                _ => row.delivered,
            };
            if counted {
                delivered += 1;
            }
            if let Some(rtt) = row.rtt_us {
                rtts.push(rtt);
            }
            if let Some(t) = row.t_deliver_us {
                one_ways.push(t - row.t_publish_us);
            }
        }
        let mean_rssi_dbm = if self.rssi.is_empty() {
            None
        } else {
            let sum: i64 = self.rssi.iter().map(|s| i64::from(s.rssi_cdbm)).sum();
            Some(sum as f64 / self.rssi.len() as f64 / 100.0)
        };
        Aggregates {
            pdr: if expected > 0 {
                Some(delivered as f64 / expected as f64)
            } else {
                None
            },
            expected,
            delivered,
            rtt: compute_stats(&rtts),
            one_way: compute_stats(&one_ways),
            mean_rssi_dbm,
        }
    }
}

// --- file emission -------------------------------------------------------------

fn fmt_opt_u64(v: Option<u64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn messages_csv(report: &MetricsReport) -> String {
    let mut out = String::from(MESSAGES_CSV_HEADER);
    out.push('\n');
    for row in &report.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            row.msg_id,
            row.src.0,
            row.dst.0,
            row.mode.label(),
            row.t_publish_us,
            fmt_opt_u64(row.t_deliver_us),
            fmt_opt_u64(row.rtt_us),
            u8::from(row.delivered),
            row.ttl_spent.map(|t| t.to_string()).unwrap_or_default(),
        );
    }
    out
}

pub fn drops_csv(report: &MetricsReport) -> String {
    let mut out = String::from(DROPS_CSV_HEADER);
    out.push('\n');
    for ((node, reason), count) in &report.drops {
        let _ = writeln!(out, "{},{},{}", node, reason.label(), count);
    }
    out
}

pub fn rssi_csv(report: &MetricsReport) -> String {
    let mut out = String::from(RSSI_CSV_HEADER);
    out.push('\n');
    for s in &report.rssi {
        let sign = if s.rssi_cdbm < 0 { "-" } else { "" };
        let _ = writeln!(
            out,
            "{},{},{},{}{}.{:02}",
            s.t.as_micros(),
            s.tx.0,
            s.rx.0,
            sign,
            s.rssi_cdbm.abs() / 100,
            s.rssi_cdbm.abs() % 100,
        );
    }
    out
}

/// CDF of a latency sample set as `latency_ms,cumulative_fraction` rows,
/// ascending; the final fraction is exactly 1 when any sample exists.
pub fn cdf_csv(samples_us: &[u64]) -> String {
    let mut out = String::from("latency_ms,cumulative_fraction\n");
    if samples_us.is_empty() {
        return out;
    }
    let mut sorted = samples_us.to_vec();
    sorted.sort_unstable();
    let n = sorted.len();
    let mut i = 0;
    while i < n {
        let v = sorted[i];
        // Collapse ties to one row at the highest cumulative fraction.
        let mut j = i;
        while j + 1 < n && sorted[j + 1] == v {
            j += 1;
        }
        let _ = writeln!(
            out,
            "{}.{:03},{:.6}",
            v / 1_000,
            v % 1_000,
            (j + 1) as f64 / n as f64
        );
        i = j + 1;
    }
    out
}

pub fn write_file(path: &Path, contents: &str) -> io::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, contents)
}

/// Human-readable aggregate block.
pub fn summary_text(report: &MetricsReport, scenario: &str, seed: u64) -> String {
    let agg = report.aggregates();
    let mut out = String::new();
    let _ = writeln!(out, "scenario: {scenario}");
    let _ = writeln!(out, "seed: {seed}");
    let _ = writeln!(out, "frames_transmitted: {}", report.frames_transmitted);
    match agg.pdr {
        Some(pdr) => {
            let _ = writeln!(
                out,
                "pdr: {:.4} ({} / {})",
                pdr, agg.delivered, agg.expected
            );
        }
        None => {
            let _ = writeln!(out, "pdr: (no command messages)");
        }
    }
    let block = |name: &str, stats: &Option<Stats>| -> String {
        match stats {
            None => format!("{name}: (empty)\n"),
            Some(s) => format!(
                "{name}: n={} mean={:.2}ms median={:.2}ms p25={:.2}ms p75={:.2}ms p95={:.2}ms min={:.2}ms max={:.2}ms\n",
                s.count,
                s.mean() / 1_000.0,
                s.median as f64 / 1_000.0,
                s.p25 as f64 / 1_000.0,
                s.p75 as f64 / 1_000.0,
                s.p95 as f64 / 1_000.0,
                s.min as f64 / 1_000.0,
                s.max as f64 / 1_000.0,
            ),
        }
    };
    out.push_str(&block("rtt", &agg.rtt));
    out.push_str(&block("one_way", &agg.one_way));
    match agg.mean_rssi_dbm {
        Some(r) => {
            let _ = writeln!(out, "mean_rssi_dbm: {r:.2}");
        }
        None => {
            let _ = writeln!(out, "mean_rssi_dbm: (no samples)");
        }
    }
    let misses: Vec<String> = report
        .radio_misses
        .iter()
        .map(|(reason, count)| format!("{}={}", reason.label(), count))
        .collect();
    let _ = writeln!(out, "radio_misses: {}", misses.join(" "));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stats_simple_mean_and_median() {
        let s = compute_stats(&[1, 2, 3]).unwrap();
        assert_eq!(s.mean(), 2.0);
        assert_eq!(s.median, 2);
        assert_eq!(s.min, 1);
        assert_eq!(s.max, 3);
    }

    #[test]
    fn stats_nearest_rank_p95_of_ten() {
        // ceil(0.95 * 10) = 10th value.
        let samples: Vec<u64> = (1..=10).map(|i| i * 10).collect();
        let s = compute_stats(&samples).unwrap();
        assert_eq!(s.p95, 100);
        assert_eq!(s.p25, 30); // ceil(2.5) = 3rd value
        assert_eq!(s.median, 50); // ceil(5.0) = 5th value
        assert_eq!(s.p75, 80); // ceil(7.5) = 8th value
    }

    #[test]
    fn stats_single_sample_everywhere() {
        let s = compute_stats(&[7]).unwrap();
        assert_eq!((s.min, s.median, s.p25, s.p75, s.p95, s.max), (7, 7, 7, 7, 7, 7));
    }

    #[test]
    fn stats_empty_is_none_not_nan() {
        assert!(compute_stats(&[]).is_none());
    }

    #[test]
    fn messages_csv_header_is_pinned() {
        let report = MetricsReport::default();
        let csv = messages_csv(&report);
        assert_eq!(
            csv,
            "msg_id,src,dst,mode,t_publish_us,t_deliver_us,rtt_us,delivered,ttl_spent\n"
        );
    }

    #[test]
    fn cdf_last_fraction_is_one() {
        let csv = cdf_csv(&[5_000, 10_000, 10_000, 20_000]);
        let last = csv.lines().last().unwrap();
        assert!(last.ends_with(",1.000000"), "{last}");
        // Ties collapse: 3 data rows for 4 samples.
        assert_eq!(csv.lines().count(), 1 + 3);
    }

    #[test]
    fn cdf_empty_is_header_only() {
        assert_eq!(cdf_csv(&[]), "latency_ms,cumulative_fraction\n");
    }

    #[test]
    fn rssi_sampling_is_rate_limited_per_link() {
        let mut c = MetricsCollector::new();
        c.rssi_sample_interval_us = 1_000;
        c.sample_rssi(SimTime(0), NodeId(0), NodeId(1), -60.0);
        c.sample_rssi(SimTime(500), NodeId(0), NodeId(1), -61.0);
        c.sample_rssi(SimTime(999), NodeId(1), NodeId(0), -61.0); // other direction: own budget
        c.sample_rssi(SimTime(1_000), NodeId(0), NodeId(1), -62.0);
        assert_eq!(c.rssi.len(), 3);
    }

    #[test]
    fn rows_cover_every_expected_recipient() {
        let mut c = MetricsCollector::new();
        c.register_message(
            1,
            NodeId(0),
            Address(1),
            Address(0xC000),
            MsgMode::Publish,
            SimTime(10),
            vec![Address(2), Address(3)],
        );
        c.record_delivery(1, Address(2), SimTime(500), 1);
        let report = c.into_report();
        assert_eq!(report.rows.len(), 2);
        assert!(report.rows[0].delivered);
        assert!(!report.rows[1].delivered);
        let agg = report.aggregates();
        assert_eq!(agg.pdr, Some(0.5));
    }

    #[test]
    fn group_pdr_counts_round_trips() {
        let mut c = MetricsCollector::new();
        c.register_message(
            1,
            NodeId(0),
            Address(1),
            Address(0xC000),
            MsgMode::Group,
            SimTime(10),
            vec![Address(2), Address(3)],
        );
        // Both servers got the command, only one status made it back.
        c.record_delivery(1, Address(2), SimTime(500), 1);
        c.record_delivery(1, Address(3), SimTime(600), 1);
        c.record_status(1, Address(2), SimTime(900));
        let report = c.into_report();
        assert_eq!(report.aggregates().pdr, Some(0.5));
    }

    #[test]
    fn unicast_pdr_counts_statuses_not_deliveries() {
        let mut c = MetricsCollector::new();
        c.register_message(
            1,
            NodeId(0),
            Address(1),
            Address(2),
            MsgMode::Unicast,
            SimTime(0),
            vec![Address(2)],
        );
        c.record_delivery(1, Address(2), SimTime(100), 0);
        // No status: delivered but not acked, counts as a miss for PDR.
        let report = c.into_report();
        assert_eq!(report.aggregates().pdr, Some(0.0));
    }

    #[test]
    fn negative_rssi_formats_with_two_decimals() {
        let mut c = MetricsCollector::new();
        c.sample_rssi(SimTime(1), NodeId(0), NodeId(1), -67.125);
        let report = c.into_report();
        let csv = rssi_csv(&report);
        assert!(csv.contains("1,0,1,-67.12") || csv.contains("1,0,1,-67.13"), "{csv}");
    }
}
