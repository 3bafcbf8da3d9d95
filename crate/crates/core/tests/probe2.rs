//! Focused diagnosis of the legacy segmented scenario.

use meshsim_core::harness::{default_effective, run_scenario};
use meshsim_core::scenario::ScenarioKind;

#[test]
#[ignore]
fn probe_legacy_segmented() {
    let mut cfg = default_effective(ScenarioKind::ExtVsLegacy);
    cfg.traffic.iterations = 10;
    let out = run_scenario(&cfg).unwrap();
    println!("{}", out.summary);
    println!("-- drops");
    for ((node, reason), count) in &out.report.drops {
        println!("node {node} {reason:?} {count}");
    }
    println!("-- queue drops: {:?}", out.report.queue_drops);
    println!("-- rows (first 40)");
    for row in out.report.rows.iter().take(40) {
        println!(
            "msg {} mode {:?} src {} dst {} pub {} deliver {:?} rtt {:?}",
            row.msg_id, row.mode, row.src.0, row.dst.0, row.t_publish_us, row.t_deliver_us, row.rtt_us
        );
    }
}
