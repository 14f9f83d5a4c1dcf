//! Oracles and generators shared by the integration test targets.
#![allow(dead_code)]

pub mod datalog;
pub mod paths;
pub mod scenarios;
pub mod triggers;

use std::collections::BTreeMap;
use std::path::PathBuf;

use fragalloc::rules::Value;
use fragalloc::sim::Scenario;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// Transmission cost recomputed from the workload alone: cumulative counts
/// through `round` times each accessor's cost to the holder.
pub fn workload_cost(sc: &Scenario, placement: &BTreeMap<Value, Value>, round: u64) -> f64 {
    let mut req: BTreeMap<(Value, Value), f64> = BTreeMap::new();
    for w in &sc.workload {
        let count = ((round + 1) as f64 * w.rate).floor();
        *req.entry((w.node.clone(), w.fragment.clone())).or_default() += count;
    }
    let mut total = 0.0;
    for ((i, j), r) in req {
        let holder = &placement[&j];
        if *holder == i {
            continue;
        }
        let link = sc.links.get(&i, holder).expect("connected");
        let w = if link.bandwidth.is_infinite() { 0.0 } else { 1.0 / link.bandwidth };
        total += r * sc.factors.gamma(&i, holder) * sc.fragments[&j].size * w * link.delay * sc.factors.other(&i, holder);
    }
    total
}
