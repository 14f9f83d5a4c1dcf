//! Random router topologies and exhaustive path enumeration.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;

use fragalloc::network::{EdgeSpec, ElementSpec, TopologySpec};
use fragalloc::rules::Value;

const BANDWIDTHS: [f64; 5] = [1.0, 2.0, 4.0, 8.0, f64::INFINITY];

/// At most ten elements: numbered sites, routers `r1`, `r2`, ... Integer
/// delays keep every path sum exact.
pub fn random_topology(rng: &mut impl Rng) -> TopologySpec {
    let n_sites = rng.gen_range(1..=6);
    let n_routers = rng.gen_range(0..=10 - n_sites);
    let sites: Vec<ElementSpec> = (1..=n_sites)
        .map(|i| ElementSpec::new(i as u32, rng.gen_range(0..=5) as f64))
        .collect();
    let routers: Vec<ElementSpec> = (1..=n_routers)
        .map(|i| ElementSpec::new(Value::symbol(&format!("r{i}")).unwrap(), rng.gen_range(0..=5) as f64))
        .collect();
    let ids: Vec<Value> = sites.iter().chain(&routers).map(|e| e.id.clone()).collect();
    let mut edges = Vec::new();
    for a in 0..ids.len() {
        for b in a + 1..ids.len() {
            if rng.gen_bool(0.35) {
                let (x, y) = if rng.gen_bool(0.5) { (a, b) } else { (b, a) };
                edges.push(EdgeSpec::new(
                    ids[x].clone(),
                    ids[y].clone(),
                    rng.gen_range(0..=5) as f64,
                    *BANDWIDTHS.choose(rng).unwrap(),
                ));
            }
        }
    }
    edges.shuffle(rng);
    TopologySpec { sites, routers, edges }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Best {
    pub delay: f64,
    pub bandwidth: f64,
    pub path: Vec<Value>,
}

/// Every simple path from `from` to `to` whose interior is routers only;
/// the cheapest by delay, ties broken by the path's id sequence.
pub fn best_path(spec: &TopologySpec, from: &Value, to: &Value) -> Option<Best> {
    let router_delay: BTreeMap<&Value, f64> = spec.routers.iter().map(|r| (&r.id, r.delay)).collect();
    let mut neighbours: BTreeMap<&Value, Vec<(&Value, f64, f64)>> = BTreeMap::new();
    for e in &spec.edges {
        neighbours.entry(&e.a).or_default().push((&e.b, e.delay, e.bandwidth));
        neighbours.entry(&e.b).or_default().push((&e.a, e.delay, e.bandwidth));
    }
    let mut best: Option<Best> = None;
    let mut path = vec![from.clone()];
    walk(&neighbours, &router_delay, to, &mut path, 0.0, f64::INFINITY, &mut best);
    best
}

fn walk(
    neighbours: &BTreeMap<&Value, Vec<(&Value, f64, f64)>>,
    router_delay: &BTreeMap<&Value, f64>,
    to: &Value,
    path: &mut Vec<Value>,
    delay: f64,
    bandwidth: f64,
    best: &mut Option<Best>,
) {
    let here = path.last().unwrap().clone();
    for &(next, d, bw) in neighbours.get(&here).map(Vec::as_slice).unwrap_or(&[]) {
        if path.contains(next) {
            continue;
        }
        path.push(next.clone());
        if next == to {
            let cand = Best { delay: delay + d, bandwidth: bandwidth.min(bw), path: path.clone() };
            let better = match best {
                None => true,
                Some(b) => (cand.delay, &cand.path) < (b.delay, &b.path),
            };
            if better {
                *best = Some(cand);
            }
        } else if let Some(rd) = router_delay.get(next) {
            walk(neighbours, router_delay, to, path, delay + d + rd, bandwidth.min(bw), best);
        }
        path.pop();
    }
}

/// Up to ten numbered sites and three routers with real-valued delays and
/// bandwidths, some unbounded.
pub fn random_weighted_topology(rng: &mut impl Rng) -> TopologySpec {
    let n_sites = rng.gen_range(1..=10u32);
    let n_routers = rng.gen_range(0..=3);
    let sites: Vec<ElementSpec> = (1..=n_sites).map(|i| ElementSpec::new(i, rng.gen_range(0.0..2.0))).collect();
    let routers: Vec<ElementSpec> = (1..=n_routers)
        .map(|i| ElementSpec::new(Value::symbol(&format!("r{i}")).unwrap(), rng.gen_range(0.0..3.0)))
        .collect();
    let ids: Vec<Value> = sites.iter().chain(&routers).map(|e| e.id.clone()).collect();
    let mut edges = Vec::new();
    for a in 0..ids.len() {
        for b in a + 1..ids.len() {
            if rng.gen_bool(0.3) {
                let bw = if rng.gen_bool(0.2) { f64::INFINITY } else { rng.gen_range(0.1..100.0) };
                edges.push(EdgeSpec::new(ids[a].clone(), ids[b].clone(), rng.gen_range(0.0..10.0), bw));
            }
        }
    }
    TopologySpec { sites, routers, edges }
}
