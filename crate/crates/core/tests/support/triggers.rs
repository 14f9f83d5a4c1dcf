//! Small allocation instances given directly as facts, and a direct
//! evaluation of the move inequalities over them.
//!
//! Fragments never interact in the move rule, so many single-fragment
//! instances can share one fact base under distinct fragment ids.

use std::collections::BTreeSet;

use rand::Rng;

use fragalloc::fact;
use fragalloc::policy::MoveTrigger;
use fragalloc::rules::{Fact, Value};

/// Demand of one node for one fragment.
#[derive(Clone, Debug)]
pub struct Demand {
    /// Counter per query type; `None` leaves the `freq` fact out.
    pub freq: [Option<u32>; 3],
    pub req: u32,
    pub t: u32,
}

impl Demand {
    pub fn total(&self) -> u32 {
        self.freq.iter().flatten().sum()
    }
}

/// One fragment: its holder and each node's demand, indexed by node.
#[derive(Clone, Debug)]
pub struct Instance {
    pub holder: usize,
    pub demand: Vec<Demand>,
}

pub const KINDS: [&str; 3] = ["se", "up", "de"];

pub fn node(i: usize) -> Value {
    Value::from(i as u32 + 1)
}

/// Fact base for `instances`, fragment `k` getting id `first_id + k`.
pub fn facts(instances: &[Instance], first_id: u32, adjacency: &BTreeSet<(usize, usize)>) -> Vec<Fact> {
    let mut out = Vec::new();
    for (k, inst) in instances.iter().enumerate() {
        let j = Value::from(first_id + k as u32);
        out.push(fact!("placed", &j, node(inst.holder)));
        for (i, d) in inst.demand.iter().enumerate() {
            out.push(fact!("req", node(i), &j, d.req));
            out.push(fact!("transfer_cost", node(i), &j, d.t));
            for (kind, f) in KINDS.iter().zip(&d.freq) {
                if let Some(f) = f {
                    out.push(fact!("freq", node(i), &j, Value::symbol(kind).unwrap(), *f));
                }
            }
        }
    }
    for &(a, b) in adjacency {
        out.push(fact!("adjacent", node(a), node(b)));
    }
    out
}

/// Triggers the move rule should produce: holder `i1` within its threshold,
/// another node `i2` above its own, and `(i1, i2)` adjacent when required.
pub fn expected(
    instances: &[Instance],
    first_id: u32,
    adjacency: Option<&BTreeSet<(usize, usize)>>,
) -> BTreeSet<MoveTrigger> {
    let mut out = BTreeSet::new();
    for (k, inst) in instances.iter().enumerate() {
        let i1 = inst.holder;
        let d1 = &inst.demand[i1];
        if d1.total() > d1.req * d1.t {
            continue;
        }
        for (i2, d2) in inst.demand.iter().enumerate() {
            if i2 == i1 || d2.total() <= d2.req * d2.t {
                continue;
            }
            if adjacency.is_some_and(|adj| !adj.contains(&(i1, i2))) {
                continue;
            }
            out.insert(MoveTrigger {
                src: node(i1),
                dst: node(i2),
                fragment: Value::from(first_id + k as u32),
            });
        }
    }
    out
}

pub fn random_demand(rng: &mut impl Rng) -> Demand {
    Demand {
        freq: [(); 3].map(|_| rng.gen_bool(0.6).then(|| rng.gen_range(0..=4))),
        req: rng.gen_range(0..=4),
        t: rng.gen_range(0..=2),
    }
}

pub fn random_instance(rng: &mut impl Rng, nodes: usize) -> Instance {
    Instance {
        holder: rng.gen_range(0..nodes),
        demand: (0..nodes).map(|_| random_demand(rng)).collect(),
    }
}

/// Every two-node instance with counters and requirements in `0..=4` and
/// transfer costs in `0..=2`, each counter carried by one query type.
pub fn exhaustive_two_node() -> Vec<Instance> {
    let mut per_node = Vec::new();
    for f in 0..=4 {
        for req in 0..=4 {
            for t in 0..=2 {
                let kind = (f + req + t) as usize % 3;
                let mut freq = [None; 3];
                freq[kind] = Some(f);
                per_node.push(Demand { freq, req, t });
            }
        }
    }
    let mut out = Vec::new();
    for holder in 0..2 {
        for a in &per_node {
            for b in &per_node {
                out.push(Instance { holder, demand: vec![a.clone(), b.clone()] });
            }
        }
    }
    out
}

pub fn complete_adjacency(nodes: usize) -> BTreeSet<(usize, usize)> {
    (0..nodes)
        .flat_map(|a| (0..nodes).filter(move |&b| b != a).map(move |b| (a, b)))
        .collect()
}

pub fn random_adjacency(rng: &mut impl Rng, nodes: usize) -> BTreeSet<(usize, usize)> {
    let mut out = BTreeSet::new();
    for a in 0..nodes {
        for b in a + 1..nodes {
            if rng.gen_bool(0.5) {
                out.insert((a, b));
                out.insert((b, a));
            }
        }
    }
    out
}
