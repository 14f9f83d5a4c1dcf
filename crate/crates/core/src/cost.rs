//! Allocation parameters, cost functions, and their rendering as facts.
//!
//! All costs are computed between an accessing node and the node currently
//! holding the fragment. Local access costs nothing.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fact;
use crate::network::{LinkTable, NodeId};
use crate::rules::{Fact, FactBase, Value};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CostError {
    #[error("no link between {from} and {to}")]
    MissingLink { from: NodeId, to: NodeId },
    #[error("unknown fragment {0}")]
    UnknownFragment(NodeId),
    #[error("fragment {0} is not placed")]
    Unplaced(NodeId),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryType {
    Se,
    Up,
    De,
}

impl QueryType {
    pub const ALL: [QueryType; 3] = [QueryType::Se, QueryType::Up, QueryType::De];

    pub fn as_str(self) -> &'static str {
        match self {
            QueryType::Se => "se",
            QueryType::Up => "up",
            QueryType::De => "de",
        }
    }

    pub fn to_value(self) -> Value {
        Value::symbol(self.as_str()).expect("query types are identifiers")
    }
}

impl fmt::Display for QueryType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for QueryType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "se" => Ok(QueryType::Se),
            "up" => Ok(QueryType::Up),
            "de" => Ok(QueryType::De),
            other => Err(format!("unknown query type `{other}` (expected se, up or de)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FragmentSpec {
    pub id: NodeId,
    /// Average size in megabytes, used for transfer costs.
    pub size: f64,
    /// Size in capacity units.
    pub units: f64,
}

impl FragmentSpec {
    pub fn new(id: impl Into<NodeId>, size: f64, units: f64) -> Self {
        FragmentSpec {
            id: id.into(),
            size,
            units,
        }
    }
}

/// Fragments keyed by id.
pub type Fragments = BTreeMap<NodeId, FragmentSpec>;

pub fn fragments_from<I: IntoIterator<Item = FragmentSpec>>(specs: I) -> Fragments {
    specs.into_iter().map(|f| (f.id.clone(), f)).collect()
}

/// Query counters `f[i,j,k]` and requirement frequencies `r[i,j]`.
///
/// Unless set explicitly, `r[i,j]` is the sum of `f[i,j,k]` over query types.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AccessStats {
    freq: BTreeMap<(NodeId, NodeId, QueryType), u64>,
    explicit_req: BTreeMap<(NodeId, NodeId), f64>,
}

impl AccessStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn freq(&self, node: &NodeId, fragment: &NodeId, kind: QueryType) -> u64 {
        self.freq
            .get(&(node.clone(), fragment.clone(), kind))
            .copied()
            .unwrap_or(0)
    }

    /// Counter entry, distinguishing "absent" from zero.
    pub fn freq_entry(&self, node: &NodeId, fragment: &NodeId, kind: QueryType) -> Option<u64> {
        self.freq.get(&(node.clone(), fragment.clone(), kind)).copied()
    }

    pub fn set_freq(&mut self, node: NodeId, fragment: NodeId, kind: QueryType, count: u64) {
        self.freq.insert((node, fragment, kind), count);
    }

    /// Increments a counter and returns `(previous entry, new count)`.
    pub fn increment(
        &mut self,
        node: &NodeId,
        fragment: &NodeId,
        kind: QueryType,
    ) -> (Option<u64>, u64) {
        let entry = self
            .freq
            .entry((node.clone(), fragment.clone(), kind));
        match entry {
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let old = *e.get();
                *e.get_mut() += 1;
                (Some(old), old + 1)
            }
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(1);
                (None, 1)
            }
        }
    }

    pub fn total_freq(&self, node: &NodeId, fragment: &NodeId) -> u64 {
        QueryType::ALL
            .iter()
            .map(|&k| self.freq(node, fragment, k))
            .sum()
    }

    pub fn req(&self, node: &NodeId, fragment: &NodeId) -> f64 {
        match self.explicit_req.get(&(node.clone(), fragment.clone())) {
            Some(&r) => r,
            None => self.total_freq(node, fragment) as f64,
        }
    }

    pub fn set_req(&mut self, node: NodeId, fragment: NodeId, r: f64) {
        self.explicit_req.insert((node, fragment), r);
    }

    pub fn has_explicit_req(&self, node: &NodeId, fragment: &NodeId) -> bool {
        self.explicit_req
            .contains_key(&(node.clone(), fragment.clone()))
    }

    pub fn freq_entries(&self) -> impl Iterator<Item = (&NodeId, &NodeId, QueryType, u64)> {
        self.freq.iter().map(|((i, j, k), &n)| (i, j, *k, n))
    }

    /// Pairs with any counter or an explicit requirement, in order.
    pub fn accessed_pairs(&self) -> BTreeSet<(NodeId, NodeId)> {
        self.freq
            .keys()
            .map(|(i, j, _)| (i.clone(), j.clone()))
            .chain(self.explicit_req.keys().cloned())
            .collect()
    }

    /// The slice of these statistics recorded at `node`.
    pub fn slice_for(&self, node: &NodeId) -> AccessStats {
        AccessStats {
            freq: self
                .freq
                .iter()
                .filter(|((i, _, _), _)| i == node)
                .map(|(k, v)| (k.clone(), *v))
                .collect(),
            explicit_req: self
                .explicit_req
                .iter()
                .filter(|((i, _), _)| i == node)
                .map(|(k, v)| (k.clone(), *v))
                .collect(),
        }
    }

    /// Reads `freq/4` and `req/3` facts. Every `req` fact becomes an explicit
    /// requirement.
    pub fn from_facts(base: &FactBase) -> AccessStats {
        let mut stats = AccessStats::new();
        for t in base.relation("freq") {
            if let [i, j, Value::Sym(k), Value::Num(n)] = t {
                if let Ok(kind) = k.parse::<QueryType>() {
                    stats.set_freq(i.clone(), j.clone(), kind, *n as u64);
                }
            }
        }
        for t in base.relation("req") {
            if let [i, j, Value::Num(r)] = t {
                stats.set_req(i.clone(), j.clone(), *r);
            }
        }
        stats
    }
}

/// User factors `gamma[i,j]`, per-megabyte expenses `other[i,j]` and query
/// weights `exec_weight[i,j,k]`. Unset entries default to 1.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CostFactors {
    pub gamma: BTreeMap<(NodeId, NodeId), f64>,
    pub other: BTreeMap<(NodeId, NodeId), f64>,
    pub exec_weight: BTreeMap<(NodeId, NodeId, QueryType), f64>,
}

impl CostFactors {
    pub fn gamma(&self, i: &NodeId, j: &NodeId) -> f64 {
        self.gamma.get(&(i.clone(), j.clone())).copied().unwrap_or(1.0)
    }

    pub fn other(&self, i: &NodeId, j: &NodeId) -> f64 {
        self.other.get(&(i.clone(), j.clone())).copied().unwrap_or(1.0)
    }

    pub fn exec_weight(&self, i: &NodeId, j: &NodeId, k: QueryType) -> f64 {
        self.exec_weight
            .get(&(i.clone(), j.clone(), k))
            .copied()
            .unwrap_or(1.0)
    }
}

/// Fragment -> holding node.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Placement(BTreeMap<NodeId, NodeId>);

impl Placement {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn holder(&self, fragment: &NodeId) -> Option<&NodeId> {
        self.0.get(fragment)
    }

    pub fn place(&mut self, fragment: NodeId, node: NodeId) {
        self.0.insert(fragment, node);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&NodeId, &NodeId)> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Reads `placed(Fragment, Node)` facts.
    pub fn from_facts(base: &FactBase) -> Placement {
        Placement(
            base.relation("placed")
                .filter_map(|t| match t {
                    [j, i] => Some((j.clone(), i.clone())),
                    _ => None,
                })
                .collect(),
        )
    }
}

impl FromIterator<(NodeId, NodeId)> for Placement {
    fn from_iter<I: IntoIterator<Item = (NodeId, NodeId)>>(iter: I) -> Self {
        Placement(iter.into_iter().collect())
    }
}

/// Per-node capacity in fragment units. Nodes without an entry are unbounded.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Capacity(pub BTreeMap<NodeId, f64>);

impl Capacity {
    pub fn limit(&self, node: &NodeId) -> Option<f64> {
        self.0.get(node).copied()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CapacityViolation {
    pub node: NodeId,
    pub load: f64,
    pub limit: f64,
}

/// Cost for node `i` to access `fragment` held at `holder`:
/// `gamma * size * (1/bandwidth) * delay * other`, or 0 when local.
pub fn transfer_cost(
    i: &NodeId,
    holder: &NodeId,
    fragment: &FragmentSpec,
    links: &LinkTable,
    factors: &CostFactors,
) -> Result<f64, CostError> {
    if i == holder {
        return Ok(0.0);
    }
    link_product(i, holder, factors.gamma(i, holder), fragment, links, factors)
}

/// Charge for physically moving `fragment` from `src` to `dst`: the transfer
/// product with the user factor fixed at 1.
pub fn relocation_cost(
    src: &NodeId,
    dst: &NodeId,
    fragment: &FragmentSpec,
    links: &LinkTable,
    factors: &CostFactors,
) -> Result<f64, CostError> {
    link_product(src, dst, 1.0, fragment, links, factors)
}

fn link_product(
    i: &NodeId,
    j: &NodeId,
    gamma: f64,
    fragment: &FragmentSpec,
    links: &LinkTable,
    factors: &CostFactors,
) -> Result<f64, CostError> {
    let link = links.get(i, j).ok_or_else(|| CostError::MissingLink {
        from: i.clone(),
        to: j.clone(),
    })?;
    // Same association order as the rule `T is U*S*W*D*O`.
    Ok(gamma * fragment.size * link.reverse_bandwidth() * link.delay * factors.other(i, j))
}

/// Sum over accessing nodes and fragments of `r[i,j] * t(i, holder(j), j)`.
pub fn total_transmission_cost(
    placement: &Placement,
    stats: &AccessStats,
    links: &LinkTable,
    factors: &CostFactors,
    fragments: &Fragments,
) -> Result<f64, CostError> {
    let mut total = 0.0;
    for (i, j) in stats.accessed_pairs() {
        let r = stats.req(&i, &j);
        if r == 0.0 {
            continue;
        }
        let frag = fragments
            .get(&j)
            .ok_or_else(|| CostError::UnknownFragment(j.clone()))?;
        let holder = placement
            .holder(&j)
            .ok_or_else(|| CostError::Unplaced(j.clone()))?;
        total += r * transfer_cost(&i, holder, frag, links, factors)?;
    }
    Ok(total)
}

/// Per-node load against capacity; empty when the placement is feasible.
pub fn check_capacity(
    placement: &Placement,
    fragments: &Fragments,
    capacity: &Capacity,
) -> Vec<CapacityViolation> {
    let mut load: BTreeMap<&NodeId, f64> = BTreeMap::new();
    for (j, i) in placement.iter() {
        let units = fragments.get(j).map_or(0.0, |f| f.units);
        *load.entry(i).or_default() += units;
    }
    load.into_iter()
        .filter_map(|(node, load)| {
            let limit = capacity.limit(node)?;
            (load > limit).then(|| CapacityViolation {
                node: node.clone(),
                load,
                limit,
            })
        })
        .collect()
}

/// Weighted query count: sum of `e[i,j,k] * f[i,j,k]`.
pub fn execution_cost(stats: &AccessStats, factors: &CostFactors) -> f64 {
    stats
        .freq_entries()
        .map(|(i, j, k, n)| factors.exec_weight(i, j, k) * n as f64)
        .sum()
}

/// Everything rendered into a node's fact base.
pub struct FactInputs<'a> {
    pub links: &'a LinkTable,
    pub factors: &'a CostFactors,
    pub fragments: &'a Fragments,
    pub stats: &'a AccessStats,
    pub placement: &'a Placement,
    pub adjacency: &'a BTreeSet<(NodeId, NodeId)>,
    pub capacity: &'a Capacity,
}

/// The parameter facts for `inputs`, sorted by predicate then arguments.
///
/// `req` is emitted for every site and fragment so that policies can group
/// on it; `exec_weight` is emitted for every site, fragment and query type.
pub fn network_facts(inputs: &FactInputs<'_>) -> Vec<Fact> {
    let num = |x: f64| Value::number(x).expect("parameters are finite");
    let mut facts = Vec::new();
    for link in inputs.links.iter() {
        let (i, j) = (&link.from, &link.to);
        facts.push(fact!("delay", i, j, num(link.delay)));
        facts.push(fact!("reverse_bandwidth", i, j, num(link.reverse_bandwidth())));
        facts.push(fact!("other", i, j, num(inputs.factors.other(i, j))));
        facts.push(fact!("user_defined_parameter", i, j, num(inputs.factors.gamma(i, j))));
    }
    let sites = inputs.links.sites();
    for i in &sites {
        facts.push(fact!("delay", i, i, 0));
        facts.push(fact!("reverse_bandwidth", i, i, 0));
        facts.push(fact!("other", i, i, num(inputs.factors.other(i, i))));
        facts.push(fact!("user_defined_parameter", i, i, num(inputs.factors.gamma(i, i))));
    }
    for frag in inputs.fragments.values() {
        facts.push(fact!("size", &frag.id, num(frag.size)));
        facts.push(fact!("units", &frag.id, num(frag.units)));
        for i in &sites {
            facts.push(fact!("req", i, &frag.id, num(inputs.stats.req(i, &frag.id))));
            for k in QueryType::ALL {
                let e = inputs.factors.exec_weight(i, &frag.id, k);
                facts.push(fact!("exec_weight", i, &frag.id, k.to_value(), num(e)));
            }
        }
    }
    for (i, j, k, n) in inputs.stats.freq_entries() {
        facts.push(fact!("freq", i, j, k.to_value(), n));
    }
    for (j, i) in inputs.placement.iter() {
        facts.push(fact!("placed", j, i));
    }
    for (a, b) in inputs.adjacency {
        facts.push(fact!("adjacent", a, b));
    }
    for (i, c) in &inputs.capacity.0 {
        facts.push(fact!("capacity", i, num(*c)));
    }
    facts.sort();
    facts.dedup();
    facts
}

/// Fact text, one `pred(args).` per line.
pub fn emit_network_facts(inputs: &FactInputs<'_>) -> String {
    let mut out = String::new();
    for f in network_facts(inputs) {
        out.push_str(&f.to_string());
        out.push_str(".\n");
    }
    out
}
