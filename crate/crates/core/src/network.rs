//! Cluster topology: sites, routers and links, and the contraction of router
//! paths into direct site-to-site links.
//!
//! A contracted link between two sites follows the path of least total delay,
//! where the delay of a path is the sum of its edge delays plus the delays of
//! the routers it passes through. Sites never relay traffic. The link's
//! bandwidth is the narrowest edge on that path. Ties between equal-delay
//! paths go to the lexicographically smallest sequence of element ids.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Deserializer};
use thiserror::Error;

use crate::rules::Value;

pub type NodeId = Value;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetworkError {
    #[error("topology has no sites")]
    NoSites,
    #[error("duplicate element id {0}")]
    DuplicateId(Value),
    #[error("edge {index}: unknown endpoint {id}")]
    UnknownEndpoint { index: usize, id: Value },
    #[error("edge {index}: self-loop on {id}")]
    SelfLoop { index: usize, id: Value },
    #[error("edge {index}: duplicate edge between {a} and {b}")]
    DuplicateEdge { index: usize, a: Value, b: Value },
    #[error("{what}: negative delay {delay}")]
    NegativeDelay { what: String, delay: f64 },
    #[error("{what}: bandwidth must be positive, got {bandwidth}")]
    NonPositiveBandwidth { what: String, bandwidth: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ElementKind {
    Site,
    Router,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkElement {
    pub id: NodeId,
    pub kind: ElementKind,
    /// Milliseconds.
    pub delay: f64,
    /// MB/s; `f64::INFINITY` when unconstrained.
    pub bandwidth: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub a: NodeId,
    pub b: NodeId,
    pub delay: f64,
    pub bandwidth: f64,
}

/// Topology as written in a scenario document.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySpec {
    pub sites: Vec<ElementSpec>,
    #[serde(default)]
    pub routers: Vec<ElementSpec>,
    #[serde(default)]
    pub edges: Vec<EdgeSpec>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementSpec {
    pub id: NodeId,
    #[serde(default)]
    pub delay: f64,
    #[serde(default = "infinite", deserialize_with = "bandwidth")]
    pub bandwidth: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    pub a: NodeId,
    pub b: NodeId,
    #[serde(default)]
    pub delay: f64,
    #[serde(default = "infinite", deserialize_with = "bandwidth")]
    pub bandwidth: f64,
}

fn infinite() -> f64 {
    f64::INFINITY
}

/// A bandwidth is a number, or `null` / `"inf"` for unbounded.
fn bandwidth<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }
    match Option::<Raw>::deserialize(d)? {
        None => Ok(f64::INFINITY),
        Some(Raw::Num(n)) => Ok(n),
        Some(Raw::Text(t)) if matches!(t.as_str(), "inf" | "infinity" | "Infinity") => {
            Ok(f64::INFINITY)
        }
        Some(Raw::Text(t)) => Err(serde::de::Error::custom(format!(
            "expected a number or \"inf\", got \"{t}\""
        ))),
    }
}

impl ElementSpec {
    pub fn new(id: impl Into<NodeId>, delay: f64) -> Self {
        ElementSpec {
            id: id.into(),
            delay,
            bandwidth: f64::INFINITY,
        }
    }
}

impl EdgeSpec {
    pub fn new(a: impl Into<NodeId>, b: impl Into<NodeId>, delay: f64, bandwidth: f64) -> Self {
        EdgeSpec {
            a: a.into(),
            b: b.into(),
            delay,
            bandwidth,
        }
    }
}

#[derive(Clone, Debug)]
pub struct NetworkGraph {
    elements: Vec<NetworkElement>,
    index: BTreeMap<NodeId, usize>,
    edges: Vec<Edge>,
    /// element -> (neighbor element, edge index)
    adjacency: Vec<Vec<(usize, usize)>>,
}

/// Validates a topology description.
///
/// Ids must be unique across sites and routers together, since edges name
/// their endpoints by id alone.
pub fn build_graph(spec: &TopologySpec) -> Result<NetworkGraph, NetworkError> {
    if spec.sites.is_empty() {
        return Err(NetworkError::NoSites);
    }
    let mut elements = Vec::new();
    let mut index = BTreeMap::new();
    let kinds = spec
        .sites
        .iter()
        .map(|s| (s, ElementKind::Site))
        .chain(spec.routers.iter().map(|r| (r, ElementKind::Router)));
    for (el, kind) in kinds {
        let what = format!("element {}", el.id);
        check_delay(&what, el.delay)?;
        check_bandwidth(&what, el.bandwidth)?;
        if index.insert(el.id.clone(), elements.len()).is_some() {
            return Err(NetworkError::DuplicateId(el.id.clone()));
        }
        elements.push(NetworkElement {
            id: el.id.clone(),
            kind,
            delay: el.delay,
            bandwidth: el.bandwidth,
        });
    }

    let mut adjacency = vec![Vec::new(); elements.len()];
    let mut pairs = BTreeSet::new();
    let mut edges = Vec::with_capacity(spec.edges.len());
    for (i, e) in spec.edges.iter().enumerate() {
        let what = format!("edge {i}");
        let lookup = |id: &Value| {
            index.get(id).copied().ok_or_else(|| NetworkError::UnknownEndpoint {
                index: i,
                id: id.clone(),
            })
        };
        let (a, b) = (lookup(&e.a)?, lookup(&e.b)?);
        if a == b {
            return Err(NetworkError::SelfLoop {
                index: i,
                id: e.a.clone(),
            });
        }
        if !pairs.insert((a.min(b), a.max(b))) {
            return Err(NetworkError::DuplicateEdge {
                index: i,
                a: e.a.clone(),
                b: e.b.clone(),
            });
        }
        check_delay(&what, e.delay)?;
        check_bandwidth(&what, e.bandwidth)?;
        adjacency[a].push((b, i));
        adjacency[b].push((a, i));
        edges.push(Edge {
            a: e.a.clone(),
            b: e.b.clone(),
            delay: e.delay,
            bandwidth: e.bandwidth,
        });
    }
    Ok(NetworkGraph {
        elements,
        index,
        edges,
        adjacency,
    })
}

fn check_delay(what: &str, delay: f64) -> Result<(), NetworkError> {
    if delay.is_nan() || delay < 0.0 || delay.is_infinite() {
        return Err(NetworkError::NegativeDelay {
            what: what.to_string(),
            delay,
        });
    }
    Ok(())
}

fn check_bandwidth(what: &str, bandwidth: f64) -> Result<(), NetworkError> {
    if bandwidth.is_nan() || bandwidth <= 0.0 {
        return Err(NetworkError::NonPositiveBandwidth {
            what: what.to_string(),
            bandwidth,
        });
    }
    Ok(())
}

impl NetworkGraph {
    pub fn sites(&self) -> impl Iterator<Item = &NetworkElement> {
        self.elements.iter().filter(|e| e.kind == ElementKind::Site)
    }

    pub fn routers(&self) -> impl Iterator<Item = &NetworkElement> {
        self.elements.iter().filter(|e| e.kind == ElementKind::Router)
    }

    pub fn site_ids(&self) -> BTreeSet<NodeId> {
        self.sites().map(|s| s.id.clone()).collect()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn element(&self, id: &Value) -> Option<&NetworkElement> {
        self.index.get(id).map(|&i| &self.elements[i])
    }

    /// Site pairs joined by a single edge with no router in between, in both
    /// orientations.
    pub fn direct_site_pairs(&self) -> BTreeSet<(NodeId, NodeId)> {
        let is_site = |id: &Value| self.element(id).is_some_and(|e| e.kind == ElementKind::Site);
        self.edges
            .iter()
            .filter(|e| is_site(&e.a) && is_site(&e.b))
            .flat_map(|e| [(e.a.clone(), e.b.clone()), (e.b.clone(), e.a.clone())])
            .collect()
    }
}

/// A direct site-to-site link standing in for the router path between them.
#[derive(Clone, Debug, PartialEq)]
pub struct EffectiveLink {
    pub from: NodeId,
    pub to: NodeId,
    pub delay: f64,
    pub bandwidth: f64,
}

impl EffectiveLink {
    /// `1 / bandwidth`, with unbounded bandwidth mapping to 0.
    pub fn reverse_bandwidth(&self) -> f64 {
        if self.bandwidth.is_infinite() {
            0.0
        } else {
            1.0 / self.bandwidth
        }
    }
}

/// Contracted links for every ordered pair of mutually reachable sites.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinkTable {
    links: BTreeMap<(NodeId, NodeId), EffectiveLink>,
}

impl LinkTable {
    pub fn get(&self, from: &Value, to: &Value) -> Option<&EffectiveLink> {
        self.links.get(&(from.clone(), to.clone()))
    }

    pub fn iter(&self) -> impl Iterator<Item = &EffectiveLink> {
        self.links.values()
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn insert(&mut self, link: EffectiveLink) {
        self.links.insert((link.from.clone(), link.to.clone()), link);
    }

    /// Sites that appear in the table.
    pub fn sites(&self) -> BTreeSet<NodeId> {
        self.links.keys().map(|(a, _)| a.clone()).collect()
    }
}

#[derive(Clone, Debug)]
struct Label {
    delay: f64,
    bandwidth: f64,
    path: Vec<Value>,
}

impl Label {
    fn cmp_key(&self, other: &Label) -> Ordering {
        self.delay
            .total_cmp(&other.delay)
            .then_with(|| self.path.cmp(&other.path))
    }
}

/// Replaces router paths with direct links between sites.
///
/// Each unordered pair is computed once, from the smaller id, and mirrored,
/// so `(i, j)` and `(j, i)` are identical. Unreachable pairs are absent;
/// `(i, i)` has zero delay and unbounded bandwidth.
pub fn contract_routers(graph: &NetworkGraph) -> LinkTable {
    let mut table = LinkTable::default();
    for (s, site) in graph.elements.iter().enumerate() {
        if site.kind != ElementKind::Site {
            continue;
        }
        table.insert(EffectiveLink {
            from: site.id.clone(),
            to: site.id.clone(),
            delay: 0.0,
            bandwidth: f64::INFINITY,
        });
        for (t, label) in shortest_from(graph, s) {
            let target = &graph.elements[t].id;
            if *target <= site.id {
                continue;
            }
            for (from, to) in [(&site.id, target), (target, &site.id)] {
                table.insert(EffectiveLink {
                    from: from.clone(),
                    to: to.clone(),
                    delay: label.delay,
                    bandwidth: label.bandwidth,
                });
            }
        }
    }
    table
}

/// Label-setting search from `source`, relaying only through routers.
/// Returns the settled label of every other reachable site.
fn shortest_from(graph: &NetworkGraph, source: usize) -> Vec<(usize, Label)> {
    let n = graph.elements.len();
    let mut labels: Vec<Option<Label>> = vec![None; n];
    let mut settled = vec![false; n];
    labels[source] = Some(Label {
        delay: 0.0,
        bandwidth: f64::INFINITY,
        path: vec![graph.elements[source].id.clone()],
    });
    let mut reached = Vec::new();
    loop {
        let next = (0..n)
            .filter(|&i| !settled[i])
            .filter_map(|i| labels[i].as_ref().map(|l| (i, l)))
            .min_by(|a, b| a.1.cmp_key(b.1))
            .map(|(i, _)| i);
        let Some(u) = next else { break };
        settled[u] = true;
        let label = labels[u].clone().expect("chosen label exists");
        if u != source && graph.elements[u].kind == ElementKind::Site {
            reached.push((u, label));
            continue;
        }
        for &(v, e) in &graph.adjacency[u] {
            if settled[v] {
                continue;
            }
            let edge = &graph.edges[e];
            let element = &graph.elements[v];
            let mut delay = label.delay + edge.delay;
            if element.kind == ElementKind::Router {
                delay += element.delay;
            }
            let mut path = label.path.clone();
            path.push(element.id.clone());
            let candidate = Label {
                delay,
                bandwidth: label.bandwidth.min(edge.bandwidth),
                path,
            };
            let better = labels[v]
                .as_ref()
                .is_none_or(|cur| candidate.cmp_key(cur) == Ordering::Less);
            if better {
                labels[v] = Some(candidate);
            }
        }
    }
    reached
}
