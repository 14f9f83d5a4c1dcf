//! Scenario loading, deterministic workload, the round loop and metrics.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost::{
    check_capacity, execution_cost, network_facts, total_transmission_cost, AccessStats,
    Capacity, CapacityViolation, CostFactors, FactInputs, FragmentSpec, Fragments, Placement,
    QueryType,
};
use crate::network::{build_graph, contract_routers, LinkTable, NetworkGraph, NodeId, TopologySpec};
use crate::policy::{builtin_policy, PolicyRuleSet};
use crate::rules::{Fact, FactBase, Value};
use crate::runtime::{Cluster, ClusterConfig, RuntimeError};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error("infeasible initial placement at node {node}: load {load} exceeds capacity {limit}")]
    Infeasible { node: NodeId, load: f64, limit: f64 },
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid {
        path: path.into(),
        message: message.into(),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDoc {
    topology: TopologySpec,
    #[serde(default)]
    fragments: Vec<FragmentSpec>,
    #[serde(default)]
    placement: BTreeMap<String, NodeId>,
    #[serde(default)]
    capacities: BTreeMap<String, f64>,
    #[serde(default)]
    factors: FactorsDoc,
    #[serde(default)]
    workload: Vec<WorkloadEntry>,
    #[serde(default)]
    policy: PolicyRef,
    rounds: u64,
    #[serde(default = "one")]
    sync_period: u64,
    #[serde(default)]
    adjacency: AdjacencyDoc,
    #[serde(default)]
    stats: Vec<StatEntry>,
    #[serde(default)]
    requirements: Vec<RequirementEntry>,
}

fn one() -> u64 {
    1
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FactorsDoc {
    #[serde(default)]
    gamma: BTreeMap<String, f64>,
    #[serde(default)]
    other: BTreeMap<String, f64>,
    #[serde(default)]
    exec_weight: BTreeMap<String, f64>,
}

/// Where the policy comes from: a builtin name or a rule file.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum PolicyRef {
    Name(String),
    File { file: PathBuf },
}

impl Default for PolicyRef {
    fn default() -> Self {
        PolicyRef::Name("threshold".to_string())
    }
}

#[derive(Default, Deserialize)]
#[serde(untagged)]
enum AdjacencyDoc {
    #[default]
    #[serde(skip)]
    Derive,
    Keyword(String),
    Pairs(Vec<[NodeId; 2]>),
}

/// Steady query stream from one node to one fragment.
#[derive(Clone, Debug, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadEntry {
    pub node: NodeId,
    pub fragment: NodeId,
    #[serde(rename = "type")]
    pub kind: QueryType,
    /// Events per round.
    pub rate: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StatEntry {
    node: NodeId,
    fragment: NodeId,
    #[serde(rename = "type")]
    kind: QueryType,
    count: u64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RequirementEntry {
    node: NodeId,
    fragment: NodeId,
    r: f64,
}

/// A validated scenario.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub graph: NetworkGraph,
    pub links: LinkTable,
    pub fragments: Fragments,
    pub placement: Placement,
    pub capacity: Capacity,
    pub factors: CostFactors,
    /// Sorted by node, fragment and query type.
    pub workload: Vec<WorkloadEntry>,
    pub policy: PolicyRuleSet,
    pub rounds: u64,
    pub sync_period: u64,
    /// Symmetric set of adjacent site pairs.
    pub adjacency: BTreeSet<(NodeId, NodeId)>,
    /// Statistics in force before the first round.
    pub initial_stats: AccessStats,
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    Scenario::load(path)
}

impl Scenario {
    /// Reads a scenario file. Relative policy file paths resolve against the
    /// scenario's directory.
    pub fn load(path: &Path) -> Result<Scenario, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let dir = path.parent().unwrap_or_else(|| Path::new("."));
        Scenario::from_json_str(&text, dir)
    }

    pub fn from_json_str(text: &str, base_dir: &Path) -> Result<Scenario, ScenarioError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let doc: ScenarioDoc = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            invalid(path, e.into_inner().to_string())
        })?;
        Scenario::from_doc(doc, base_dir)
    }

    fn from_doc(doc: ScenarioDoc, base_dir: &Path) -> Result<Scenario, ScenarioError> {
        let graph = build_graph(&doc.topology).map_err(|e| invalid("topology", e.to_string()))?;
        let links = contract_routers(&graph);
        let sites = graph.site_ids();
        for a in &sites {
            for b in &sites {
                if a < b && links.get(a, b).is_none() {
                    return Err(invalid(
                        "topology",
                        format!("sites {a} and {b} are not connected"),
                    ));
                }
            }
        }
        let site = |path: &str, id: &NodeId| -> Result<(), ScenarioError> {
            if sites.contains(id) {
                Ok(())
            } else {
                Err(invalid(path, format!("unknown site {id}")))
            }
        };

        let mut fragments = Fragments::new();
        for (n, f) in doc.fragments.into_iter().enumerate() {
            non_negative(&format!("fragments[{n}].size"), f.size)?;
            non_negative(&format!("fragments[{n}].units"), f.units)?;
            if fragments.contains_key(&f.id) {
                return Err(invalid(
                    format!("fragments[{n}].id"),
                    format!("duplicate fragment {}", f.id),
                ));
            }
            fragments.insert(f.id.clone(), f);
        }
        let fragment = |path: &str, id: &NodeId| -> Result<(), ScenarioError> {
            if fragments.contains_key(id) {
                Ok(())
            } else {
                Err(invalid(path, format!("unknown fragment {id}")))
            }
        };

        let mut placement = Placement::new();
        for (key, node) in &doc.placement {
            let path = format!("placement.{key}");
            let j = parse_key(&path, key)?;
            fragment(&path, &j)?;
            site(&path, node)?;
            placement.place(j, node.clone());
        }
        if let Some(j) = fragments.keys().find(|j| placement.holder(j).is_none()) {
            return Err(invalid("placement", format!("fragment {j} is not placed")));
        }

        let mut capacity = Capacity::default();
        for (key, &c) in &doc.capacities {
            let path = format!("capacities.{key}");
            let i = parse_key(&path, key)?;
            site(&path, &i)?;
            non_negative(&path, c)?;
            capacity.0.insert(i, c);
        }
        if let Some(v) = check_capacity(&placement, &fragments, &capacity).into_iter().next() {
            return Err(ScenarioError::Infeasible {
                node: v.node,
                load: v.load,
                limit: v.limit,
            });
        }

        let mut factors = CostFactors::default();
        for (name, map, table) in [
            ("gamma", &doc.factors.gamma, &mut factors.gamma),
            ("other", &doc.factors.other, &mut factors.other),
        ] {
            for (key, &x) in map {
                let path = format!("factors.{name}.{key}");
                let [i, j] = parse_tuple::<2>(&path, key)?;
                site(&path, &i)?;
                site(&path, &j)?;
                non_negative(&path, x)?;
                table.insert((i, j), x);
            }
        }
        for (key, &x) in &doc.factors.exec_weight {
            let path = format!("factors.exec_weight.{key}");
            let [i, j, k] = parse_tuple::<3>(&path, key)?;
            site(&path, &i)?;
            fragment(&path, &j)?;
            let kind = k
                .as_symbol()
                .and_then(|s| s.parse::<QueryType>().ok())
                .ok_or_else(|| invalid(&path, format!("unknown query type {k}")))?;
            non_negative(&path, x)?;
            factors.exec_weight.insert((i, j, kind), x);
        }

        let mut seen = BTreeSet::new();
        for (n, w) in doc.workload.iter().enumerate() {
            site(&format!("workload[{n}].node"), &w.node)?;
            fragment(&format!("workload[{n}].fragment"), &w.fragment)?;
            non_negative(&format!("workload[{n}].rate"), w.rate)?;
            if !seen.insert((w.node.clone(), w.fragment.clone(), w.kind)) {
                return Err(invalid(
                    format!("workload[{n}]"),
                    "duplicate entry for this node, fragment and type",
                ));
            }
        }
        let mut workload = doc.workload;
        workload.sort_by(|a, b| (&a.node, &a.fragment, a.kind).cmp(&(&b.node, &b.fragment, b.kind)));

        let mut initial_stats = AccessStats::new();
        for (n, s) in doc.stats.iter().enumerate() {
            site(&format!("stats[{n}].node"), &s.node)?;
            fragment(&format!("stats[{n}].fragment"), &s.fragment)?;
            initial_stats.set_freq(s.node.clone(), s.fragment.clone(), s.kind, s.count);
        }
        for (n, r) in doc.requirements.iter().enumerate() {
            site(&format!("requirements[{n}].node"), &r.node)?;
            fragment(&format!("requirements[{n}].fragment"), &r.fragment)?;
            non_negative(&format!("requirements[{n}].r"), r.r)?;
            initial_stats.set_req(r.node.clone(), r.fragment.clone(), r.r);
        }

        let policy = load_policy(&doc.policy, base_dir)?;
        if doc.rounds == 0 {
            return Err(invalid("rounds", "must be at least 1"));
        }
        if doc.sync_period == 0 {
            return Err(invalid("sync_period", "must be at least 1"));
        }

        let adjacency = match doc.adjacency {
            AdjacencyDoc::Derive => graph.direct_site_pairs(),
            AdjacencyDoc::Keyword(k) if k == "derive" => graph.direct_site_pairs(),
            AdjacencyDoc::Keyword(k) => {
                return Err(invalid(
                    "adjacency",
                    format!("expected \"derive\" or a list of pairs, got \"{k}\""),
                ))
            }
            AdjacencyDoc::Pairs(pairs) => {
                let mut set = BTreeSet::new();
                for (n, [a, b]) in pairs.into_iter().enumerate() {
                    let path = format!("adjacency[{n}]");
                    site(&path, &a)?;
                    site(&path, &b)?;
                    if a == b {
                        return Err(invalid(path, format!("site {a} paired with itself")));
                    }
                    set.insert((b.clone(), a.clone()));
                    set.insert((a, b));
                }
                set
            }
        };

        Ok(Scenario {
            graph,
            links,
            fragments,
            placement,
            capacity,
            factors,
            workload,
            policy,
            rounds: doc.rounds,
            sync_period: doc.sync_period,
            adjacency,
            initial_stats,
        })
    }

    pub fn sites(&self) -> BTreeSet<NodeId> {
        self.graph.site_ids()
    }

    /// Parameter facts for the given placement and statistics.
    pub fn facts_for(&self, placement: &Placement, stats: &AccessStats) -> Vec<Fact> {
        network_facts(&FactInputs {
            links: &self.links,
            factors: &self.factors,
            fragments: &self.fragments,
            stats,
            placement,
            adjacency: &self.adjacency,
            capacity: &self.capacity,
        })
    }

    /// Facts every node starts from.
    pub fn initial_facts(&self) -> Vec<Fact> {
        self.facts_for(&self.placement, &self.initial_stats)
    }

    /// [`initial_facts`](Self::initial_facts) as fact text.
    pub fn emit_facts(&self) -> String {
        self.initial_facts().iter().fold(String::new(), |mut s, f| {
            let _ = writeln!(s, "{f}.");
            s
        })
    }
}

fn load_policy(policy: &PolicyRef, base_dir: &Path) -> Result<PolicyRuleSet, ScenarioError> {
    match policy {
        PolicyRef::Name(name) => builtin_policy(name).map_err(|e| invalid("policy", e.to_string())),
        PolicyRef::File { file } => {
            let path = base_dir.join(file);
            load_policy_file(&path).map_err(|e| match e {
                ScenarioError::Invalid { message, .. } => invalid("policy.file", message),
                other => other,
            })
        }
    }
}

/// Reads a policy from a rule file named after its stem.
pub fn load_policy_file(path: &Path) -> Result<PolicyRuleSet, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "custom".to_string());
    PolicyRuleSet::from_source(&name, &text).map_err(|e| invalid(path.display().to_string(), e.to_string()))
}

fn non_negative(path: &str, x: f64) -> Result<(), ScenarioError> {
    if x.is_finite() && x >= 0.0 {
        Ok(())
    } else {
        Err(invalid(path, format!("expected a finite non-negative number, got {x}")))
    }
}

fn parse_key(path: &str, key: &str) -> Result<Value, ScenarioError> {
    Value::parse_id(key).ok_or_else(|| invalid(path, format!("`{key}` is not a valid id")))
}

/// Parses `"a,b"` or `"a,b,c"` map keys.
fn parse_tuple<const N: usize>(path: &str, key: &str) -> Result<[Value; N], ScenarioError> {
    let parts: Vec<&str> = key.split(',').collect();
    if parts.len() != N {
        return Err(invalid(path, format!("expected {N} comma-separated ids")));
    }
    let values = parts
        .into_iter()
        .map(|p| parse_key(path, p))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(values.try_into().expect("length checked"))
}

/// One query issued in a round.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueryEvent {
    pub round: u64,
    pub node: NodeId,
    pub fragment: NodeId,
    pub kind: QueryType,
}

/// Events of `round`: each workload entry contributes
/// `floor((round + 1) * rate) - floor(round * rate)` events, so counts are
/// integers that average to the rate.
pub fn generate_workload(scenario: &Scenario, round: u64) -> Vec<QueryEvent> {
    let mut events = Vec::new();
    for w in &scenario.workload {
        for _ in 0..events_in_round(w.rate, round) {
            events.push(QueryEvent {
                round,
                node: w.node.clone(),
                fragment: w.fragment.clone(),
                kind: w.kind,
            });
        }
    }
    events
}

fn events_in_round(rate: f64, round: u64) -> u64 {
    let r = round as f64;
    ((r + 1.0) * rate).floor() as u64 - (r * rate).floor() as u64
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MoveRecord {
    pub src: NodeId,
    pub dst: NodeId,
    pub fragment: NodeId,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoundMetrics {
    pub round: u64,
    pub transmission_cost: f64,
    pub execution_cost: f64,
    pub relocation_cost: f64,
    pub moves: Vec<MoveRecord>,
    #[serde(skip)]
    pub capacity_violations: Vec<CapacityViolation>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub rounds: u64,
    pub transmission_cost: f64,
    pub execution_cost: f64,
    pub relocation_cost: f64,
    pub moves: usize,
    pub failure: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricsTimeline {
    pub rounds: Vec<RoundMetrics>,
    /// Set when the run stopped early.
    pub failure: Option<String>,
}

impl MetricsTimeline {
    pub fn summary(&self) -> Summary {
        Summary {
            rounds: self.rounds.len() as u64,
            transmission_cost: self.rounds.iter().map(|r| r.transmission_cost).sum(),
            execution_cost: self.rounds.iter().map(|r| r.execution_cost).sum(),
            relocation_cost: self.rounds.iter().map(|r| r.relocation_cost).sum(),
            moves: self.rounds.iter().map(|r| r.moves.len()).sum(),
            failure: self.failure.clone(),
        }
    }

    pub fn total_moves(&self) -> usize {
        self.rounds.iter().map(|r| r.moves.len()).sum()
    }

    /// One JSON object per round, then `{"summary": {...}}`.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        #[derive(Serialize)]
        struct SummaryLine {
            summary: Summary,
        }
        for r in &self.rounds {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        serde_json::to_writer(&mut out, &SummaryLine { summary: self.summary() })?;
        out.write_all(b"\n")
    }

    /// The same numbers as [`write_jsonl`](Self::write_jsonl), one row per
    /// round and a final `total` row. Moves are `src>dst:fragment`, joined
    /// with `;`.
    pub fn write_csv<W: Write>(&self, out: W) -> io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "round",
            "transmission_cost",
            "execution_cost",
            "relocation_cost",
            "moves",
        ])?;
        for r in &self.rounds {
            let moves: Vec<String> = r
                .moves
                .iter()
                .map(|m| format!("{}>{}:{}", m.src, m.dst, m.fragment))
                .collect();
            w.write_record([
                r.round.to_string(),
                number(r.transmission_cost),
                number(r.execution_cost),
                number(r.relocation_cost),
                moves.join(";"),
            ])?;
        }
        let s = self.summary();
        w.write_record([
            "total".to_string(),
            number(s.transmission_cost),
            number(s.execution_cost),
            number(s.relocation_cost),
            s.moves.to_string(),
        ])?;
        w.flush()
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("JSON is UTF-8")
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("CSV is UTF-8")
    }
}

/// Formats a number exactly as it appears in the JSON-lines output.
fn number(x: f64) -> String {
    serde_json::to_string(&x).expect("f64 serializes")
}

/// A scenario run that can be advanced one round at a time.
pub struct Simulation {
    scenario: Scenario,
    cluster: Cluster,
    stats: AccessStats,
    round: u64,
    timeline: MetricsTimeline,
}

impl Simulation {
    pub fn new(scenario: Scenario) -> Self {
        let base: FactBase = scenario.initial_facts().into_iter().collect();
        let config = ClusterConfig {
            links: scenario.links.clone(),
            factors: scenario.factors.clone(),
            fragments: scenario.fragments.clone(),
            capacity: scenario.capacity.clone(),
            sync_period: scenario.sync_period,
        };
        let cluster = Cluster::new(
            scenario.sites(),
            &base,
            &scenario.initial_stats,
            config,
            scenario.policy.clone(),
        );
        Simulation {
            stats: scenario.initial_stats.clone(),
            scenario,
            cluster,
            round: 0,
            timeline: MetricsTimeline::default(),
        }
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn cluster(&self) -> &Cluster {
        &self.cluster
    }

    /// Cluster-wide statistics accumulated so far.
    pub fn stats(&self) -> &AccessStats {
        &self.stats
    }

    pub fn timeline(&self) -> &MetricsTimeline {
        &self.timeline
    }

    pub fn into_timeline(self) -> MetricsTimeline {
        self.timeline
    }

    pub fn is_finished(&self) -> bool {
        self.round >= self.scenario.rounds || self.timeline.failure.is_some()
    }

    /// Runs the next round: workload, then synchronization and allocation on
    /// sync rounds, then metrics. Returns `None` once all rounds have run.
    pub fn step(&mut self) -> Result<Option<&RoundMetrics>, RuntimeError> {
        if self.is_finished() {
            return Ok(None);
        }
        let round = self.round;
        let sc = &self.scenario;
        self.cluster.set_round(round);
        for e in generate_workload(sc, round) {
            self.cluster.record_query(&e.node, &e.fragment, e.kind)?;
            self.stats.increment(&e.node, &e.fragment, e.kind);
        }
        let mut moves = Vec::new();
        let mut relocation_cost = 0.0;
        if self.cluster.is_sync_round() {
            self.cluster.synchronize();
            let outcome = self.cluster.allocation_round()?;
            relocation_cost = outcome.relocation_cost;
            moves = outcome
                .moves
                .into_iter()
                .map(|m| MoveRecord {
                    src: m.trigger.src,
                    dst: m.trigger.dst,
                    fragment: m.trigger.fragment,
                })
                .collect();
        }
        let placement = self.cluster.placement();
        let transmission_cost =
            total_transmission_cost(&placement, &self.stats, &sc.links, &sc.factors, &sc.fragments)?;
        self.timeline.rounds.push(RoundMetrics {
            round,
            transmission_cost,
            execution_cost: execution_cost(&self.stats, &sc.factors),
            relocation_cost,
            moves,
            capacity_violations: check_capacity(&placement, &sc.fragments, &sc.capacity),
        });
        self.round += 1;
        Ok(self.timeline.rounds.last())
    }

    /// Runs the remaining rounds. A failure stops the run and is recorded in
    /// the timeline.
    pub fn run_to_end(&mut self) -> &MetricsTimeline {
        loop {
            match self.step() {
                Ok(Some(_)) => {}
                Ok(None) => break,
                Err(e) => {
                    log::error!("round {}: {e}", self.round);
                    self.timeline.failure = Some(format!("round {}: {e}", self.round));
                    break;
                }
            }
        }
        &self.timeline
    }
}

/// Runs a scenario to completion.
pub fn run(scenario: &Scenario) -> MetricsTimeline {
    let mut sim = Simulation::new(scenario.clone());
    sim.run_to_end();
    sim.into_timeline()
}
