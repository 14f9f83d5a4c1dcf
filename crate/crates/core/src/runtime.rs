//! Simulated nodes: local statistics, all-to-all delta synchronization,
//! policy evaluation and fragment transfers.
//!
//! Nodes are stepped one at a time in ascending id order; nothing here
//! depends on real concurrency.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::cost::{
    relocation_cost, AccessStats, Capacity, CostError, CostFactors, Fragments, Placement,
    QueryType,
};
use crate::fact;
use crate::network::{LinkTable, NodeId};
use crate::policy::{compute_triggers, resolve_conflicts, Move, MoveTrigger, PolicyRuleSet, ResolveContext};
use crate::rules::{Fact, FactBase, RuleError};

#[derive(Debug, Error)]
pub enum RuntimeError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("unknown fragment {0}")]
    UnknownFragment(NodeId),
    #[error("policy evaluation failed at node {node}: {source}")]
    Evaluation {
        node: NodeId,
        #[source]
        source: RuleError,
    },
    #[error("nodes {first} and {other} derived different triggers")]
    TriggerDisagreement { first: NodeId, other: NodeId },
    #[error("fragment {fragment} not placed at src {src}")]
    NotPlaced { fragment: NodeId, src: NodeId },
    #[error("placement of fragment {fragment} differs between nodes")]
    PlacementMismatch { fragment: NodeId },
    #[error(transparent)]
    Cost(#[from] CostError),
}

/// Fact changes staged since the last synchronization. An atom is never in
/// both sets.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PendingDeltas {
    pub additions: BTreeSet<Fact>,
    pub removals: BTreeSet<Fact>,
}

impl PendingDeltas {
    pub fn assert_fact(&mut self, f: Fact) {
        if !self.removals.remove(&f) {
            self.additions.insert(f);
        }
    }

    pub fn retract_fact(&mut self, f: Fact) {
        if !self.additions.remove(&f) {
            self.removals.insert(f);
        }
    }

    pub fn is_empty(&self) -> bool {
        self.additions.is_empty() && self.removals.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SyncMessage {
    pub from: NodeId,
    pub round: u64,
    pub additions: Vec<Fact>,
    pub removals: Vec<Fact>,
}

#[derive(Clone, Debug)]
pub struct NodeState {
    pub id: NodeId,
    pub base: FactBase,
    pub pending: PendingDeltas,
    /// Statistics recorded at this node.
    pub stats: AccessStats,
}

impl NodeState {
    pub fn new(id: NodeId, base: FactBase, stats: AccessStats) -> Self {
        NodeState {
            id,
            base,
            pending: PendingDeltas::default(),
            stats,
        }
    }

    /// Counts one query and stages the changed `freq` (and derived `req`)
    /// facts for the next synchronization.
    pub fn record_query(
        &mut self,
        fragment: &NodeId,
        kind: QueryType,
        fragments: &Fragments,
    ) -> Result<(), RuntimeError> {
        if !fragments.contains_key(fragment) {
            return Err(RuntimeError::UnknownFragment(fragment.clone()));
        }
        let i = &self.id;
        let old_total = self.stats.total_freq(i, fragment);
        let (old, new) = self.stats.increment(i, fragment, kind);
        let k = kind.to_value();
        if let Some(old) = old {
            self.pending
                .retract_fact(fact!("freq", i, fragment, k.clone(), old));
        }
        self.pending.assert_fact(fact!("freq", i, fragment, k, new));
        if !self.stats.has_explicit_req(i, fragment) {
            self.pending
                .retract_fact(fact!("req", i, fragment, old_total));
            self.pending
                .assert_fact(fact!("req", i, fragment, old_total + 1));
        }
        Ok(())
    }

    fn take_message(&mut self, round: u64) -> SyncMessage {
        let pending = std::mem::take(&mut self.pending);
        SyncMessage {
            from: self.id.clone(),
            round,
            additions: pending.additions.into_iter().collect(),
            removals: pending.removals.into_iter().collect(),
        }
    }
}

/// Parameters shared by every node.
#[derive(Clone, Debug)]
pub struct ClusterConfig {
    pub links: LinkTable,
    pub factors: CostFactors,
    pub fragments: Fragments,
    pub capacity: Capacity,
    pub sync_period: u64,
}

/// Outcome of one allocation round.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RoundMoves {
    /// Whether the policy was evaluated at all.
    pub evaluated: bool,
    pub triggers: Vec<MoveTrigger>,
    pub moves: Vec<Move>,
    pub relocation_cost: f64,
}

#[derive(Clone, Debug)]
pub struct Cluster {
    nodes: Vec<NodeState>,
    round: u64,
    dirty: bool,
    config: ClusterConfig,
    policy: PolicyRuleSet,
}

impl Cluster {
    /// Builds a cluster whose nodes all start from `base`. Nodes are kept in
    /// ascending id order; `stats` is sliced per node.
    pub fn new(
        ids: impl IntoIterator<Item = NodeId>,
        base: &FactBase,
        stats: &AccessStats,
        config: ClusterConfig,
        policy: PolicyRuleSet,
    ) -> Self {
        let ids: BTreeSet<NodeId> = ids.into_iter().collect();
        let nodes = ids
            .into_iter()
            .map(|id| {
                let slice = stats.slice_for(&id);
                NodeState::new(id, base.clone(), slice)
            })
            .collect();
        Cluster {
            nodes,
            round: 0,
            dirty: true,
            config,
            policy,
        }
    }

    pub fn nodes(&self) -> &[NodeState] {
        &self.nodes
    }

    pub fn node(&self, id: &NodeId) -> Option<&NodeState> {
        self.index(id).map(|i| &self.nodes[i])
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn set_round(&mut self, round: u64) {
        self.round = round;
    }

    pub fn config(&self) -> &ClusterConfig {
        &self.config
    }

    pub fn policy(&self) -> &PolicyRuleSet {
        &self.policy
    }

    /// Whether facts changed since the policy last ran.
    pub fn is_dirty(&self) -> bool {
        self.dirty
    }

    pub fn is_sync_round(&self) -> bool {
        self.round.is_multiple_of(self.config.sync_period)
    }

    fn index(&self, id: &NodeId) -> Option<usize> {
        self.nodes.binary_search_by(|n| n.id.cmp(id)).ok()
    }

    pub fn record_query(
        &mut self,
        node: &NodeId,
        fragment: &NodeId,
        kind: QueryType,
    ) -> Result<(), RuntimeError> {
        let idx = self
            .index(node)
            .ok_or_else(|| RuntimeError::UnknownNode(node.clone()))?;
        self.nodes[idx].record_query(fragment, kind, &self.config.fragments)
    }

    /// Exchanges every node's pending deltas with every node, itself
    /// included. Messages are applied in ascending sender order; an atom
    /// retracted by any node stays retracted even if another asserts it.
    pub fn synchronize(&mut self) -> Vec<SyncMessage> {
        let round = self.round;
        let messages: Vec<SyncMessage> = self
            .nodes
            .iter_mut()
            .map(|n| n.take_message(round))
            .collect();
        for m in &messages {
            log::trace!(
                "round {round}: sync from {} (+{} -{})",
                m.from,
                m.additions.len(),
                m.removals.len()
            );
        }
        let removed: BTreeSet<&Fact> = messages.iter().flat_map(|m| &m.removals).collect();
        for m in &messages {
            for f in m.additions.iter().filter(|f| removed.contains(f)) {
                log::warn!("round {round}: {f} asserted by {} and retracted elsewhere; retraction wins", m.from);
            }
        }
        let mut changed = false;
        for node in &mut self.nodes {
            for m in &messages {
                let adds = m.additions.iter().filter(|f| !removed.contains(f));
                changed |= node.base.update(adds, &m.removals).changed();
            }
        }
        self.dirty |= changed;
        messages
    }

    /// Runs the policy on every node, checks that all nodes agree, and
    /// executes the resolved moves. Skipped when no facts changed since the
    /// previous evaluation. On error the cluster is left as it was.
    pub fn allocation_round(&mut self) -> Result<RoundMoves, RuntimeError> {
        if !self.dirty {
            log::trace!("round {}: facts unchanged, no evaluation", self.round);
            return Ok(RoundMoves::default());
        }
        let snapshot = self.nodes.clone();
        match self.allocate() {
            Ok(outcome) => Ok(outcome),
            Err(e) => {
                self.nodes = snapshot;
                Err(e)
            }
        }
    }

    fn allocate(&mut self) -> Result<RoundMoves, RuntimeError> {
        let mut agreed: Option<(NodeId, Vec<MoveTrigger>)> = None;
        for node in &self.nodes {
            log::trace!("round {}: evaluating policy at node {}", self.round, node.id);
            let triggers =
                compute_triggers(&node.base, &self.policy).map_err(|source| RuntimeError::Evaluation {
                    node: node.id.clone(),
                    source,
                })?;
            match &agreed {
                None => agreed = Some((node.id.clone(), triggers)),
                Some((first, t)) if *t != triggers => {
                    return Err(RuntimeError::TriggerDisagreement {
                        first: first.clone(),
                        other: node.id.clone(),
                    })
                }
                Some(_) => {}
            }
        }
        self.dirty = false;
        let triggers = agreed.map(|(_, t)| t).unwrap_or_default();
        for t in &triggers {
            log::trace!("round {}: trigger {t}", self.round);
        }

        let base = &self.nodes[0].base;
        let placement = Placement::from_facts(base);
        let stats = AccessStats::from_facts(base);
        let moves = resolve_conflicts(
            &triggers,
            &ResolveContext {
                placement: &placement,
                stats: &stats,
                links: &self.config.links,
                factors: &self.config.factors,
                fragments: &self.config.fragments,
                capacity: &self.config.capacity,
            },
        );
        let mut relocation = 0.0;
        for m in &moves {
            relocation += self.execute_transfer(m)?;
        }
        Ok(RoundMoves {
            evaluated: true,
            triggers,
            moves,
            relocation_cost: relocation,
        })
    }

    /// Moves the fragment on every node and returns the relocation charge.
    pub fn execute_transfer(&mut self, mv: &Move) -> Result<f64, RuntimeError> {
        let t = &mv.trigger;
        let frag = self
            .config
            .fragments
            .get(&t.fragment)
            .ok_or_else(|| RuntimeError::UnknownFragment(t.fragment.clone()))?;
        let old = fact!("placed", &t.fragment, &t.src);
        let holding = self.nodes.iter().filter(|n| n.base.contains(&old)).count();
        if holding == 0 {
            return Err(RuntimeError::NotPlaced {
                fragment: t.fragment.clone(),
                src: t.src.clone(),
            });
        }
        if holding != self.nodes.len() {
            return Err(RuntimeError::PlacementMismatch {
                fragment: t.fragment.clone(),
            });
        }
        let charge = relocation_cost(&t.src, &t.dst, frag, &self.config.links, &self.config.factors)?;
        let new = fact!("placed", &t.fragment, &t.dst);
        for node in &mut self.nodes {
            node.base.update([&new], [&old]);
        }
        self.dirty = true;
        log::trace!(
            "round {}: transfer {t} (benefit {}, charge {charge})",
            self.round,
            mv.benefit
        );
        Ok(charge)
    }

    /// Placement as held by the first node.
    pub fn placement(&self) -> Placement {
        self.nodes
            .first()
            .map(|n| Placement::from_facts(&n.base))
            .unwrap_or_default()
    }

    /// Whether every node's fact base serializes identically.
    pub fn converged(&self) -> bool {
        let mut digests = self.nodes.iter().map(|n| n.base.digest());
        match digests.next() {
            Some(first) => digests.all(|d| d == first),
            None => true,
        }
    }
}
