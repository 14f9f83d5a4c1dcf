//! Predicate stratification for aggregation.

use std::collections::BTreeMap;

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};

use super::ast::{Literal, Program};
use super::error::RuleError;

/// A program whose predicates have been assigned strata. Immutable once built.
#[derive(Clone, Debug)]
pub struct StratifiedProgram {
    program: Program,
    strata: BTreeMap<String, usize>,
}

impl StratifiedProgram {
    pub fn program(&self) -> &Program {
        &self.program
    }

    /// Stratum of `predicate`; predicates the rules never mention are in 0.
    pub fn stratum(&self, predicate: &str) -> usize {
        self.strata.get(predicate).copied().unwrap_or(0)
    }

    pub fn strata(&self) -> &BTreeMap<String, usize> {
        &self.strata
    }

    pub fn stratum_count(&self) -> usize {
        self.strata.values().max().map_or(1, |m| m + 1)
    }
}

/// Assigns every predicate the lowest stratum such that aggregation inputs
/// sit strictly below the aggregating head and plain dependencies sit at or
/// below it.
pub fn stratify(program: Program) -> Result<StratifiedProgram, RuleError> {
    let mut graph: DiGraph<String, bool> = DiGraph::new();
    let mut index: BTreeMap<String, NodeIndex> = BTreeMap::new();
    let mut node = |graph: &mut DiGraph<String, bool>, name: &str| -> NodeIndex {
        *index
            .entry(name.to_string())
            .or_insert_with(|| graph.add_node(name.to_string()))
    };

    for fact in &program.facts {
        node(&mut graph, &fact.predicate);
    }
    // Edge body -> head; weight true when the dependency is through a sum.
    for rule in &program.rules {
        let head = node(&mut graph, &rule.head.predicate);
        for lit in &rule.body {
            let (pred, strict) = match lit {
                Literal::Atom(a) => (&a.predicate, false),
                Literal::Sum { atom, .. } => (&atom.predicate, true),
                _ => continue,
            };
            let body = node(&mut graph, pred);
            graph.add_edge(body, head, strict);
        }
    }

    // tarjan_scc yields components in reverse topological order.
    let mut components = tarjan_scc(&graph);
    components.reverse();
    let mut component_of = vec![0usize; graph.node_count()];
    for (c, members) in components.iter().enumerate() {
        for &n in members {
            component_of[n.index()] = c;
        }
    }
    for members in &components {
        let c = component_of[members[0].index()];
        let cyclic = graph.edge_indices().any(|e| {
            let (a, b) = graph.edge_endpoints(e).unwrap();
            graph[e] && component_of[a.index()] == c && component_of[b.index()] == c
        });
        if cyclic {
            let mut predicates: Vec<String> = members.iter().map(|&n| graph[n].clone()).collect();
            predicates.sort();
            return Err(RuleError::AggregationCycle { predicates });
        }
    }

    let mut level = vec![0usize; components.len()];
    for (c, members) in components.iter().enumerate() {
        for &n in members {
            for e in graph.edges_directed(n, petgraph::Direction::Incoming) {
                use petgraph::visit::EdgeRef;
                let src = component_of[e.source().index()];
                if src == c {
                    continue;
                }
                let need = level[src] + usize::from(*e.weight());
                level[c] = level[c].max(need);
            }
        }
    }

    let strata = index
        .iter()
        .map(|(name, n)| (name.clone(), level[component_of[n.index()]]))
        .collect();
    Ok(StratifiedProgram { program, strata })
}
