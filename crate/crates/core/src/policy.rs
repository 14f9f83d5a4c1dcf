//! Allocation policies as rule sets, and the step from `move/3` answers to
//! executable moves.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::cost::{
    total_transmission_cost, AccessStats, Capacity, CostFactors, Fragments, Placement,
};
use crate::network::{LinkTable, NodeId};
use crate::rules::{evaluate, parse_program, stratify, FactBase, Program, RuleError, StratifiedProgram};

/// Derives `transfer_cost(I,J,T)` from the link and fragment facts.
pub const TRANSFER_COST_RULES: &str = include_str!("policies/transfer_cost.rules");
pub const THRESHOLD_RULES: &str = include_str!("policies/threshold.rules");
pub const NNA_RULES: &str = include_str!("policies/nna.rules");

pub const BUILTIN_POLICIES: [&str; 2] = ["threshold", "nna"];

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("unknown policy `{0}` (expected threshold or nna)")]
    Unknown(String),
    #[error("policy `{name}`: {source}")]
    Rules {
        name: String,
        #[source]
        source: RuleError,
    },
    #[error("policy `{0}` does not define move/3")]
    NoMoveRule(String),
}

/// A named rule program defining `move(Src, Dst, Fragment)`.
#[derive(Clone, Debug)]
pub struct PolicyRuleSet {
    name: String,
    source: String,
    program: Program,
    evaluation: StratifiedProgram,
    with_cost_rule: bool,
}

impl PolicyRuleSet {
    /// Parses and checks a policy. Unless the policy defines
    /// `transfer_cost/3` itself, the standard cost rule is evaluated with it.
    pub fn from_source(name: &str, source: &str) -> Result<Self, PolicyError> {
        let rules_err = |source| PolicyError::Rules {
            name: name.to_string(),
            source,
        };
        let program = parse_program(source).map_err(rules_err)?;
        let defines_move = program
            .rules
            .iter()
            .any(|r| r.head.predicate == "move" && r.head.args.len() == 3);
        if !defines_move {
            return Err(PolicyError::NoMoveRule(name.to_string()));
        }
        stratify(program.clone()).map_err(rules_err)?;
        let with_cost_rule = !program.defines("transfer_cost");
        let combined = if with_cost_rule {
            format!("{TRANSFER_COST_RULES}\n{source}")
        } else {
            source.to_string()
        };
        let evaluation = parse_program(&combined)
            .and_then(stratify)
            .map_err(rules_err)?;
        Ok(PolicyRuleSet {
            name: name.to_string(),
            source: source.to_string(),
            program,
            evaluation,
            with_cost_rule,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// The policy's own clauses.
    pub fn program(&self) -> &Program {
        &self.program
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// The policy plus the cost rule when it is needed.
    pub fn evaluation_program(&self) -> &StratifiedProgram {
        &self.evaluation
    }

    /// Rule text of [`evaluation_program`](Self::evaluation_program), suitable
    /// for editing and loading back as a policy file.
    pub fn export_text(&self) -> String {
        if self.with_cost_rule {
            format!("{TRANSFER_COST_RULES}\n{}", self.source)
        } else {
            self.source.clone()
        }
    }
}

pub fn builtin_policy(name: &str) -> Result<PolicyRuleSet, PolicyError> {
    let text = match name {
        "threshold" => THRESHOLD_RULES,
        "nna" => NNA_RULES,
        other => return Err(PolicyError::Unknown(other.to_string())),
    };
    PolicyRuleSet::from_source(name, text)
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct MoveTrigger {
    pub src: NodeId,
    pub dst: NodeId,
    pub fragment: NodeId,
}

impl fmt::Display for MoveTrigger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "move({},{},{})", self.src, self.dst, self.fragment)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Move {
    pub trigger: MoveTrigger,
    /// Drop in total transmission cost if the move is made.
    pub benefit: f64,
}

/// Answers of `move(X,Y,Z)` over `base`, in term order, without self-moves.
pub fn compute_triggers(
    base: &FactBase,
    policy: &PolicyRuleSet,
) -> Result<Vec<MoveTrigger>, RuleError> {
    let derived = evaluate(policy.evaluation_program(), base)?;
    Ok(derived
        .relation("move")
        .filter_map(|args| match args {
            [src, dst, fragment] if src != dst => Some(MoveTrigger {
                src: src.clone(),
                dst: dst.clone(),
                fragment: fragment.clone(),
            }),
            _ => None,
        })
        .collect())
}

/// State against which triggers are ranked and checked.
pub struct ResolveContext<'a> {
    pub placement: &'a Placement,
    pub stats: &'a AccessStats,
    pub links: &'a LinkTable,
    pub factors: &'a CostFactors,
    pub fragments: &'a Fragments,
    pub capacity: &'a Capacity,
}

/// Picks at most one move per fragment.
///
/// Triggers whose source does not hold the fragment are dropped. Among the
/// rest, the highest benefit wins, ties going to the smallest `(dst, src)`.
/// A candidate is skipped if its destination would exceed capacity given the
/// moves already selected this round.
pub fn resolve_conflicts(triggers: &[MoveTrigger], ctx: &ResolveContext<'_>) -> Vec<Move> {
    let before = match total_transmission_cost(
        ctx.placement,
        ctx.stats,
        ctx.links,
        ctx.factors,
        ctx.fragments,
    ) {
        Ok(c) => c,
        Err(e) => {
            log::warn!("cannot rank triggers: {e}");
            return Vec::new();
        }
    };

    let mut by_fragment: BTreeMap<&NodeId, Vec<Move>> = BTreeMap::new();
    for t in triggers {
        if ctx.placement.holder(&t.fragment) != Some(&t.src) {
            log::debug!("dropping stale trigger {t}");
            continue;
        }
        let mut after_placement = ctx.placement.clone();
        after_placement.place(t.fragment.clone(), t.dst.clone());
        match total_transmission_cost(
            &after_placement,
            ctx.stats,
            ctx.links,
            ctx.factors,
            ctx.fragments,
        ) {
            Ok(after) => by_fragment.entry(&t.fragment).or_default().push(Move {
                trigger: t.clone(),
                benefit: before - after,
            }),
            Err(e) => log::warn!("dropping trigger {t}: {e}"),
        }
    }

    let mut load: BTreeMap<NodeId, f64> = BTreeMap::new();
    for (j, i) in ctx.placement.iter() {
        *load.entry(i.clone()).or_default() += units(ctx.fragments, j);
    }

    let mut chosen = Vec::new();
    for (fragment, mut candidates) in by_fragment {
        candidates.sort_by(|a, b| {
            b.benefit
                .total_cmp(&a.benefit)
                .then_with(|| a.trigger.dst.cmp(&b.trigger.dst))
                .then_with(|| a.trigger.src.cmp(&b.trigger.src))
        });
        candidates.dedup_by(|a, b| a.trigger == b.trigger);
        let u = units(ctx.fragments, fragment);
        for m in candidates {
            let dst_load = load.get(&m.trigger.dst).copied().unwrap_or(0.0) + u;
            if let Some(limit) = ctx.capacity.limit(&m.trigger.dst) {
                if dst_load > limit {
                    log::info!(
                        "dropping {}: load {dst_load} would exceed capacity {limit}",
                        m.trigger
                    );
                    continue;
                }
            }
            load.insert(m.trigger.dst.clone(), dst_load);
            *load.entry(m.trigger.src.clone()).or_default() -= u;
            chosen.push(m);
            break;
        }
    }
    chosen
}

fn units(fragments: &Fragments, j: &NodeId) -> f64 {
    fragments.get(j).map_or(0.0, |f| f.units)
}
