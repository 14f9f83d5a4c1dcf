use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::sync::Arc;

use sha2::{Digest, Sha256};

use super::ast::Atom;
use super::error::RuleError;
use super::value::{Fact, Value};

/// A set of ground atoms indexed by predicate.
///
/// Iteration is always in predicate-name order, then argument term order, so
/// two bases holding the same facts serialize to identical text.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FactBase {
    relations: BTreeMap<Arc<str>, BTreeSet<Vec<Value>>>,
}

/// Outcome of [`FactBase::update`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct UpdateReport {
    pub added: usize,
    pub removed: usize,
    /// Removals that named a fact the base did not hold.
    pub not_present: Vec<Fact>,
}

impl UpdateReport {
    pub fn changed(&self) -> bool {
        self.added > 0 || self.removed > 0
    }
}

impl FactBase {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns `true` if the fact was not already present.
    pub fn insert(&mut self, fact: Fact) -> bool {
        self.relations
            .entry(fact.predicate)
            .or_default()
            .insert(fact.args)
    }

    pub fn remove(&mut self, fact: &Fact) -> bool {
        let Some(rel) = self.relations.get_mut(&fact.predicate) else {
            return false;
        };
        let removed = rel.remove(&fact.args);
        if rel.is_empty() {
            self.relations.remove(&fact.predicate);
        }
        removed
    }

    pub fn contains(&self, fact: &Fact) -> bool {
        self.relations
            .get(&fact.predicate)
            .is_some_and(|r| r.contains(&fact.args))
    }

    pub fn len(&self) -> usize {
        self.relations.values().map(BTreeSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }

    pub fn has_predicate(&self, predicate: &str) -> bool {
        self.relations.contains_key(predicate)
    }

    pub fn relation(&self, predicate: &str) -> impl Iterator<Item = &[Value]> {
        self.relations
            .get(predicate)
            .into_iter()
            .flat_map(|r| r.iter().map(Vec::as_slice))
    }

    pub fn predicates(&self) -> impl Iterator<Item = &str> {
        self.relations.keys().map(|k| &**k)
    }

    pub fn iter(&self) -> impl Iterator<Item = Fact> + '_ {
        self.relations.iter().flat_map(|(p, rel)| {
            rel.iter().map(move |args| Fact {
                predicate: p.clone(),
                args: args.clone(),
            })
        })
    }

    /// Applies `removals` and then `additions`.
    pub fn update<'a>(
        &mut self,
        additions: impl IntoIterator<Item = &'a Fact>,
        removals: impl IntoIterator<Item = &'a Fact>,
    ) -> UpdateReport {
        let mut report = UpdateReport::default();
        for f in removals {
            if self.remove(f) {
                report.removed += 1;
            } else {
                report.not_present.push(f.clone());
            }
        }
        for f in additions {
            if self.insert(f.clone()) {
                report.added += 1;
            }
        }
        report
    }

    /// Like [`update`](Self::update), but takes parsed atoms and rejects any
    /// that contain variables before touching the base.
    pub fn update_atoms(
        &mut self,
        additions: &[Atom],
        removals: &[Atom],
    ) -> Result<UpdateReport, RuleError> {
        let ground = |atoms: &[Atom]| -> Result<Vec<Fact>, RuleError> {
            atoms
                .iter()
                .map(|a| a.to_fact().ok_or_else(|| RuleError::NonGround(a.to_string())))
                .collect()
        };
        let adds = ground(additions)?;
        let rems = ground(removals)?;
        Ok(self.update(&adds, &rems))
    }

    /// One `pred(args).` line per fact, in canonical order.
    pub fn to_fact_text(&self) -> String {
        let mut out = String::new();
        for f in self.iter() {
            let _ = writeln!(out, "{f}.");
        }
        out
    }

    /// SHA-256 of [`to_fact_text`](Self::to_fact_text), hex encoded.
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.to_fact_text().as_bytes());
        hash.iter().fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}

impl FromIterator<Fact> for FactBase {
    fn from_iter<I: IntoIterator<Item = Fact>>(iter: I) -> Self {
        let mut base = FactBase::new();
        for f in iter {
            base.insert(f);
        }
        base
    }
}

impl Extend<Fact> for FactBase {
    fn extend<I: IntoIterator<Item = Fact>>(&mut self, iter: I) {
        for f in iter {
            self.insert(f);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fact;
    use crate::rules::{parse_goal, Term};

    #[test]
    fn assert_then_retract_restores_base() {
        let mut base: FactBase = [fact!("size", 7, 1)].into_iter().collect();
        let before = base.clone();
        let placed = fact!("placed", 7, 1);
        base.update([&placed], []);
        base.update([], [&placed]);
        assert_eq!(base, before);
    }

    #[test]
    fn set_semantics() {
        let mut base = FactBase::new();
        let placed = fact!("placed", 7, 1);
        let r = base.update([&placed, &placed], []);
        assert_eq!(r.added, 1);
        assert_eq!(base.len(), 1);
    }

    #[test]
    fn retracting_absent_fact_is_flagged() {
        let mut base: FactBase = [fact!("p", 1)].into_iter().collect();
        let q = fact!("q", 9);
        let r = base.update([], [&q]);
        assert!(!r.changed());
        assert_eq!(r.not_present, vec![q]);
        assert_eq!(base.len(), 1);
    }

    #[test]
    fn non_ground_update_rejected() {
        let mut base = FactBase::new();
        let atom = parse_goal("placed(7,X)").unwrap();
        assert!(matches!(
            base.update_atoms(&[atom], &[]),
            Err(RuleError::NonGround(_))
        ));
        let ok = Atom::new("placed", vec![Term::Const(7.into()), Term::Const(1.into())]);
        assert!(base.update_atoms(&[ok], &[]).unwrap().changed());
    }

    #[test]
    fn text_is_canonical() {
        let a: FactBase = [fact!("b", 2), fact!("a", "x"), fact!("b", 1)].into_iter().collect();
        let b: FactBase = [fact!("b", 1), fact!("b", 2), fact!("a", "x")].into_iter().collect();
        assert_eq!(a.to_fact_text(), "a(x).\nb(1).\nb(2).\n");
        assert_eq!(a.digest(), b.digest());
    }
}
