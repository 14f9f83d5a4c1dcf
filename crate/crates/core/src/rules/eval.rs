//! Bottom-up evaluation: stratum by stratum, semi-naive within a stratum.
//!
//! Rules are compiled so that every variable has a slot in a flat binding
//! environment. Body literals run strictly left to right, which makes the set
//! of bound argument positions of each atom static; relations keep hash
//! indexes on exactly those positions.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::sync::Arc;

use super::ast::{ArithOp, Atom, CmpOp, Expr, Literal, Rule, Term};
use super::error::RuleError;
use super::factbase::FactBase;
use super::stratify::StratifiedProgram;
use super::value::{Fact, Value};

/// Default cap on the number of facts a single evaluation may derive.
pub const DEFAULT_FACT_LIMIT: usize = 1_000_000;

#[derive(Clone, Copy, Debug)]
pub struct EvalOptions {
    pub fact_limit: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            fact_limit: DEFAULT_FACT_LIMIT,
        }
    }
}

pub type Bindings = BTreeMap<String, Value>;

/// One answer to a goal: the matching fact and the goal's variable bindings.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Answer {
    pub fact: Fact,
    pub bindings: Bindings,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct QueryResult {
    pub answers: Vec<Answer>,
    /// Set when the goal's predicate is neither stored nor defined by a rule.
    pub unknown_predicate: bool,
}

impl QueryResult {
    pub fn bindings(&self) -> impl Iterator<Item = &Bindings> {
        self.answers.iter().map(|a| &a.bindings)
    }
}

/// Computes every fact derivable from `base` under `program`, including the
/// input facts and the program's own facts.
pub fn evaluate(program: &StratifiedProgram, base: &FactBase) -> Result<FactBase, RuleError> {
    evaluate_with(program, base, EvalOptions::default())
}

pub fn evaluate_with(
    program: &StratifiedProgram,
    base: &FactBase,
    options: EvalOptions,
) -> Result<FactBase, RuleError> {
    let rules: Vec<CompiledRule> = program
        .program()
        .rules
        .iter()
        .map(CompiledRule::compile)
        .collect();
    let arities = arities(&rules);

    let mut db = Db::default();
    for fact in base.iter().chain(program.program().facts.iter().cloned()) {
        if let Some(&n) = arities.get(&fact.predicate) {
            if n != fact.args.len() {
                return Err(RuleError::Arity {
                    predicate: fact.predicate.to_string(),
                    first: n,
                    second: fact.args.len(),
                });
            }
        }
        db.rel_mut(&fact.predicate).insert(fact.args);
    }
    let mut derived = 0usize;
    for stratum in 0..program.stratum_count() {
        let layer: Vec<&CompiledRule> = rules
            .iter()
            .filter(|r| program.stratum(&r.head.predicate) == stratum)
            .collect();
        if layer.is_empty() {
            continue;
        }
        let heads: HashSet<Arc<str>> = layer.iter().map(|r| r.head.predicate.clone()).collect();

        for rule in &layer {
            rule.ensure_indexes(&mut db);
        }
        let mut found = Vec::new();
        for rule in &layer {
            rule.fire(&db, None, &mut found)?;
        }
        let mut delta = absorb(&mut db, found, &mut derived, options.fact_limit)?;

        while !delta.is_empty() {
            for rule in &layer {
                rule.ensure_indexes(&mut db);
                rule.ensure_indexes(&mut delta);
            }
            let mut found = Vec::new();
            for rule in &layer {
                for (pos, lit) in rule.body.iter().enumerate() {
                    if let CLit::Atom(a) = lit {
                        if heads.contains(&a.predicate) {
                            rule.fire(&db, Some((pos, &delta)), &mut found)?;
                        }
                    }
                }
            }
            delta = absorb(&mut db, found, &mut derived, options.fact_limit)?;
        }
    }

    Ok(db.into_fact_base())
}

/// Evaluates `program` over `base` and matches `goal` against the result.
pub fn query(
    program: &StratifiedProgram,
    base: &FactBase,
    goal: &Atom,
) -> Result<QueryResult, RuleError> {
    let full = evaluate(program, base)?;
    let mut result = match_goal(&full, goal);
    if program.program().defines(&goal.predicate) {
        result.unknown_predicate = false;
    }
    Ok(result)
}

/// Matches `goal` against an already evaluated base. Answers are sorted by
/// the matching fact's arguments in term order. Variables whose names start
/// with `_` are matched but not reported.
pub fn match_goal(base: &FactBase, goal: &Atom) -> QueryResult {
    let mut seen = BTreeSet::new();
    let mut answers = Vec::new();
    for args in base.relation(&goal.predicate) {
        if args.len() != goal.args.len() {
            continue;
        }
        let mut bindings = Bindings::new();
        let mut ok = true;
        for (term, value) in goal.args.iter().zip(args) {
            match term {
                Term::Const(c) => ok &= c == value,
                Term::Var(v) => match bindings.get(v) {
                    Some(prev) => ok &= prev == value,
                    None => {
                        bindings.insert(v.clone(), value.clone());
                    }
                },
            }
            if !ok {
                break;
            }
        }
        if ok && seen.insert(args.to_vec()) {
            bindings.retain(|k, _| !k.starts_with('_'));
            answers.push(Answer {
                fact: Fact::new(&goal.predicate, args.to_vec()),
                bindings,
            });
        }
    }
    // Relations iterate in term order already; keep the sort explicit.
    answers.sort_by(|a, b| a.fact.args.cmp(&b.fact.args));
    QueryResult {
        answers,
        unknown_predicate: !base.has_predicate(&goal.predicate),
    }
}

fn absorb(
    db: &mut Db,
    found: Vec<(Arc<str>, Vec<Value>)>,
    derived: &mut usize,
    limit: usize,
) -> Result<Db, RuleError> {
    let mut delta = Db::default();
    for (pred, tuple) in found {
        if db.rel_mut(&pred).insert(tuple.clone()) {
            *derived += 1;
            if *derived > limit {
                return Err(RuleError::FactLimit { limit });
            }
            delta.rel_mut(&pred).insert(tuple);
        }
    }
    Ok(delta)
}

fn arities(rules: &[CompiledRule]) -> HashMap<Arc<str>, usize> {
    let mut out = HashMap::new();
    for r in rules {
        out.insert(r.head.predicate.clone(), r.head.args.len());
        for lit in &r.body {
            if let CLit::Atom(a) | CLit::Sum { atom: a, .. } = lit {
                out.insert(a.predicate.clone(), a.args.len());
            }
        }
    }
    out
}

type Tuple = Vec<Value>;

#[derive(Default)]
struct Relation {
    tuples: Vec<Tuple>,
    set: HashSet<Tuple>,
    /// Bound-position mask -> key -> tuple positions.
    indexes: HashMap<u64, HashMap<Tuple, Vec<usize>>>,
}

impl Relation {
    fn insert(&mut self, tuple: Tuple) -> bool {
        if self.set.contains(&tuple) {
            return false;
        }
        let pos = self.tuples.len();
        for (mask, index) in &mut self.indexes {
            index.entry(project(&tuple, *mask)).or_default().push(pos);
        }
        self.set.insert(tuple.clone());
        self.tuples.push(tuple);
        true
    }

    fn ensure_index(&mut self, mask: u64) {
        if mask == 0 || self.indexes.contains_key(&mask) {
            return;
        }
        let mut index: HashMap<Tuple, Vec<usize>> = HashMap::new();
        for (pos, t) in self.tuples.iter().enumerate() {
            index.entry(project(t, mask)).or_default().push(pos);
        }
        self.indexes.insert(mask, index);
    }

    /// Candidate tuples whose masked positions equal `key`.
    fn candidates<'a>(&'a self, mask: u64, key: &Tuple) -> Box<dyn Iterator<Item = &'a Tuple> + 'a> {
        if mask == 0 {
            return Box::new(self.tuples.iter());
        }
        match self.indexes.get(&mask) {
            Some(index) => match index.get(key) {
                Some(positions) => Box::new(positions.iter().map(|&p| &self.tuples[p])),
                None => Box::new(std::iter::empty()),
            },
            None => Box::new(self.tuples.iter()),
        }
    }
}

fn project(tuple: &Tuple, mask: u64) -> Tuple {
    tuple
        .iter()
        .enumerate()
        .filter(|(i, _)| mask & (1 << i) != 0)
        .map(|(_, v)| v.clone())
        .collect()
}

#[derive(Default)]
struct Db {
    rels: HashMap<Arc<str>, Relation>,
}

impl Db {
    fn rel_mut(&mut self, pred: &Arc<str>) -> &mut Relation {
        self.rels.entry(pred.clone()).or_default()
    }

    fn rel(&self, pred: &str) -> Option<&Relation> {
        self.rels.get(pred)
    }

    fn is_empty(&self) -> bool {
        self.rels.values().all(|r| r.tuples.is_empty())
    }

    fn into_fact_base(self) -> FactBase {
        self.rels
            .into_iter()
            .flat_map(|(p, r)| {
                r.tuples.into_iter().map(move |args| Fact {
                    predicate: p.clone(),
                    args,
                })
            })
            .collect()
    }
}

#[derive(Clone, Debug)]
enum Slot {
    Var(usize),
    Const(Value),
}

#[derive(Clone, Debug)]
struct CAtom {
    predicate: Arc<str>,
    args: Vec<Slot>,
    /// Positions bound on entry (constants and earlier-bound variables).
    mask: u64,
}

impl CAtom {
    fn key(&self, env: &[Option<Value>]) -> Tuple {
        self.args
            .iter()
            .enumerate()
            .filter(|(i, _)| self.mask & (1 << i) != 0)
            .map(|(_, s)| match s {
                Slot::Const(c) => c.clone(),
                Slot::Var(v) => env[*v].clone().expect("bound by mask"),
            })
            .collect()
    }

    /// Unifies `tuple` with the atom, extending `env`. Returns the slots it
    /// bound so the caller can undo them, or `None` on mismatch (in which
    /// case `env` is left unchanged).
    fn unify(&self, tuple: &Tuple, env: &mut [Option<Value>]) -> Option<Vec<usize>> {
        let mut newly = Vec::new();
        for (slot, value) in self.args.iter().zip(tuple) {
            let ok = match slot {
                Slot::Const(c) => c == value,
                Slot::Var(v) => match &env[*v] {
                    Some(bound) => bound == value,
                    None => {
                        env[*v] = Some(value.clone());
                        newly.push(*v);
                        true
                    }
                },
            };
            if !ok {
                for v in newly {
                    env[v] = None;
                }
                return None;
            }
        }
        Some(newly)
    }

    fn ground(&self, env: &[Option<Value>]) -> Tuple {
        self.args
            .iter()
            .map(|s| match s {
                Slot::Const(c) => c.clone(),
                Slot::Var(v) => env[*v].clone().expect("safe rule binds head"),
            })
            .collect()
    }
}

#[derive(Clone, Debug)]
enum CExpr {
    Var(usize),
    Const(Value),
    Neg(Box<CExpr>),
    Binary(ArithOp, Box<CExpr>, Box<CExpr>),
}

#[derive(Clone, Debug)]
enum CLit {
    Atom(CAtom),
    Compare(CExpr, CmpOp, CExpr),
    Bind(usize, CExpr),
    Sum {
        result: usize,
        value: usize,
        atom: CAtom,
        /// Group variables not bound before the literal; enumerated from
        /// the inner relation.
        free_groups: Vec<usize>,
        /// Variables summed over (includes `value`).
        locals: Vec<usize>,
    },
}

struct CompiledRule {
    source: Rule,
    names: Vec<String>,
    head: CAtom,
    body: Vec<CLit>,
}

struct Compiler {
    names: Vec<String>,
    bound: HashSet<usize>,
}

impl Compiler {
    fn slot(&mut self, name: &str) -> usize {
        match self.names.iter().position(|n| n == name) {
            Some(i) => i,
            None => {
                self.names.push(name.to_string());
                self.names.len() - 1
            }
        }
    }

    fn atom(&mut self, atom: &Atom) -> CAtom {
        let mut mask = 0u64;
        let args = atom
            .args
            .iter()
            .enumerate()
            .map(|(i, t)| match t {
                Term::Const(c) => {
                    mask |= 1 << i;
                    Slot::Const(c.clone())
                }
                Term::Var(v) => {
                    let s = self.slot(v);
                    if self.bound.contains(&s) {
                        mask |= 1 << i;
                    }
                    Slot::Var(s)
                }
            })
            .collect();
        CAtom {
            predicate: Arc::from(atom.predicate.as_str()),
            args,
            mask,
        }
    }

    fn expr(&mut self, e: &Expr) -> CExpr {
        match e {
            Expr::Term(Term::Var(v)) => CExpr::Var(self.slot(v)),
            Expr::Term(Term::Const(c)) => CExpr::Const(c.clone()),
            Expr::Neg(inner) => CExpr::Neg(Box::new(self.expr(inner))),
            Expr::Binary(op, l, r) => {
                CExpr::Binary(*op, Box::new(self.expr(l)), Box::new(self.expr(r)))
            }
        }
    }
}

impl CompiledRule {
    fn compile(rule: &Rule) -> CompiledRule {
        let mut c = Compiler {
            names: Vec::new(),
            bound: HashSet::new(),
        };
        let mut body = Vec::with_capacity(rule.body.len());
        for (idx, lit) in rule.body.iter().enumerate() {
            let compiled = match lit {
                Literal::Atom(a) => {
                    let ca = c.atom(a);
                    for s in &ca.args {
                        if let Slot::Var(v) = s {
                            c.bound.insert(*v);
                        }
                    }
                    CLit::Atom(ca)
                }
                Literal::Compare(l, op, r) => CLit::Compare(c.expr(l), *op, c.expr(r)),
                Literal::Bind(v, e) => {
                    let e = c.expr(e);
                    let s = c.slot(v);
                    c.bound.insert(s);
                    CLit::Bind(s, e)
                }
                Literal::Sum {
                    result,
                    value,
                    atom,
                } => {
                    let groups = rule.group_variables(idx);
                    let ca = c.atom(atom);
                    let mut free_groups = Vec::new();
                    let mut locals = Vec::new();
                    for v in atom.variables() {
                        let s = c.slot(v);
                        if groups.contains(v) {
                            if !c.bound.contains(&s) && !free_groups.contains(&s) {
                                free_groups.push(s);
                            }
                        } else if !locals.contains(&s) {
                            locals.push(s);
                        }
                    }
                    let value = c.slot(value);
                    let result = c.slot(result);
                    for &g in &free_groups {
                        c.bound.insert(g);
                    }
                    c.bound.insert(result);
                    CLit::Sum {
                        result,
                        value,
                        atom: ca,
                        free_groups,
                        locals,
                    }
                }
            };
            body.push(compiled);
        }
        let head = c.atom(&rule.head);
        CompiledRule {
            source: rule.clone(),
            names: c.names,
            head,
            body,
        }
    }

    fn ensure_indexes(&self, db: &mut Db) {
        for lit in &self.body {
            if let CLit::Atom(a) | CLit::Sum { atom: a, .. } = lit {
                if let Some(rel) = db.rels.get_mut(&a.predicate) {
                    rel.ensure_index(a.mask);
                }
            }
        }
    }

    /// Derives head tuples into `out`. With `delta = Some((pos, d))`, the
    /// atom at body position `pos` reads from `d` instead of the full db.
    fn fire(
        &self,
        db: &Db,
        delta: Option<(usize, &Db)>,
        out: &mut Vec<(Arc<str>, Tuple)>,
    ) -> Result<(), RuleError> {
        let mut env = vec![None; self.names.len()];
        self.solve(0, db, delta, &mut env, out)
    }

    fn solve(
        &self,
        i: usize,
        db: &Db,
        delta: Option<(usize, &Db)>,
        env: &mut Vec<Option<Value>>,
        out: &mut Vec<(Arc<str>, Tuple)>,
    ) -> Result<(), RuleError> {
        let Some(lit) = self.body.get(i) else {
            out.push((self.head.predicate.clone(), self.head.ground(env)));
            return Ok(());
        };
        match lit {
            CLit::Atom(a) => {
                let source = match delta {
                    Some((pos, d)) if pos == i => d,
                    _ => db,
                };
                let Some(rel) = source.rel(&a.predicate) else {
                    return Ok(());
                };
                let key = a.key(env);
                for tuple in rel.candidates(a.mask, &key) {
                    if let Some(newly) = a.unify(tuple, env) {
                        let r = self.solve(i + 1, db, delta, env, out);
                        for v in newly {
                            env[v] = None;
                        }
                        r?;
                    }
                }
                Ok(())
            }
            CLit::Compare(l, op, r) => {
                let lv = self.eval(l, env)?;
                let rv = self.eval(r, env)?;
                if self.compare(&lv, *op, &rv, env)? {
                    self.solve(i + 1, db, delta, env, out)?;
                }
                Ok(())
            }
            CLit::Bind(var, e) => {
                let v = self.eval(e, env)?;
                self.bind_and_continue(*var, v, i, db, delta, env, out)
            }
            CLit::Sum {
                result,
                value,
                atom,
                free_groups,
                locals,
            } => {
                let mut groups: BTreeMap<Tuple, BTreeSet<Tuple>> = BTreeMap::new();
                if free_groups.is_empty() {
                    groups.insert(Vec::new(), BTreeSet::new());
                }
                if let Some(rel) = db.rel(&atom.predicate) {
                    let key = atom.key(env);
                    for tuple in rel.candidates(atom.mask, &key) {
                        if let Some(newly) = atom.unify(tuple, env) {
                            let g: Tuple = free_groups.iter().map(|&s| env[s].clone().unwrap()).collect();
                            let l: Tuple = locals.iter().map(|&s| env[s].clone().unwrap()).collect();
                            groups.entry(g).or_default().insert(l);
                            for v in newly {
                                env[v] = None;
                            }
                        }
                    }
                }
                let value_pos = locals
                    .iter()
                    .position(|&s| s == *value)
                    .expect("value variable is local");
                for (g, instances) in groups {
                    for (&slot, v) in free_groups.iter().zip(&g) {
                        env[slot] = Some(v.clone());
                    }
                    let mut total = 0.0f64;
                    for inst in &instances {
                        match inst[value_pos].as_f64() {
                            Some(n) => total += n,
                            None => {
                                let err = RuleError::NonNumeric {
                                    rule: self.instantiated(env),
                                    value: inst[value_pos].to_string(),
                                };
                                for &slot in free_groups {
                                    env[slot] = None;
                                }
                                return Err(err);
                            }
                        }
                    }
                    let total = self.finite(total, env);
                    let r = total.and_then(|t| {
                        self.bind_and_continue(*result, t, i, db, delta, env, out)
                    });
                    for &slot in free_groups {
                        env[slot] = None;
                    }
                    r?;
                }
                Ok(())
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn bind_and_continue(
        &self,
        var: usize,
        v: Value,
        i: usize,
        db: &Db,
        delta: Option<(usize, &Db)>,
        env: &mut Vec<Option<Value>>,
        out: &mut Vec<(Arc<str>, Tuple)>,
    ) -> Result<(), RuleError> {
        match &env[var] {
            Some(existing) => {
                if *existing == v {
                    self.solve(i + 1, db, delta, env, out)?;
                }
                Ok(())
            }
            None => {
                env[var] = Some(v);
                let r = self.solve(i + 1, db, delta, env, out);
                env[var] = None;
                r
            }
        }
    }

    fn eval(&self, e: &CExpr, env: &[Option<Value>]) -> Result<Value, RuleError> {
        match e {
            CExpr::Var(s) => Ok(env[*s].clone().expect("safe rule binds expression variables")),
            CExpr::Const(c) => Ok(c.clone()),
            CExpr::Neg(inner) => {
                let v = self.eval(inner, env)?;
                let n = self.numeric(&v, env)?;
                self.finite(-n, env)
            }
            CExpr::Binary(op, l, r) => {
                let a = self.eval(l, env)?;
                let a = self.numeric(&a, env)?;
                let b = self.eval(r, env)?;
                let b = self.numeric(&b, env)?;
                let n = match op {
                    ArithOp::Add => a + b,
                    ArithOp::Sub => a - b,
                    ArithOp::Mul => a * b,
                    ArithOp::Div => {
                        if b == 0.0 {
                            return Err(RuleError::DivisionByZero {
                                rule: self.instantiated(env),
                            });
                        }
                        a / b
                    }
                };
                self.finite(n, env)
            }
        }
    }

    fn compare(
        &self,
        l: &Value,
        op: CmpOp,
        r: &Value,
        env: &[Option<Value>],
    ) -> Result<bool, RuleError> {
        Ok(match op {
            CmpOp::Eq => l == r,
            CmpOp::Ne => l != r,
            _ => {
                let a = self.numeric(l, env)?;
                let b = self.numeric(r, env)?;
                match op {
                    CmpOp::Lt => a < b,
                    CmpOp::Gt => a > b,
                    CmpOp::Le => a <= b,
                    CmpOp::Ge => a >= b,
                    CmpOp::Eq | CmpOp::Ne => unreachable!(),
                }
            }
        })
    }

    fn numeric(&self, v: &Value, env: &[Option<Value>]) -> Result<f64, RuleError> {
        v.as_f64().ok_or_else(|| RuleError::NonNumeric {
            rule: self.instantiated(env),
            value: v.to_string(),
        })
    }

    fn finite(&self, n: f64, env: &[Option<Value>]) -> Result<Value, RuleError> {
        Value::number(n).ok_or_else(|| RuleError::NonFinite {
            rule: self.instantiated(env),
        })
    }

    /// The source rule with currently bound variables substituted.
    fn instantiated(&self, env: &[Option<Value>]) -> String {
        let subst: HashMap<&str, &Value> = self
            .names
            .iter()
            .zip(env)
            .filter_map(|(n, v)| v.as_ref().map(|v| (n.as_str(), v)))
            .collect();
        let atom = |a: &Atom| Atom {
            predicate: a.predicate.clone(),
            args: a.args.iter().map(|t| substitute(t, &subst)).collect(),
        };
        fn expr(e: &Expr, subst: &HashMap<&str, &Value>) -> Expr {
            match e {
                Expr::Term(t) => Expr::Term(substitute(t, subst)),
                Expr::Neg(x) => Expr::Neg(Box::new(expr(x, subst))),
                Expr::Binary(op, l, r) => {
                    Expr::Binary(*op, Box::new(expr(l, subst)), Box::new(expr(r, subst)))
                }
            }
        }
        let body = self
            .source
            .body
            .iter()
            .map(|lit| match lit {
                Literal::Atom(a) => Literal::Atom(atom(a)),
                Literal::Compare(l, op, r) => Literal::Compare(expr(l, &subst), *op, expr(r, &subst)),
                Literal::Bind(v, e) => Literal::Bind(v.clone(), expr(e, &subst)),
                Literal::Sum {
                    result,
                    value,
                    atom: a,
                } => Literal::Sum {
                    result: result.clone(),
                    value: value.clone(),
                    atom: atom(a),
                },
            })
            .collect();
        Rule {
            head: atom(&self.source.head),
            body,
        }
        .to_string()
    }
}

fn substitute(t: &Term, subst: &HashMap<&str, &Value>) -> Term {
    match t {
        Term::Var(v) => match subst.get(v.as_str()) {
            Some(val) => Term::Const((*val).clone()),
            None => t.clone(),
        },
        Term::Const(_) => t.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fact;
    use crate::rules::{parse_goal, parse_program, stratify};

    fn run(src: &str) -> FactBase {
        let program = stratify(parse_program(src).unwrap()).unwrap();
        evaluate(&program, &FactBase::new()).unwrap()
    }

    #[test]
    fn transitive_closure() {
        let out = run("edge(1,2). edge(2,3).\n\
             path(X,Y) :- edge(X,Y).\n\
             path(X,Z) :- edge(X,Y), path(Y,Z).");
        let paths: Vec<String> = out.relation("path").map(|t| format!("{},{}", t[0], t[1])).collect();
        assert_eq!(paths, ["1,2", "1,3", "2,3"]);
        assert!(out.contains(&fact!("edge", 1, 2)));
    }

    #[test]
    fn transfer_cost_from_network_facts() {
        let out = run("delay(1,3,5). reverse_bandwidth(1,3,0.5). other(1,3,5).\n\
             user_defined_parameter(1,3,1). size(3,1).\n\
             transfer_cost(I,J,T) :- user_defined_parameter(I,J,U), size(J,S),\n\
                 reverse_bandwidth(I,J,W), delay(I,J,D), other(I,J,O), T is U*S*W*D*O.");
        assert!(out.contains(&fact!("transfer_cost", 1, 3, 12.5)));
    }

    #[test]
    fn sum_over_remaining_variables() {
        let out = run("f(1,7,se,2). f(1,7,up,3).\n\
             total(I,J,S) :- S is sum(V : f(I,J,K,V)).");
        let totals: Vec<Fact> = out.iter().filter(|f| &*f.predicate == "total").collect();
        assert_eq!(totals, vec![fact!("total", 1, 7, 5)]);
    }

    #[test]
    fn sum_counts_distinct_instantiations() {
        // (K,V) coincide for both facts but J is local too, so both count.
        let out = run("f(1,7,se,2). f(1,8,se,2). k(1).\n\
             total(I,S) :- k(I), S is sum(V : f(I,J,K,V)).\n\
             kinds(I,S) :- k(I), S is sum(V : f(I,_,K,V)).");
        assert!(out.contains(&fact!("total", 1, 4)));
        // `_` is its own local, so again two distinct instantiations.
        assert!(out.contains(&fact!("kinds", 1, 4)));
    }

    #[test]
    fn empty_sum_is_zero_when_groups_bound() {
        let out = run("req(2,7,0).\n\
             total(I,J,S) :- req(I,J,R), S is sum(V : freq(I,J,K,V)).\n\
             freq(9,9,se,1).");
        assert!(out.contains(&fact!("total", 2, 7, 0)));
    }

    #[test]
    fn division_by_zero_names_instantiated_rule() {
        let program = stratify(parse_program("q(1,0). r(X) :- q(A,B), X is A/B.").unwrap()).unwrap();
        let err = evaluate(&program, &FactBase::new()).unwrap_err();
        assert_eq!(
            err,
            RuleError::DivisionByZero {
                rule: "r(X) :- q(1,0), X is 1/0.".into()
            }
        );
    }

    #[test]
    fn arithmetic_on_symbol_is_an_error() {
        let program = stratify(parse_program("q(a). r(X) :- q(A), X is A+1.").unwrap()).unwrap();
        assert!(matches!(
            evaluate(&program, &FactBase::new()),
            Err(RuleError::NonNumeric { .. })
        ));
    }

    #[test]
    fn symbols_compare_for_equality() {
        let out = run("t(se). t(up). sel(X) :- t(X), X == se. other(X) :- t(X), X != se.");
        assert!(out.contains(&fact!("sel", "se")));
        assert!(out.contains(&fact!("other", "up")));
        assert!(!out.contains(&fact!("other", "se")));
    }

    #[test]
    fn binding_acts_as_test_when_bound() {
        let out = run("n(1,2). n(2,2). twice(X) :- n(X,Y), Y is X*2.");
        assert_eq!(out.relation("twice").count(), 1);
        assert!(out.contains(&fact!("twice", 1)));
    }

    #[test]
    fn fact_limit_stops_runaway_programs() {
        let program =
            stratify(parse_program("n(0). n(Y) :- n(X), Y is X+1.").unwrap()).unwrap();
        let err = evaluate_with(&program, &FactBase::new(), EvalOptions { fact_limit: 100 })
            .unwrap_err();
        assert_eq!(err, RuleError::FactLimit { limit: 100 });
    }

    #[test]
    fn base_arity_conflict_is_reported() {
        let program = stratify(parse_program("q(X) :- p(X).").unwrap()).unwrap();
        let base: FactBase = [fact!("p", 1, 2)].into_iter().collect();
        assert!(matches!(evaluate(&program, &base), Err(RuleError::Arity { .. })));
    }

    #[test]
    fn query_answers_are_sorted() {
        let program = stratify(parse_program("p(2). p(b). p(1). p(a).").unwrap()).unwrap();
        let res = query(&program, &FactBase::new(), &parse_goal("p(X)").unwrap()).unwrap();
        let xs: Vec<String> = res.bindings().map(|b| b["X"].to_string()).collect();
        assert_eq!(xs, ["1", "2", "a", "b"]);
        assert!(!res.unknown_predicate);
    }

    #[test]
    fn ground_goal_without_match_is_empty() {
        let program = stratify(parse_program("p(1).").unwrap()).unwrap();
        let res = query(&program, &FactBase::new(), &parse_goal("p(3)").unwrap()).unwrap();
        assert!(res.answers.is_empty());
        assert!(!res.unknown_predicate);
    }

    #[test]
    fn unknown_predicate_is_flagged_not_fatal() {
        let program = stratify(parse_program("p(1).").unwrap()).unwrap();
        let res = query(&program, &FactBase::new(), &parse_goal("nope(X)").unwrap()).unwrap();
        assert!(res.answers.is_empty());
        assert!(res.unknown_predicate);
    }

    #[test]
    fn defined_but_empty_predicate_is_known() {
        let program = stratify(parse_program("p(1). q(X) :- p(X), X > 5.").unwrap()).unwrap();
        let res = query(&program, &FactBase::new(), &parse_goal("q(X)").unwrap()).unwrap();
        assert!(!res.unknown_predicate);
    }

    #[test]
    fn repeated_goal_variables_must_agree() {
        let program = stratify(parse_program("e(1,1). e(1,2).").unwrap()).unwrap();
        let res = query(&program, &FactBase::new(), &parse_goal("e(X,X)").unwrap()).unwrap();
        assert_eq!(res.answers.len(), 1);
        assert_eq!(res.answers[0].fact, fact!("e", 1, 1));
    }

    #[test]
    fn evaluation_is_deterministic() {
        let src = "e(1,2). e(2,3). e(3,1). w(1,0.1). w(2,0.2). w(3,0.7).\n\
                   r(X,Y) :- e(X,Y). r(X,Z) :- r(X,Y), e(Y,Z).\n\
                   s(X,S) :- w(X,_), S is sum(V : w(Y,V)).";
        let a = run(src).to_fact_text();
        let b = run(src).to_fact_text();
        assert_eq!(a, b);
    }
}
