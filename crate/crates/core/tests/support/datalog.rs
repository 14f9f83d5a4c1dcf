//! Random safe, stratified programs and a naive bottom-up evaluator that
//! shares no code with the engine.
//!
//! Programs are kept as plain data; the engine sees them only through the
//! rendered text. Values are integers throughout.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;

use fragalloc::rules::{Fact, FactBase, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Op {
    Eq,
    Ne,
    Lt,
    Gt,
    Le,
    Ge,
}

impl Op {
    const ALL: [Op; 6] = [Op::Eq, Op::Ne, Op::Lt, Op::Gt, Op::Le, Op::Ge];

    fn text(self) -> &'static str {
        match self {
            Op::Eq => "==",
            Op::Ne => "!=",
            Op::Lt => "<",
            Op::Gt => ">",
            Op::Le => "<=",
            Op::Ge => ">=",
        }
    }

    fn holds(self, a: i64, b: i64) -> bool {
        match self {
            Op::Eq => a == b,
            Op::Ne => a != b,
            Op::Lt => a < b,
            Op::Gt => a > b,
            Op::Le => a <= b,
            Op::Ge => a >= b,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum T {
    V(usize),
    C(i64),
}

#[derive(Clone, Debug)]
pub struct A {
    pub pred: usize,
    pub args: Vec<T>,
}

#[derive(Clone, Debug)]
pub enum L {
    Atom(A),
    Cmp(T, Op, T),
    /// `Z is X + Y`
    Add(usize, T, T),
    /// `S is sum(V : atom)`
    Sum { result: usize, value: usize, atom: A },
}

#[derive(Clone, Debug)]
pub struct R {
    pub head: A,
    pub body: Vec<L>,
}

#[derive(Clone, Debug)]
pub struct Pred {
    pub name: String,
    pub arity: usize,
    /// -1 for stored predicates.
    pub level: i32,
}

#[derive(Clone, Debug)]
pub struct Prog {
    pub preds: Vec<Pred>,
    pub rules: Vec<R>,
    pub facts: Vec<(usize, Vec<i64>)>,
}

pub type Db = BTreeMap<usize, BTreeSet<Vec<i64>>>;

const CONSTANTS: i64 = 8;
const POOL: usize = 4;

fn var_name(v: usize) -> String {
    format!("X{v}")
}

fn term_text(t: &T) -> String {
    match t {
        T::V(v) => var_name(*v),
        T::C(c) => c.to_string(),
    }
}

impl Prog {
    fn atom_text(&self, a: &A) -> String {
        let args: Vec<String> = a.args.iter().map(term_text).collect();
        format!("{}({})", self.preds[a.pred].name, args.join(","))
    }

    pub fn rules_text(&self) -> String {
        let mut out = String::new();
        for r in &self.rules {
            let body: Vec<String> = r
                .body
                .iter()
                .map(|l| match l {
                    L::Atom(a) => self.atom_text(a),
                    L::Cmp(x, op, y) => format!("{} {} {}", term_text(x), op.text(), term_text(y)),
                    L::Add(z, x, y) => format!("{} is {} + {}", var_name(*z), term_text(x), term_text(y)),
                    L::Sum { result, value, atom } => format!(
                        "{} is sum({} : {})",
                        var_name(*result),
                        var_name(*value),
                        self.atom_text(atom)
                    ),
                })
                .collect();
            let _ = writeln!(out, "{} :- {}.", self.atom_text(&r.head), body.join(", "));
        }
        out
    }

    pub fn aggregate_count(&self) -> usize {
        self.rules
            .iter()
            .flat_map(|r| &r.body)
            .filter(|l| matches!(l, L::Sum { .. }))
            .count()
    }

    pub fn fact_base(&self) -> FactBase {
        self.facts
            .iter()
            .map(|(p, args)| {
                Fact::new(
                    &self.preds[*p].name,
                    args.iter().map(|&x| Value::Num(x as f64)).collect(),
                )
            })
            .collect()
    }

    /// Converts an engine result into the oracle's representation. Returns
    /// `None` if a value is not an integer or a predicate is unknown.
    pub fn db_from(&self, base: &FactBase) -> Option<Db> {
        let mut db = Db::new();
        for f in base.iter() {
            let p = self.preds.iter().position(|p| *p.name == *f.predicate)?;
            let mut args = Vec::new();
            for v in &f.args {
                let x = v.as_f64()?;
                if x.fract() != 0.0 {
                    return None;
                }
                args.push(x as i64);
            }
            db.entry(p).or_default().insert(args);
        }
        Some(db)
    }
}

/// Generates a program with at most six rules over eight constants.
///
/// Stored predicates `e/2`, `f/2`, `g/1`; derived predicates `p0..p3` with a
/// random level; `t/2` is never used in a body and is the only head that
/// may carry an arithmetic binding. Positive atoms reference predicates of
/// the same or lower level, aggregations strictly lower ones, so the
/// program is stratified by construction.
pub fn generate(rng: &mut impl Rng) -> Prog {
    let mut preds = vec![
        Pred { name: "e".into(), arity: 2, level: -1 },
        Pred { name: "f".into(), arity: 2, level: -1 },
        Pred { name: "g".into(), arity: 1, level: -1 },
    ];
    for k in 0..4 {
        preds.push(Pred {
            name: format!("p{k}"),
            arity: rng.gen_range(1..=2),
            level: rng.gen_range(0..=2),
        });
    }
    let terminal = preds.len();
    preds.push(Pred { name: "t".into(), arity: 2, level: 3 });

    let mut facts = Vec::new();
    for (p, pred) in preds.iter().enumerate().take(3) {
        let n = rng.gen_range(0..=if pred.arity == 1 { 4 } else { 9 });
        for _ in 0..n {
            let args = (0..pred.arity).map(|_| rng.gen_range(0..CONSTANTS)).collect();
            facts.push((p, args));
        }
    }

    let n_rules = rng.gen_range(1..=6);
    let rules = (0..n_rules)
        .map(|_| {
            let head_pred = if rng.gen_bool(0.2) {
                terminal
            } else {
                rng.gen_range(3..terminal)
            };
            gen_rule(rng, &preds, head_pred, head_pred == terminal)
        })
        .collect();
    Prog { preds, rules, facts }
}

fn gen_rule(rng: &mut impl Rng, preds: &[Pred], head_pred: usize, terminal: bool) -> R {
    let level = preds[head_pred].level;
    let body_preds: Vec<usize> = (0..preds.len())
        .filter(|&p| preds[p].level <= level && preds[p].level < 3)
        .collect();
    let agg_preds: Vec<usize> = (0..preds.len())
        .filter(|&p| preds[p].level < level && preds[p].arity == 2)
        .collect();
    let mut next_fresh = POOL;
    let mut fresh = || {
        next_fresh += 1;
        next_fresh - 1
    };

    let mut bound: BTreeSet<usize> = BTreeSet::new();
    let mut forced: Option<usize> = None;
    let mut body = Vec::new();
    let n_lits = rng.gen_range(1..=3);
    for i in 0..n_lits {
        let roll: f64 = rng.gen();
        if i > 0 && roll < 0.2 && !bound.is_empty() {
            let x = bound_or_const(rng, &bound);
            let y = bound_or_const(rng, &bound);
            body.push(L::Cmp(x, *Op::ALL.choose(rng).unwrap(), y));
        } else if roll < 0.5 && !agg_preds.is_empty() {
            let q = *agg_preds.choose(rng).unwrap();
            let group = match rng.gen_range(0..4) {
                0 if !bound.is_empty() => {
                    let vs: Vec<_> = bound.iter().copied().collect();
                    T::V(*vs.choose(rng).unwrap())
                }
                1 if forced.is_none() => {
                    let g = fresh();
                    forced = Some(g);
                    T::V(g)
                }
                2 => T::C(rng.gen_range(0..CONSTANTS)),
                _ => T::V(fresh()),
            };
            let value = fresh();
            let result = fresh();
            if let (T::V(g), Some(f)) = (group, forced) {
                if g == f {
                    bound.insert(g);
                }
            }
            bound.insert(result);
            body.push(L::Sum {
                result,
                value,
                atom: A { pred: q, args: vec![group, T::V(value)] },
            });
        } else {
            let p = *body_preds.choose(rng).unwrap();
            let args: Vec<T> = (0..preds[p].arity)
                .map(|_| {
                    if rng.gen_bool(0.2) {
                        T::C(rng.gen_range(0..CONSTANTS))
                    } else {
                        T::V(rng.gen_range(0..POOL))
                    }
                })
                .collect();
            for a in &args {
                if let T::V(v) = a {
                    bound.insert(*v);
                }
            }
            body.push(L::Atom(A { pred: p, args }));
        }
    }

    let arity = preds[head_pred].arity;
    let mut head_args: Vec<T> = Vec::new();
    if let Some(g) = forced {
        head_args.push(T::V(g));
    }
    if terminal && !bound.is_empty() && rng.gen_bool(0.7) {
        let vs: Vec<_> = bound.iter().copied().collect();
        let x = T::V(*vs.choose(rng).unwrap());
        let y = if rng.gen_bool(0.5) {
            T::V(*vs.choose(rng).unwrap())
        } else {
            T::C(rng.gen_range(0..CONSTANTS))
        };
        let z = fresh();
        body.push(L::Add(z, x, y));
        bound.insert(z);
        head_args.push(T::V(z));
    }
    let vs: Vec<_> = bound.iter().copied().collect();
    while head_args.len() < arity {
        head_args.push(match vs.choose(rng) {
            Some(&v) if rng.gen_bool(0.85) => T::V(v),
            _ => T::C(rng.gen_range(0..CONSTANTS)),
        });
    }
    head_args.truncate(arity);
    R { head: A { pred: head_pred, args: head_args }, body }
}

fn bound_or_const(rng: &mut impl Rng, bound: &BTreeSet<usize>) -> T {
    if rng.gen_bool(0.25) {
        T::C(rng.gen_range(0..CONSTANTS))
    } else {
        let vs: Vec<_> = bound.iter().copied().collect();
        T::V(*vs.choose(rng).unwrap())
    }
}

/// Variables of a rule outside body literal `skip`.
fn vars_outside(rule: &R, skip: usize) -> BTreeSet<usize> {
    let mut out = BTreeSet::new();
    let mut add = |t: &T| {
        if let T::V(v) = t {
            out.insert(*v);
        }
    };
    rule.head.args.iter().for_each(&mut add);
    for (i, l) in rule.body.iter().enumerate() {
        if i == skip {
            continue;
        }
        match l {
            L::Atom(a) => a.args.iter().for_each(&mut add),
            L::Cmp(x, _, y) => {
                add(x);
                add(y);
            }
            L::Add(z, x, y) => {
                add(&T::V(*z));
                add(x);
                add(y);
            }
            L::Sum { result, atom, .. } => {
                add(&T::V(*result));
                atom.args.iter().for_each(&mut add);
            }
        }
    }
    out
}

type Env = BTreeMap<usize, i64>;

fn value(t: &T, env: &Env) -> i64 {
    match t {
        T::C(c) => *c,
        T::V(v) => env[v],
    }
}

fn unify(args: &[T], tuple: &[i64], env: &Env) -> Option<Env> {
    let mut env = env.clone();
    for (a, &x) in args.iter().zip(tuple) {
        match a {
            T::C(c) if *c != x => return None,
            T::C(_) => {}
            T::V(v) => match env.get(v) {
                Some(&y) if y != x => return None,
                Some(_) => {}
                None => {
                    env.insert(*v, x);
                }
            },
        }
    }
    Some(env)
}

fn solve(rule: &R, i: usize, env: &Env, db: &Db, out: &mut Vec<Vec<i64>>) {
    if i == rule.body.len() {
        out.push(rule.head.args.iter().map(|t| value(t, env)).collect());
        return;
    }
    match &rule.body[i] {
        L::Atom(a) => {
            for tuple in db.get(&a.pred).into_iter().flatten() {
                if let Some(e) = unify(&a.args, tuple, env) {
                    solve(rule, i + 1, &e, db, out);
                }
            }
        }
        L::Cmp(x, op, y) => {
            if op.holds(value(x, env), value(y, env)) {
                solve(rule, i + 1, env, db, out);
            }
        }
        L::Add(z, x, y) => {
            let s = value(x, env) + value(y, env);
            match env.get(z) {
                Some(&old) if old != s => {}
                Some(_) => solve(rule, i + 1, env, db, out),
                None => {
                    let mut e = env.clone();
                    e.insert(*z, s);
                    solve(rule, i + 1, &e, db, out);
                }
            }
        }
        L::Sum { result, value: val, atom } => {
            let outside = vars_outside(rule, i);
            let mut atom_vars = Vec::new();
            for a in &atom.args {
                if let T::V(v) = a {
                    if !atom_vars.contains(v) {
                        atom_vars.push(*v);
                    }
                }
            }
            let free: Vec<usize> = atom_vars
                .iter()
                .copied()
                .filter(|v| outside.contains(v) && !env.contains_key(v))
                .collect();
            let locals: Vec<usize> = atom_vars
                .iter()
                .copied()
                .filter(|v| !outside.contains(v))
                .collect();
            let mut groups: BTreeMap<Vec<i64>, BTreeSet<Vec<i64>>> = BTreeMap::new();
            if free.is_empty() {
                groups.insert(Vec::new(), BTreeSet::new());
            }
            for tuple in db.get(&atom.pred).into_iter().flatten() {
                if let Some(e) = unify(&atom.args, tuple, env) {
                    let g = free.iter().map(|v| e[v]).collect();
                    let l = locals.iter().map(|v| e[v]).collect();
                    groups.entry(g).or_default().insert(l);
                }
            }
            let pos = locals.iter().position(|v| v == val).expect("value is local");
            for (g, instances) in groups {
                let total: i64 = instances.iter().map(|l| l[pos]).sum();
                let mut e = env.clone();
                for (v, x) in free.iter().zip(g) {
                    e.insert(*v, x);
                }
                match e.get(result) {
                    Some(&old) if old != total => continue,
                    Some(_) => {}
                    None => {
                        e.insert(*result, total);
                    }
                }
                solve(rule, i + 1, &e, db, out);
            }
        }
    }
}

/// Naive fixpoint, level by level: every rule of the level is re-run over
/// the whole database until nothing new appears.
pub fn naive_eval(prog: &Prog) -> Db {
    let mut db = Db::new();
    for (p, args) in &prog.facts {
        db.entry(*p).or_default().insert(args.clone());
    }
    let mut levels: Vec<i32> = prog.preds.iter().map(|p| p.level).filter(|&l| l >= 0).collect();
    levels.sort();
    levels.dedup();
    for level in levels {
        loop {
            let mut derived = Vec::new();
            for rule in prog.rules.iter().filter(|r| prog.preds[r.head.pred].level == level) {
                let mut out = Vec::new();
                solve(rule, 0, &Env::new(), &db, &mut out);
                derived.extend(out.into_iter().map(|t| (rule.head.pred, t)));
            }
            let mut changed = false;
            for (p, t) in derived {
                changed |= db.entry(p).or_default().insert(t);
            }
            if !changed {
                break;
            }
        }
    }
    db.retain(|_, rel| !rel.is_empty());
    db
}
