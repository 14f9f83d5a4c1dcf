//! Syntax tree of the rule language.

use std::collections::BTreeSet;
use std::fmt;

use super::value::{Fact, Value};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Var(String),
    Const(Value),
}

impl Term {
    pub fn var(name: &str) -> Term {
        Term::Var(name.to_string())
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => f.write_str(v),
            Term::Const(c) => write!(f, "{c}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Atom {
    pub predicate: String,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(predicate: &str, args: Vec<Term>) -> Self {
        Atom {
            predicate: predicate.to_string(),
            args,
        }
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(|t| matches!(t, Term::Const(_)))
    }

    /// The ground fact this atom denotes, if it has no variables.
    pub fn to_fact(&self) -> Option<Fact> {
        let args = self
            .args
            .iter()
            .map(|t| match t {
                Term::Const(c) => Some(c.clone()),
                Term::Var(_) => None,
            })
            .collect::<Option<Vec<_>>>()?;
        Some(Fact::new(&self.predicate, args))
    }

    pub fn variables(&self) -> impl Iterator<Item = &str> {
        self.args.iter().filter_map(|t| match t {
            Term::Var(v) => Some(v.as_str()),
            Term::Const(_) => None,
        })
    }
}

impl From<&Fact> for Atom {
    fn from(fact: &Fact) -> Self {
        Atom {
            predicate: fact.predicate.to_string(),
            args: fact.args.iter().cloned().map(Term::Const).collect(),
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.predicate)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl ArithOp {
    pub fn symbol(self) -> &'static str {
        match self {
            ArithOp::Add => "+",
            ArithOp::Sub => "-",
            ArithOp::Mul => "*",
            ArithOp::Div => "/",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            ArithOp::Add | ArithOp::Sub => 1,
            ArithOp::Mul | ArithOp::Div => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expr {
    Term(Term),
    Neg(Box<Expr>),
    Binary(ArithOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn variables(&self, out: &mut Vec<String>) {
        match self {
            Expr::Term(Term::Var(v)) => out.push(v.clone()),
            Expr::Term(Term::Const(_)) => {}
            Expr::Neg(e) => e.variables(out),
            Expr::Binary(_, l, r) => {
                l.variables(out);
                r.variables(out);
            }
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, min: u8, right: bool) -> fmt::Result {
        match self {
            Expr::Term(t) => write!(f, "{t}"),
            Expr::Neg(e) => {
                f.write_str("-")?;
                e.fmt_prec(f, 3, false)
            }
            Expr::Binary(op, l, r) => {
                let p = op.precedence();
                // Left-associative: a right operand of equal precedence needs parens.
                let paren = p < min || (right && p == min);
                if paren {
                    f.write_str("(")?;
                }
                l.fmt_prec(f, p, false)?;
                write!(f, "{}", op.symbol())?;
                r.fmt_prec(f, p, true)?;
                if paren {
                    f.write_str(")")?;
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0, false)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Gt,
    Le,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Gt => ">",
            CmpOp::Le => "<=",
            CmpOp::Ge => ">=",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Literal {
    Atom(Atom),
    Compare(Expr, CmpOp, Expr),
    /// `Var is expr`
    Bind(String, Expr),
    /// `Result is sum(Value : atom)`
    Sum {
        result: String,
        value: String,
        atom: Atom,
    },
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Atom(a) => write!(f, "{a}"),
            Literal::Compare(l, op, r) => write!(f, "{l} {} {r}", op.symbol()),
            Literal::Bind(v, e) => write!(f, "{v} is {e}"),
            Literal::Sum {
                result,
                value,
                atom,
            } => write!(f, "{result} is sum({value} : {atom})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Rule {
    pub head: Atom,
    pub body: Vec<Literal>,
}

impl Rule {
    /// Variables of an aggregation's inner atom that also occur somewhere
    /// else in the rule. These are the grouping keys; the remaining inner
    /// variables range over the summed instantiations.
    pub fn group_variables(&self, literal_index: usize) -> BTreeSet<String> {
        let Literal::Sum { atom, .. } = &self.body[literal_index] else {
            return BTreeSet::new();
        };
        let mut outside: BTreeSet<String> = self.head.variables().map(str::to_string).collect();
        for (i, lit) in self.body.iter().enumerate() {
            if i == literal_index {
                continue;
            }
            match lit {
                Literal::Atom(a) => outside.extend(a.variables().map(str::to_string)),
                Literal::Compare(l, _, r) => {
                    let mut vs = Vec::new();
                    l.variables(&mut vs);
                    r.variables(&mut vs);
                    outside.extend(vs);
                }
                Literal::Bind(v, e) => {
                    let mut vs = vec![v.clone()];
                    e.variables(&mut vs);
                    outside.extend(vs);
                }
                Literal::Sum { result, atom, .. } => {
                    outside.insert(result.clone());
                    outside.extend(atom.variables().map(str::to_string));
                }
            }
        }
        atom.variables()
            .filter(|v| outside.contains(*v))
            .map(str::to_string)
            .collect()
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} :- ", self.head)?;
        for (i, lit) in self.body.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{lit}")?;
        }
        f.write_str(".")
    }
}

/// A parsed rule file: rules plus ground facts.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Program {
    pub rules: Vec<Rule>,
    pub facts: Vec<Fact>,
}

impl Program {
    /// Predicates defined by some rule head.
    pub fn derived_predicates(&self) -> BTreeSet<&str> {
        self.rules.iter().map(|r| r.head.predicate.as_str()).collect()
    }

    pub fn defines(&self, predicate: &str) -> bool {
        self.rules.iter().any(|r| r.head.predicate == predicate)
    }

    /// Appends the clauses of `other`.
    pub fn extend(&mut self, other: Program) {
        self.rules.extend(other.rules);
        self.facts.extend(other.facts);
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for fact in &self.facts {
            writeln!(f, "{fact}.")?;
        }
        for rule in &self.rules {
            writeln!(f, "{rule}")?;
        }
        Ok(())
    }
}
