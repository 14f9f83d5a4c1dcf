//! Ground terms and facts.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A ground term: a finite number or a lowercase symbol.
///
/// Numbers compare by exact value; `-0.0` is folded into `0.0` on construction
/// so that equal numbers always hash the same. Non-finite numbers cannot be
/// constructed through [`Value::number`].
#[derive(Clone, Debug)]
pub enum Value {
    Num(f64),
    Sym(Arc<str>),
}

impl Value {
    /// Builds a numeric value, rejecting NaN and infinities.
    pub fn number(n: f64) -> Option<Value> {
        if n.is_finite() {
            Some(Value::Num(if n == 0.0 { 0.0 } else { n }))
        } else {
            None
        }
    }

    /// Builds a symbol. Returns `None` unless `s` is a valid identifier
    /// (`[a-z][A-Za-z0-9_]*`).
    pub fn symbol(s: &str) -> Option<Value> {
        if is_ident(s) {
            Some(Value::Sym(Arc::from(s)))
        } else {
            None
        }
    }

    /// Parses an identifier as it would appear in a rule file: a decimal
    /// number (optionally negative) or a symbol.
    pub fn parse_id(s: &str) -> Option<Value> {
        let s = s.trim();
        if is_decimal(s) {
            s.parse::<f64>().ok().and_then(Value::number)
        } else {
            Value::symbol(s)
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Num(n) => Some(*n),
            Value::Sym(_) => None,
        }
    }

    pub fn as_symbol(&self) -> Option<&str> {
        match self {
            Value::Sym(s) => Some(s),
            Value::Num(_) => None,
        }
    }
}

impl From<u32> for Value {
    fn from(n: u32) -> Self {
        Value::Num(f64::from(n))
    }
}

impl From<i32> for Value {
    fn from(n: i32) -> Self {
        Value::Num(f64::from(n))
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Value {}

impl Hash for Value {
    fn hash<H: Hasher>(&self, state: &mut H) {
        match self {
            Value::Num(n) => {
                0u8.hash(state);
                n.to_bits().hash(state);
            }
            Value::Sym(s) => {
                1u8.hash(state);
                s.hash(state);
            }
        }
    }
}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Numbers by value, then symbols lexicographically.
impl Ord for Value {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Value::Num(a), Value::Num(b)) => a.total_cmp(b),
            (Value::Num(_), Value::Sym(_)) => Ordering::Less,
            (Value::Sym(_), Value::Num(_)) => Ordering::Greater,
            (Value::Sym(a), Value::Sym(b)) => a.cmp(b),
        }
    }
}

/// Integer-valued numbers print without a decimal point; everything else
/// prints as the shortest decimal that round-trips.
impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Num(n) => write!(f, "{n}"),
            Value::Sym(s) => f.write_str(s),
        }
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Value::Num(n) if n.fract() == 0.0 && n.abs() < 9.0e15 => {
                serializer.serialize_i64(*n as i64)
            }
            Value::Num(n) => serializer.serialize_f64(*n),
            Value::Sym(s) => serializer.serialize_str(s),
        }
    }
}

/// Accepts a JSON number or a string holding a number or identifier.
impl<'de> Deserialize<'de> for Value {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(n) => Value::number(n)
                .ok_or_else(|| serde::de::Error::custom("identifier must be a finite number")),
            Raw::Text(t) => Value::parse_id(&t).ok_or_else(|| {
                serde::de::Error::custom(format!(
                    "`{t}` is not a number or lowercase identifier"
                ))
            }),
        }
    }
}

/// A ground atom.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fact {
    pub predicate: Arc<str>,
    pub args: Vec<Value>,
}

impl Fact {
    pub fn new(predicate: &str, args: Vec<Value>) -> Self {
        Fact {
            predicate: Arc::from(predicate),
            args,
        }
    }
}

impl fmt::Display for Fact {
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

/// Convenience for building facts in code: `fact!("delay", 1, 3, 5)`.
#[macro_export]
macro_rules! fact {
    ($pred:expr $(, $arg:expr)* $(,)?) => {
        $crate::rules::Fact::new($pred, vec![$($crate::rules::IntoValue::into_value($arg)),*])
    };
}

/// Conversion used by the [`fact!`] macro.
pub trait IntoValue {
    fn into_value(self) -> Value;
}

impl IntoValue for Value {
    fn into_value(self) -> Value {
        self
    }
}

impl IntoValue for &Value {
    fn into_value(self) -> Value {
        self.clone()
    }
}

impl IntoValue for f64 {
    fn into_value(self) -> Value {
        Value::number(self).expect("finite number")
    }
}

impl IntoValue for i32 {
    fn into_value(self) -> Value {
        Value::from(self)
    }
}

impl IntoValue for u32 {
    fn into_value(self) -> Value {
        Value::from(self)
    }
}

impl IntoValue for u64 {
    fn into_value(self) -> Value {
        Value::Num(self as f64)
    }
}

impl IntoValue for &str {
    fn into_value(self) -> Value {
        Value::symbol(self).expect("valid symbol")
    }
}

pub(crate) fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_lowercase())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn is_decimal(s: &str) -> bool {
    let digits = s.strip_prefix('-').unwrap_or(s);
    let (int, frac) = match digits.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (digits, None),
    };
    !int.is_empty()
        && int.bytes().all(|b| b.is_ascii_digit())
        && frac.is_none_or(|f| !f.is_empty() && f.bytes().all(|b| b.is_ascii_digit()))
}
