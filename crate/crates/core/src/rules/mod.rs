//! Embedded rule engine: a small Datalog dialect with arithmetic, comparisons
//! and stratified `sum` aggregation.

mod ast;
mod error;
mod eval;
mod factbase;
mod parser;
mod stratify;
mod value;

pub use ast::{ArithOp, Atom, CmpOp, Expr, Literal, Program, Rule, Term};
pub use error::RuleError;
pub use eval::{
    evaluate, evaluate_with, match_goal, query, Answer, Bindings, EvalOptions, QueryResult,
    DEFAULT_FACT_LIMIT,
};
pub use factbase::{FactBase, UpdateReport};
pub use parser::{parse_goal, parse_program};
pub use stratify::{stratify, StratifiedProgram};
pub use value::{Fact, IntoValue, Value};

/// Parses and stratifies in one step.
pub fn compile(src: &str) -> Result<StratifiedProgram, RuleError> {
    stratify(parse_program(src)?)
}
