use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RuleError {
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsafe rule `{rule}`: variable {variable} is not bound")]
    Unsafe { rule: String, variable: String },
    #[error("inconsistent arity for {predicate}: used with {first} and {second} arguments")]
    Arity {
        predicate: String,
        first: usize,
        second: usize,
    },
    #[error("aggregation cycle through {}", .predicates.join(", "))]
    AggregationCycle { predicates: Vec<String> },
    #[error("non-ground atom {0}")]
    NonGround(String),
    #[error("arithmetic on non-numeric term {value} in `{rule}`")]
    NonNumeric { rule: String, value: String },
    #[error("division by zero in `{rule}`")]
    DivisionByZero { rule: String },
    #[error("non-finite arithmetic result in `{rule}`")]
    NonFinite { rule: String },
    #[error("derived fact limit of {limit} exceeded")]
    FactLimit { limit: usize },
}
