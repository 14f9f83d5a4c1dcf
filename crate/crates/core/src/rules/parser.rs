//! Recursive-descent parser for `.rules` files.
//!
//! ```text
//! program    := { clause }           clause := (fact | rule) "."
//! rule       := atom ":-" literal {"," literal}
//! literal    := atom | comparison | binding | aggregation
//! binding    := VARIABLE "is" expr
//! aggregation:= VARIABLE "is" "sum" "(" VARIABLE ":" atom ")"
//! ```
//!
//! `%` starts a comment that runs to the end of the line.

use std::collections::BTreeMap;

use super::ast::{ArithOp, Atom, CmpOp, Expr, Literal, Program, Rule, Term};
use super::error::RuleError;
use super::value::Value;

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Var(String),
    Num(f64),
    LParen,
    RParen,
    Comma,
    Dot,
    Colon,
    Implies,
    Query,
    Arith(ArithOp),
    Cmp(CmpOp),
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) | Tok::Var(s) => format!("`{s}`"),
            Tok::Num(n) => format!("`{n}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Implies => "`:-`".into(),
            Tok::Query => "`?-`".into(),
            Tok::Arith(op) => format!("`{}`", op.symbol()),
            Tok::Cmp(op) => format!("`{}`", op.symbol()),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> RuleError {
    RuleError::Syntax {
        line,
        column,
        message: message.into(),
    }
}

fn lex(src: &str) -> Result<Vec<Token>, RuleError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        let (start_line, start_col) = (line, col);
        let mut push = |tok: Tok, len: usize, i: &mut usize, col: &mut usize| {
            out.push(Token {
                tok,
                line: start_line,
                column: start_col,
            });
            *i += len;
            *col += len;
        };
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                i += 1;
                col += 1;
            }
            '%' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            '(' => push(Tok::LParen, 1, &mut i, &mut col),
            ')' => push(Tok::RParen, 1, &mut i, &mut col),
            ',' => push(Tok::Comma, 1, &mut i, &mut col),
            '.' => push(Tok::Dot, 1, &mut i, &mut col),
            '+' => push(Tok::Arith(ArithOp::Add), 1, &mut i, &mut col),
            '-' => push(Tok::Arith(ArithOp::Sub), 1, &mut i, &mut col),
            '*' => push(Tok::Arith(ArithOp::Mul), 1, &mut i, &mut col),
            '/' => push(Tok::Arith(ArithOp::Div), 1, &mut i, &mut col),
            ':' if chars.get(i + 1) == Some(&'-') => push(Tok::Implies, 2, &mut i, &mut col),
            ':' => push(Tok::Colon, 1, &mut i, &mut col),
            '?' if chars.get(i + 1) == Some(&'-') => push(Tok::Query, 2, &mut i, &mut col),
            '=' if chars.get(i + 1) == Some(&'=') => push(Tok::Cmp(CmpOp::Eq), 2, &mut i, &mut col),
            '!' if chars.get(i + 1) == Some(&'=') => push(Tok::Cmp(CmpOp::Ne), 2, &mut i, &mut col),
            '<' if chars.get(i + 1) == Some(&'=') => push(Tok::Cmp(CmpOp::Le), 2, &mut i, &mut col),
            '>' if chars.get(i + 1) == Some(&'=') => push(Tok::Cmp(CmpOp::Ge), 2, &mut i, &mut col),
            '<' => push(Tok::Cmp(CmpOp::Lt), 1, &mut i, &mut col),
            '>' => push(Tok::Cmp(CmpOp::Gt), 1, &mut i, &mut col),
            c if c.is_ascii_digit() => {
                let mut j = i;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
                // A dot only continues the number when a digit follows it;
                // otherwise it terminates the clause.
                if j + 1 < chars.len() && chars[j] == '.' && chars[j + 1].is_ascii_digit() {
                    j += 1;
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                }
                let text: String = chars[i..j].iter().collect();
                let n: f64 = text
                    .parse()
                    .map_err(|_| syntax(line, col, format!("bad number `{text}`")))?;
                if !n.is_finite() {
                    return Err(syntax(line, col, format!("number `{text}` out of range")));
                }
                let len = j - i;
                push(Tok::Num(n), len, &mut i, &mut col);
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut j = i;
                while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '_') {
                    j += 1;
                }
                let text: String = chars[i..j].iter().collect();
                let tok = if c.is_ascii_lowercase() {
                    Tok::Ident(text)
                } else {
                    Tok::Var(text)
                };
                let len = j - i;
                push(tok, len, &mut i, &mut col);
            }
            other => return Err(syntax(line, col, format!("unexpected character `{other}`"))),
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        column: col,
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    anon: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let idx = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[idx].tok
    }

    fn advance(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error_here(&self, message: impl Into<String>) -> RuleError {
        let t = &self.toks[self.pos];
        syntax(t.line, t.column, message)
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), RuleError> {
        if *self.peek() == want {
            self.advance();
            Ok(())
        } else {
            Err(self.error_here(format!("expected {what}, found {}", self.peek().describe())))
        }
    }

    fn ident(&mut self) -> Result<String, RuleError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.advance();
                Ok(s)
            }
            other => Err(self.error_here(format!("expected identifier, found {}", other.describe()))),
        }
    }

    fn variable(&mut self) -> Result<String, RuleError> {
        match self.peek().clone() {
            Tok::Var(s) => {
                self.advance();
                Ok(self.rename_anonymous(s))
            }
            other => Err(self.error_here(format!("expected variable, found {}", other.describe()))),
        }
    }

    /// Each bare `_` is a distinct variable.
    fn rename_anonymous(&mut self, name: String) -> String {
        if name == "_" {
            self.anon += 1;
            format!("_{}", self.anon)
        } else {
            name
        }
    }

    fn term(&mut self) -> Result<Term, RuleError> {
        match self.peek().clone() {
            Tok::Var(v) => {
                self.advance();
                Ok(Term::Var(self.rename_anonymous(v)))
            }
            Tok::Ident(s) => {
                self.advance();
                Ok(Term::Const(Value::Sym(s.into())))
            }
            Tok::Num(n) => {
                self.advance();
                Ok(Term::Const(Value::number(n).expect("lexer yields finite numbers")))
            }
            Tok::Arith(ArithOp::Sub) if matches!(self.peek_at(1), Tok::Num(_)) => {
                self.advance();
                let Tok::Num(n) = self.advance().tok else { unreachable!() };
                Ok(Term::Const(Value::number(-n).expect("finite")))
            }
            other => Err(self.error_here(format!("expected term, found {}", other.describe()))),
        }
    }

    fn atom(&mut self) -> Result<Atom, RuleError> {
        let predicate = self.ident()?;
        self.expect(Tok::LParen, "`(`")?;
        let mut args = vec![self.term()?];
        while *self.peek() == Tok::Comma {
            self.advance();
            args.push(self.term()?);
        }
        self.expect(Tok::RParen, "`)` or `,`")?;
        Ok(Atom { predicate, args })
    }

    fn expr(&mut self) -> Result<Expr, RuleError> {
        let mut lhs = self.product()?;
        while let Tok::Arith(op @ (ArithOp::Add | ArithOp::Sub)) = *self.peek() {
            self.advance();
            let rhs = self.product()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn product(&mut self) -> Result<Expr, RuleError> {
        let mut lhs = self.unary()?;
        while let Tok::Arith(op @ (ArithOp::Mul | ArithOp::Div)) = *self.peek() {
            self.advance();
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, RuleError> {
        match self.peek() {
            Tok::Arith(ArithOp::Sub) => {
                self.advance();
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Tok::LParen => {
                self.advance();
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            _ => Ok(Expr::Term(self.term()?)),
        }
    }

    fn literal(&mut self) -> Result<Literal, RuleError> {
        match (self.peek().clone(), self.peek_at(1).clone()) {
            (Tok::Ident(_), Tok::LParen) => Ok(Literal::Atom(self.atom()?)),
            (Tok::Var(_), Tok::Ident(kw)) if kw == "is" => {
                let var = self.variable()?;
                self.advance();
                if matches!(self.peek(), Tok::Ident(s) if s == "sum")
                    && *self.peek_at(1) == Tok::LParen
                {
                    self.advance();
                    self.advance();
                    let value = self.variable()?;
                    self.expect(Tok::Colon, "`:`")?;
                    let atom = self.atom()?;
                    self.expect(Tok::RParen, "`)`")?;
                    Ok(Literal::Sum {
                        result: var,
                        value,
                        atom,
                    })
                } else {
                    Ok(Literal::Bind(var, self.expr()?))
                }
            }
            _ => {
                let lhs = self.expr()?;
                let op = match *self.peek() {
                    Tok::Cmp(op) => op,
                    ref other => {
                        return Err(self.error_here(format!(
                            "expected comparison operator, found {}",
                            other.describe()
                        )))
                    }
                };
                self.advance();
                let rhs = self.expr()?;
                Ok(Literal::Compare(lhs, op, rhs))
            }
        }
    }

    fn program(&mut self) -> Result<Program, RuleError> {
        let mut program = Program::default();
        while *self.peek() != Tok::Eof {
            let head = self.atom()?;
            if *self.peek() == Tok::Implies {
                self.advance();
                let mut body = vec![self.literal()?];
                while *self.peek() == Tok::Comma {
                    self.advance();
                    body.push(self.literal()?);
                }
                self.expect(Tok::Dot, "`.`")?;
                program.rules.push(Rule { head, body });
            } else {
                self.expect(Tok::Dot, "`.` or `:-`")?;
                match head.to_fact() {
                    Some(f) => program.facts.push(f),
                    None => {
                        let variable = head.variables().next().unwrap_or_default().to_string();
                        return Err(RuleError::Unsafe {
                            rule: format!("{head}."),
                            variable,
                        });
                    }
                }
            }
        }
        Ok(program)
    }
}

/// Parses rule-file source into a [`Program`], checking rule safety and
/// predicate arities.
pub fn parse_program(src: &str) -> Result<Program, RuleError> {
    let mut parser = Parser {
        toks: lex(src)?,
        pos: 0,
        anon: 0,
    };
    let program = parser.program()?;
    check_arities(&program)?;
    for rule in &program.rules {
        check_safety(rule)?;
    }
    Ok(program)
}

/// Parses a query goal such as `move(X,Y,Z)`; a leading `?-` and trailing
/// `.` are optional.
pub fn parse_goal(src: &str) -> Result<Atom, RuleError> {
    let mut parser = Parser {
        toks: lex(src)?,
        pos: 0,
        anon: 0,
    };
    if *parser.peek() == Tok::Query {
        parser.advance();
    }
    let atom = parser.atom()?;
    if *parser.peek() == Tok::Dot {
        parser.advance();
    }
    parser.expect(Tok::Eof, "end of goal")?;
    Ok(atom)
}

fn check_arities(program: &Program) -> Result<(), RuleError> {
    let mut all: Vec<(&str, usize)> = program
        .facts
        .iter()
        .map(|f| (&*f.predicate, f.args.len()))
        .collect();
    for r in &program.rules {
        all.push((&r.head.predicate, r.head.args.len()));
        for lit in &r.body {
            if let Literal::Atom(a) | Literal::Sum { atom: a, .. } = lit {
                all.push((&a.predicate, a.args.len()));
            }
        }
    }
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    for (p, n) in all {
        match seen.get(p) {
            Some(&m) if m != n => {
                return Err(RuleError::Arity {
                    predicate: p.to_string(),
                    first: m,
                    second: n,
                })
            }
            Some(_) => {}
            None => {
                seen.insert(p, n);
            }
        }
    }
    Ok(())
}

/// Left-to-right range restriction.
pub(crate) fn check_safety(rule: &Rule) -> Result<(), RuleError> {
    let unsafe_var = |v: &str| RuleError::Unsafe {
        rule: rule.to_string(),
        variable: v.to_string(),
    };
    let mut bound: Vec<String> = Vec::new();
    for (idx, lit) in rule.body.iter().enumerate() {
        match lit {
            Literal::Atom(a) => bound.extend(a.variables().map(str::to_string)),
            Literal::Compare(l, _, r) => {
                let mut vs = Vec::new();
                l.variables(&mut vs);
                r.variables(&mut vs);
                if let Some(v) = vs.iter().find(|v| !bound.contains(v)) {
                    return Err(unsafe_var(v));
                }
            }
            Literal::Bind(var, e) => {
                let mut vs = Vec::new();
                e.variables(&mut vs);
                if let Some(v) = vs.iter().find(|v| !bound.contains(v)) {
                    return Err(unsafe_var(v));
                }
                bound.push(var.clone());
            }
            Literal::Sum {
                result,
                value,
                atom,
            } => {
                if !atom.variables().any(|v| v == value) {
                    return Err(unsafe_var(value));
                }
                if atom.variables().any(|v| v == result) {
                    return Err(unsafe_var(result));
                }
                let groups = rule.group_variables(idx);
                if groups.contains(value) {
                    return Err(unsafe_var(value));
                }
                bound.extend(groups);
                bound.push(result.clone());
            }
        }
    }
    match rule.head.variables().find(|v| !bound.iter().any(|b| b == v)) {
        Some(v) => Err(unsafe_var(v)),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG_T_RULE: &str = "transfer_cost(I,J,T) :- user_defined_parameter(I,J,U),
                        size(J,S),
                        reverse_bandwidth(I,J,W),
                        delay(I,J,D),
                        other(I,J,O),
                        T is U*S*W*D*O.";

    #[test]
    fn single_fact() {
        let p = parse_program("p(1).").unwrap();
        assert_eq!(p.facts.len(), 1);
        assert_eq!(p.facts[0].to_string(), "p(1)");
        assert!(p.rules.is_empty());
    }

    #[test]
    fn missing_period_reports_position() {
        let err = parse_program("p(1)").unwrap_err();
        match err {
            RuleError::Syntax { line, column, .. } => assert_eq!((line, column), (1, 5)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn transfer_cost_rule_has_six_literals() {
        let p = parse_program(FIG_T_RULE).unwrap();
        assert_eq!(p.rules.len(), 1);
        assert_eq!(p.rules[0].body.len(), 6);
        assert!(matches!(p.rules[0].body[5], Literal::Bind(ref v, _) if v == "T"));
    }

    #[test]
    fn printed_program_reparses() {
        let src = "% comment\nedge(1,2). w(a, -1.5).\n\
                   p(X,Y) :- edge(X,Y), X != Y, Z is (X+Y)*2-X/(Y-3), Z >= 0.\n\
                   t(I,S) :- edge(I,_), S is sum(V : w(K,V)).";
        let p = parse_program(src).unwrap();
        let again = parse_program(&p.to_string()).unwrap();
        assert_eq!(p, again);
    }

    #[test]
    fn expression_printing_keeps_associativity() {
        let p = parse_program("q(X) :- r(A,B,C), X is A-(B-C).").unwrap();
        assert!(p.to_string().contains("A-(B-C)"));
        let p = parse_program("q(X) :- r(A,B,C), X is (A-B)-C.").unwrap();
        assert!(p.to_string().contains("A-B-C"));
    }

    #[test]
    fn unsafe_head_variable_is_named() {
        let err = parse_program("p(X,Y) :- q(X).").unwrap_err();
        assert_eq!(
            err,
            RuleError::Unsafe {
                rule: "p(X,Y) :- q(X).".into(),
                variable: "Y".into()
            }
        );
    }

    #[test]
    fn comparison_before_binding_is_unsafe() {
        let err = parse_program("p(X) :- X > 1, q(X).").unwrap_err();
        assert!(matches!(err, RuleError::Unsafe { ref variable, .. } if variable == "X"));
    }

    #[test]
    fn fact_with_variable_is_rejected() {
        assert!(matches!(
            parse_program("p(X)."),
            Err(RuleError::Unsafe { .. })
        ));
    }

    #[test]
    fn inconsistent_arity() {
        let err = parse_program("p(1). p(1,2).").unwrap_err();
        assert!(matches!(err, RuleError::Arity { ref predicate, .. } if predicate == "p"));
    }

    #[test]
    fn aggregation_binds_group_variables() {
        let p = parse_program("total(I,J,S) :- S is sum(V : f(I,J,K,V)).").unwrap();
        let groups = p.rules[0].group_variables(0);
        assert_eq!(groups.into_iter().collect::<Vec<_>>(), ["I", "J"]);
    }

    #[test]
    fn goal_parsing() {
        let g = parse_goal("?- move(X,Y,Z).").unwrap();
        assert_eq!(g.to_string(), "move(X,Y,Z)");
        assert!(parse_goal("move(X) extra").is_err());
    }

    #[test]
    fn numbers_and_terminating_dot() {
        let p = parse_program("x(2).y(2.5).").unwrap();
        assert_eq!(p.facts.len(), 2);
        assert_eq!(p.facts[1].args[0], Value::number(2.5).unwrap());
    }

    #[test]
    fn error_line_and_column_on_later_line() {
        let err = parse_program("p(1).\nq(2) r.").unwrap_err();
        assert!(matches!(err, RuleError::Syntax { line: 2, column: 6, .. }), "{err:?}");
    }
}
