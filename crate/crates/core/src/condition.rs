//! Filtering conditions `C(S_t, |Δ_t|)`.
//!
//! A condition is a boolean expression over two variables, `st` (the
//! transmitted total photon number) and `adt` (the modulus of the transmitted
//! population difference), plus named real parameters bound at evaluation
//! time. The signed difference is never exposed, so every condition is
//! symmetric under `Δ_t → -Δ_t`.
//!
//! ```text
//! adt >= 120
//! adt > (a*st)^2
//! adt > a*st*(1 + b*sin(c*st))
//! adt > floor(a*st)/a
//! adt > st + sqrt(b^2 - st^2) - b
//! ```
//!
//! Precedence, loosest first: `or`, `and`, `not`, comparisons, `+ -`, `* /`,
//! unary minus, `^` (right associative). `&&`, `||`, `!` and `==` are accepted
//! as aliases, as are `≥` and `≤`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

pub type Params = BTreeMap<String, f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConditionError {
    #[error("syntax error at column {column}: {message}{}", expected_suffix(.expected))]
    Syntax {
        column: usize,
        message: String,
        expected: Vec<String>,
    },
    #[error("unknown function '{name}' at column {column}")]
    UnknownIdentifier { column: usize, name: String },
    #[error("function '{name}' at column {column} takes {expected} argument(s), got {found}")]
    Arity {
        column: usize,
        name: String,
        expected: usize,
        found: usize,
    },
    #[error("type error at column {column}: {message}")]
    Type { column: usize, message: String },
    #[error("parameter '{0}' is not bound")]
    UnboundParameter(String),
    #[error("domain error: {0}")]
    Domain(String),
}

fn expected_suffix(expected: &[String]) -> String {
    if expected.is_empty() {
        String::new()
    } else {
        format!(" (expected {})", expected.join(", "))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variable {
    /// Transmitted total photon number `S_t`.
    TotalPhotons,
    /// `|Δ_t|`.
    AbsDifference,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Function {
    Floor,
    Sqrt,
    Sin,
    Abs,
    Min,
    Max,
}

impl Function {
    fn lookup(name: &str) -> Option<Self> {
        Some(match name {
            "floor" => Function::Floor,
            "sqrt" => Function::Sqrt,
            "sin" => Function::Sin,
            "abs" => Function::Abs,
            "min" => Function::Min,
            "max" => Function::Max,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Function::Floor => "floor",
            Function::Sqrt => "sqrt",
            Function::Sin => "sin",
            Function::Abs => "abs",
            Function::Min => "min",
            Function::Max => "max",
        }
    }

    fn arity(self) -> usize {
        match self {
            Function::Min | Function::Max => 2,
            _ => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CompareOp {
    Greater,
    GreaterEq,
    Less,
    LessEq,
    Equal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LogicOp {
    And,
    Or,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Number(f64),
    Bool(bool),
    Var(Variable),
    Param(String),
    Neg(Box<Expr>),
    Not(Box<Expr>),
    Arith(ArithOp, Box<Expr>, Box<Expr>),
    Compare(CompareOp, Box<Expr>, Box<Expr>),
    Logic(LogicOp, Box<Expr>, Box<Expr>),
    Call(Function, Vec<Expr>),
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Number(x) => write!(f, "{x}"),
            Expr::Bool(b) => write!(f, "{b}"),
            Expr::Var(Variable::TotalPhotons) => f.write_str("st"),
            Expr::Var(Variable::AbsDifference) => f.write_str("adt"),
            Expr::Param(name) => f.write_str(name),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Not(e) => write!(f, "(not {e})"),
            Expr::Arith(op, l, r) => {
                let sym = match op {
                    ArithOp::Add => "+",
                    ArithOp::Sub => "-",
                    ArithOp::Mul => "*",
                    ArithOp::Div => "/",
                    ArithOp::Pow => "^",
                };
                write!(f, "({l} {sym} {r})")
            }
            Expr::Compare(op, l, r) => {
                let sym = match op {
                    CompareOp::Greater => ">",
                    CompareOp::GreaterEq => ">=",
                    CompareOp::Less => "<",
                    CompareOp::LessEq => "<=",
                    CompareOp::Equal => "=",
                };
                write!(f, "({l} {sym} {r})")
            }
            Expr::Logic(op, l, r) => {
                let word = match op {
                    LogicOp::And => "and",
                    LogicOp::Or => "or",
                };
                write!(f, "({l} {word} {r})")
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, arg) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{arg}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// How numerical domain errors are handled during evaluation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum EvalMode {
    /// Domain errors are reported.
    #[default]
    Strict,
    /// `sqrt` of a negative argument evaluates to 0. Other domain errors are
    /// still reported.
    Clamp,
}

/// A parsed, type-checked filtering condition.
#[derive(Clone, Debug)]
pub struct Condition {
    source: String,
    expr: Expr,
}

impl PartialEq for Condition {
    fn eq(&self, other: &Self) -> bool {
        self.expr == other.expr
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.expr.fmt(f)
    }
}

impl std::str::FromStr for Condition {
    type Err = ConditionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Condition::parse(s)
    }
}

impl Condition {
    pub fn parse(source: &str) -> Result<Self, ConditionError> {
        let tokens = lex(source)?;
        let mut parser = Parser {
            tokens,
            pos: 0,
            end_column: source.chars().count() + 1,
        };
        let (expr, ty, column) = parser.parse_or()?;
        if let Some(tok) = parser.peek() {
            return Err(ConditionError::Syntax {
                column: tok.column,
                message: format!("unexpected '{}'", tok.kind),
                expected: vec!["operator".into(), "end of input".into()],
            });
        }
        if ty != Type::Bool {
            return Err(ConditionError::Type {
                column,
                message: "condition must be a comparison or boolean expression".into(),
            });
        }
        Ok(Self {
            source: source.to_string(),
            expr,
        })
    }

    /// The condition that passes every transmitted component.
    pub fn always_open() -> Self {
        Self {
            source: "true".into(),
            expr: Expr::Bool(true),
        }
    }

    pub fn is_always_open(&self) -> bool {
        self.expr == Expr::Bool(true)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    /// Names of all parameters referenced by the expression.
    pub fn parameters(&self) -> BTreeSet<String> {
        fn walk(e: &Expr, out: &mut BTreeSet<String>) {
            match e {
                Expr::Param(name) => {
                    out.insert(name.clone());
                }
                Expr::Neg(x) | Expr::Not(x) => walk(x, out),
                Expr::Arith(_, l, r) | Expr::Compare(_, l, r) | Expr::Logic(_, l, r) => {
                    walk(l, out);
                    walk(r, out);
                }
                Expr::Call(_, args) => args.iter().for_each(|a| walk(a, out)),
                Expr::Number(_) | Expr::Bool(_) | Expr::Var(_) => {}
            }
        }
        let mut out = BTreeSet::new();
        walk(&self.expr, &mut out);
        out
    }

    /// Fails on the first referenced parameter missing from `params`.
    pub fn check_bound(&self, params: &Params) -> Result<(), ConditionError> {
        match self.parameters().into_iter().find(|p| !params.contains_key(p)) {
            Some(missing) => Err(ConditionError::UnboundParameter(missing)),
            None => Ok(()),
        }
    }

    /// Evaluates `C(S_t, |Δ_t|)`; only `|delta_t|` is visible to the expression.
    pub fn evaluate(&self, total: u32, delta_t: i32, params: &Params) -> Result<bool, ConditionError> {
        self.evaluate_with(total, delta_t, params, EvalMode::Strict)
    }

    pub fn evaluate_with(
        &self,
        total: u32,
        delta_t: i32,
        params: &Params,
        mode: EvalMode,
    ) -> Result<bool, ConditionError> {
        let env = Env {
            st: f64::from(total),
            adt: f64::from(delta_t.unsigned_abs()),
            params,
            mode,
        };
        env.boolean(&self.expr)
    }
}

struct Env<'a> {
    st: f64,
    adt: f64,
    params: &'a Params,
    mode: EvalMode,
}

impl Env<'_> {
    fn boolean(&self, e: &Expr) -> Result<bool, ConditionError> {
        Ok(match e {
            Expr::Bool(b) => *b,
            Expr::Not(x) => !self.boolean(x)?,
            Expr::Logic(LogicOp::And, l, r) => self.boolean(l)? && self.boolean(r)?,
            Expr::Logic(LogicOp::Or, l, r) => self.boolean(l)? || self.boolean(r)?,
            Expr::Compare(op, l, r) => {
                let (a, b) = (self.number(l)?, self.number(r)?);
                match op {
                    CompareOp::Greater => a > b,
                    CompareOp::GreaterEq => a >= b,
                    CompareOp::Less => a < b,
                    CompareOp::LessEq => a <= b,
                    CompareOp::Equal => a == b,
                }
            }
            _ => unreachable!("type checker admits only boolean expressions here"),
        })
    }

    fn number(&self, e: &Expr) -> Result<f64, ConditionError> {
        let value = match e {
            Expr::Number(x) => *x,
            Expr::Var(Variable::TotalPhotons) => self.st,
            Expr::Var(Variable::AbsDifference) => self.adt,
            Expr::Param(name) => *self
                .params
                .get(name)
                .ok_or_else(|| ConditionError::UnboundParameter(name.clone()))?,
            Expr::Neg(x) => -self.number(x)?,
            Expr::Arith(op, l, r) => {
                let (a, b) = (self.number(l)?, self.number(r)?);
                match op {
                    ArithOp::Add => a + b,
                    ArithOp::Sub => a - b,
                    ArithOp::Mul => a * b,
                    ArithOp::Div => {
                        if b == 0.0 {
                            return Err(ConditionError::Domain(format!("division by zero in {e}")));
                        }
                        a / b
                    }
                    ArithOp::Pow => a.powf(b),
                }
            }
            Expr::Call(func, args) => {
                let x = self.number(&args[0])?;
                match func {
                    Function::Floor => x.floor(),
                    Function::Sin => x.sin(),
                    Function::Abs => x.abs(),
                    Function::Sqrt if x < 0.0 => match self.mode {
                        EvalMode::Clamp => 0.0,
                        EvalMode::Strict => {
                            return Err(ConditionError::Domain(format!(
                                "sqrt of negative value {x} in {e} (st = {}, adt = {})",
                                self.st, self.adt
                            )))
                        }
                    },
                    Function::Sqrt => x.sqrt(),
                    Function::Min => x.min(self.number(&args[1])?),
                    Function::Max => x.max(self.number(&args[1])?),
                }
            }
            _ => unreachable!("type checker admits only numeric expressions here"),
        };
        if value.is_finite() {
            Ok(value)
        } else {
            Err(ConditionError::Domain(format!("non-finite value in {e}")))
        }
    }
}

// ---------------------------------------------------------------------------
// Lexer

#[derive(Clone, Debug, PartialEq)]
enum TokenKind {
    Number(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    Greater,
    GreaterEq,
    Less,
    LessEq,
    Equal,
    AndAnd,
    OrOr,
    Bang,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Number(x) => write!(f, "{x}"),
            TokenKind::Ident(s) => f.write_str(s),
            TokenKind::Plus => f.write_str("+"),
            TokenKind::Minus => f.write_str("-"),
            TokenKind::Star => f.write_str("*"),
            TokenKind::Slash => f.write_str("/"),
            TokenKind::Caret => f.write_str("^"),
            TokenKind::LParen => f.write_str("("),
            TokenKind::RParen => f.write_str(")"),
            TokenKind::Comma => f.write_str(","),
            TokenKind::Greater => f.write_str(">"),
            TokenKind::GreaterEq => f.write_str(">="),
            TokenKind::Less => f.write_str("<"),
            TokenKind::LessEq => f.write_str("<="),
            TokenKind::Equal => f.write_str("="),
            TokenKind::AndAnd => f.write_str("&&"),
            TokenKind::OrOr => f.write_str("||"),
            TokenKind::Bang => f.write_str("!"),
        }
    }
}

#[derive(Clone, Debug)]
struct Token {
    kind: TokenKind,
    column: usize,
}

fn lex(source: &str) -> Result<Vec<Token>, ConditionError> {
    let chars: Vec<char> = source.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let column = i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let next = chars.get(i + 1).copied();
        let (kind, width) = match c {
            '+' => (TokenKind::Plus, 1),
            '-' | '−' => (TokenKind::Minus, 1),
            '*' => (TokenKind::Star, 1),
            '/' => (TokenKind::Slash, 1),
            '^' => (TokenKind::Caret, 1),
            '(' => (TokenKind::LParen, 1),
            ')' => (TokenKind::RParen, 1),
            ',' => (TokenKind::Comma, 1),
            '≥' => (TokenKind::GreaterEq, 1),
            '≤' => (TokenKind::LessEq, 1),
            '>' if next == Some('=') => (TokenKind::GreaterEq, 2),
            '>' => (TokenKind::Greater, 1),
            '<' if next == Some('=') => (TokenKind::LessEq, 2),
            '<' => (TokenKind::Less, 1),
            '=' if next == Some('=') => (TokenKind::Equal, 2),
            '=' => (TokenKind::Equal, 1),
            '&' if next == Some('&') => (TokenKind::AndAnd, 2),
            '|' if next == Some('|') => (TokenKind::OrOr, 2),
            '!' => (TokenKind::Bang, 1),
            c if c.is_ascii_digit() || (c == '.' && next.is_some_and(|n| n.is_ascii_digit())) => {
                let start = i;
                let mut j = i;
                while j < chars.len() && (chars[j].is_ascii_digit() || chars[j] == '.') {
                    j += 1;
                }
                if j < chars.len() && (chars[j] == 'e' || chars[j] == 'E') {
                    let mut k = j + 1;
                    if k < chars.len() && (chars[k] == '+' || chars[k] == '-') {
                        k += 1;
                    }
                    if k < chars.len() && chars[k].is_ascii_digit() {
                        while k < chars.len() && chars[k].is_ascii_digit() {
                            k += 1;
                        }
                        j = k;
                    }
                }
                let text: String = chars[start..j].iter().collect();
                let value = text.parse::<f64>().map_err(|_| ConditionError::Syntax {
                    column,
                    message: format!("malformed number '{text}'"),
                    expected: vec![],
                })?;
                (TokenKind::Number(value), j - start)
            }
            c if c.is_alphabetic() || c == '_' => {
                let start = i;
                let mut j = i;
                while j < chars.len() && (chars[j].is_alphanumeric() || chars[j] == '_') {
                    j += 1;
                }
                (TokenKind::Ident(chars[start..j].iter().collect()), j - start)
            }
            other => {
                return Err(ConditionError::Syntax {
                    column,
                    message: format!("unexpected character '{other}'"),
                    expected: vec![],
                })
            }
        };
        tokens.push(Token { kind, column });
        i += width;
    }
    Ok(tokens)
}

// ---------------------------------------------------------------------------
// Parser

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Type {
    Number,
    Bool,
}

type Parsed = (Expr, Type, usize);

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    end_column: usize,
}

const OPERAND: &[&str] = &["number", "identifier", "'('", "'-'", "'not'"];

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek_kind(&self) -> Option<&TokenKind> {
        self.peek().map(|t| &t.kind)
    }

    fn peek_word(&self, word: &str) -> bool {
        matches!(self.peek_kind(), Some(TokenKind::Ident(s)) if s == word)
    }

    fn advance(&mut self) -> Option<Token> {
        let tok = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        tok
    }

    fn column(&self) -> usize {
        self.peek().map_or(self.end_column, |t| t.column)
    }

    fn error_here(&self, message: &str, expected: &[&str]) -> ConditionError {
        let message = match self.peek() {
            Some(tok) => format!("{message}, found '{}'", tok.kind),
            None => format!("{message}, found end of input"),
        };
        ConditionError::Syntax {
            column: self.column(),
            message,
            expected: expected.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn require(ty: Type, want: Type, column: usize, what: &str) -> Result<(), ConditionError> {
        if ty == want {
            Ok(())
        } else {
            let noun = match want {
                Type::Number => "a numeric operand",
                Type::Bool => "a boolean operand",
            };
            Err(ConditionError::Type {
                column,
                message: format!("{what} expects {noun}"),
            })
        }
    }

    fn parse_or(&mut self) -> Result<Parsed, ConditionError> {
        let (mut lhs, mut ty, column) = self.parse_and()?;
        while self.peek_word("or") || self.peek_kind() == Some(&TokenKind::OrOr) {
            self.advance();
            Self::require(ty, Type::Bool, column, "'or'")?;
            let (rhs, rty, rcol) = self.parse_and()?;
            Self::require(rty, Type::Bool, rcol, "'or'")?;
            lhs = Expr::Logic(LogicOp::Or, Box::new(lhs), Box::new(rhs));
            ty = Type::Bool;
        }
        Ok((lhs, ty, column))
    }

    fn parse_and(&mut self) -> Result<Parsed, ConditionError> {
        let (mut lhs, mut ty, column) = self.parse_not()?;
        while self.peek_word("and") || self.peek_kind() == Some(&TokenKind::AndAnd) {
            self.advance();
            Self::require(ty, Type::Bool, column, "'and'")?;
            let (rhs, rty, rcol) = self.parse_not()?;
            Self::require(rty, Type::Bool, rcol, "'and'")?;
            lhs = Expr::Logic(LogicOp::And, Box::new(lhs), Box::new(rhs));
            ty = Type::Bool;
        }
        Ok((lhs, ty, column))
    }

    fn parse_not(&mut self) -> Result<Parsed, ConditionError> {
        if self.peek_word("not") || self.peek_kind() == Some(&TokenKind::Bang) {
            let column = self.column();
            self.advance();
            let (inner, ty, icol) = self.parse_not()?;
            Self::require(ty, Type::Bool, icol, "'not'")?;
            return Ok((Expr::Not(Box::new(inner)), Type::Bool, column));
        }
        self.parse_comparison()
    }

    fn parse_comparison(&mut self) -> Result<Parsed, ConditionError> {
        let (lhs, ty, column) = self.parse_sum()?;
        let op = match self.peek_kind() {
            Some(TokenKind::Greater) => CompareOp::Greater,
            Some(TokenKind::GreaterEq) => CompareOp::GreaterEq,
            Some(TokenKind::Less) => CompareOp::Less,
            Some(TokenKind::LessEq) => CompareOp::LessEq,
            Some(TokenKind::Equal) => CompareOp::Equal,
            _ => return Ok((lhs, ty, column)),
        };
        let op_column = self.column();
        self.advance();
        Self::require(ty, Type::Number, column, "comparison")?;
        let (rhs, rty, rcol) = self.parse_sum()?;
        Self::require(rty, Type::Number, rcol, "comparison")?;
        if matches!(
            self.peek_kind(),
            Some(TokenKind::Greater | TokenKind::GreaterEq | TokenKind::Less | TokenKind::LessEq | TokenKind::Equal)
        ) {
            return Err(ConditionError::Syntax {
                column: self.column(),
                message: format!("chained comparison after column {op_column}; combine with 'and'"),
                expected: vec!["'and'".into(), "'or'".into()],
            });
        }
        Ok((Expr::Compare(op, Box::new(lhs), Box::new(rhs)), Type::Bool, column))
    }

    fn parse_sum(&mut self) -> Result<Parsed, ConditionError> {
        let (mut lhs, ty, column) = self.parse_product()?;
        loop {
            let op = match self.peek_kind() {
                Some(TokenKind::Plus) => ArithOp::Add,
                Some(TokenKind::Minus) => ArithOp::Sub,
                _ => return Ok((lhs, ty, column)),
            };
            self.advance();
            Self::require(ty, Type::Number, column, "arithmetic")?;
            let (rhs, rty, rcol) = self.parse_product()?;
            Self::require(rty, Type::Number, rcol, "arithmetic")?;
            lhs = Expr::Arith(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn parse_product(&mut self) -> Result<Parsed, ConditionError> {
        let (mut lhs, ty, column) = self.parse_unary()?;
        loop {
            let op = match self.peek_kind() {
                Some(TokenKind::Star) => ArithOp::Mul,
                Some(TokenKind::Slash) => ArithOp::Div,
                _ => return Ok((lhs, ty, column)),
            };
            self.advance();
            Self::require(ty, Type::Number, column, "arithmetic")?;
            let (rhs, rty, rcol) = self.parse_unary()?;
            Self::require(rty, Type::Number, rcol, "arithmetic")?;
            lhs = Expr::Arith(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn parse_unary(&mut self) -> Result<Parsed, ConditionError> {
        if self.peek_kind() == Some(&TokenKind::Minus) {
            let column = self.column();
            self.advance();
            let (inner, ty, icol) = self.parse_unary()?;
            Self::require(ty, Type::Number, icol, "unary '-'")?;
            return Ok((Expr::Neg(Box::new(inner)), Type::Number, column));
        }
        self.parse_power()
    }

    fn parse_power(&mut self) -> Result<Parsed, ConditionError> {
        let (base, ty, column) = self.parse_atom()?;
        if self.peek_kind() != Some(&TokenKind::Caret) {
            return Ok((base, ty, column));
        }
        self.advance();
        Self::require(ty, Type::Number, column, "'^'")?;
        // right-associative; the exponent may carry its own unary minus
        let (exponent, ety, ecol) = self.parse_unary()?;
        Self::require(ety, Type::Number, ecol, "'^'")?;
        Ok((
            Expr::Arith(ArithOp::Pow, Box::new(base), Box::new(exponent)),
            Type::Number,
            column,
        ))
    }

    fn parse_atom(&mut self) -> Result<Parsed, ConditionError> {
        let column = self.column();
        let Some(tok) = self.peek().cloned() else {
            return Err(self.error_here("expected an operand", OPERAND));
        };
        match tok.kind {
            TokenKind::Number(x) => {
                self.advance();
                Ok((Expr::Number(x), Type::Number, column))
            }
            TokenKind::LParen => {
                self.advance();
                let (inner, ty, _) = self.parse_or()?;
                if self.peek_kind() != Some(&TokenKind::RParen) {
                    return Err(self.error_here("unbalanced parenthesis", &["')'"]));
                }
                self.advance();
                Ok((inner, ty, column))
            }
            TokenKind::Ident(name) => {
                self.advance();
                if self.peek_kind() == Some(&TokenKind::LParen) {
                    return self.parse_call(name, column);
                }
                let parsed = match name.as_str() {
                    "st" => (Expr::Var(Variable::TotalPhotons), Type::Number),
                    "adt" => (Expr::Var(Variable::AbsDifference), Type::Number),
                    "true" => (Expr::Bool(true), Type::Bool),
                    "false" => (Expr::Bool(false), Type::Bool),
                    "and" | "or" | "not" => {
                        self.pos -= 1;
                        return Err(self.error_here("expected an operand", OPERAND));
                    }
                    _ if Function::lookup(&name).is_some() => {
                        return Err(ConditionError::Syntax {
                            column,
                            message: format!("function '{name}' must be called with arguments"),
                            expected: vec!["'('".into()],
                        })
                    }
                    _ => (Expr::Param(name), Type::Number),
                };
                Ok((parsed.0, parsed.1, column))
            }
            _ => Err(self.error_here("expected an operand", OPERAND)),
        }
    }

    fn parse_call(&mut self, name: String, column: usize) -> Result<Parsed, ConditionError> {
        let func = Function::lookup(&name)
            .ok_or_else(|| ConditionError::UnknownIdentifier { column, name: name.clone() })?;
        self.advance(); // '('
        let mut args = Vec::new();
        if self.peek_kind() != Some(&TokenKind::RParen) {
            loop {
                let (arg, ty, acol) = self.parse_or()?;
                Self::require(ty, Type::Number, acol, func.name())?;
                args.push(arg);
                match self.peek_kind() {
                    Some(TokenKind::Comma) => {
                        self.advance();
                    }
                    Some(TokenKind::RParen) => break,
                    _ => return Err(self.error_here("malformed argument list", &["','", "')'"])),
                }
            }
        }
        self.advance(); // ')'
        if args.len() != func.arity() {
            return Err(ConditionError::Arity {
                column,
                name,
                expected: func.arity(),
                found: args.len(),
            });
        }
        Ok((Expr::Call(func, args), Type::Number, column))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(pairs: &[(&str, f64)]) -> Params {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn threshold_condition() {
        let c = Condition::parse("adt >= 120").unwrap();
        let p = Params::new();
        assert!(c.evaluate(180, -150, &p).unwrap());
        assert!(!c.evaluate(180, 100, &p).unwrap());
        assert!(c.evaluate(180, 120, &p).unwrap());
    }

    #[test]
    fn figure_family_parses() {
        for src in [
            "adt > (a*st)^2",
            "adt > a*st*(1 + b*sin(c*st))",
            "adt > floor(a*st)/a",
            "adt > st + sqrt(b^2 - st^2) - b",
            "adt ≥ 4 and st <= 10 || not (st = 3)",
        ] {
            assert!(Condition::parse(src).is_ok(), "{src}");
        }
        let c = Condition::parse("adt > (a*st)^2").unwrap();
        assert_eq!(c.parameters().into_iter().collect::<Vec<_>>(), vec!["a".to_string()]);
    }

    #[test]
    fn incomplete_expression_reports_column() {
        match Condition::parse("adt > ") {
            Err(ConditionError::Syntax { column, expected, .. }) => {
                assert_eq!(column, 7);
                assert!(expected.contains(&"number".to_string()));
            }
            other => panic!("unexpected {other:?}"),
        }
        match Condition::parse("adt >") {
            Err(ConditionError::Syntax { column, .. }) => assert_eq!(column, 6),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn structured_failures() {
        assert!(matches!(
            Condition::parse("adt > foo(st)"),
            Err(ConditionError::UnknownIdentifier { column: 7, .. })
        ));
        assert!(matches!(
            Condition::parse("adt > min(st)"),
            Err(ConditionError::Arity { expected: 2, found: 1, .. })
        ));
        assert!(matches!(Condition::parse("adt + 1"), Err(ConditionError::Type { .. })));
        assert!(matches!(Condition::parse("(adt > 1) + 2 > 0"), Err(ConditionError::Type { .. })));
        assert!(matches!(Condition::parse("adt > 1 > 0"), Err(ConditionError::Syntax { .. })));
        assert!(matches!(Condition::parse("adt > (1"), Err(ConditionError::Syntax { .. })));
        assert!(matches!(Condition::parse("adt $ 1"), Err(ConditionError::Syntax { column: 5, .. })));
        assert!(matches!(Condition::parse(""), Err(ConditionError::Syntax { column: 1, .. })));
    }

    #[test]
    fn precedence() {
        let c = Condition::parse("-2^2 = -4 and 2^3^2 = 512 and 1 + 2*3 = 7").unwrap();
        assert!(c.evaluate(0, 0, &Params::new()).unwrap());
        let c = Condition::parse("not true or true").unwrap();
        assert!(c.evaluate(0, 0, &Params::new()).unwrap());
        let c = Condition::parse("2^-1 = 0.5").unwrap();
        assert!(c.evaluate(0, 0, &Params::new()).unwrap());
    }

    #[test]
    fn staircase_condition() {
        let c = Condition::parse("adt > floor(a*st)/a").unwrap();
        let p = params(&[("a", 0.3)]);
        // the boundary is constant between multiples of 1/a
        for st in 0u32..40 {
            let boundary = (0.3 * st as f64).floor() / 0.3;
            for adt in 0..=st as i32 {
                assert_eq!(c.evaluate(st, adt, &p).unwrap(), adt as f64 > boundary);
            }
        }
        assert_eq!((0.3f64 * -1.0).floor(), -1.0);
    }

    #[test]
    fn evaluation_errors() {
        let c = Condition::parse("adt > st + sqrt(b^2 - st^2) - b").unwrap();
        assert_eq!(
            c.evaluate(5, 1, &Params::new()),
            Err(ConditionError::UnboundParameter("b".into()))
        );
        assert_eq!(c.check_bound(&Params::new()), Err(ConditionError::UnboundParameter("b".into())));
        let p = params(&[("b", 10.0)]);
        assert!(c.evaluate(5, 1, &p).is_ok());
        assert!(matches!(c.evaluate(12, 1, &p), Err(ConditionError::Domain(_))));
        assert!(c.evaluate_with(12, 1, &p, EvalMode::Clamp).is_ok());

        let c = Condition::parse("adt > 1/a").unwrap();
        assert!(matches!(c.evaluate(1, 1, &params(&[("a", 0.0)])), Err(ConditionError::Domain(_))));
    }

    #[test]
    fn print_parse_round_trip() {
        for src in [
            "adt >= 120",
            "adt > (a*st)^2",
            "adt > a*st*(1 + b*sin(c*st))",
            "not (adt < 3 or st = 0.125) and max(st, adt) <= 1e3",
            "-(-st) > --1",
        ] {
            let c = Condition::parse(src).unwrap();
            let again = Condition::parse(&c.to_string()).unwrap();
            assert_eq!(c, again, "{src} -> {c}");
        }
    }

    fn arbitrary_numeric() -> impl Strategy<Value = String> {
        let leaf = prop_oneof![
            Just("st".to_string()),
            Just("adt".to_string()),
            Just("a".to_string()),
            (0u32..50).prop_map(|x| x.to_string()),
        ];
        leaf.prop_recursive(4, 24, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone(), prop::sample::select(vec!["+", "-", "*", "/"]))
                    .prop_map(|(l, r, op)| format!("({l} {op} {r})")),
                inner.clone().prop_map(|x| format!("floor({x})")),
                inner.clone().prop_map(|x| format!("sin({x})")),
                (inner.clone(), inner).prop_map(|(l, r)| format!("max({l}, {r})")),
            ]
        })
    }

    proptest! {
        #[test]
        fn sign_symmetry(
            lhs in arbitrary_numeric(),
            rhs in arbitrary_numeric(),
            op in prop::sample::select(vec![">", ">=", "<", "<=", "="]),
            st in 0u32..60,
            dt in -60i32..60,
            a in 0.01f64..2.0,
        ) {
            let c = Condition::parse(&format!("{lhs} {op} {rhs}")).unwrap();
            let p = params(&[("a", a)]);
            let plus = c.evaluate(st, dt, &p);
            let minus = c.evaluate(st, -dt, &p);
            prop_assert_eq!(&plus, &minus);
            prop_assert_eq!(plus, c.evaluate(st, dt, &p));
        }

        #[test]
        fn parser_never_panics(src in "\\PC{0,40}") {
            let _ = Condition::parse(&src);
        }

        #[test]
        fn parser_never_panics_on_token_soup(
            parts in proptest::collection::vec(
                prop::sample::select(vec!["adt", "st", "(", ")", ">", "<=", "and", "not", "+", "-", "^", "2", "sqrt", ",", "min", "a", "="]),
                0..16,
            )
        ) {
            let _ = Condition::parse(&parts.join(" "));
        }
    }
}
