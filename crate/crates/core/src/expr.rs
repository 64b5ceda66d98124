//! Scalar expressions of the time variable `t`.
//!
//! The grammar is small and closed:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?
//! primary := number | 't' | 'pi' | 'e' | func '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! `^` binds tighter than unary minus and associates to the right, so `-t^2`
//! is `-(t^2)` and `2^3^2` is `2^(3^2)`. Implicit multiplication is not
//! accepted: `2t` is a syntax error.

use std::fmt;

use thiserror::Error;

/// Byte range of a node in its source string.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Abs,
    Min,
    Max,
}

impl Func {
    pub const ALL: [Func; 9] = [
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Exp,
        Func::Log,
        Func::Sqrt,
        Func::Abs,
        Func::Min,
        Func::Max,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Min => "min",
            Func::Max => "max",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max => 2,
            _ => 1,
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constant {
    Pi,
    E,
}

impl Constant {
    pub fn value(self) -> f64 {
        match self {
            Constant::Pi => std::f64::consts::PI,
            Constant::E => std::f64::consts::E,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Num(f64),
    Time,
    Const(Constant),
    Neg(Box<Expr>),
    Binary {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    Call {
        func: Func,
        args: Vec<Expr>,
    },
}

/// A parsed expression. Equality compares tree structure only; source
/// locations are ignored.
#[derive(Debug, Clone)]
pub struct Expr {
    kind: ExprKind,
    span: Span,
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

impl Expr {
    /// Builds a node without source location.
    pub fn new(kind: ExprKind) -> Self {
        Expr {
            kind,
            span: Span::default(),
        }
    }

    pub fn kind(&self) -> &ExprKind {
        &self.kind
    }

    pub fn span(&self) -> Span {
        self.span
    }

    /// True when the expression is the literal `0` (after parsing).
    pub fn is_zero_literal(&self) -> bool {
        matches!(self.kind, ExprKind::Num(x) if x == 0.0)
    }

    pub fn eval(&self, t: f64) -> Result<f64, EvalError> {
        let fail = |kind| Err(EvalError { kind, span: self.span });
        match &self.kind {
            ExprKind::Num(x) => Ok(*x),
            ExprKind::Time => Ok(t),
            ExprKind::Const(c) => Ok(c.value()),
            ExprKind::Neg(inner) => Ok(-inner.eval(t)?),
            ExprKind::Binary { op, lhs, rhs } => {
                let a = lhs.eval(t)?;
                let b = rhs.eval(t)?;
                match op {
                    BinOp::Add => Ok(a + b),
                    BinOp::Sub => Ok(a - b),
                    BinOp::Mul => Ok(a * b),
                    BinOp::Div => {
                        if b == 0.0 {
                            fail(EvalErrorKind::DivisionByZero)
                        } else {
                            Ok(a / b)
                        }
                    }
                    BinOp::Pow => {
                        if a == 0.0 && b < 0.0 {
                            fail(EvalErrorKind::ZeroToNegativePower)
                        } else if a < 0.0 && b.fract() != 0.0 {
                            fail(EvalErrorKind::NegativeBaseFractionalPower)
                        } else {
                            Ok(a.powf(b))
                        }
                    }
                }
            }
            ExprKind::Call { func, args } => {
                let x = args[0].eval(t)?;
                match func {
                    Func::Sin => Ok(x.sin()),
                    Func::Cos => Ok(x.cos()),
                    Func::Tan => Ok(x.tan()),
                    Func::Exp => Ok(x.exp()),
                    Func::Log => {
                        if x <= 0.0 {
                            fail(EvalErrorKind::LogOfNonPositive)
                        } else {
                            Ok(x.ln())
                        }
                    }
                    Func::Sqrt => {
                        if x < 0.0 {
                            fail(EvalErrorKind::SqrtOfNegative)
                        } else {
                            Ok(x.sqrt())
                        }
                    }
                    Func::Abs => Ok(x.abs()),
                    Func::Min => Ok(x.min(args[1].eval(t)?)),
                    Func::Max => Ok(x.max(args[1].eval(t)?)),
                }
            }
        }
    }
}

impl fmt::Display for Expr {
    /// Fully parenthesized form; parsing it yields an identical tree.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ExprKind::Num(x) => write!(f, "{x}"),
            ExprKind::Time => f.write_str("t"),
            ExprKind::Const(Constant::Pi) => f.write_str("pi"),
            ExprKind::Const(Constant::E) => f.write_str("e"),
            ExprKind::Neg(inner) => write!(f, "(-{inner})"),
            ExprKind::Binary { op, lhs, rhs } => write!(f, "({lhs} {} {rhs})", op.symbol()),
            ExprKind::Call { func, args } => {
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

#[derive(Debug, Clone, PartialEq, Error)]
#[error("syntax error at byte {offset}: expected {}, found {found}", .expected.join(" or "))]
pub struct SyntaxError {
    pub offset: usize,
    pub expected: Vec<&'static str>,
    pub found: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalErrorKind {
    DivisionByZero,
    LogOfNonPositive,
    SqrtOfNegative,
    ZeroToNegativePower,
    NegativeBaseFractionalPower,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("{kind:?} in subexpression at bytes {}..{}", .span.start, .span.end)]
pub struct EvalError {
    pub kind: EvalErrorKind,
    pub span: Span,
}

pub fn parse(source: &str) -> Result<Expr, SyntaxError> {
    let tokens = lex(source)?;
    let mut parser = Parser { tokens, pos: 0 };
    let expr = parser.expr()?;
    let next = parser.peek();
    if next.tok != Tok::Eof {
        return Err(next.unexpected(&["operator", "end of input"]));
    }
    Ok(expr)
}

impl std::str::FromStr for Expr {
    type Err = SyntaxError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    span: Span,
}

impl Token {
    fn unexpected(&self, expected: &[&'static str]) -> SyntaxError {
        let found = match &self.tok {
            Tok::Num(x) => format!("number {x}"),
            Tok::Ident(name) => format!("identifier `{name}`"),
            Tok::Eof => "end of input".to_string(),
            other => format!("`{}`", tok_symbol(other)),
        };
        SyntaxError {
            offset: self.span.start,
            expected: expected.to_vec(),
            found,
        }
    }
}

fn tok_symbol(tok: &Tok) -> &'static str {
    match tok {
        Tok::Plus => "+",
        Tok::Minus => "-",
        Tok::Star => "*",
        Tok::Slash => "/",
        Tok::Caret => "^",
        Tok::LParen => "(",
        Tok::RParen => ")",
        Tok::Comma => ",",
        _ => "?",
    }
}

fn lex(source: &str) -> Result<Vec<Token>, SyntaxError> {
    let bytes = source.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let single = match c {
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'/' => Some(Tok::Slash),
            b'^' => Some(Tok::Caret),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            b',' => Some(Tok::Comma),
            _ => None,
        };
        if let Some(tok) = single {
            i += 1;
            tokens.push(Token {
                tok,
                span: Span { start, end: i },
            });
            continue;
        }
        if c.is_ascii_digit() || c == b'.' {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            if i < bytes.len() && bytes[i] == b'.' {
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
            }
            // exponent only when digits follow, so `2e` lexes as `2` then `e`
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text = &source[start..i];
            let value: f64 = text.parse().map_err(|_| SyntaxError {
                offset: start,
                expected: vec!["number"],
                found: format!("`{text}`"),
            })?;
            if !value.is_finite() {
                return Err(SyntaxError {
                    offset: start,
                    expected: vec!["finite number"],
                    found: format!("`{text}`"),
                });
            }
            tokens.push(Token {
                tok: Tok::Num(value),
                span: Span { start, end: i },
            });
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            tokens.push(Token {
                tok: Tok::Ident(source[start..i].to_string()),
                span: Span { start, end: i },
            });
            continue;
        }
        let ch = source[start..].chars().next().unwrap_or('?');
        return Err(SyntaxError {
            offset: start,
            expected: vec!["token"],
            found: format!("`{ch}`"),
        });
    }
    tokens.push(Token {
        tok: Tok::Eof,
        span: Span {
            start: bytes.len(),
            end: bytes.len(),
        },
    });
    Ok(tokens)
}

const OPERAND: &[&str] = &["number", "identifier", "`(`", "`-`"];

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn bump(&mut self) -> Token {
        let token = self.tokens[self.pos].clone();
        if token.tok != Tok::Eof {
            self.pos += 1;
        }
        token
    }

    fn expect(&mut self, tok: Tok, label: &'static str) -> Result<Token, SyntaxError> {
        if self.peek().tok == tok {
            Ok(self.bump())
        } else {
            Err(self.peek().unexpected(&[label]))
        }
    }

    fn expr(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().tok {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = binary(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Expr, SyntaxError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().tok {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = binary(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr, SyntaxError> {
        if self.peek().tok == Tok::Minus {
            let minus = self.bump();
            let inner = self.unary()?;
            let span = Span {
                start: minus.span.start,
                end: inner.span.end,
            };
            return Ok(Expr {
                kind: ExprKind::Neg(Box::new(inner)),
                span,
            });
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, SyntaxError> {
        let base = self.primary()?;
        if self.peek().tok == Tok::Caret {
            self.bump();
            let exponent = self.unary()?;
            return Ok(binary(BinOp::Pow, base, exponent));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, SyntaxError> {
        let token = self.peek().clone();
        match token.tok {
            Tok::Num(x) => {
                self.bump();
                Ok(Expr {
                    kind: ExprKind::Num(x),
                    span: token.span,
                })
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expr()?;
                let close = self.expect(Tok::RParen, "`)`")?;
                Ok(Expr {
                    kind: inner.kind,
                    span: Span {
                        start: token.span.start,
                        end: close.span.end,
                    },
                })
            }
            Tok::Ident(ref name) => {
                let kind = match name.as_str() {
                    "t" => Some(ExprKind::Time),
                    "pi" => Some(ExprKind::Const(Constant::Pi)),
                    "e" => Some(ExprKind::Const(Constant::E)),
                    _ => None,
                };
                if let Some(kind) = kind {
                    self.bump();
                    return Ok(Expr {
                        kind,
                        span: token.span,
                    });
                }
                let Some(func) = Func::from_name(name) else {
                    return Err(token.unexpected(&["`t`", "`pi`", "`e`", "function name"]));
                };
                self.bump();
                self.expect(Tok::LParen, "`(`")?;
                let mut args = vec![self.expr()?];
                while args.len() < func.arity() {
                    self.expect(Tok::Comma, "`,`")?;
                    args.push(self.expr()?);
                }
                let close = self.expect(Tok::RParen, "`)`")?;
                Ok(Expr {
                    kind: ExprKind::Call { func, args },
                    span: Span {
                        start: token.span.start,
                        end: close.span.end,
                    },
                })
            }
            _ => Err(token.unexpected(OPERAND)),
        }
    }
}

fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
    let span = Span {
        start: lhs.span.start,
        end: rhs.span.end,
    };
    Expr {
        kind: ExprKind::Binary {
            op,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        },
        span,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn num(x: f64) -> Expr {
        Expr::new(ExprKind::Num(x))
    }

    fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::new(ExprKind::Binary {
            op,
            lhs: Box::new(a),
            rhs: Box::new(b),
        })
    }

    fn call(func: Func, args: Vec<Expr>) -> Expr {
        Expr::new(ExprKind::Call { func, args })
    }

    fn time() -> Expr {
        Expr::new(ExprKind::Time)
    }

    #[test]
    fn literal_zero() {
        let e = parse("0").unwrap();
        assert_eq!(e, num(0.0));
        assert!(e.is_zero_literal());
    }

    #[test]
    fn precedence_of_power_over_product_and_sum() {
        let expected = bin(
            BinOp::Add,
            bin(BinOp::Mul, num(2.0), time()),
            bin(BinOp::Pow, call(Func::Sin, vec![time()]), num(2.0)),
        );
        assert_eq!(parse("2*t + sin(t)^2").unwrap(), expected);
    }

    #[test]
    fn two_argument_call() {
        let expected = call(
            Func::Min,
            vec![time(), bin(BinOp::Sub, num(1.0), time())],
        );
        assert_eq!(parse("min(t, 1-t)").unwrap(), expected);
    }

    #[test]
    fn unary_plus_is_rejected_at_its_offset() {
        let err = parse("2*+3").unwrap_err();
        assert_eq!(err.offset, 2);
        assert!(err.expected.contains(&"number"));
    }

    #[test]
    fn implicit_multiplication_is_rejected() {
        assert_eq!(parse("2t").unwrap_err().offset, 1);
        assert_eq!(parse("2e").unwrap_err().offset, 1);
        assert_eq!(parse("2 pi").unwrap_err().offset, 2);
    }

    #[test]
    fn unary_minus_binds_looser_than_power() {
        assert_eq!(parse("-t^2").unwrap().eval(3.0).unwrap(), -9.0);
        assert_eq!(parse("2^3^2").unwrap().eval(0.0).unwrap(), 512.0);
        assert_eq!(parse("2^-1").unwrap().eval(0.0).unwrap(), 0.5);
        assert_eq!(parse("8-2-1").unwrap().eval(0.0).unwrap(), 5.0);
        assert_eq!(parse("8/2/2").unwrap().eval(0.0).unwrap(), 2.0);
    }

    #[test]
    fn arity_and_unknown_names() {
        assert!(parse("min(t)").is_err());
        assert!(parse("sin(t, 1)").is_err());
        assert!(parse("foo(t)").is_err());
        assert!(parse("x").is_err());
        assert!(parse("(t").is_err());
        assert!(parse("").is_err());
        assert!(parse("t $ 1").is_err());
        assert!(parse("1e999").is_err());
    }

    #[test]
    fn scientific_literals() {
        assert_eq!(parse("1.5e-3").unwrap(), num(1.5e-3));
        assert_eq!(parse(".5").unwrap(), num(0.5));
        assert_eq!(parse("2E+2").unwrap(), num(200.0));
    }

    #[test]
    fn basic_evaluation() {
        assert_eq!(parse("t^2").unwrap().eval(3.0).unwrap(), 9.0);
        assert_eq!(
            parse("exp(0)*pi").unwrap().eval(-7.0).unwrap(),
            std::f64::consts::PI
        );
        assert_eq!(parse("e").unwrap().eval(0.0).unwrap(), std::f64::consts::E);
    }

    #[test]
    fn domain_errors_carry_location() {
        let err = parse("1/(t-1)").unwrap().eval(1.0).unwrap_err();
        assert_eq!(err.kind, EvalErrorKind::DivisionByZero);
        assert_eq!(err.span, Span { start: 0, end: 7 });

        let err = parse("2 + log(t)").unwrap().eval(0.0).unwrap_err();
        assert_eq!(err.kind, EvalErrorKind::LogOfNonPositive);
        assert_eq!(err.span, Span { start: 4, end: 10 });

        let err = parse("sqrt(t)").unwrap().eval(-1.0).unwrap_err();
        assert_eq!(err.kind, EvalErrorKind::SqrtOfNegative);

        let err = parse("t^(-1)").unwrap().eval(0.0).unwrap_err();
        assert_eq!(err.kind, EvalErrorKind::ZeroToNegativePower);

        let err = parse("t^0.5").unwrap().eval(-4.0).unwrap_err();
        assert_eq!(err.kind, EvalErrorKind::NegativeBaseFractionalPower);

        assert_eq!(parse("t^2").unwrap().eval(-4.0).unwrap(), 16.0);
    }

    #[test]
    fn display_round_trips() {
        for src in ["-t^2", "2*t + sin(t)^2", "min(t, 1-t)", "-(-(t))", "0.1*exp(-t/3)"] {
            let e = parse(src).unwrap();
            let again = parse(&e.to_string()).unwrap();
            assert_eq!(e, again, "{src} -> {e}");
        }
    }
}
