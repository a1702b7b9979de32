//! Text syntax for STL formulas.
//!
//! ```text
//! formula  := implies
//! implies  := or ( "=>" suffix ["#" num] implies )?
//! or       := and ( "or" suffix and )*
//! and      := until ( "and" suffix until )*
//! until    := unary ( "until" [interval] suffix unary )*
//! unary    := "not" unary | ("alw" | "ev") [interval] suffix unary
//!           | "#" num unary | primary
//! primary  := "true" | "false" | expr rel expr | "(" formula ")"
//! interval := "_"? "[" bound "," (bound | "inf") "]"
//! suffix   := ("@max" | "@add")?
//! expr     := term (("+" | "-") term)*
//! term     := factor (("*" | "/") factor)*
//! factor   := num | "-" factor | ident | ident "(" "t" [("+" | "-") num] ")"
//!           | "abs" "(" expr ")" | "(" expr ")"
//! rel      := "<" | "<=" | ">=" | ">" | "=" | "=="
//! ```
//!
//! An omitted interval means `[0, end of trace]`. Interval bounds may be
//! constant arithmetic over numbers and named parameters.

use std::collections::HashMap;

use thiserror::Error;

use super::ast::{ArithOp, Connective, Expr, Formula, Interval, Relation};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("{line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{line}:{column}: malformed interval: {message}")]
    Interval {
        line: usize,
        column: usize,
        message: String,
    },
}

impl ParseError {
    pub fn position(&self) -> (usize, usize) {
        match self {
            ParseError::Syntax { line, column, .. } | ParseError::Interval { line, column, .. } => {
                (*line, *column)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Plus,
    Minus,
    Star,
    Slash,
    Arrow,
    At,
    Hash,
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let (mut i, mut line, mut column) = (0, 1, 1);
    let err = |line, column, message: String| ParseError::Syntax {
        line,
        column,
        message,
    };
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, column);
        if c == '\n' {
            i += 1;
            line += 1;
            column = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            column += 1;
            continue;
        }
        let start = i;
        let tok = if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s: String = chars[start..i].iter().collect();
            let value = s
                .parse()
                .map_err(|_| err(tl, tc, format!("invalid number `{s}`")))?;
            Tok::Num(value)
        } else if c.is_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            Tok::Ident(chars[start..i].iter().collect())
        } else {
            let next = chars.get(i + 1).copied();
            let (tok, len) = match (c, next) {
                ('<', Some('=')) => (Tok::Le, 2),
                ('>', Some('=')) => (Tok::Ge, 2),
                ('=', Some('=')) => (Tok::Eq, 2),
                ('=', Some('>')) => (Tok::Arrow, 2),
                ('<', _) => (Tok::Lt, 1),
                ('>', _) => (Tok::Gt, 1),
                ('=', _) => (Tok::Eq, 1),
                ('(', _) => (Tok::LParen, 1),
                (')', _) => (Tok::RParen, 1),
                ('[', _) => (Tok::LBracket, 1),
                (']', _) => (Tok::RBracket, 1),
                (',', _) => (Tok::Comma, 1),
                ('+', _) => (Tok::Plus, 1),
                ('-', _) => (Tok::Minus, 1),
                ('*', _) => (Tok::Star, 1),
                ('/', _) => (Tok::Slash, 1),
                ('@', _) => (Tok::At, 1),
                ('#', _) => (Tok::Hash, 1),
                _ => return Err(err(tl, tc, format!("unexpected character `{c}`"))),
            };
            i += len;
            tok
        };
        column += i - start;
        tokens.push(Token {
            tok,
            line: tl,
            column: tc,
        });
    }
    tokens.push(Token {
        tok: Tok::Eof,
        line,
        column,
    });
    Ok(tokens)
}

const KEYWORDS: &[&str] = &[
    "and", "or", "not", "alw", "alw_", "ev", "ev_", "until", "until_", "true", "false", "abs",
    "inf",
];

#[derive(Debug, Clone, Copy, PartialEq)]
enum TemporalWord {
    Always,
    Eventually,
    Until,
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    params: &'a HashMap<String, f64>,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let i = (self.pos + offset).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn advance(&mut self) -> Tok {
        let t = self.tokens[self.pos].tok.clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        let t = &self.tokens[self.pos];
        Err(ParseError::Syntax {
            line: t.line,
            column: t.column,
            message: message.into(),
        })
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.advance();
            Ok(())
        } else {
            self.error(format!("expected {what}, found {}", describe(self.peek())))
        }
    }

    fn is_word(&self, word: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == word)
    }

    fn temporal_word(&self) -> Option<TemporalWord> {
        match self.peek() {
            Tok::Ident(s) => match s.as_str() {
                "alw" | "alw_" => Some(TemporalWord::Always),
                "ev" | "ev_" => Some(TemporalWord::Eventually),
                "until" | "until_" => Some(TemporalWord::Until),
                _ => None,
            },
            _ => None,
        }
    }

    fn formula(&mut self) -> Result<Formula, ParseError> {
        self.implies()
    }

    fn implies(&mut self) -> Result<Formula, ParseError> {
        let lhs = self.or()?;
        if *self.peek() != Tok::Arrow {
            return Ok(lhs);
        }
        self.advance();
        let tag = self.suffix()?;
        let scale = if *self.peek() == Tok::Hash {
            self.advance();
            Some(self.positive_number("implication scale")?)
        } else {
            None
        };
        let rhs = self.implies()?;
        Ok(Formula::Implies {
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
            tag,
            scale,
        })
    }

    fn or(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.and()?;
        while self.is_word("or") {
            self.advance();
            let tag = self.suffix()?;
            let rhs = self.and()?;
            lhs = Formula::Or {
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
                tag,
            };
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.until()?;
        while self.is_word("and") {
            self.advance();
            let tag = self.suffix()?;
            let rhs = self.until()?;
            lhs = Formula::And {
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
                tag,
            };
        }
        Ok(lhs)
    }

    fn until(&mut self) -> Result<Formula, ParseError> {
        let mut lhs = self.unary()?;
        while self.temporal_word() == Some(TemporalWord::Until) {
            self.advance();
            let interval = self.optional_interval()?;
            let tag = self.suffix()?;
            let rhs = self.unary()?;
            lhs = Formula::Until {
                interval,
                tag,
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula, ParseError> {
        if self.is_word("not") {
            self.advance();
            return Ok(Formula::Not(Box::new(self.unary()?)));
        }
        if *self.peek() == Tok::Hash {
            self.advance();
            let factor = self.positive_number("scale factor")?;
            let body = self.unary()?;
            return Ok(Formula::Scaled {
                factor,
                body: Box::new(body),
            });
        }
        match self.temporal_word() {
            Some(TemporalWord::Until) => self.error("`until` needs a left operand"),
            Some(word) => {
                self.advance();
                let interval = self.optional_interval()?;
                let tag = self.suffix()?;
                let body = Box::new(self.unary()?);
                Ok(match word {
                    TemporalWord::Always => Formula::Always {
                        interval,
                        tag,
                        body,
                    },
                    _ => Formula::Eventually {
                        interval,
                        tag,
                        body,
                    },
                })
            }
            None => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<Formula, ParseError> {
        if self.is_word("true") {
            self.advance();
            return Ok(Formula::True);
        }
        if self.is_word("false") {
            self.advance();
            return Ok(Formula::False);
        }
        // A leading parenthesis opens either a sub-formula or an arithmetic
        // operand; the token after the matching `)` decides which.
        if *self.peek() == Tok::LParen && !self.paren_group_is_arithmetic() {
            self.advance();
            let f = self.formula()?;
            self.expect(Tok::RParen, "`)`")?;
            return Ok(f);
        }
        self.comparison()
    }

    fn paren_group_is_arithmetic(&self) -> bool {
        let mut depth = 0usize;
        for (i, t) in self.tokens[self.pos..].iter().enumerate() {
            match t.tok {
                Tok::LParen => depth += 1,
                Tok::RParen => {
                    depth -= 1;
                    if depth == 0 {
                        return matches!(
                            self.peek_at(i + 1),
                            Tok::Lt
                                | Tok::Le
                                | Tok::Gt
                                | Tok::Ge
                                | Tok::Eq
                                | Tok::Plus
                                | Tok::Minus
                                | Tok::Star
                                | Tok::Slash
                        );
                    }
                }
                Tok::Eof => return false,
                _ => {}
            }
        }
        false
    }

    fn comparison(&mut self) -> Result<Formula, ParseError> {
        let lhs = self.expr()?;
        let relation = match self.peek() {
            Tok::Lt => Relation::Lt,
            Tok::Le => Relation::Le,
            Tok::Ge => Relation::Ge,
            Tok::Gt => Relation::Gt,
            Tok::Eq => Relation::Eq,
            other => {
                return self.error(format!(
                    "expected comparison operator, found {}",
                    describe(other)
                ))
            }
        };
        self.advance();
        let rhs = self.expr()?;
        Ok(Formula::atom(lhs, relation, rhs))
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => ArithOp::Add,
                Tok::Minus => ArithOp::Sub,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.term()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Tok::Star => ArithOp::Mul,
                Tok::Slash => ArithOp::Div,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.factor()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Num(x) => {
                self.advance();
                Ok(Expr::Const(x))
            }
            Tok::Minus => {
                self.advance();
                match self.peek().clone() {
                    Tok::Num(x) => {
                        self.advance();
                        Ok(Expr::Const(-x))
                    }
                    Tok::Ident(s) if s == "inf" => {
                        self.advance();
                        Ok(Expr::Const(f64::NEG_INFINITY))
                    }
                    _ => Ok(Expr::Neg(Box::new(self.factor()?))),
                }
            }
            Tok::LParen => {
                self.advance();
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) if name == "abs" => {
                self.advance();
                self.expect(Tok::LParen, "`(` after abs")?;
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(Expr::Abs(Box::new(e)))
            }
            Tok::Ident(name) if name == "inf" => {
                self.advance();
                Ok(Expr::Const(f64::INFINITY))
            }
            Tok::Ident(name) if KEYWORDS.contains(&name.as_str()) => {
                self.error(format!("unexpected keyword `{name}`"))
            }
            Tok::Ident(name) => {
                self.advance();
                if let Some(&value) = self.params.get(&name) {
                    return Ok(Expr::Const(value));
                }
                if *self.peek() == Tok::LParen && matches!(self.peek_at(1), Tok::Ident(t) if t == "t")
                {
                    self.advance();
                    self.advance();
                    let offset = match self.peek() {
                        Tok::RParen => 0.0,
                        Tok::Plus | Tok::Minus => {
                            let sign = if self.advance() == Tok::Minus { -1.0 } else { 1.0 };
                            sign * self.constant("time offset")?
                        }
                        other => {
                            return self.error(format!(
                                "expected `+`, `-` or `)` in time offset, found {}",
                                describe(other)
                            ))
                        }
                    };
                    self.expect(Tok::RParen, "`)`")?;
                    if offset == 0.0 {
                        return Ok(Expr::Signal(name));
                    }
                    return Ok(Expr::Shifted {
                        signal: name,
                        offset,
                    });
                }
                Ok(Expr::Signal(name))
            }
            other => self.error(format!("expected expression, found {}", describe(&other))),
        }
    }

    /// A constant-valued arithmetic expression (numbers and parameters).
    fn constant(&mut self, what: &str) -> Result<f64, ParseError> {
        let start = self.pos;
        let e = self.term()?;
        match const_value(&e) {
            Some(v) => Ok(v),
            None => {
                self.pos = start;
                let mut names = Vec::new();
                e.signals(&mut names);
                self.error(format!(
                    "{what} must be constant; unbound parameter `{}`",
                    names.join("`, `")
                ))
            }
        }
    }

    fn positive_number(&mut self, what: &str) -> Result<f64, ParseError> {
        let t = &self.tokens[self.pos];
        let (line, column) = (t.line, t.column);
        let v = match self.peek().clone() {
            Tok::Num(x) => {
                self.advance();
                x
            }
            Tok::LParen => {
                self.advance();
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                match const_value(&e) {
                    Some(v) => v,
                    None => return self.error(format!("{what} must be constant")),
                }
            }
            Tok::Ident(name) if self.params.contains_key(&name) => {
                self.advance();
                self.params[&name]
            }
            other => return self.error(format!("expected {what}, found {}", describe(&other))),
        };
        if !(v > 0.0 && v.is_finite()) {
            return Err(ParseError::Syntax {
                line,
                column,
                message: format!("{what} must be a positive finite number, got {v}"),
            });
        }
        Ok(v)
    }

    fn optional_interval(&mut self) -> Result<Interval, ParseError> {
        if *self.peek() != Tok::LBracket {
            return Ok(Interval::UNBOUNDED);
        }
        let t = &self.tokens[self.pos];
        let (line, column) = (t.line, t.column);
        self.advance();
        let lo_expr = self.expr()?;
        self.expect(Tok::Comma, "`,` in interval")?;
        let hi_expr = self.expr()?;
        self.expect(Tok::RBracket, "`]`")?;
        let bad = |message: String| ParseError::Interval {
            line,
            column,
            message,
        };
        let unbound = |e: &Expr| {
            let mut names = Vec::new();
            e.signals(&mut names);
            bad(format!("unbound parameter `{}`", names.join("`, `")))
        };
        let lo = const_value(&lo_expr).ok_or_else(|| unbound(&lo_expr))?;
        let hi = const_value(&hi_expr).ok_or_else(|| unbound(&hi_expr))?;
        if !lo.is_finite() || lo < 0.0 {
            return Err(bad(format!("lower bound {lo} must be finite and non-negative")));
        }
        if hi.is_nan() || hi < 0.0 {
            return Err(bad(format!("upper bound {hi} must be non-negative")));
        }
        if lo > hi {
            return Err(bad(format!("lower bound {lo} exceeds upper bound {hi}")));
        }
        Ok(Interval {
            lo,
            hi: if hi.is_infinite() { None } else { Some(hi) },
        })
    }

    fn suffix(&mut self) -> Result<Option<Connective>, ParseError> {
        if *self.peek() != Tok::At {
            return Ok(None);
        }
        self.advance();
        match self.advance() {
            Tok::Ident(s) if s == "max" => Ok(Some(Connective::Max)),
            Tok::Ident(s) if s == "add" || s == "additive" => Ok(Some(Connective::Additive)),
            _ => {
                self.pos -= 1;
                self.error("expected `max` or `add` after `@`")
            }
        }
    }
}

fn const_value(e: &Expr) -> Option<f64> {
    match e {
        Expr::Const(c) => Some(*c),
        Expr::Signal(_) | Expr::Shifted { .. } => None,
        Expr::Neg(e) => const_value(e).map(|v| -v),
        Expr::Abs(e) => const_value(e).map(f64::abs),
        Expr::Binary(op, l, r) => {
            let (l, r) = (const_value(l)?, const_value(r)?);
            Some(match op {
                ArithOp::Add => l + r,
                ArithOp::Sub => l - r,
                ArithOp::Mul => l * r,
                ArithOp::Div => l / r,
            })
        }
    }
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Num(x) => format!("number {x}"),
        Tok::Eof => "end of input".into(),
        other => format!("{other:?}"),
    }
}

/// Parses a formula with no named parameters.
pub fn parse_stl(text: &str) -> Result<Formula, ParseError> {
    parse_with_params(text, &HashMap::new())
}

/// Parses a formula, substituting identifiers found in `params` by their value.
pub fn parse_with_params(
    text: &str,
    params: &HashMap<String, f64>,
) -> Result<Formula, ParseError> {
    let tokens = lex(text)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        params,
    };
    let f = parser.formula()?;
    if *parser.peek() != Tok::Eof {
        return parser.error(format!(
            "unexpected {} after formula",
            describe(parser.peek())
        ));
    }
    Ok(f)
}
