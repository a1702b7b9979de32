use std::fmt;

use crate::trace::Trace;

use super::EvalError;

/// Arithmetic over signals and constants, used on either side of a predicate.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Signal(String),
    /// Value of a signal `offset` seconds after the evaluation instant,
    /// written `x(t + offset)`.
    Shifted { signal: String, offset: f64 },
    Const(f64),
    Neg(Box<Expr>),
    Binary(ArithOp, Box<Expr>, Box<Expr>),
    Abs(Box<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    Lt,
    Le,
    Ge,
    Gt,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Predicate {
    pub lhs: Expr,
    pub relation: Relation,
    pub rhs: Expr,
}

/// Which robust connective family a node uses. `None` on a node defers to the
/// evaluator's default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Connective {
    Max,
    Additive,
}

/// Closed time window `[lo, hi]` relative to the evaluation instant.
/// `hi == None` stretches to the end of the trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: Option<f64>,
}

impl Interval {
    pub const UNBOUNDED: Interval = Interval { lo: 0.0, hi: None };

    pub fn bounded(lo: f64, hi: f64) -> Self {
        Interval { lo, hi: Some(hi) }
    }

    pub fn is_unbounded_from_zero(&self) -> bool {
        self.lo == 0.0 && self.hi.is_none()
    }

    /// Sample indices covered by this window when evaluated at sample `k`.
    pub fn indices(&self, trace: &Trace, k: usize) -> std::ops::Range<usize> {
        match self.hi {
            Some(hi) => trace.window_indices(k, self.lo, hi),
            None => {
                let start = trace.window_indices(k, self.lo, self.lo).start;
                start..trace.len()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Formula {
    True,
    False,
    Atom(Predicate),
    Not(Box<Formula>),
    And {
        lhs: Box<Formula>,
        rhs: Box<Formula>,
        tag: Option<Connective>,
    },
    Or {
        lhs: Box<Formula>,
        rhs: Box<Formula>,
        tag: Option<Connective>,
    },
    /// Kept first-class because the additive semantics scales the left-hand
    /// side before negating it.
    Implies {
        lhs: Box<Formula>,
        rhs: Box<Formula>,
        tag: Option<Connective>,
        scale: Option<f64>,
    },
    Always {
        interval: Interval,
        tag: Option<Connective>,
        body: Box<Formula>,
    },
    Eventually {
        interval: Interval,
        tag: Option<Connective>,
        body: Box<Formula>,
    },
    Until {
        interval: Interval,
        tag: Option<Connective>,
        lhs: Box<Formula>,
        rhs: Box<Formula>,
    },
    /// `#k φ`: robustness of `φ` multiplied by `k`, truth unchanged.
    Scaled { factor: f64, body: Box<Formula> },
}

impl Expr {
    pub fn signal(name: impl Into<String>) -> Self {
        Expr::Signal(name.into())
    }

    pub fn constant(value: f64) -> Self {
        Expr::Const(value)
    }

    pub fn binary(op: ArithOp, lhs: Expr, rhs: Expr) -> Self {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn eval(&self, trace: &Trace, k: usize) -> Result<f64, EvalError> {
        let value = match self {
            Expr::Signal(name) => trace.sample_at(name, k)?,
            Expr::Shifted { signal, offset } => {
                let j = trace.index_after(k, *offset);
                trace.sample_at(signal, j)?
            }
            Expr::Const(c) => *c,
            Expr::Neg(e) => -e.eval(trace, k)?,
            Expr::Abs(e) => e.eval(trace, k)?.abs(),
            Expr::Binary(op, l, r) => {
                let (l, r) = (l.eval(trace, k)?, r.eval(trace, k)?);
                match op {
                    ArithOp::Add => l + r,
                    ArithOp::Sub => l - r,
                    ArithOp::Mul => l * r,
                    ArithOp::Div => l / r,
                }
            }
        };
        if value.is_nan() {
            return Err(EvalError::NotANumber {
                expr: self.to_string(),
                index: k,
            });
        }
        Ok(value)
    }

    /// Names of all signals referenced, in order of appearance.
    pub fn signals(&self, out: &mut Vec<String>) {
        match self {
            Expr::Signal(s) | Expr::Shifted { signal: s, .. } => {
                if !out.contains(s) {
                    out.push(s.clone());
                }
            }
            Expr::Const(_) => {}
            Expr::Neg(e) | Expr::Abs(e) => e.signals(out),
            Expr::Binary(_, l, r) => {
                l.signals(out);
                r.signals(out);
            }
        }
    }
}

impl Relation {
    pub fn holds(self, lhs: f64, rhs: f64) -> bool {
        match self {
            Relation::Lt => lhs < rhs,
            Relation::Le => lhs <= rhs,
            Relation::Ge => lhs >= rhs,
            Relation::Gt => lhs > rhs,
            Relation::Eq => lhs == rhs,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Lt => "<",
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Gt => ">",
            Relation::Eq => "==",
        }
    }
}

impl Predicate {
    pub fn new(lhs: Expr, relation: Relation, rhs: Expr) -> Self {
        Predicate { lhs, relation, rhs }
    }

    pub fn sides(&self, trace: &Trace, k: usize) -> Result<(f64, f64), EvalError> {
        Ok((self.lhs.eval(trace, k)?, self.rhs.eval(trace, k)?))
    }
}

impl Formula {
    pub fn atom(lhs: Expr, relation: Relation, rhs: Expr) -> Self {
        Formula::Atom(Predicate::new(lhs, relation, rhs))
    }

    /// `signal <relation> bound`.
    pub fn cmp(signal: &str, relation: Relation, bound: f64) -> Self {
        Formula::atom(Expr::signal(signal), relation, Expr::Const(bound))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn and(lhs: Formula, rhs: Formula) -> Self {
        Formula::And {
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
            tag: None,
        }
    }

    pub fn or(lhs: Formula, rhs: Formula) -> Self {
        Formula::Or {
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
            tag: None,
        }
    }

    pub fn implies(lhs: Formula, rhs: Formula) -> Self {
        Formula::Implies {
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
            tag: None,
            scale: None,
        }
    }

    pub fn always(interval: Interval, body: Formula) -> Self {
        Formula::Always {
            interval,
            tag: None,
            body: Box::new(body),
        }
    }

    pub fn eventually(interval: Interval, body: Formula) -> Self {
        Formula::Eventually {
            interval,
            tag: None,
            body: Box::new(body),
        }
    }

    pub fn until(interval: Interval, lhs: Formula, rhs: Formula) -> Self {
        Formula::Until {
            interval,
            tag: None,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        }
    }

    /// Left fold of `and`; the empty conjunction is `true`.
    pub fn conjunction(items: impl IntoIterator<Item = Formula>) -> Self {
        items
            .into_iter()
            .reduce(Formula::and)
            .unwrap_or(Formula::True)
    }

    /// Deepest nesting of temporal operators.
    pub fn modal_depth(&self) -> usize {
        match self {
            Formula::True | Formula::False | Formula::Atom(_) => 0,
            Formula::Not(f) | Formula::Scaled { body: f, .. } => f.modal_depth(),
            Formula::And { lhs, rhs, .. }
            | Formula::Or { lhs, rhs, .. }
            | Formula::Implies { lhs, rhs, .. } => lhs.modal_depth().max(rhs.modal_depth()),
            Formula::Always { body, .. } | Formula::Eventually { body, .. } => {
                1 + body.modal_depth()
            }
            Formula::Until { lhs, rhs, .. } => 1 + lhs.modal_depth().max(rhs.modal_depth()),
        }
    }

    /// Number of AST nodes, predicates counted as one.
    pub fn size(&self) -> usize {
        match self {
            Formula::True | Formula::False | Formula::Atom(_) => 1,
            Formula::Not(f) | Formula::Scaled { body: f, .. } => 1 + f.size(),
            Formula::And { lhs, rhs, .. }
            | Formula::Or { lhs, rhs, .. }
            | Formula::Implies { lhs, rhs, .. }
            | Formula::Until { lhs, rhs, .. } => 1 + lhs.size() + rhs.size(),
            Formula::Always { body, .. } | Formula::Eventually { body, .. } => 1 + body.size(),
        }
    }

    /// Signals referenced anywhere in the formula.
    pub fn signals(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_signals(&mut out);
        out
    }

    fn collect_signals(&self, out: &mut Vec<String>) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Atom(p) => {
                p.lhs.signals(out);
                p.rhs.signals(out);
            }
            Formula::Not(f) | Formula::Scaled { body: f, .. } => f.collect_signals(out),
            Formula::Always { body, .. } | Formula::Eventually { body, .. } => {
                body.collect_signals(out)
            }
            Formula::And { lhs, rhs, .. }
            | Formula::Or { lhs, rhs, .. }
            | Formula::Implies { lhs, rhs, .. }
            | Formula::Until { lhs, rhs, .. } => {
                lhs.collect_signals(out);
                rhs.collect_signals(out);
            }
        }
    }

    /// Whether negation only appears directly on predicates or constants.
    pub fn is_nnf(&self) -> bool {
        match self {
            Formula::True | Formula::False | Formula::Atom(_) => true,
            Formula::Not(f) => matches!(**f, Formula::Atom(_)),
            Formula::Scaled { body, .. }
            | Formula::Always { body, .. }
            | Formula::Eventually { body, .. } => body.is_nnf(),
            Formula::And { lhs, rhs, .. }
            | Formula::Or { lhs, rhs, .. }
            | Formula::Until { lhs, rhs, .. } => lhs.is_nnf() && rhs.is_nnf(),
            Formula::Implies { .. } => false,
        }
    }
}

// ---------------------------------------------------------------------------
// Printing. The output is accepted by the parser and reproduces the same AST.

fn fmt_num(f: &mut fmt::Formatter<'_>, x: f64) -> fmt::Result {
    if x.is_infinite() {
        write!(f, "{}", if x > 0.0 { "inf" } else { "-inf" })
    } else {
        write!(f, "{x}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Signal(s) => write!(f, "{s}"),
            Expr::Shifted { signal, offset } => {
                write!(f, "{signal}(t + ")?;
                fmt_num(f, *offset)?;
                write!(f, ")")
            }
            Expr::Const(c) => fmt_num(f, *c),
            Expr::Neg(e) => write!(f, "-({e})"),
            Expr::Abs(e) => write!(f, "abs({e})"),
            Expr::Binary(op, l, r) => {
                let sym = match op {
                    ArithOp::Add => "+",
                    ArithOp::Sub => "-",
                    ArithOp::Mul => "*",
                    ArithOp::Div => "/",
                };
                write!(f, "({l} {sym} {r})")
            }
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.lhs, self.relation.symbol(), self.rhs)
    }
}

fn fmt_tag(f: &mut fmt::Formatter<'_>, tag: Option<Connective>) -> fmt::Result {
    match tag {
        None => Ok(()),
        Some(Connective::Max) => write!(f, "@max"),
        Some(Connective::Additive) => write!(f, "@add"),
    }
}

fn fmt_interval(f: &mut fmt::Formatter<'_>, interval: &Interval) -> fmt::Result {
    if interval.is_unbounded_from_zero() {
        return Ok(());
    }
    write!(f, "_[")?;
    fmt_num(f, interval.lo)?;
    write!(f, ",")?;
    match interval.hi {
        Some(hi) => fmt_num(f, hi)?,
        None => write!(f, "inf")?,
    }
    write!(f, "]")
}

impl Formula {
    /// Prints `self` as an operand of a larger formula.
    fn fmt_operand(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Atom(_)
            | Formula::And { .. }
            | Formula::Or { .. }
            | Formula::Implies { .. }
            | Formula::Until { .. }
            | Formula::Scaled { .. } => write!(f, "({self})"),
            _ => write!(f, "{self}"),
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => write!(f, "true"),
            Formula::False => write!(f, "false"),
            Formula::Atom(p) => write!(f, "{p}"),
            Formula::Not(body) => {
                write!(f, "not ")?;
                body.fmt_operand(f)
            }
            Formula::And { lhs, rhs, tag } | Formula::Or { lhs, rhs, tag } => {
                let word = if matches!(self, Formula::And { .. }) {
                    "and"
                } else {
                    "or"
                };
                lhs.fmt_operand(f)?;
                write!(f, " {word}")?;
                fmt_tag(f, *tag)?;
                write!(f, " ")?;
                rhs.fmt_operand(f)
            }
            Formula::Implies {
                lhs,
                rhs,
                tag,
                scale,
            } => {
                lhs.fmt_operand(f)?;
                write!(f, " =>")?;
                fmt_tag(f, *tag)?;
                if let Some(k) = scale {
                    write!(f, "#")?;
                    fmt_num(f, *k)?;
                }
                write!(f, " ")?;
                rhs.fmt_operand(f)
            }
            Formula::Always {
                interval,
                tag,
                body,
            }
            | Formula::Eventually {
                interval,
                tag,
                body,
            } => {
                let word = if matches!(self, Formula::Always { .. }) {
                    "alw"
                } else {
                    "ev"
                };
                write!(f, "{word}")?;
                fmt_interval(f, interval)?;
                fmt_tag(f, *tag)?;
                write!(f, " ")?;
                body.fmt_operand(f)
            }
            Formula::Until {
                interval,
                tag,
                lhs,
                rhs,
            } => {
                lhs.fmt_operand(f)?;
                write!(f, " until")?;
                fmt_interval(f, interval)?;
                fmt_tag(f, *tag)?;
                write!(f, " ")?;
                rhs.fmt_operand(f)
            }
            Formula::Scaled { factor, body } => {
                write!(f, "#")?;
                fmt_num(f, *factor)?;
                write!(f, " ")?;
                body.fmt_operand(f)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(name: &str) -> Formula {
        Formula::cmp(name, Relation::Gt, 0.0)
    }

    #[test]
    fn modal_depth_examples() {
        let phi2 = Formula::always(
            Interval::UNBOUNDED,
            Formula::and(
                Formula::cmp("w", Relation::Lt, 4500.0),
                Formula::cmp("v", Relation::Lt, 120.0),
            ),
        );
        assert_eq!(phi2.modal_depth(), 1);
        assert_eq!(p("x").modal_depth(), 0);
        let nested = Formula::always(
            Interval::UNBOUNDED,
            Formula::eventually(Interval::UNBOUNDED, p("x")),
        );
        assert_eq!(nested.modal_depth(), 2);
        let until = Formula::until(
            Interval::bounded(0.0, 1.0),
            p("x"),
            Formula::always(Interval::UNBOUNDED, p("y")),
        );
        assert_eq!(until.modal_depth(), 2);
    }

    #[test]
    fn display_forms() {
        let f = Formula::always(
            Interval::UNBOUNDED,
            Formula::and(
                Formula::cmp("w", Relation::Lt, 4500.0),
                Formula::cmp("v", Relation::Lt, 120.0),
            ),
        );
        assert_eq!(f.to_string(), "alw ((w < 4500) and (v < 120))");
        let g = Formula::eventually(
            Interval::bounded(0.0, 30.0),
            Formula::cmp("w", Relation::Ge, 2000.0),
        );
        assert_eq!(g.to_string(), "ev_[0,30] (w >= 2000)");
    }

    #[test]
    fn expression_evaluation() {
        let t = Trace::new(vec![0.0, 0.5, 1.0])
            .unwrap()
            .with_signal("l", vec![14.7, 16.0, 10.0])
            .unwrap();
        let e = Expr::Abs(Box::new(Expr::binary(
            ArithOp::Div,
            Expr::binary(ArithOp::Sub, Expr::signal("l"), Expr::Const(14.7)),
            Expr::Const(14.7),
        )));
        assert_eq!(e.eval(&t, 0).unwrap(), 0.0);
        assert!((e.eval(&t, 2).unwrap() - 4.7 / 14.7).abs() < 1e-12);
        let shifted = Expr::Shifted {
            signal: "l".into(),
            offset: 0.5,
        };
        assert_eq!(shifted.eval(&t, 0).unwrap(), 16.0);
        assert_eq!(shifted.eval(&t, 2).unwrap(), 10.0);
        let nan = Expr::binary(ArithOp::Div, Expr::Const(0.0), Expr::Const(0.0));
        assert!(matches!(nan.eval(&t, 0), Err(EvalError::NotANumber { .. })));
    }
}
