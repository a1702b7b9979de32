//! Signal temporal logic: syntax, qualitative semantics and normal forms.

mod ast;
mod parse;
mod specfile;

pub use ast::{ArithOp, Connective, Expr, Formula, Interval, Predicate, Relation};
pub use parse::{parse_stl, parse_with_params, ParseError};
pub use specfile::{SpecFile, SpecFileError};

use thiserror::Error;

use crate::trace::{Trace, TraceError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("expression `{expr}` is NaN at sample {index}")]
    NotANumber { expr: String, index: usize },
    #[error("sample index {index} out of range for trace of length {len}")]
    IndexOutOfRange { index: usize, len: usize },
}

/// Boolean validity of `f` on `trace` at sample `k`.
///
/// An empty `alw` window is vacuously true and an empty `ev` or `until`
/// window is false. Windows reaching past the end of the trace are clipped.
pub fn bool_sat(f: &Formula, trace: &Trace, k: usize) -> Result<bool, EvalError> {
    if k >= trace.len() {
        return Err(EvalError::IndexOutOfRange {
            index: k,
            len: trace.len(),
        });
    }
    sat(f, trace, k)
}

fn sat(f: &Formula, trace: &Trace, k: usize) -> Result<bool, EvalError> {
    Ok(match f {
        Formula::True => true,
        Formula::False => false,
        Formula::Atom(p) => {
            let (l, r) = p.sides(trace, k)?;
            p.relation.holds(l, r)
        }
        Formula::Not(g) => !sat(g, trace, k)?,
        Formula::Scaled { body, .. } => sat(body, trace, k)?,
        Formula::And { lhs, rhs, .. } => sat(lhs, trace, k)? && sat(rhs, trace, k)?,
        Formula::Or { lhs, rhs, .. } => sat(lhs, trace, k)? || sat(rhs, trace, k)?,
        Formula::Implies { lhs, rhs, .. } => !sat(lhs, trace, k)? || sat(rhs, trace, k)?,
        Formula::Always { interval, body, .. } => {
            for j in interval.indices(trace, k) {
                if !sat(body, trace, j)? {
                    return Ok(false);
                }
            }
            true
        }
        Formula::Eventually { interval, body, .. } => {
            for j in interval.indices(trace, k) {
                if sat(body, trace, j)? {
                    return Ok(true);
                }
            }
            false
        }
        Formula::Until {
            interval, lhs, rhs, ..
        } => {
            // exists k' in window: rhs at k' and lhs on every k'' in [k, k')
            let window = interval.indices(trace, k);
            let mut prefix_holds = true;
            let mut next_prefix = k;
            for j in window {
                while next_prefix < j {
                    if prefix_holds && !sat(lhs, trace, next_prefix)? {
                        prefix_holds = false;
                    }
                    next_prefix += 1;
                }
                if !prefix_holds {
                    return Ok(false);
                }
                if sat(rhs, trace, j)? {
                    return Ok(true);
                }
            }
            false
        }
    })
}

/// Pushes negations down to predicates using De Morgan and the
/// `alw`/`ev` duality. Implications are rewritten as disjunctions.
///
/// A negated `until` has no dual in this syntax and is kept as is, with its
/// operands normalised.
pub fn nnf(f: &Formula) -> Formula {
    to_nnf(f, false)
}

fn to_nnf(f: &Formula, negate: bool) -> Formula {
    let wrap = |g: Formula| if negate { Formula::not(g) } else { g };
    match f {
        Formula::True => {
            if negate {
                Formula::False
            } else {
                Formula::True
            }
        }
        Formula::False => {
            if negate {
                Formula::True
            } else {
                Formula::False
            }
        }
        Formula::Atom(_) => wrap(f.clone()),
        Formula::Not(g) => to_nnf(g, !negate),
        Formula::Scaled { factor, body } => Formula::Scaled {
            factor: *factor,
            body: Box::new(to_nnf(body, negate)),
        },
        Formula::And { lhs, rhs, tag } | Formula::Or { lhs, rhs, tag } => {
            let is_and = matches!(f, Formula::And { .. });
            let (lhs, rhs) = (Box::new(to_nnf(lhs, negate)), Box::new(to_nnf(rhs, negate)));
            if is_and != negate {
                Formula::And { lhs, rhs, tag: *tag }
            } else {
                Formula::Or { lhs, rhs, tag: *tag }
            }
        }
        Formula::Implies { lhs, rhs, tag, .. } => {
            let (lhs, rhs) = (Box::new(to_nnf(lhs, !negate)), Box::new(to_nnf(rhs, negate)));
            if negate {
                Formula::And { lhs, rhs, tag: *tag }
            } else {
                Formula::Or { lhs, rhs, tag: *tag }
            }
        }
        Formula::Always {
            interval,
            tag,
            body,
        } => {
            let body = Box::new(to_nnf(body, negate));
            if negate {
                Formula::Eventually {
                    interval: *interval,
                    tag: *tag,
                    body,
                }
            } else {
                Formula::Always {
                    interval: *interval,
                    tag: *tag,
                    body,
                }
            }
        }
        Formula::Eventually {
            interval,
            tag,
            body,
        } => {
            let body = Box::new(to_nnf(body, negate));
            if negate {
                Formula::Always {
                    interval: *interval,
                    tag: *tag,
                    body,
                }
            } else {
                Formula::Eventually {
                    interval: *interval,
                    tag: *tag,
                    body,
                }
            }
        }
        Formula::Until {
            interval,
            tag,
            lhs,
            rhs,
        } => wrap(Formula::Until {
            interval: *interval,
            tag: *tag,
            lhs: Box::new(to_nnf(lhs, false)),
            rhs: Box::new(to_nnf(rhs, false)),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> Formula {
        Formula::cmp("p", Relation::Gt, 0.0)
    }

    fn q() -> Formula {
        Formula::cmp("q", Relation::Gt, 0.0)
    }

    fn trace_v(values: Vec<f64>) -> Trace {
        Trace::uniform(values.len(), 1.0)
            .unwrap()
            .with_signal("v", values)
            .unwrap()
    }

    #[test]
    fn boolean_examples() {
        let t = trace_v(vec![1.0, 2.0, 3.0]);
        let alw = parse_stl("alw (v < 5)").unwrap();
        assert!(bool_sat(&alw, &t, 0).unwrap());
        let ev = parse_stl("ev (v > 5)").unwrap();
        assert!(!bool_sat(&ev, &t, 0).unwrap());
    }

    #[test]
    fn until_example() {
        let t = Trace::new(vec![0.0, 1.0, 2.0])
            .unwrap()
            .with_signal("x", vec![0.0, 0.0, 20.0])
            .unwrap()
            .with_signal("y", vec![0.0, 0.0, 1.0])
            .unwrap();
        let f = parse_stl("(x < 10) until_[0,2] (y > 0)").unwrap();
        assert!(bool_sat(&f, &t, 0).unwrap());
        // the prefix must hold strictly before the release point
        let g = parse_stl("(x < 10) until_[0,2] (y > 5)").unwrap();
        assert!(!bool_sat(&g, &t, 0).unwrap());
    }

    #[test]
    fn until_prefix_starts_at_evaluation_instant() {
        // release only at t=2, lhs fails at t=0 which precedes the window
        let t = Trace::uniform(3, 1.0)
            .unwrap()
            .with_signal("x", vec![20.0, 0.0, 0.0])
            .unwrap()
            .with_signal("y", vec![0.0, 0.0, 1.0])
            .unwrap();
        let f = parse_stl("(x < 10) until_[1,2] (y > 0)").unwrap();
        assert!(!bool_sat(&f, &t, 0).unwrap());
        assert!(bool_sat(&f, &t, 1).unwrap());
    }

    #[test]
    fn vacuous_windows() {
        let t = trace_v(vec![1.0, 2.0]);
        let alw = parse_stl("alw_[5,6] (v > 100)").unwrap();
        assert!(bool_sat(&alw, &t, 0).unwrap());
        let ev = parse_stl("ev_[5,6] (v < 100)").unwrap();
        assert!(!bool_sat(&ev, &t, 0).unwrap());
        let until = parse_stl("(v < 100) until_[5,6] (v < 100)").unwrap();
        assert!(!bool_sat(&until, &t, 0).unwrap());
    }

    #[test]
    fn unknown_signal_and_range() {
        let t = trace_v(vec![1.0]);
        assert!(matches!(
            bool_sat(&parse_stl("w > 0").unwrap(), &t, 0),
            Err(EvalError::Trace(TraceError::UnknownSignal(_)))
        ));
        assert!(matches!(
            bool_sat(&parse_stl("v > 0").unwrap(), &t, 1),
            Err(EvalError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn nnf_examples() {
        let f = nnf(&Formula::not(Formula::and(p(), q())));
        assert_eq!(f, Formula::or(Formula::not(p()), Formula::not(q())));
        let g = nnf(&Formula::not(Formula::always(Interval::UNBOUNDED, p())));
        assert_eq!(g, Formula::eventually(Interval::UNBOUNDED, Formula::not(p())));
        assert_eq!(nnf(&Formula::not(Formula::not(p()))), p());
        let h = nnf(&Formula::not(Formula::implies(p(), q())));
        assert_eq!(h, Formula::and(p(), Formula::not(q())));
        assert!(h.is_nnf());
    }

    #[test]
    fn nnf_preserves_truth_on_small_cases() {
        let formulas = [
            "not (alw_[0,2] ((p > 0) or not (q > 0)))",
            "not ((p > 0) => ev_[1,3] (q > 0))",
            "not ((p > 0) until_[0,2] (q > 0))",
            "not (#3 ev (p > 0 and q < 1))",
        ];
        let traces = [
            (vec![1.0, -1.0, 0.5, 2.0], vec![0.0, 1.0, 1.0, -1.0]),
            (vec![-1.0, -1.0, -1.0, 1.0], vec![2.0, 0.5, 0.0, 0.0]),
        ];
        for text in formulas {
            let f = parse_stl(text).unwrap();
            let g = nnf(&f);
            for (pv, qv) in &traces {
                let t = Trace::uniform(4, 1.0)
                    .unwrap()
                    .with_signal("p", pv.clone())
                    .unwrap()
                    .with_signal("q", qv.clone())
                    .unwrap();
                for k in 0..4 {
                    assert_eq!(
                        bool_sat(&f, &t, k).unwrap(),
                        bool_sat(&g, &t, k).unwrap(),
                        "{text} at {k}"
                    );
                }
            }
        }
    }
}
