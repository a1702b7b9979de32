use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::stl::{bool_sat, Connective, EvalError, Formula, Interval, Relation};
use crate::trace::Trace;

use super::value::VBool;

/// Robust semantics applied to a whole formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Semantics {
    Max,
    Additive,
    /// Boolean truth with a fixed robustness magnitude.
    Constant,
    /// Boolean truth with a uniform random robustness in `(0, 1]`.
    Random,
}

impl Semantics {
    pub const ALL: [Semantics; 4] = [
        Semantics::Max,
        Semantics::Additive,
        Semantics::Constant,
        Semantics::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Semantics::Max => "max",
            Semantics::Additive => "additive",
            Semantics::Constant => "constant",
            Semantics::Random => "random",
        }
    }
}

impl std::str::FromStr for Semantics {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "max" => Ok(Semantics::Max),
            "add" | "additive" => Ok(Semantics::Additive),
            "constant" | "const" => Ok(Semantics::Constant),
            "random" => Ok(Semantics::Random),
            other => Err(format!(
                "unknown semantics `{other}` (expected max, additive, constant or random)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SemanticsConfig {
    pub semantics: Semantics,
    /// Robustness of `=` comparisons.
    pub eq_constant: f64,
    /// Left-hand-side scale of additive implication.
    pub implication_scale: f64,
    /// Robustness reported by the constant semantics.
    pub constant_magnitude: f64,
    pub rng_seed: u64,
}

impl Default for SemanticsConfig {
    fn default() -> Self {
        SemanticsConfig {
            semantics: Semantics::Max,
            eq_constant: 100.0,
            implication_scale: 10.0,
            constant_magnitude: 100.0,
            rng_seed: 0,
        }
    }
}

impl SemanticsConfig {
    pub fn with_semantics(semantics: Semantics) -> Self {
        SemanticsConfig {
            semantics,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("eq_constant", self.eq_constant),
            ("implication_scale", self.implication_scale),
            ("constant_magnitude", self.constant_magnitude),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{name} must be a positive finite number, got {v}"));
            }
        }
        Ok(())
    }

    /// Connective used for untagged nodes.
    fn default_connective(&self) -> Connective {
        match self.semantics {
            Semantics::Additive => Connective::Additive,
            _ => Connective::Max,
        }
    }
}

/// Robustness evaluator. Holds the generator used by the random semantics;
/// every other semantics is a pure function of formula and trace.
#[derive(Debug, Clone)]
pub struct Monitor {
    config: SemanticsConfig,
    rng: ChaCha8Rng,
}

impl Monitor {
    pub fn new(config: SemanticsConfig) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
        Monitor { config, rng }
    }

    pub fn config(&self) -> &SemanticsConfig {
        &self.config
    }

    /// Robust value of `f` at sample `k`.
    pub fn evaluate(&mut self, f: &Formula, trace: &Trace, k: usize) -> Result<VBool, EvalError> {
        if k >= trace.len() {
            return Err(EvalError::IndexOutOfRange {
                index: k,
                len: trace.len(),
            });
        }
        match self.config.semantics {
            Semantics::Max | Semantics::Additive => {
                let values = self.evaluate_range(f, trace, k..k + 1)?;
                Ok(values[0])
            }
            Semantics::Constant => {
                let truth = bool_sat(f, trace, k)?;
                Ok(VBool::new(truth, self.config.constant_magnitude))
            }
            Semantics::Random => {
                let truth = bool_sat(f, trace, k)?;
                // (0, 1]
                let r = 1.0 - self.rng.random::<f64>();
                Ok(VBool::new(truth, r))
            }
        }
    }

    /// Robust values of `f` at every sample in `range`, under the max and
    /// additive connectives (constant and random semantics are whole-formula
    /// baselines and have no per-sample signal; they fall back to max here).
    pub fn evaluate_range(
        &self,
        f: &Formula,
        trace: &Trace,
        range: Range<usize>,
    ) -> Result<Vec<VBool>, EvalError> {
        let widths = trace.step_widths();
        let ctx = Ctx {
            trace,
            widths: widths.as_slice(),
            config: &self.config,
        };
        ctx.eval(f, range)
    }
}

/// One-shot robust evaluation with a fresh generator.
pub fn eval_robust(
    f: &Formula,
    trace: &Trace,
    k: usize,
    config: &SemanticsConfig,
) -> Result<VBool, EvalError> {
    Monitor::new(config.clone()).evaluate(f, trace, k)
}

struct Ctx<'a> {
    trace: &'a Trace,
    widths: &'a [f64],
    config: &'a SemanticsConfig,
}

impl Ctx<'_> {
    fn connective(&self, tag: Option<Connective>) -> Connective {
        tag.unwrap_or_else(|| self.config.default_connective())
    }

    /// Smallest index range covering the windows of every instant in `range`.
    fn window_cover(&self, interval: &Interval, range: &Range<usize>) -> Range<usize> {
        if range.is_empty() {
            return 0..0;
        }
        let first = interval.indices(self.trace, range.start);
        let last = interval.indices(self.trace, range.end - 1);
        first.start..last.end.max(first.start)
    }

    fn eval(&self, f: &Formula, range: Range<usize>) -> Result<Vec<VBool>, EvalError> {
        let n = range.len();
        match f {
            Formula::True => Ok(vec![VBool::TOP; n]),
            Formula::False => Ok(vec![VBool::BOTTOM; n]),
            Formula::Atom(p) => range
                .map(|k| {
                    let (l, r) = p.sides(self.trace, k)?;
                    Ok(match p.relation {
                        Relation::Lt => VBool::lt(l, r),
                        Relation::Le => VBool::leq(l, r),
                        Relation::Ge => VBool::geq(l, r),
                        Relation::Gt => VBool::gt(l, r),
                        Relation::Eq => VBool::eq(l, r, self.config.eq_constant),
                    })
                })
                .collect(),
            Formula::Not(g) => Ok(self.eval(g, range)?.into_iter().map(|v| !v).collect()),
            Formula::Scaled { factor, body } => Ok(self
                .eval(body, range)?
                .into_iter()
                .map(|v| v.sharp(*factor))
                .collect()),
            Formula::And { lhs, rhs, tag } | Formula::Or { lhs, rhs, tag } => {
                let c = self.connective(*tag);
                let is_and = matches!(f, Formula::And { .. });
                let l = self.eval(lhs, range.clone())?;
                let r = self.eval(rhs, range)?;
                Ok(l.into_iter()
                    .zip(r)
                    .map(|(a, b)| if is_and { a.and(b, c) } else { a.or(b, c) })
                    .collect())
            }
            Formula::Implies {
                lhs,
                rhs,
                tag,
                scale,
            } => {
                let c = self.connective(*tag);
                let k = scale.unwrap_or(self.config.implication_scale);
                let l = self.eval(lhs, range.clone())?;
                let r = self.eval(rhs, range)?;
                Ok(l.into_iter()
                    .zip(r)
                    .map(|(a, b)| match c {
                        Connective::Max => VBool::implies_max(a, b),
                        Connective::Additive => VBool::implies_add(a, b, k),
                    })
                    .collect())
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
                let c = self.connective(*tag);
                let is_always = matches!(f, Formula::Always { .. });
                let cover = self.window_cover(interval, &range);
                let inner = self.eval(body, cover.clone())?;
                let mut out = Vec::with_capacity(n);
                for k in range {
                    let w = interval.indices(self.trace, k);
                    let samples = &inner[w.start - cover.start..w.end - cover.start];
                    let widths = &self.widths[w.clone()];
                    out.push(if is_always {
                        super::always_op(samples, widths, c)
                    } else {
                        super::eventually_op(samples, widths, c)
                    });
                }
                Ok(out)
            }
            Formula::Until {
                interval,
                tag,
                lhs,
                rhs,
            } => {
                let c = self.connective(*tag);
                let cover = self.window_cover(interval, &range);
                let rhs_values = self.eval(rhs, cover.clone())?;
                let prefix_range = range.start..cover.end.max(range.start);
                let lhs_values = self.eval(lhs, prefix_range.clone())?;
                let mut out = Vec::with_capacity(n);
                for k in range {
                    let w = interval.indices(self.trace, k);
                    if w.is_empty() {
                        out.push(VBool::BOTTOM);
                        continue;
                    }
                    // local frame starting at k
                    let end = w.end;
                    let prefix = &lhs_values[k - prefix_range.start..end - prefix_range.start];
                    let release: Vec<VBool> = (k..end)
                        .map(|j| {
                            if j >= cover.start {
                                rhs_values[j - cover.start]
                            } else {
                                VBool::BOTTOM
                            }
                        })
                        .collect();
                    let widths = &self.widths[k..end];
                    out.push(super::until_op(
                        prefix,
                        &release,
                        widths,
                        w.start - k..w.end - k,
                        c,
                    ));
                }
                Ok(out)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stl::parse_stl;

    fn constant_y(value: f64, n: usize) -> Trace {
        Trace::uniform(n, 0.5)
            .unwrap()
            .with_signal("y", vec![value; n])
            .unwrap()
    }

    #[test]
    fn static_switched_violation() {
        let f = parse_stl("alw (y >= 0)").unwrap();
        let t = constant_y(-9.0, 7);
        let max = eval_robust(&f, &t, 0, &SemanticsConfig::with_semantics(Semantics::Max)).unwrap();
        assert_eq!(max, VBool::new(false, 9.0));
        let c = eval_robust(
            &f,
            &t,
            0,
            &SemanticsConfig::with_semantics(Semantics::Constant),
        )
        .unwrap();
        assert_eq!(c, VBool::new(false, 100.0));
        assert_eq!(c.signed(), -100.0);
    }

    #[test]
    fn random_semantics_has_correct_sign_and_range() {
        let f = parse_stl("alw (y >= 0)").unwrap();
        let mut m = Monitor::new(SemanticsConfig {
            semantics: Semantics::Random,
            rng_seed: 7,
            ..Default::default()
        });
        for value in [-3.0, 3.0] {
            let t = constant_y(value, 4);
            for _ in 0..50 {
                let v = m.evaluate(&f, &t, 0).unwrap();
                assert_eq!(v.truth(), value > 0.0);
                assert!(v.robustness() > 0.0 && v.robustness() <= 1.0);
            }
        }
    }

    #[test]
    fn tags_override_default() {
        let t = Trace::uniform(1, 1.0)
            .unwrap()
            .with_signal("a", vec![3.0])
            .unwrap()
            .with_signal("b", vec![6.0])
            .unwrap();
        let f = parse_stl("(a > 0) and@add (b > 0)").unwrap();
        let v = eval_robust(&f, &t, 0, &SemanticsConfig::default()).unwrap();
        assert!((v.robustness() - 2.0).abs() < 1e-12);
        let g = parse_stl("(a > 0) and (b > 0)").unwrap();
        let v = eval_robust(&g, &t, 0, &SemanticsConfig::default()).unwrap();
        assert_eq!(v.robustness(), 3.0);
    }

    #[test]
    fn equality_uses_constant() {
        let t = Trace::uniform(1, 1.0)
            .unwrap()
            .with_signal("gear", vec![3.0])
            .unwrap();
        let cfg = SemanticsConfig {
            eq_constant: 7.0,
            ..Default::default()
        };
        let v = eval_robust(&parse_stl("gear == 3").unwrap(), &t, 0, &cfg).unwrap();
        assert_eq!(v, VBool::new(true, 7.0));
    }

    #[test]
    fn nan_sample_is_an_error() {
        let t = Trace::uniform(2, 1.0)
            .unwrap()
            .with_signal("y", vec![1.0, f64::NAN])
            .unwrap();
        let f = parse_stl("alw (y > 0)").unwrap();
        assert!(matches!(
            eval_robust(&f, &t, 0, &SemanticsConfig::default()),
            Err(EvalError::NotANumber { .. })
        ));
    }

    #[test]
    fn implication_scale_from_config_and_node() {
        let t = Trace::uniform(1, 1.0)
            .unwrap()
            .with_signal("p", vec![1.0])
            .unwrap()
            .with_signal("q", vec![-5.0])
            .unwrap();
        let cfg = SemanticsConfig::with_semantics(Semantics::Additive);
        // lhs false (robustness 1), rhs false (5): not(lhs # 10) = (T, 10)
        let f = parse_stl("(p < 0) => (q > 0)").unwrap();
        let v = eval_robust(&f, &t, 0, &cfg).unwrap();
        assert!((v.robustness() - 10.0).abs() < 1e-12 && v.truth());
        let g = parse_stl("(p < 0) =>#2 (q > 0)").unwrap();
        let v = eval_robust(&g, &t, 0, &cfg).unwrap();
        assert!((v.robustness() - 2.0).abs() < 1e-12 && v.truth());
    }

    #[test]
    fn range_evaluation_matches_pointwise() {
        let t = Trace::uniform(8, 0.5)
            .unwrap()
            .with_signal("x", vec![1.0, -2.0, 0.5, 3.0, -1.0, 2.0, 0.0, 4.0])
            .unwrap();
        let f = parse_stl("alw_[0,1] ((x > 0) until_[0.5,2] ev_[0,1] (x > 2))").unwrap();
        for sem in [Semantics::Max, Semantics::Additive] {
            let m = Monitor::new(SemanticsConfig::with_semantics(sem));
            let all = m.evaluate_range(&f, &t, 0..8).unwrap();
            for k in 0..8 {
                let single = m.evaluate_range(&f, &t, k..k + 1).unwrap()[0];
                assert_eq!(all[k], single, "{sem:?} at {k}");
            }
        }
    }
}
