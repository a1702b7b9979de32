//! Randomised checks of the algebraic and semantic properties of the robust
//! connectives, plus the generators they use.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::demo::{demo_rows, from_signed, isobar_grid};
use crate::stl::{bool_sat, Formula, Interval, Relation};
use crate::trace::Trace;
use crate::vbool::{eval_robust, Semantics, SemanticsConfig, VBool};

#[derive(Debug, Clone, PartialEq)]
pub struct LawReport {
    pub name: &'static str,
    pub cases: usize,
    pub failures: usize,
    /// First failing case.
    pub example: Option<String>,
}

impl LawReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

struct Check {
    name: &'static str,
    cases: usize,
    failures: usize,
    example: Option<String>,
}

impl Check {
    fn new(name: &'static str) -> Self {
        Check {
            name,
            cases: 0,
            failures: 0,
            example: None,
        }
    }

    fn record(&mut self, ok: bool, describe: impl FnOnce() -> String) {
        self.cases += 1;
        if !ok {
            self.failures += 1;
            if self.example.is_none() {
                self.example = Some(describe());
            }
        }
    }

    fn finish(self) -> LawReport {
        LawReport {
            name: self.name,
            cases: self.cases,
            failures: self.failures,
            example: self.example,
        }
    }
}

/// Relative closeness with tolerance `tol`; infinities must match exactly.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    if a.is_infinite() || b.is_infinite() {
        return a == b;
    }
    (a - b).abs() <= tol * 1f64.max(a.abs()).max(b.abs())
}

pub fn vbool_close(a: VBool, b: VBool, tol: f64) -> bool {
    a.truth() == b.truth() && close(a.robustness(), b.robustness(), tol)
}

/// Random VBool whose robustness is occasionally 0 or infinite and otherwise
/// log-uniform over `[e^-5, e^5]`.
pub fn random_vbool(rng: &mut impl Rng) -> VBool {
    let truth = rng.random::<bool>();
    let r = match rng.random_range(0..20) {
        0 => 0.0,
        1 => f64::INFINITY,
        _ => rng.random_range(-5.0f64..5.0).exp(),
    };
    VBool::new(truth, r)
}

/// Random trace with unit steps and values uniform in `[-2, 2]`.
pub fn random_trace(rng: &mut impl Rng, len: usize, signals: &[&str]) -> Trace {
    let mut t = Trace::uniform(len, 1.0).expect("non-empty trace");
    for s in signals {
        let values = (0..len).map(|_| rng.random_range(-2.0..2.0)).collect();
        t.insert_signal(*s, values).expect("matching length");
    }
    t
}

fn random_interval(rng: &mut impl Rng) -> Interval {
    match rng.random_range(0..3) {
        0 => Interval::UNBOUNDED,
        _ => {
            let lo = rng.random_range(0..3) as f64;
            Interval::bounded(lo, lo + rng.random_range(0..3) as f64)
        }
    }
}

fn random_atom(rng: &mut impl Rng, signals: &[&str], positive: bool) -> Formula {
    let s = signals[rng.random_range(0..signals.len())];
    let c = rng.random_range(-1.0f64..1.0);
    let relation = if positive {
        [Relation::Ge, Relation::Gt][rng.random_range(0..2)]
    } else {
        [Relation::Lt, Relation::Le, Relation::Ge, Relation::Gt][rng.random_range(0..4)]
    };
    Formula::cmp(s, relation, c)
}

/// Random formula of at most `depth` nested operators. With `positive`, the
/// formula is negation-free and every atom is `x >= c` or `x > c`, so lowering
/// any signal sample moves every atom toward violation.
pub fn random_formula(
    rng: &mut impl Rng,
    depth: usize,
    signals: &[&str],
    positive: bool,
) -> Formula {
    if depth == 0 || rng.random_range(0..4) == 0 {
        return random_atom(rng, signals, positive);
    }
    let sub = |rng: &mut _| random_formula(rng, depth - 1, signals, positive);
    let choices = if positive { 5 } else { 6 };
    match rng.random_range(0..choices) {
        0 => Formula::and(sub(rng), sub(rng)),
        1 => Formula::or(sub(rng), sub(rng)),
        2 => Formula::always(random_interval(rng), sub(rng)),
        3 => Formula::eventually(random_interval(rng), sub(rng)),
        4 => Formula::until(random_interval(rng), sub(rng), sub(rng)),
        _ => Formula::not(sub(rng)),
    }
}

type Binary = fn(VBool, VBool) -> VBool;

fn and_laws(
    rng: &mut impl Rng,
    cases: usize,
    and: Binary,
    or: Binary,
    tol: f64,
) -> Vec<Check> {
    let mut assoc = Check::new("associativity");
    let mut comm = Check::new("commutativity");
    let mut ident = Check::new("identity");
    let mut zero = Check::new("zero");
    let mut morgan = Check::new("de Morgan");
    for _ in 0..cases {
        let (a, b, c) = (random_vbool(rng), random_vbool(rng), random_vbool(rng));
        let show = || format!("a={a} b={b} c={c}");
        assoc.record(vbool_close(and(and(a, b), c), and(a, and(b, c)), tol), show);
        comm.record(vbool_close(and(a, b), and(b, a), tol), show);
        ident.record(vbool_close(and(a, VBool::TOP), a, tol), show);
        zero.record(vbool_close(and(a, VBool::BOTTOM), VBool::BOTTOM, tol), show);
        morgan.record(vbool_close(!and(a, b), or(!a, !b), tol), show);
    }
    vec![assoc, comm, ident, zero, morgan]
}

fn prefix(mut checks: Vec<Check>, names: &[&'static str]) -> Vec<LawReport> {
    checks
        .drain(..)
        .zip(names)
        .map(|(mut c, n)| {
            c.name = n;
            c.finish()
        })
        .collect()
}

/// Algebraic laws of both conjunctions over `cases` random triples.
pub fn algebraic_laws(seed: u64, cases: usize) -> Vec<LawReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tol = 1e-9;
    let mut out = prefix(
        and_laws(&mut rng, cases, VBool::and_max, VBool::or_max, tol),
        &[
            "and_max associativity",
            "and_max commutativity",
            "and_max identity",
            "and_max zero",
            "and_max de Morgan",
        ],
    );
    let mut idem = Check::new("and_max idempotence");
    let mut dist = Check::new("and_max distributes over or_max");
    for _ in 0..cases {
        let (a, b, c) = (random_vbool(&mut rng), random_vbool(&mut rng), random_vbool(&mut rng));
        idem.record(a.and_max(a) == a, || format!("a={a}"));
        dist.record(
            a.and_max(b.or_max(c)) == a.and_max(b).or_max(a.and_max(c)),
            || format!("a={a} b={b} c={c}"),
        );
    }
    out.push(idem.finish());
    out.push(dist.finish());
    out.extend(prefix(
        and_laws(&mut rng, cases, VBool::and_add, VBool::or_add, tol),
        &[
            "and_add associativity",
            "and_add commutativity",
            "and_add identity",
            "and_add zero",
            "and_add de Morgan",
        ],
    ));
    // idempotence fails in a fixed way: true halves, false doubles
    let mut halves = Check::new("and_add self-conjunction halves or doubles");
    for _ in 0..cases {
        let a = random_vbool(&mut rng);
        let expected = if a.truth() {
            a.robustness() / 2.0
        } else {
            a.robustness() * 2.0
        };
        let got = a.and_add(a);
        halves.record(
            got.truth() == a.truth() && close(got.robustness(), expected, tol),
            || format!("a={a} got={got}"),
        );
    }
    out.push(halves.finish());
    out
}

/// `1/(1/x + 1/y) < min(x, y)` for positive finite `x`, `y`.
pub fn parallel_below_min(seed: u64, cases: usize) -> LawReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut check = Check::new("parallel combination below minimum");
    for _ in 0..cases {
        let x = rng.random_range(-10.0f64..10.0).exp();
        let y = rng.random_range(-10.0f64..10.0).exp();
        let z = VBool::new(true, x).and_add(VBool::new(true, y)).robustness();
        check.record(z < x.min(y), || format!("x={x} y={y} z={z}"));
    }
    check.finish()
}

/// Lowering one sample of one signal never raises the signed robustness of a
/// negation-free formula over `>=`/`>` atoms.
pub fn monotonicity(seed: u64, cases: usize) -> Vec<LawReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let signals = ["x", "y"];
    let mut out = Vec::new();
    for semantics in [Semantics::Max, Semantics::Additive] {
        let cfg = SemanticsConfig::with_semantics(semantics);
        let mut check = Check::new(match semantics {
            Semantics::Max => "monotonicity (max)",
            _ => "monotonicity (additive)",
        });
        for _ in 0..cases {
            let f = random_formula(&mut rng, 3, &signals, true);
            let len = rng.random_range(1..7);
            let trace = random_trace(&mut rng, len, &signals);
            let s = signals[rng.random_range(0..2)];
            let k = rng.random_range(0..len);
            let mut values = trace.signal(s).expect("generated").to_vec();
            values[k] -= rng.random_range(0.0..2.0);
            let mut lowered = trace.clone();
            lowered.replace_signal(s, values).expect("same length");
            let before = eval_robust(&f, &trace, 0, &cfg).expect("signals present").signed();
            let after = eval_robust(&f, &lowered, 0, &cfg).expect("signals present").signed();
            check.record(after <= before || close(after, before, 1e-9), || {
                format!("{f}: {before} -> {after} after lowering {s}[{k}]")
            });
        }
        out.push(check.finish());
    }
    out
}

/// Truth of the robust value equals Boolean satisfaction.
pub fn soundness(seed: u64, cases: usize) -> Vec<LawReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let signals = ["x", "y"];
    let mut out = Vec::new();
    for semantics in Semantics::ALL {
        let cfg = SemanticsConfig::with_semantics(semantics);
        let mut check = Check::new(match semantics {
            Semantics::Max => "soundness (max)",
            Semantics::Additive => "soundness (additive)",
            Semantics::Constant => "soundness (constant)",
            Semantics::Random => "soundness (random)",
        });
        for _ in 0..cases {
            let f = random_formula(&mut rng, 3, &signals, false);
            let len = rng.random_range(1..6);
            let mut trace = random_trace(&mut rng, len, &signals);
            // hit equality cases too
            for s in signals {
                let v: Vec<f64> = trace
                    .signal(s)
                    .expect("generated")
                    .iter()
                    .map(|v| v.round())
                    .collect();
                trace.replace_signal(s, v).expect("same length");
            }
            let k = rng.random_range(0..len);
            let robust = eval_robust(&f, &trace, k, &cfg).expect("signals present");
            let truth = bool_sat(&f, &trace, k).expect("signals present");
            check.record(robust.truth() == truth, || format!("{f} at {k}"));
        }
        out.push(check.finish());
    }
    out
}

/// Additive always over an all-false piecewise-constant trace is unchanged
/// by subdividing its steps.
pub fn step_invariance(seed: u64, cases: usize) -> LawReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = Formula::always(Interval::UNBOUNDED, Formula::cmp("x", Relation::Ge, 0.0));
    let cfg = SemanticsConfig::with_semantics(Semantics::Additive);
    let mut check = Check::new("additive always invariant under resampling");
    for _ in 0..cases {
        let len = rng.random_range(1..10);
        let dt = rng.random_range(0.05..2.0);
        let values = (0..len).map(|_| rng.random_range(-5.0..-0.1)).collect();
        let trace = Trace::uniform(len, dt)
            .and_then(|t| t.with_signal("x", values))
            .expect("valid trace");
        let base = eval_robust(&f, &trace, 0, &cfg).expect("signal present");
        for factor in [2, 3, 4, 7] {
            let fine = trace.resample_piecewise_constant(factor);
            let v = eval_robust(&f, &fine, 0, &cfg).expect("signal present");
            check.record(vbool_close(base, v, 1e-9), || {
                format!("len {len} dt {dt} factor {factor}: {base} vs {v}")
            });
        }
    }
    check.finish()
}

/// Orderings of the demo traces a–d under max and additive semantics.
pub fn demo_orderings() -> LawReport {
    let rows = demo_rows();
    let (a, b, c, d) = (rows[0], rows[1], rows[2], rows[3]);
    let margin = 1e-6;
    let mut check = Check::new("demo trace orderings");
    let mut rec = |ok: bool, what: &str| check.record(ok, || format!("{what}: {rows:?}"));
    rec(a.max == b.max, "max(a) == max(b)");
    rec(b.additive < a.additive - margin, "add(b) < add(a)");
    rec(c.additive > a.additive + margin, "add(c) > add(a)");
    rec(c.max < a.max - margin, "max(c) < max(a)");
    rec(d.max < a.max - margin, "max(d) < max(a)");
    rec(d.additive < a.additive - margin, "add(d) < add(a)");
    check.finish()
}

/// Both conjunctions are non-decreasing in each argument over the isobar grid.
pub fn isobar_monotonicity() -> LawReport {
    let step = 0.25;
    let grid = isobar_grid(-5.0, 5.0, step);
    let n = (10.0 / step) as usize + 1;
    let mut check = Check::new("conjunctions non-decreasing on the isobar grid");
    for i in 0..n {
        for j in 0..n {
            let here = grid[i * n + j];
            for next in [(i + 1, j), (i, j + 1)] {
                if next.0 >= n || next.1 >= n {
                    continue;
                }
                let there = grid[next.0 * n + next.1];
                check.record(there[2] >= here[2] && there[3] >= here[3], || {
                    format!("{here:?} -> {there:?}")
                });
            }
        }
    }
    // and the grid agrees with direct evaluation at a spot
    let (p, q) = (from_signed(1.0), from_signed(3.0));
    let ok = (p.and_add(q).robustness() - 0.75).abs() < 1e-12;
    check.record(ok, || "1 ∧+ 3 should be 0.75".into());
    check.finish()
}

/// Every law with `cases` random instances each.
pub fn run_all(seed: u64, cases: usize) -> Vec<LawReport> {
    let mut out = algebraic_laws(seed, cases);
    out.push(parallel_below_min(seed.wrapping_add(1), cases));
    out.extend(monotonicity(seed.wrapping_add(2), cases.min(1000)));
    out.extend(soundness(seed.wrapping_add(3), cases.min(1000)));
    out.push(step_invariance(seed.wrapping_add(4), cases.min(1000)));
    out.push(demo_orderings());
    out.push(isobar_monotonicity());
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_laws_hold() {
        for r in run_all(5, 2000) {
            assert!(r.passed(), "{}: {:?}", r.name, r.example);
            assert!(r.cases > 0, "{}", r.name);
        }
    }

    #[test]
    fn closeness() {
        assert!(close(f64::INFINITY, f64::INFINITY, 1e-9));
        assert!(!close(f64::INFINITY, 1e300, 1e-9));
        assert!(close(1.0, 1.0 + 1e-12, 1e-9));
    }
}
