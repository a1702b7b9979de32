use proptest::prelude::*;

use vbstl::stl::{bool_sat, nnf, parse_stl, Formula, Interval, Relation};
use vbstl::trace::Trace;
use vbstl::vbool::{eval_robust, Semantics, SemanticsConfig, VBool};

const SIGNALS: [&str; 2] = ["x", "y"];

fn arb_interval() -> impl Strategy<Value = Interval> {
    prop_oneof![
        Just(Interval::UNBOUNDED),
        (0u8..3, 0u8..4).prop_map(|(a, w)| Interval::bounded(a as f64, (a + w) as f64)),
    ]
}

fn arb_atom() -> impl Strategy<Value = Formula> {
    (
        prop::sample::select(SIGNALS.to_vec()),
        prop::sample::select(vec![Relation::Lt, Relation::Le, Relation::Ge, Relation::Gt]),
        -4i8..4,
    )
        .prop_map(|(s, r, c)| Formula::cmp(s, r, c as f64 / 2.0))
}

fn arb_formula() -> impl Strategy<Value = Formula> {
    arb_atom().prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(Formula::not),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::and(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::or(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::implies(a, b)),
            (arb_interval(), inner.clone()).prop_map(|(i, f)| Formula::always(i, f)),
            (arb_interval(), inner.clone()).prop_map(|(i, f)| Formula::eventually(i, f)),
            (arb_interval(), inner.clone(), inner).prop_map(|(i, a, b)| Formula::until(i, a, b)),
        ]
    })
}

/// Negation-free formulas over `>=` atoms.
fn arb_positive() -> impl Strategy<Value = Formula> {
    (prop::sample::select(SIGNALS.to_vec()), -4i8..4)
        .prop_map(|(s, c)| Formula::cmp(s, Relation::Ge, c as f64 / 2.0))
        .prop_recursive(4, 24, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::and(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::or(a, b)),
                (arb_interval(), inner.clone()).prop_map(|(i, f)| Formula::always(i, f)),
                (arb_interval(), inner.clone()).prop_map(|(i, f)| Formula::eventually(i, f)),
                (arb_interval(), inner.clone(), inner).prop_map(|(i, a, b)| Formula::until(i, a, b)),
            ]
        })
}

fn arb_trace() -> impl Strategy<Value = Trace> {
    (1usize..8).prop_flat_map(|n| {
        (
            prop::collection::vec(-3.0f64..3.0, n),
            prop::collection::vec(-3.0f64..3.0, n),
        )
            .prop_map(move |(x, y)| {
                Trace::uniform(n, 1.0)
                    .and_then(|t| t.with_signal("x", x))
                    .and_then(|t| t.with_signal("y", y))
                    .expect("valid trace")
            })
    })
}

fn arb_vbool() -> impl Strategy<Value = VBool> {
    (any::<bool>(), -8.0f64..8.0).prop_map(|(t, l)| VBool::new(t, l.exp()))
}

fn robust(f: &Formula, trace: &Trace, semantics: Semantics) -> VBool {
    eval_robust(f, trace, 0, &SemanticsConfig::with_semantics(semantics)).expect("evaluates")
}

proptest! {
    #[test]
    fn printed_formulas_parse_back(f in arb_formula()) {
        let text = f.to_string();
        prop_assert_eq!(parse_stl(&text).expect("printed text parses"), f);
    }

    #[test]
    fn truth_matches_boolean_semantics(f in arb_formula(), trace in arb_trace()) {
        let expected = bool_sat(&f, &trace, 0).unwrap();
        for s in Semantics::ALL {
            prop_assert_eq!(robust(&f, &trace, s).truth(), expected, "{}", s.name());
        }
    }

    #[test]
    fn nnf_keeps_truth(f in arb_formula(), trace in arb_trace()) {
        let g = nnf(&f);
        // a negated until has no dual and stays negated
        if !format!("{f}").contains("until") {
            prop_assert!(g.is_nnf());
        }
        prop_assert_eq!(bool_sat(&g, &trace, 0).unwrap(), bool_sat(&f, &trace, 0).unwrap());
    }

    #[test]
    fn lowering_a_sample_never_helps(
        f in arb_positive(),
        trace in arb_trace(),
        pick in any::<prop::sample::Index>(),
        which in 0usize..2,
        drop in 0.01f64..2.0,
    ) {
        let name = SIGNALS[which];
        let mut values = trace.signal(name).unwrap().to_vec();
        let k = pick.index(values.len());
        values[k] -= drop;
        let mut lower = trace.clone();
        lower.replace_signal(name, values).unwrap();
        for s in [Semantics::Max, Semantics::Additive] {
            let before = robust(&f, &trace, s).signed();
            let after = robust(&f, &lower, s).signed();
            let close = (after - before).abs() <= 1e-9 * before.abs().max(1.0);
            prop_assert!(after <= before || close, "{} {before} -> {after}", s.name());
        }
    }

    #[test]
    fn additive_conjunction_is_commutative_and_below_min(a in arb_vbool(), b in arb_vbool()) {
        let ab = a.and_add(b);
        prop_assert_eq!(ab, b.and_add(a));
        if a.truth() && b.truth() {
            prop_assert!(ab.robustness() < a.robustness().min(b.robustness()));
        }
        if !a.truth() && !b.truth() {
            prop_assert!(ab.robustness() >= a.robustness().max(b.robustness()));
        }
        prop_assert_eq!(ab.truth(), a.truth() && b.truth());
    }

    #[test]
    fn max_conjunction_matches_signed_min(a in arb_vbool(), b in arb_vbool()) {
        prop_assert_eq!(a.and_max(b).signed(), a.signed().min(b.signed()));
        prop_assert_eq!(a.or_max(b).signed(), a.signed().max(b.signed()));
    }

    #[test]
    fn always_additive_is_step_invariant(
        values in prop::collection::vec(-5.0f64..-0.01, 2..10),
        dt in 0.05f64..2.0,
        factor in 2usize..8,
    ) {
        let f = Formula::always(Interval::UNBOUNDED, Formula::cmp("x", Relation::Ge, 0.0));
        let trace = Trace::uniform(values.len(), dt).unwrap().with_signal("x", values).unwrap();
        let coarse = robust(&f, &trace, Semantics::Additive).robustness();
        let fine = robust(&f, &trace.resample_piecewise_constant(factor), Semantics::Additive).robustness();
        prop_assert!((coarse - fine).abs() <= 1e-9 * coarse.max(1.0), "{coarse} vs {fine}");
    }
}
