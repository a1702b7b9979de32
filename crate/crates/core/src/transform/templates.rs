//! Named loop patterns with a known temporal-logic reading.
//!
//! A template both recognises a feedback loop in a graph and stands for an
//! explicit `template` block. Its formula describes the block output at the
//! final sample, evaluated at time 0.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde_json::Value;

use crate::stl::{Formula, Interval};
use crate::trace::Trace;

use super::graph::{BlockGraph, BlockKind, LogicOp};

/// Per-block execution state for a template.
#[derive(Debug, Clone, Default)]
pub struct TemplateState {
    /// Previous output, if any.
    pub prev: Option<f64>,
    /// Input values of every sample seen so far.
    pub history: Vec<Vec<f64>>,
}

/// Loop recognised by a template: `output` is the block whose signal the
/// template describes and `inputs` the outside signals entering the loop.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopMatch {
    pub output: String,
    pub inputs: Vec<String>,
}

pub trait Template: Send + Sync {
    fn name(&self) -> &str;

    fn arity(&self) -> usize;

    /// Formula equal, at time 0, to the block output at the final sample.
    fn formula(&self, inputs: Vec<Formula>, params: &Value, horizon: f64)
        -> Result<Formula, String>;

    /// Output at sample `k`; inputs are Booleans encoded as non-zero.
    fn step(
        &self,
        state: &mut TemplateState,
        inputs: &[f64],
        trace: &Trace,
        k: usize,
        params: &Value,
    ) -> Result<f64, String>;

    /// Recognises the loop `scc` (sorted block ids), returning the inputs in
    /// the order [`Template::loop_formula`] expects.
    fn match_loop(&self, _graph: &BlockGraph, _scc: &[String]) -> Option<LoopMatch> {
        None
    }

    fn loop_formula(&self, inputs: Vec<Formula>, horizon: f64) -> Result<Formula, String> {
        self.formula(inputs, &Value::Null, horizon)
    }
}

fn truth(x: f64) -> f64 {
    if x != 0.0 {
        1.0
    } else {
        0.0
    }
}

fn negation(f: Formula) -> Formula {
    match f {
        Formula::Not(g) => *g,
        Formula::True => Formula::False,
        Formula::False => Formula::True,
        g => Formula::not(g),
    }
}

/// Loop of a two-input logical block and a unit delay feeding it back.
fn match_gate_loop(
    graph: &BlockGraph,
    scc: &[String],
    op: LogicOp,
    init_ok: impl Fn(f64) -> bool,
) -> Option<LoopMatch> {
    if scc.len() != 2 {
        return None;
    }
    let (mut gate, mut delay) = (None, None);
    for id in scc {
        let b = graph.block(id).ok()?;
        match &b.kind {
            BlockKind::Logical(o) if *o == op && b.inputs.len() == 2 => gate = Some(b),
            BlockKind::UnitDelay { initial } if init_ok(*initial) => delay = Some(b),
            _ => return None,
        }
    }
    let (gate, delay) = (gate?, delay?);
    if delay.inputs[0] != gate.id {
        return None;
    }
    let external: Vec<&String> = gate.inputs.iter().filter(|i| **i != delay.id).collect();
    match external.as_slice() {
        [x] => Some(LoopMatch {
            output: gate.id.clone(),
            inputs: vec![(*x).clone()],
        }),
        _ => None,
    }
}

struct Always;

impl Template for Always {
    fn name(&self) -> &str {
        "always"
    }

    fn arity(&self) -> usize {
        1
    }

    fn formula(&self, mut inputs: Vec<Formula>, _: &Value, _: f64) -> Result<Formula, String> {
        Ok(Formula::always(Interval::UNBOUNDED, inputs.remove(0)))
    }

    fn step(
        &self,
        state: &mut TemplateState,
        inputs: &[f64],
        _: &Trace,
        _: usize,
        _: &Value,
    ) -> Result<f64, String> {
        let prev = state.prev.unwrap_or(1.0);
        Ok(truth(inputs[0]) * prev)
    }

    fn match_loop(&self, graph: &BlockGraph, scc: &[String]) -> Option<LoopMatch> {
        match_gate_loop(graph, scc, LogicOp::And, |init| init != 0.0)
    }
}

struct Eventually;

impl Template for Eventually {
    fn name(&self) -> &str {
        "eventually"
    }

    fn arity(&self) -> usize {
        1
    }

    fn formula(&self, mut inputs: Vec<Formula>, _: &Value, _: f64) -> Result<Formula, String> {
        Ok(Formula::eventually(Interval::UNBOUNDED, inputs.remove(0)))
    }

    fn step(
        &self,
        state: &mut TemplateState,
        inputs: &[f64],
        _: &Trace,
        _: usize,
        _: &Value,
    ) -> Result<f64, String> {
        let prev = state.prev.unwrap_or(0.0);
        Ok(truth(truth(inputs[0]) + prev))
    }

    fn match_loop(&self, graph: &BlockGraph, scc: &[String]) -> Option<LoopMatch> {
        match_gate_loop(graph, scc, LogicOp::Or, |init| init == 0.0)
    }
}

/// Input held over the last `window` seconds.
struct AlwaysWithin;

fn window_param(params: &Value) -> Result<f64, String> {
    let w = params
        .get("window")
        .and_then(Value::as_f64)
        .ok_or("always_within needs a numeric `window` parameter")?;
    if w < 0.0 || !w.is_finite() {
        return Err(format!("window must be non-negative, got {w}"));
    }
    Ok(w)
}

impl Template for AlwaysWithin {
    fn name(&self) -> &str {
        "always_within"
    }

    fn arity(&self) -> usize {
        1
    }

    fn formula(&self, mut inputs: Vec<Formula>, params: &Value, horizon: f64) -> Result<Formula, String> {
        let w = window_param(params)?;
        let lo = (horizon - w).max(0.0);
        Ok(Formula::always(Interval::bounded(lo, horizon), inputs.remove(0)))
    }

    fn step(
        &self,
        state: &mut TemplateState,
        _: &[f64],
        trace: &Trace,
        k: usize,
        params: &Value,
    ) -> Result<f64, String> {
        let w = window_param(params)?;
        let start = trace.window_indices(k, -w, 0.0).start;
        let held = state.history[start..=k].iter().all(|x| x[0] != 0.0);
        Ok(if held { 1.0 } else { 0.0 })
    }
}

/// Set/reset latch: `out = ¬reset ∧ (set ∨ out')`, initially false.
struct Latch;

impl Template for Latch {
    fn name(&self) -> &str {
        "latch"
    }

    fn arity(&self) -> usize {
        2
    }

    fn formula(&self, mut inputs: Vec<Formula>, _: &Value, _: f64) -> Result<Formula, String> {
        let reset = inputs.remove(1);
        let set = inputs.remove(0);
        Ok(Formula::eventually(
            Interval::UNBOUNDED,
            Formula::and(set, Formula::always(Interval::UNBOUNDED, negation(reset))),
        ))
    }

    fn step(
        &self,
        state: &mut TemplateState,
        inputs: &[f64],
        _: &Trace,
        _: usize,
        _: &Value,
    ) -> Result<f64, String> {
        let prev = state.prev.unwrap_or(0.0);
        let (set, reset) = (truth(inputs[0]), truth(inputs[1]));
        Ok((1.0 - reset) * truth(set + prev))
    }

    /// `and(hold, or(set, delay))` with the delay starting at 0; the loop's
    /// inputs are `[set, hold]`.
    fn match_loop(&self, graph: &BlockGraph, scc: &[String]) -> Option<LoopMatch> {
        if scc.len() != 3 {
            return None;
        }
        let (mut and, mut or, mut delay) = (None, None, None);
        for id in scc {
            let b = graph.block(id).ok()?;
            match &b.kind {
                BlockKind::Logical(LogicOp::And) if b.inputs.len() == 2 => and = Some(b),
                BlockKind::Logical(LogicOp::Or) if b.inputs.len() == 2 => or = Some(b),
                BlockKind::UnitDelay { initial } if *initial == 0.0 => delay = Some(b),
                _ => return None,
            }
        }
        let (and, or, delay) = (and?, or?, delay?);
        if delay.inputs[0] != and.id {
            return None;
        }
        let hold: Vec<&String> = and.inputs.iter().filter(|i| **i != or.id).collect();
        let set: Vec<&String> = or.inputs.iter().filter(|i| **i != delay.id).collect();
        match (hold.as_slice(), set.as_slice()) {
            ([hold], [set]) if and.inputs.contains(&or.id) && or.inputs.contains(&delay.id) => {
                Some(LoopMatch {
                    output: and.id.clone(),
                    inputs: vec![(*set).clone(), (*hold).clone()],
                })
            }
            _ => None,
        }
    }

    fn loop_formula(&self, mut inputs: Vec<Formula>, horizon: f64) -> Result<Formula, String> {
        let hold = inputs.remove(1);
        let set = inputs.remove(0);
        self.formula(vec![set, negation(hold)], &Value::Null, horizon)
    }
}

/// Templates by name. Iteration order is by name so loop matching is
/// deterministic.
#[derive(Clone)]
pub struct TemplateRegistry {
    templates: BTreeMap<String, Arc<dyn Template>>,
}

impl std::fmt::Debug for TemplateRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.templates.keys()).finish()
    }
}

impl Default for TemplateRegistry {
    fn default() -> Self {
        let mut r = TemplateRegistry::empty();
        r.register(Arc::new(Always));
        r.register(Arc::new(Eventually));
        r.register(Arc::new(AlwaysWithin));
        r.register(Arc::new(Latch));
        r
    }
}

impl TemplateRegistry {
    pub fn empty() -> Self {
        TemplateRegistry {
            templates: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, t: Arc<dyn Template>) {
        self.templates.insert(t.name().to_string(), t);
    }

    pub fn get(&self, name: &str) -> Option<&Arc<dyn Template>> {
        self.templates.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.templates.keys().map(String::as_str)
    }

    /// First template (by name) recognising the loop.
    pub fn match_loop(
        &self,
        graph: &BlockGraph,
        scc: &[String],
    ) -> Option<(Arc<dyn Template>, LoopMatch)> {
        self.templates
            .values()
            .find_map(|t| t.match_loop(graph, scc).map(|m| (t.clone(), m)))
    }
}
