//! Translation of causal block graphs into STL.
//!
//! Every block output is assigned a [`FormulaTable`] or [`SignalTable`] by a
//! backwards traversal from the graph output. The root table is flattened
//! into one formula whose truth at time 0 equals the graph output at the
//! final sample. Outputs that cannot be expressed become logged signals: the
//! formula refers to them by block id and the executor computes them.

mod execute;
mod graph;
mod table;
mod templates;

pub use execute::{execute_graph, opaque_function};
pub use graph::{
    Block, BlockDocument, BlockGraph, BlockKind, GraphDocument, LogicOp, SwitchCriterion,
    WireDocument,
};
pub use table::{
    combine_binary, conj, disj, flatten_table, nonzero, s2f, translate_switch, Entry,
    FormulaTable, SignalTable, SwitchEncoding, Table, TableValue,
};
pub use templates::{LoopMatch, Template, TemplateRegistry, TemplateState};

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use indexmap::IndexMap;
use serde::Serialize;
use thiserror::Error;

use crate::stl::{Expr, Formula, Interval, Relation};
use crate::trace::TraceError;

#[derive(Debug, Error)]
pub enum TransformError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid graph document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("block `{block}` has unknown kind `{kind}`")]
    UnknownKind { block: String, kind: String },
    #[error("block `{block}`: {message}")]
    BadParams { block: String, message: String },
    #[error("unknown block `{0}`")]
    UnknownBlock(String),
    #[error("duplicate block id `{0}`")]
    DuplicateBlock(String),
    #[error("block `{block}`: invalid or doubly connected port {port}")]
    BadPort { block: String, port: usize },
    #[error("block `{block}`: input port {port} is not connected")]
    MissingInput { block: String, port: usize },
    #[error("block `{block}` ({kind}) cannot take {inputs} inputs")]
    Arity {
        block: String,
        kind: &'static str,
        inputs: usize,
    },
    #[error("algebraic loop through blocks {0:?}")]
    AlgebraicLoop(Vec<String>),
    #[error("table for block `{block}` would have {entries} entries (limit {limit})")]
    EntryLimit {
        block: String,
        entries: usize,
        limit: usize,
    },
    #[error("no template matches the loop through {0:?}")]
    NoTemplate(Vec<String>),
    #[error("unrolling needs the number of samples")]
    UnknownSampleCount,
    #[error("unknown template `{0}`")]
    UnknownTemplate(String),
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error(transparent)]
    Trace(#[from] TraceError),
}

/// Treatment of feedback loops.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoopMode {
    /// Expand every sample explicitly; `samples` is the trace length.
    Unroll { samples: usize },
    /// Every loop must match a template.
    Templates,
    /// Log the delay outputs of every loop.
    Blackbox,
    /// Templates where one matches, otherwise blackbox.
    Auto,
}

impl std::str::FromStr for LoopMode {
    type Err = String;

    /// `auto`, `templates`, `blackbox` or `unroll:N`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "auto" => Ok(LoopMode::Auto),
            "templates" => Ok(LoopMode::Templates),
            "blackbox" => Ok(LoopMode::Blackbox),
            _ => match s.strip_prefix("unroll:") {
                Some(n) => n
                    .parse()
                    .map(|samples| LoopMode::Unroll { samples })
                    .map_err(|_| format!("bad sample count in `{s}`")),
                None => Err(format!(
                    "unknown loop mode `{s}` (expected auto, templates, blackbox or unroll:N)"
                )),
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct TranslateOptions {
    /// Final simulation time; the formula is anchored at time 0.
    pub horizon: f64,
    pub loop_mode: LoopMode,
    pub encoding: SwitchEncoding,
    pub entry_limit: usize,
    pub templates: TemplateRegistry,
}

impl TranslateOptions {
    pub fn new(horizon: f64) -> Self {
        TranslateOptions {
            horizon,
            loop_mode: LoopMode::Auto,
            encoding: SwitchEncoding::default(),
            entry_limit: 4096,
            templates: TemplateRegistry::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LogReason {
    RecursiveLoop,
    InexpressibleBlock,
    FormulaAsSignal,
    /// Listed in the graph's `log`.
    Requested,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoggedSignal {
    pub signal: String,
    pub block: String,
    pub reason: LogReason,
}

#[derive(Debug, Clone)]
pub struct Translation {
    /// Formula to evaluate at time 0.
    pub formula: Formula,
    /// The root formula read at a single instant, when the graph has no
    /// translated loop; `formula` is then this formula at the final sample.
    pub instant: Option<Formula>,
    pub root: TableValue,
    /// Table of every visited block (not kept when unrolling).
    pub tables: IndexMap<String, TableValue>,
    pub manifest: Vec<LoggedSignal>,
}

/// Formula size above which unrolled output is reported as unwieldy.
const LARGE_FORMULA: usize = 1000;

pub fn translate(graph: &BlockGraph, opts: &TranslateOptions) -> Result<Translation, TransformError> {
    match opts.loop_mode {
        LoopMode::Unroll { samples } => unroll(graph, opts, samples),
        _ => Translator::new(graph, opts)?.run(),
    }
}

/// Table together with whether its formulas are already anchored at time 0
/// (as opposed to describing a single instant).
#[derive(Debug, Clone)]
struct Node {
    table: TableValue,
    anchored: bool,
}

enum Outcome {
    Table(TableValue, bool),
    Log(LogReason),
}

fn lift(f: Formula, horizon: f64) -> Formula {
    match f {
        Formula::True | Formula::False => f,
        f => Formula::eventually(Interval::bounded(horizon, horizon), f),
    }
}

fn lift_table(t: FormulaTable, horizon: f64) -> FormulaTable {
    t.map_formulas(|f| lift(f, horizon), |f| lift(f, horizon))
}

fn switch_condition(c: SwitchCriterion, cond: TableValue) -> FormulaTable {
    match cond {
        TableValue::Signal(t) => t.map(|e| match c {
            SwitchCriterion::GreaterEq(v) => Formula::atom(e, Relation::Ge, Expr::Const(v)),
            SwitchCriterion::Greater(v) => Formula::atom(e, Relation::Gt, Expr::Const(v)),
            SwitchCriterion::NonZero => nonzero(e),
        }),
        // a formula reads as 1 when true and 0 when false
        TableValue::Formula(t) => t.map(|f| {
            let (when_false, when_true) = (c.holds(0.0), c.holds(1.0));
            match (when_false, when_true) {
                (false, true) => f,
                (true, false) => Formula::not(f),
                (true, true) => Formula::True,
                (false, false) => Formula::False,
            }
        }),
    }
}

/// Combines the input tables of one block. `inputs` are in port order.
fn apply_block(
    block: &Block,
    inputs: Vec<Node>,
    opts: &TranslateOptions,
) -> Result<Outcome, TransformError> {
    let limit = opts.entry_limit;
    let h = opts.horizon;
    let id = block.id.as_str();
    let any_anchored = inputs.iter().any(|n| n.anchored);
    let all_signals = inputs.iter().all(|n| !n.table.is_formula());
    // formula views of all inputs, brought to a common anchoring
    let formulas = |inputs: Vec<Node>| -> Vec<FormulaTable> {
        inputs
            .into_iter()
            .map(|n| {
                let t = n.table.into_formula();
                if any_anchored && !n.anchored {
                    lift_table(t, h)
                } else {
                    t
                }
            })
            .collect()
    };
    let signals = |inputs: Vec<Node>| -> Vec<SignalTable> {
        inputs
            .into_iter()
            .map(|n| match n.table {
                TableValue::Signal(t) => t,
                TableValue::Formula(_) => unreachable!("checked by caller"),
            })
            .collect()
    };
    Ok(match &block.kind {
        BlockKind::Inport { signal } => {
            Outcome::Table(TableValue::Signal(Table::single(Expr::signal(signal))), false)
        }
        BlockKind::Constant { value } => {
            Outcome::Table(TableValue::Signal(Table::single(Expr::Const(*value))), false)
        }
        BlockKind::Relational(rel) => {
            if !all_signals {
                return Ok(Outcome::Log(LogReason::FormulaAsSignal));
            }
            let s = signals(inputs);
            let t = combine_binary(&s[0], &s[1], |l, r| Formula::atom(l, *rel, r), limit, id)?;
            Outcome::Table(TableValue::Formula(t), false)
        }
        BlockKind::Logical(op) => {
            let mut tables = formulas(inputs).into_iter();
            let mut acc = tables.next().expect("arity checked");
            match op {
                LogicOp::Not => acc = acc.map(Formula::not),
                LogicOp::And | LogicOp::Or => {
                    for t in tables {
                        acc = combine_binary(
                            &acc,
                            &t,
                            |a, b| if *op == LogicOp::And { conj(a, b) } else { disj(a, b) },
                            limit,
                            id,
                        )?;
                    }
                }
            }
            Outcome::Table(TableValue::Formula(acc), any_anchored)
        }
        BlockKind::Arithmetic(op) => {
            if !all_signals {
                return Ok(Outcome::Log(LogReason::FormulaAsSignal));
            }
            let mut tables = signals(inputs).into_iter();
            let mut acc = tables.next().expect("arity checked");
            for t in tables {
                acc = combine_binary(&acc, &t, |a, b| Expr::binary(*op, a, b), limit, id)?;
            }
            Outcome::Table(TableValue::Signal(acc), false)
        }
        BlockKind::Abs => {
            if !all_signals {
                return Ok(Outcome::Log(LogReason::FormulaAsSignal));
            }
            let t = signals(inputs).remove(0).map(|e| Expr::Abs(Box::new(e)));
            Outcome::Table(TableValue::Signal(t), false)
        }
        BlockKind::Switch(c) => {
            let data_signals = !inputs[0].table.is_formula() && !inputs[2].table.is_formula();
            if data_signals && any_anchored {
                return Ok(Outcome::Log(LogReason::InexpressibleBlock));
            }
            let mut inputs = inputs;
            let in3 = inputs.pop().expect("three inputs");
            let cond = inputs.pop().expect("three inputs");
            let in1 = inputs.pop().expect("three inputs");
            let mut cond_table = switch_condition(*c, cond.table);
            if any_anchored && !cond.anchored {
                cond_table = lift_table(cond_table, h);
            }
            if data_signals {
                let (TableValue::Signal(a), TableValue::Signal(b)) = (in1.table, in3.table) else {
                    unreachable!()
                };
                let t = translate_switch(&cond_table, &a, &b, limit, id)?;
                Outcome::Table(TableValue::Signal(t), false)
            } else {
                let mut data = formulas(vec![in1, in3]);
                let b = data.pop().expect("two");
                let a = data.pop().expect("two");
                let t = translate_switch(&cond_table, &a, &b, limit, id)?;
                Outcome::Table(TableValue::Formula(t), any_anchored)
            }
        }
        BlockKind::UnitDelay { .. } => Outcome::Log(LogReason::InexpressibleBlock),
        BlockKind::Opaque { function } => {
            opaque_function(function)
                .ok_or_else(|| TransformError::UnknownFunction(function.clone()))?;
            Outcome::Log(LogReason::InexpressibleBlock)
        }
        BlockKind::Template { name, params } => {
            let t = opts
                .templates
                .get(name)
                .ok_or_else(|| TransformError::UnknownTemplate(name.clone()))?;
            if t.arity() != inputs.len() {
                return Err(TransformError::Arity {
                    block: id.to_string(),
                    kind: "template",
                    inputs: inputs.len(),
                });
            }
            if any_anchored {
                return Ok(Outcome::Log(LogReason::InexpressibleBlock));
            }
            let args = formulas(inputs)
                .iter()
                .map(|t| flatten_table(t, opts.encoding))
                .collect();
            let f = t.formula(args, params, h).map_err(|message| TransformError::BadParams {
                block: id.to_string(),
                message,
            })?;
            Outcome::Table(TableValue::Formula(Table::single(f)), true)
        }
    })
}

enum LoopRole {
    Template(Arc<dyn Template>, LoopMatch),
    /// Part of a loop whose signal is not expressed; logged if used.
    Logged,
}

struct Translator<'a> {
    graph: &'a BlockGraph,
    opts: &'a TranslateOptions,
    roles: HashMap<String, LoopRole>,
    memo: IndexMap<String, Node>,
    manifest: IndexMap<String, LoggedSignal>,
    visiting: HashSet<String>,
}

impl<'a> Translator<'a> {
    fn new(graph: &'a BlockGraph, opts: &'a TranslateOptions) -> Result<Self, TransformError> {
        let mut roles = HashMap::new();
        for scc in graph.feedback_loops() {
            let matched = match opts.loop_mode {
                LoopMode::Templates | LoopMode::Auto => opts.templates.match_loop(graph, &scc),
                _ => None,
            };
            match matched {
                Some((t, m)) => {
                    for id in &scc {
                        roles.insert(id.clone(), LoopRole::Logged);
                    }
                    roles.insert(m.output.clone(), LoopRole::Template(t, m));
                }
                None if opts.loop_mode == LoopMode::Templates => {
                    return Err(TransformError::NoTemplate(scc));
                }
                None => {
                    for id in &scc {
                        if matches!(graph.block(id)?.kind, BlockKind::UnitDelay { .. }) {
                            roles.insert(id.clone(), LoopRole::Logged);
                        }
                    }
                }
            }
        }
        Ok(Translator {
            graph,
            opts,
            roles,
            memo: IndexMap::new(),
            manifest: IndexMap::new(),
            visiting: HashSet::new(),
        })
    }

    fn run(mut self) -> Result<Translation, TransformError> {
        let root = self.node(self.graph.output())?;
        let flat = flatten_table(&root.table.clone().into_formula(), self.opts.encoding);
        let (formula, instant) = if root.anchored {
            (flat, None)
        } else {
            (lift(flat.clone(), self.opts.horizon), Some(flat))
        };
        Ok(Translation {
            formula,
            instant,
            root: root.table,
            tables: self.memo.into_iter().map(|(k, n)| (k, n.table)).collect(),
            manifest: self.manifest.into_values().collect(),
        })
    }

    fn logged(&mut self, id: &str, reason: LogReason) -> Node {
        self.manifest
            .entry(id.to_string())
            .or_insert_with(|| LoggedSignal {
                signal: id.to_string(),
                block: id.to_string(),
                reason,
            });
        Node {
            table: TableValue::Signal(Table::single(Expr::signal(id))),
            anchored: false,
        }
    }

    fn node(&mut self, id: &str) -> Result<Node, TransformError> {
        if let Some(n) = self.memo.get(id) {
            return Ok(n.clone());
        }
        let node = self.compute(id)?;
        self.memo.insert(id.to_string(), node.clone());
        Ok(node)
    }

    fn compute(&mut self, id: &str) -> Result<Node, TransformError> {
        if self.graph.is_logged(id) {
            return Ok(self.logged(id, LogReason::Requested));
        }
        let block = self.graph.block(id)?;
        match self.roles.get(id) {
            Some(LoopRole::Logged) => return Ok(self.logged(id, LogReason::RecursiveLoop)),
            Some(LoopRole::Template(t, m)) => {
                let (t, m) = (t.clone(), m.clone());
                let mut args = Vec::new();
                for src in &m.inputs {
                    let n = self.node(src)?;
                    if n.anchored {
                        return Ok(self.logged(id, LogReason::RecursiveLoop));
                    }
                    args.push(flatten_table(&n.table.into_formula(), self.opts.encoding));
                }
                let f = t
                    .loop_formula(args, self.opts.horizon)
                    .map_err(|message| TransformError::BadParams {
                        block: id.to_string(),
                        message,
                    })?;
                return Ok(Node {
                    table: TableValue::Formula(Table::single(f)),
                    anchored: true,
                });
            }
            None => {}
        }
        if !self.visiting.insert(id.to_string()) {
            return Ok(self.logged(id, LogReason::RecursiveLoop));
        }
        let mut inputs = Vec::with_capacity(block.inputs.len());
        if !matches!(block.kind, BlockKind::UnitDelay { .. } | BlockKind::Opaque { .. }) {
            for src in &block.inputs {
                inputs.push(self.node(src)?);
            }
        }
        self.visiting.remove(id);
        Ok(match apply_block(block, inputs, self.opts)? {
            Outcome::Table(table, anchored) => Node { table, anchored },
            Outcome::Log(reason) => self.logged(id, reason),
        })
    }
}

/// Static Boolean-or-signal type of each block, used for delay initial values.
fn formula_valued(graph: &BlockGraph) -> HashMap<String, bool> {
    let mut kinds: HashMap<String, bool> = graph
        .blocks()
        .map(|b| {
            let f = matches!(
                b.kind,
                BlockKind::Relational(_) | BlockKind::Logical(_) | BlockKind::Template { .. }
            );
            (b.id.clone(), f)
        })
        .collect();
    loop {
        let mut changed = false;
        for b in graph.blocks() {
            let f = match b.kind {
                BlockKind::UnitDelay { .. } => kinds[&b.inputs[0]],
                BlockKind::Switch(_) => kinds[&b.inputs[0]] && kinds[&b.inputs[2]],
                _ => continue,
            };
            if kinds[&b.id] != f {
                kinds.insert(b.id.clone(), f);
                changed = true;
            }
        }
        if !changed {
            return kinds;
        }
    }
}

/// Rewrites predicates whose signals are all read at one shift `s` into
/// `ev_[s,s]` of the unshifted predicate.
fn lower_shifts(f: Formula) -> Formula {
    fn offsets(e: &Expr, out: &mut Vec<f64>) {
        match e {
            Expr::Shifted { offset, .. } => out.push(*offset),
            Expr::Signal(_) => out.push(0.0),
            Expr::Const(_) => {}
            Expr::Neg(x) | Expr::Abs(x) => offsets(x, out),
            Expr::Binary(_, l, r) => {
                offsets(l, out);
                offsets(r, out);
            }
        }
    }
    fn strip(e: Expr) -> Expr {
        match e {
            Expr::Shifted { signal, .. } => Expr::Signal(signal),
            Expr::Neg(x) => Expr::Neg(Box::new(strip(*x))),
            Expr::Abs(x) => Expr::Abs(Box::new(strip(*x))),
            Expr::Binary(op, l, r) => Expr::binary(op, strip(*l), strip(*r)),
            e => e,
        }
    }
    let rec = |g: Box<Formula>| Box::new(lower_shifts(*g));
    match f {
        Formula::Atom(p) => {
            let mut offs = Vec::new();
            offsets(&p.lhs, &mut offs);
            offsets(&p.rhs, &mut offs);
            match offs.split_first() {
                Some((&s, rest)) if rest.iter().all(|&o| o == s) => {
                    let atom = Formula::atom(strip(p.lhs), p.relation, strip(p.rhs));
                    if s == 0.0 {
                        atom
                    } else {
                        Formula::eventually(Interval::bounded(s, s), atom)
                    }
                }
                _ => Formula::Atom(p),
            }
        }
        Formula::Not(g) => Formula::Not(rec(g)),
        Formula::And { lhs, rhs, tag } => Formula::And {
            lhs: rec(lhs),
            rhs: rec(rhs),
            tag,
        },
        Formula::Or { lhs, rhs, tag } => Formula::Or {
            lhs: rec(lhs),
            rhs: rec(rhs),
            tag,
        },
        Formula::Implies {
            lhs,
            rhs,
            tag,
            scale,
        } => Formula::Implies {
            lhs: rec(lhs),
            rhs: rec(rhs),
            tag,
            scale,
        },
        other => other,
    }
}

fn unroll(
    graph: &BlockGraph,
    opts: &TranslateOptions,
    samples: usize,
) -> Result<Translation, TransformError> {
    if samples == 0 {
        return Err(TransformError::UnknownSampleCount);
    }
    let dt = if samples > 1 {
        opts.horizon / (samples - 1) as f64
    } else {
        0.0
    };
    let reachable = graph.reachable_from_output();
    let order: Vec<String> = graph
        .evaluation_order()
        .into_iter()
        .filter(|id| reachable.contains(id))
        .collect();
    let kinds = formula_valued(graph);
    let mut manifest: IndexMap<String, LoggedSignal> = IndexMap::new();
    let mut prev: HashMap<String, TableValue> = HashMap::new();
    for k in 0..samples {
        let t = k as f64 * dt;
        let shifted = |signal: &str| Expr::Shifted {
            signal: signal.to_string(),
            offset: t,
        };
        let mut cur: HashMap<String, TableValue> = HashMap::new();
        for id in &order {
            let block = graph.block(id)?;
            let mut log = |reason| {
                manifest.entry(id.clone()).or_insert_with(|| LoggedSignal {
                    signal: id.clone(),
                    block: id.clone(),
                    reason,
                });
                TableValue::Signal(Table::single(shifted(id)))
            };
            let table = if graph.is_logged(id) {
                log(LogReason::Requested)
            } else {
                match &block.kind {
                    BlockKind::Inport { signal } => {
                        TableValue::Signal(Table::single(shifted(signal)))
                    }
                    BlockKind::UnitDelay { initial } => {
                        if k == 0 {
                            if kinds[id] {
                                TableValue::Formula(Table::single(if *initial != 0.0 {
                                    Formula::True
                                } else {
                                    Formula::False
                                }))
                            } else {
                                TableValue::Signal(Table::single(Expr::Const(*initial)))
                            }
                        } else {
                            prev[&block.inputs[0]].clone()
                        }
                    }
                    BlockKind::Template { .. } => log(LogReason::InexpressibleBlock),
                    _ => {
                        let inputs = block
                            .inputs
                            .iter()
                            .map(|src| Node {
                                table: cur[src].clone(),
                                anchored: false,
                            })
                            .collect();
                        match apply_block(block, inputs, opts)? {
                            Outcome::Table(table, _) => table,
                            Outcome::Log(reason) => log(reason),
                        }
                    }
                }
            };
            cur.insert(id.clone(), table);
        }
        prev = cur;
    }
    let root = prev
        .remove(graph.output())
        .expect("output is reachable from itself");
    let formula = lower_shifts(flatten_table(&root.clone().into_formula(), opts.encoding));
    let size = formula.size();
    if size > LARGE_FORMULA {
        log::warn!("unrolled formula has {size} nodes; consider templates or blackbox mode");
    }
    Ok(Translation {
        formula,
        instant: None,
        root,
        tables: IndexMap::new(),
        manifest: manifest.into_values().collect(),
    })
}
