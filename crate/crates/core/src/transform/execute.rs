use std::collections::HashMap;

use crate::stl::ArithOp;
use crate::trace::Trace;

use super::graph::{BlockGraph, BlockKind, LogicOp};
use super::templates::{TemplateRegistry, TemplateState};
use super::TransformError;

/// Functions available to `opaque` blocks.
pub fn opaque_function(name: &str) -> Option<fn(f64) -> f64> {
    Some(match name {
        "sin" => f64::sin,
        "cos" => f64::cos,
        "tan" => f64::tan,
        "exp" => f64::exp,
        "ln" | "log" => f64::ln,
        "sqrt" => f64::sqrt,
        "tanh" => f64::tanh,
        "atan" => f64::atan,
        "floor" => f64::floor,
        "ceil" => f64::ceil,
        "round" => f64::round,
        "sign" => |x: f64| {
            if x > 0.0 {
                1.0
            } else if x < 0.0 {
                -1.0
            } else {
                0.0
            }
        },
        "square" => |x: f64| x * x,
        "identity" => |x: f64| x,
        _ => return None,
    })
}

fn bool_value(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Runs the graph sample by sample over `trace`, returning `trace` extended
/// with one signal per block (named by block id). Booleans are 1/0 and any
/// non-zero input counts as true.
///
/// An inport whose id equals the signal it reads adds nothing new.
pub fn execute_graph(
    graph: &BlockGraph,
    trace: &Trace,
    templates: &TemplateRegistry,
) -> Result<Trace, TransformError> {
    let n = trace.len();
    let order = graph.evaluation_order();
    let mut outputs: HashMap<&str, Vec<f64>> = HashMap::new();
    for b in graph.blocks() {
        outputs.insert(b.id.as_str(), Vec::with_capacity(n));
    }
    let mut states: HashMap<&str, TemplateState> = HashMap::new();
    for k in 0..n {
        for id in &order {
            let b = graph.block(id)?;
            let input = |i: usize| -> f64 { outputs[b.inputs[i].as_str()][k] };
            let value = match &b.kind {
                BlockKind::Inport { signal } => trace.sample_at(signal, k)?,
                BlockKind::Constant { value } => *value,
                BlockKind::Relational(r) => bool_value(r.holds(input(0), input(1))),
                BlockKind::Logical(LogicOp::Not) => bool_value(input(0) == 0.0),
                BlockKind::Logical(LogicOp::And) => {
                    bool_value((0..b.inputs.len()).all(|i| input(i) != 0.0))
                }
                BlockKind::Logical(LogicOp::Or) => {
                    bool_value((0..b.inputs.len()).any(|i| input(i) != 0.0))
                }
                BlockKind::Arithmetic(op) => {
                    let mut acc = input(0);
                    for i in 1..b.inputs.len() {
                        let x = input(i);
                        acc = match op {
                            ArithOp::Add => acc + x,
                            ArithOp::Sub => acc - x,
                            ArithOp::Mul => acc * x,
                            ArithOp::Div => {
                                if x == 0.0 {
                                    log::warn!("block `{}`: division by zero at sample {k}", b.id);
                                }
                                acc / x
                            }
                        };
                    }
                    acc
                }
                BlockKind::Switch(c) => {
                    if c.holds(input(1)) {
                        input(0)
                    } else {
                        input(2)
                    }
                }
                BlockKind::UnitDelay { initial } => {
                    if k == 0 {
                        *initial
                    } else {
                        outputs[b.inputs[0].as_str()][k - 1]
                    }
                }
                BlockKind::Abs => input(0).abs(),
                BlockKind::Opaque { function } => {
                    let f = opaque_function(function)
                        .ok_or_else(|| TransformError::UnknownFunction(function.clone()))?;
                    f(input(0))
                }
                BlockKind::Template { name, params } => {
                    let t = templates
                        .get(name)
                        .ok_or_else(|| TransformError::UnknownTemplate(name.clone()))?;
                    let values: Vec<f64> = (0..b.inputs.len()).map(input).collect();
                    let state = states.entry(b.id.as_str()).or_default();
                    state.history.push(values.clone());
                    let out = t
                        .step(state, &values, trace, k, params)
                        .map_err(|message| TransformError::BadParams {
                            block: b.id.clone(),
                            message,
                        })?;
                    state.prev = Some(out);
                    out
                }
            };
            outputs.get_mut(id.as_str()).expect("all blocks present").push(value);
        }
    }
    let mut out = trace.clone();
    for b in graph.blocks() {
        if let BlockKind::Inport { signal } = &b.kind {
            if *signal == b.id {
                continue;
            }
        }
        let values = outputs.remove(b.id.as_str()).expect("all blocks present");
        out.insert_signal(&b.id, values)?;
    }
    Ok(out)
}
