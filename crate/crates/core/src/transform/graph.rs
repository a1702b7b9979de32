use std::collections::{HashMap, HashSet};
use std::path::Path;

use indexmap::IndexMap;
use petgraph::algo::{tarjan_scc, toposort};
use petgraph::graph::{DiGraph, NodeIndex};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::stl::Relation;

use super::TransformError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogicOp {
    And,
    Or,
    Not,
}

/// Switch criterion on the control input `u2`; the first input passes when
/// the criterion holds, the third otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SwitchCriterion {
    GreaterEq(f64),
    Greater(f64),
    NonZero,
}

impl SwitchCriterion {
    pub fn holds(self, u2: f64) -> bool {
        match self {
            SwitchCriterion::GreaterEq(c) => u2 >= c,
            SwitchCriterion::Greater(c) => u2 > c,
            SwitchCriterion::NonZero => u2 != 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BlockKind {
    Inport { signal: String },
    Constant { value: f64 },
    Relational(Relation),
    Logical(LogicOp),
    Arithmetic(crate::stl::ArithOp),
    Switch(SwitchCriterion),
    UnitDelay { initial: f64 },
    Abs,
    Template { name: String, params: Value },
    Opaque { function: String },
}

impl BlockKind {
    pub fn name(&self) -> &'static str {
        match self {
            BlockKind::Inport { .. } => "inport",
            BlockKind::Constant { .. } => "constant",
            BlockKind::Relational(_) => "relational",
            BlockKind::Logical(_) => "logical",
            BlockKind::Arithmetic(_) => "arithmetic",
            BlockKind::Switch(_) => "switch",
            BlockKind::UnitDelay { .. } => "unit_delay",
            BlockKind::Abs => "abs",
            BlockKind::Template { .. } => "template",
            BlockKind::Opaque { .. } => "opaque",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub id: String,
    pub kind: BlockKind,
    /// Source block of each input port, in port order.
    pub inputs: Vec<String>,
}

/// Interchange form of a block graph.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphDocument {
    pub blocks: Vec<BlockDocument>,
    #[serde(default)]
    pub wires: Vec<WireDocument>,
    pub output: String,
    #[serde(default)]
    pub log: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockDocument {
    pub id: String,
    pub kind: String,
    #[serde(default)]
    pub params: Value,
}

/// `[block id, port]`; ports count from 1.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireDocument {
    pub from: (String, usize),
    pub to: (String, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockGraph {
    blocks: IndexMap<String, Block>,
    output: String,
    log: Vec<String>,
}

fn param<'a>(doc: &'a BlockDocument, key: &str) -> Result<&'a Value, TransformError> {
    doc.params.get(key).ok_or_else(|| TransformError::BadParams {
        block: doc.id.clone(),
        message: format!("missing parameter `{key}`"),
    })
}

fn number(doc: &BlockDocument, key: &str) -> Result<f64, TransformError> {
    param(doc, key)?
        .as_f64()
        .ok_or_else(|| TransformError::BadParams {
            block: doc.id.clone(),
            message: format!("parameter `{key}` must be a number"),
        })
}

fn string<'a>(doc: &'a BlockDocument, key: &str) -> Result<&'a str, TransformError> {
    param(doc, key)?
        .as_str()
        .ok_or_else(|| TransformError::BadParams {
            block: doc.id.clone(),
            message: format!("parameter `{key}` must be a string"),
        })
}

fn parse_kind(doc: &BlockDocument) -> Result<BlockKind, TransformError> {
    let bad = |message: String| TransformError::BadParams {
        block: doc.id.clone(),
        message,
    };
    Ok(match doc.kind.as_str() {
        "inport" => BlockKind::Inport {
            signal: match doc.params.get("signal") {
                Some(_) => string(doc, "signal")?.to_string(),
                None => doc.id.clone(),
            },
        },
        "constant" => BlockKind::Constant {
            value: number(doc, "value")?,
        },
        "relational" => BlockKind::Relational(match string(doc, "op")? {
            "<" => Relation::Lt,
            "<=" => Relation::Le,
            ">=" => Relation::Ge,
            ">" => Relation::Gt,
            "==" | "=" => Relation::Eq,
            other => return Err(bad(format!("unknown relational operator `{other}`"))),
        }),
        "logical" => BlockKind::Logical(match string(doc, "op")? {
            "and" => LogicOp::And,
            "or" => LogicOp::Or,
            "not" => LogicOp::Not,
            other => return Err(bad(format!("unknown logical operator `{other}`"))),
        }),
        "arithmetic" => {
            use crate::stl::ArithOp;
            BlockKind::Arithmetic(match string(doc, "op")? {
                "+" => ArithOp::Add,
                "-" => ArithOp::Sub,
                "*" => ArithOp::Mul,
                "/" => ArithOp::Div,
                other => return Err(bad(format!("unknown arithmetic operator `{other}`"))),
            })
        }
        "switch" => BlockKind::Switch(match string(doc, "criterion")? {
            "u2>=c" => SwitchCriterion::GreaterEq(number(doc, "threshold")?),
            "u2>c" => SwitchCriterion::Greater(number(doc, "threshold")?),
            "u2~=0" => SwitchCriterion::NonZero,
            other => return Err(bad(format!("unknown switch criterion `{other}`"))),
        }),
        "unit_delay" => BlockKind::UnitDelay {
            initial: match doc.params.get("initial") {
                Some(_) => number(doc, "initial")?,
                None => 0.0,
            },
        },
        "abs" => BlockKind::Abs,
        "template" => BlockKind::Template {
            name: string(doc, "name")?.to_string(),
            params: doc.params.clone(),
        },
        "opaque" => BlockKind::Opaque {
            function: string(doc, "function")?.to_string(),
        },
        other => {
            return Err(TransformError::UnknownKind {
                block: doc.id.clone(),
                kind: other.to_string(),
            })
        }
    })
}

impl BlockGraph {
    pub fn from_document(doc: GraphDocument) -> Result<Self, TransformError> {
        let mut blocks: IndexMap<String, Block> = IndexMap::new();
        for b in &doc.blocks {
            let kind = parse_kind(b)?;
            if blocks.contains_key(&b.id) {
                return Err(TransformError::DuplicateBlock(b.id.clone()));
            }
            blocks.insert(
                b.id.clone(),
                Block {
                    id: b.id.clone(),
                    kind,
                    inputs: Vec::new(),
                },
            );
        }
        let mut ports: HashMap<String, Vec<Option<String>>> = HashMap::new();
        for w in &doc.wires {
            let (src, src_port) = &w.from;
            let (dst, dst_port) = &w.to;
            for id in [src, dst] {
                if !blocks.contains_key(id) {
                    return Err(TransformError::UnknownBlock(id.clone()));
                }
            }
            if *src_port != 1 {
                return Err(TransformError::BadPort {
                    block: src.clone(),
                    port: *src_port,
                });
            }
            if *dst_port == 0 {
                return Err(TransformError::BadPort {
                    block: dst.clone(),
                    port: 0,
                });
            }
            let slots = ports.entry(dst.clone()).or_default();
            if slots.len() < *dst_port {
                slots.resize(*dst_port, None);
            }
            if slots[dst_port - 1].is_some() {
                return Err(TransformError::BadPort {
                    block: dst.clone(),
                    port: *dst_port,
                });
            }
            slots[dst_port - 1] = Some(src.clone());
        }
        for (id, slots) in ports {
            let mut inputs = Vec::with_capacity(slots.len());
            for (i, s) in slots.into_iter().enumerate() {
                inputs.push(s.ok_or_else(|| TransformError::MissingInput {
                    block: id.clone(),
                    port: i + 1,
                })?);
            }
            blocks.get_mut(&id).expect("checked above").inputs = inputs;
        }
        for b in blocks.values() {
            check_arity(b)?;
        }
        if !blocks.contains_key(&doc.output) {
            return Err(TransformError::UnknownBlock(doc.output.clone()));
        }
        for id in &doc.log {
            if !blocks.contains_key(id) {
                return Err(TransformError::UnknownBlock(id.clone()));
            }
        }
        let graph = BlockGraph {
            blocks,
            output: doc.output,
            log: doc.log,
        };
        graph.check_algebraic_loops()?;
        Ok(graph)
    }

    pub fn from_json(text: &str) -> Result<Self, TransformError> {
        let doc: GraphDocument = serde_json::from_str(text)?;
        Self::from_document(doc)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TransformError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| TransformError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_document(&self) -> GraphDocument {
        use crate::stl::ArithOp;
        let blocks = self
            .blocks
            .values()
            .map(|b| {
                let params = match &b.kind {
                    BlockKind::Inport { signal } => serde_json::json!({ "signal": signal }),
                    BlockKind::Constant { value } => serde_json::json!({ "value": value }),
                    BlockKind::Relational(r) => serde_json::json!({ "op": r.symbol() }),
                    BlockKind::Logical(op) => serde_json::json!({ "op": match op {
                        LogicOp::And => "and",
                        LogicOp::Or => "or",
                        LogicOp::Not => "not",
                    }}),
                    BlockKind::Arithmetic(op) => serde_json::json!({ "op": match op {
                        ArithOp::Add => "+",
                        ArithOp::Sub => "-",
                        ArithOp::Mul => "*",
                        ArithOp::Div => "/",
                    }}),
                    BlockKind::Switch(SwitchCriterion::GreaterEq(c)) => {
                        serde_json::json!({ "criterion": "u2>=c", "threshold": c })
                    }
                    BlockKind::Switch(SwitchCriterion::Greater(c)) => {
                        serde_json::json!({ "criterion": "u2>c", "threshold": c })
                    }
                    BlockKind::Switch(SwitchCriterion::NonZero) => {
                        serde_json::json!({ "criterion": "u2~=0" })
                    }
                    BlockKind::UnitDelay { initial } => serde_json::json!({ "initial": initial }),
                    BlockKind::Abs => Value::Null,
                    BlockKind::Template { params, .. } => params.clone(),
                    BlockKind::Opaque { function } => serde_json::json!({ "function": function }),
                };
                BlockDocument {
                    id: b.id.clone(),
                    kind: b.kind.name().to_string(),
                    params,
                }
            })
            .collect();
        let wires = self
            .blocks
            .values()
            .flat_map(|b| {
                b.inputs.iter().enumerate().map(|(i, src)| WireDocument {
                    from: (src.clone(), 1),
                    to: (b.id.clone(), i + 1),
                })
            })
            .collect();
        GraphDocument {
            blocks,
            wires,
            output: self.output.clone(),
            log: self.log.clone(),
        }
    }

    pub fn block(&self, id: &str) -> Result<&Block, TransformError> {
        self.blocks
            .get(id)
            .ok_or_else(|| TransformError::UnknownBlock(id.to_string()))
    }

    pub fn blocks(&self) -> impl Iterator<Item = &Block> {
        self.blocks.values()
    }

    pub fn output(&self) -> &str {
        &self.output
    }

    pub fn logged(&self) -> &[String] {
        &self.log
    }

    /// Replaces the set of user-logged signals.
    pub fn set_log(&mut self, log: Vec<String>) -> Result<(), TransformError> {
        for id in &log {
            self.block(id)?;
        }
        self.log = log;
        Ok(())
    }

    pub fn is_logged(&self, id: &str) -> bool {
        self.log.iter().any(|l| l == id)
    }

    fn digraph(&self, cut_delays: bool) -> (DiGraph<String, ()>, HashMap<String, NodeIndex>) {
        let mut g = DiGraph::new();
        let mut index = HashMap::new();
        for id in self.blocks.keys() {
            index.insert(id.clone(), g.add_node(id.clone()));
        }
        for b in self.blocks.values() {
            if cut_delays && matches!(b.kind, BlockKind::UnitDelay { .. }) {
                continue;
            }
            for src in &b.inputs {
                g.add_edge(index[src], index[&b.id], ());
            }
        }
        (g, index)
    }

    fn check_algebraic_loops(&self) -> Result<(), TransformError> {
        let (g, _) = self.digraph(true);
        for scc in tarjan_scc(&g) {
            let cyclic = scc.len() > 1 || g.contains_edge(scc[0], scc[0]);
            if cyclic {
                let mut ids: Vec<String> = scc.iter().map(|&n| g[n].clone()).collect();
                ids.sort();
                return Err(TransformError::AlgebraicLoop(ids));
            }
        }
        Ok(())
    }

    /// Strongly connected components that contain a cycle (always through a
    /// delay), each sorted by block id.
    pub fn feedback_loops(&self) -> Vec<Vec<String>> {
        let (g, _) = self.digraph(false);
        let mut out: Vec<Vec<String>> = tarjan_scc(&g)
            .into_iter()
            .filter(|scc| scc.len() > 1 || g.contains_edge(scc[0], scc[0]))
            .map(|scc| {
                let mut ids: Vec<String> = scc.iter().map(|&n| g[n].clone()).collect();
                ids.sort();
                ids
            })
            .collect();
        out.sort();
        out
    }

    /// Blocks in an order where every block follows its inputs, except that
    /// delay inputs may come later.
    pub fn evaluation_order(&self) -> Vec<String> {
        let (g, _) = self.digraph(true);
        toposort(&g, None)
            .expect("algebraic loops are rejected at construction")
            .into_iter()
            .map(|n| g[n].clone())
            .collect()
    }

    /// Blocks that the output depends on, including through delays.
    pub fn reachable_from_output(&self) -> HashSet<String> {
        let mut seen = HashSet::new();
        let mut stack = vec![self.output.clone()];
        while let Some(id) = stack.pop() {
            if seen.insert(id.clone()) {
                stack.extend(self.blocks[&id].inputs.iter().cloned());
            }
        }
        seen
    }
}

fn check_arity(b: &Block) -> Result<(), TransformError> {
    use crate::stl::ArithOp;
    let n = b.inputs.len();
    let ok = match &b.kind {
        BlockKind::Inport { .. } | BlockKind::Constant { .. } => n == 0,
        BlockKind::Relational(_) => n == 2,
        BlockKind::Logical(LogicOp::Not) => n == 1,
        BlockKind::Logical(_) => n >= 1,
        BlockKind::Arithmetic(ArithOp::Add | ArithOp::Mul) => n >= 1,
        BlockKind::Arithmetic(_) => n == 2,
        BlockKind::Switch(_) => n == 3,
        BlockKind::UnitDelay { .. } | BlockKind::Abs | BlockKind::Opaque { .. } => n == 1,
        BlockKind::Template { .. } => n >= 1,
    };
    if ok {
        Ok(())
    } else {
        Err(TransformError::Arity {
            block: b.id.clone(),
            kind: b.kind.name(),
            inputs: n,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(text: &str) -> Result<BlockGraph, TransformError> {
        BlockGraph::from_json(text)
    }

    #[test]
    fn rejects_algebraic_loop() {
        let err = doc(r#"{
            "blocks": [
                {"id": "a", "kind": "logical", "params": {"op": "and"}},
                {"id": "b", "kind": "logical", "params": {"op": "not"}},
                {"id": "x", "kind": "inport"}
            ],
            "wires": [
                {"from": ["x", 1], "to": ["a", 1]},
                {"from": ["b", 1], "to": ["a", 2]},
                {"from": ["a", 1], "to": ["b", 1]}
            ],
            "output": "a"
        }"#)
        .unwrap_err();
        assert!(matches!(err, TransformError::AlgebraicLoop(ids) if ids == ["a", "b"]));
    }

    #[test]
    fn rejects_unknown_kind_and_missing_port() {
        let err = doc(r#"{"blocks": [{"id": "a", "kind": "integrator"}], "output": "a"}"#)
            .unwrap_err();
        assert!(matches!(err, TransformError::UnknownKind { .. }));
        let err = doc(r#"{
            "blocks": [
                {"id": "x", "kind": "inport"},
                {"id": "r", "kind": "relational", "params": {"op": "<"}}
            ],
            "wires": [{"from": ["x", 1], "to": ["r", 2]}],
            "output": "r"
        }"#)
        .unwrap_err();
        assert!(matches!(err, TransformError::MissingInput { port: 1, .. }));
    }

    #[test]
    fn loops_and_order() {
        let g = doc(r#"{
            "blocks": [
                {"id": "w", "kind": "inport"},
                {"id": "c", "kind": "constant", "params": {"value": 4500}},
                {"id": "lt", "kind": "relational", "params": {"op": "<"}},
                {"id": "and", "kind": "logical", "params": {"op": "and"}},
                {"id": "d", "kind": "unit_delay", "params": {"initial": 1}}
            ],
            "wires": [
                {"from": ["w", 1], "to": ["lt", 1]},
                {"from": ["c", 1], "to": ["lt", 2]},
                {"from": ["lt", 1], "to": ["and", 1]},
                {"from": ["d", 1], "to": ["and", 2]},
                {"from": ["and", 1], "to": ["d", 1]}
            ],
            "output": "and"
        }"#)
        .unwrap();
        assert_eq!(g.feedback_loops(), vec![vec!["and".to_string(), "d".into()]]);
        let order = g.evaluation_order();
        let pos = |id: &str| order.iter().position(|o| o == id).unwrap();
        assert!(pos("w") < pos("lt") && pos("lt") < pos("and") && pos("d") < pos("and"));
        let round = BlockGraph::from_document(g.to_document()).unwrap();
        assert_eq!(round, g);
    }
}
