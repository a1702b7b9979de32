use std::fmt;

use crate::stl::{Expr, Formula, Relation};

use super::TransformError;

/// One row of a table: `consequent` is the value taken when `precondition`
/// holds.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry<C> {
    pub precondition: Formula,
    pub consequent: C,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table<C> {
    pub entries: Vec<Entry<C>>,
}

pub type FormulaTable = Table<Formula>;
pub type SignalTable = Table<Expr>;

impl<C> Table<C> {
    pub fn single(consequent: C) -> Self {
        Table {
            entries: vec![Entry {
                precondition: Formula::True,
                consequent,
            }],
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn map<D>(self, mut f: impl FnMut(C) -> D) -> Table<D> {
        Table {
            entries: self
                .entries
                .into_iter()
                .map(|e| Entry {
                    precondition: e.precondition,
                    consequent: f(e.consequent),
                })
                .collect(),
        }
    }

    /// Applies `f` to every formula in the table, preconditions included.
    pub fn map_formulas(self, mut f: impl FnMut(Formula) -> Formula, mut g: impl FnMut(C) -> C) -> Self {
        Table {
            entries: self
                .entries
                .into_iter()
                .map(|e| Entry {
                    precondition: f(e.precondition),
                    consequent: g(e.consequent),
                })
                .collect(),
        }
    }
}

/// The table assigned to one signal of the graph.
#[derive(Debug, Clone, PartialEq)]
pub enum TableValue {
    Formula(FormulaTable),
    Signal(SignalTable),
}

impl TableValue {
    pub fn len(&self) -> usize {
        match self {
            TableValue::Formula(t) => t.len(),
            TableValue::Signal(t) => t.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_formula(&self) -> bool {
        matches!(self, TableValue::Formula(_))
    }

    /// Formula view, converting a signal table with [`s2f`].
    pub fn into_formula(self) -> FormulaTable {
        match self {
            TableValue::Formula(t) => t,
            TableValue::Signal(t) => s2f(t),
        }
    }
}

impl<C: fmt::Display> fmt::Display for Table<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.entries {
            writeln!(f, "{} | {}", e.precondition, e.consequent)?;
        }
        Ok(())
    }
}

impl fmt::Display for TableValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TableValue::Formula(t) => t.fmt(f),
            TableValue::Signal(t) => t.fmt(f),
        }
    }
}

/// `a ∧ b` with `⊤` dropped.
pub fn conj(a: Formula, b: Formula) -> Formula {
    match (a, b) {
        (Formula::True, x) | (x, Formula::True) => x,
        (a, b) => Formula::and(a, b),
    }
}

/// `a ∨ b` with `⊥` dropped.
pub fn disj(a: Formula, b: Formula) -> Formula {
    match (a, b) {
        (Formula::False, x) | (x, Formula::False) => x,
        (a, b) => Formula::or(a, b),
    }
}

/// `¬(x = 0)`.
pub fn nonzero(x: Expr) -> Formula {
    Formula::not(Formula::atom(x, Relation::Eq, Expr::Const(0.0)))
}

/// Reads each signal consequent as a Boolean: zero is false.
pub fn s2f(t: SignalTable) -> FormulaTable {
    t.map(nonzero)
}

fn check_limit(entries: usize, limit: usize, block: &str) -> Result<(), TransformError> {
    if entries > limit {
        Err(TransformError::EntryLimit {
            block: block.to_string(),
            entries,
            limit,
        })
    } else {
        Ok(())
    }
}

/// Cartesian product of two tables: preconditions are conjoined and `op` is
/// applied to the consequents.
pub fn combine_binary<A: Clone, B: Clone, C>(
    in1: &Table<A>,
    in2: &Table<B>,
    mut op: impl FnMut(A, B) -> C,
    limit: usize,
    block: &str,
) -> Result<Table<C>, TransformError> {
    check_limit(in1.len() * in2.len(), limit, block)?;
    let mut entries = Vec::with_capacity(in1.len() * in2.len());
    for a in &in1.entries {
        for b in &in2.entries {
            entries.push(Entry {
                precondition: conj(a.precondition.clone(), b.precondition.clone()),
                consequent: op(a.consequent.clone(), b.consequent.clone()),
            });
        }
    }
    Ok(Table { entries })
}

/// Switch output: for each condition entry `(p, c)`, the first input's
/// entries under `p ∧ c` and the third input's entries under `p ∧ ¬c`.
pub fn translate_switch<C: Clone>(
    cond: &FormulaTable,
    in1: &Table<C>,
    in3: &Table<C>,
    limit: usize,
    block: &str,
) -> Result<Table<C>, TransformError> {
    let n = cond.len() * (in1.len() + in3.len());
    check_limit(n, limit, block)?;
    let mut entries = Vec::with_capacity(n);
    for e in &cond.entries {
        let on = conj(e.precondition.clone(), e.consequent.clone());
        let off = conj(e.precondition.clone(), Formula::not(e.consequent.clone()));
        for (guard, branch) in [(on, in1), (off, in3)] {
            for b in &branch.entries {
                entries.push(Entry {
                    precondition: conj(guard.clone(), b.precondition.clone()),
                    consequent: b.consequent.clone(),
                });
            }
        }
    }
    Ok(Table { entries })
}

/// How a multi-entry table becomes one formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SwitchEncoding {
    /// `(p1 ∧ φ1) ∨ (p2 ∧ φ2) ∨ …`
    Disjunctive,
    /// `(p1 ⇒ φ1) ∧ (p2 ⇒ φ2) ∧ …`
    #[default]
    Implicative,
}

impl std::str::FromStr for SwitchEncoding {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "disjunctive" => Ok(SwitchEncoding::Disjunctive),
            "implicative" => Ok(SwitchEncoding::Implicative),
            other => Err(format!(
                "unknown encoding `{other}` (expected disjunctive or implicative)"
            )),
        }
    }
}

pub fn flatten_table(t: &FormulaTable, encoding: SwitchEncoding) -> Formula {
    if let [only] = t.entries.as_slice() {
        if only.precondition == Formula::True {
            return only.consequent.clone();
        }
    }
    let mut parts = t.entries.iter().map(|e| match encoding {
        SwitchEncoding::Disjunctive => conj(e.precondition.clone(), e.consequent.clone()),
        SwitchEncoding::Implicative => match &e.precondition {
            Formula::True => e.consequent.clone(),
            p => Formula::implies(p.clone(), e.consequent.clone()),
        },
    });
    let first = parts.next().unwrap_or(match encoding {
        SwitchEncoding::Disjunctive => Formula::False,
        SwitchEncoding::Implicative => Formula::True,
    });
    parts.fold(first, |acc, p| match encoding {
        SwitchEncoding::Disjunctive => Formula::or(acc, p),
        SwitchEncoding::Implicative => Formula::and(acc, p),
    })
}
