//! Data behind the robustness comparison demos: four synthetic traces of a
//! property's margin over time, and isobar grids of the two conjunctions.

use std::io::Write;

use crate::stl::{parse_stl, Formula};
use crate::trace::{Trace, TraceError};
use crate::vbool::{eval_robust, Semantics, SemanticsConfig, VBool};

/// Signal holding the margin of the property in the demo traces.
pub const MARGIN: &str = "margin";

/// Requirement evaluated on the demo traces.
pub fn demo_formula() -> Formula {
    parse_stl("alw (margin >= 0)").expect("demo formula parses")
}

const DURATION: f64 = 60.0;
const DT: f64 = 0.5;

fn dip(t: f64, centre: f64, depth: f64) -> f64 {
    depth * (-((t - centre) / 2.5).powi(2)).exp()
}

/// Margin curves, as functions of time:
///
/// * `a`: 3 with a dip to 1 at 48 s;
/// * `b`: `a` with a second dip to 1 at 20 s;
/// * `c`: 10 for the first 40 s, then 3, with a dip to 0.3 at 48 s;
/// * `d`: 3.1 with a dip to 0.5 at 48 s.
pub fn margin(label: char, t: f64) -> f64 {
    match label {
        'a' => 3.0 - dip(t, 48.0, 2.0),
        'b' => 3.0 - dip(t, 48.0, 2.0) - dip(t, 20.0, 2.0),
        'c' => {
            let base = 3.0 + 7.0 / (1.0 + ((t - 40.0) / 0.5).exp());
            base - dip(t, 48.0, 2.7)
        }
        'd' => 3.1 - dip(t, 48.0, 2.6),
        _ => panic!("no demo trace `{label}`"),
    }
}

pub const LABELS: [char; 4] = ['a', 'b', 'c', 'd'];

pub fn demo_trace(label: char) -> Result<Trace, TraceError> {
    let n = (DURATION / DT).round() as usize + 1;
    let trace = Trace::uniform(n, DT)?;
    let values = trace.times().iter().map(|&t| margin(label, t)).collect();
    trace.with_signal(MARGIN, values)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemoRow {
    pub label: char,
    pub max: f64,
    pub additive: f64,
}

/// Signed robustness of the demo formula on each trace under both semantics.
pub fn demo_rows() -> Vec<DemoRow> {
    let f = demo_formula();
    let eval = |t: &Trace, s| {
        eval_robust(&f, t, 0, &SemanticsConfig::with_semantics(s))
            .expect("demo traces carry the margin signal")
            .signed()
    };
    LABELS
        .iter()
        .map(|&label| {
            let t = demo_trace(label).expect("valid demo trace");
            DemoRow {
                label,
                max: eval(&t, Semantics::Max),
                additive: eval(&t, Semantics::Additive),
            }
        })
        .collect()
}

pub fn write_demo_rows<W: Write>(writer: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["trace", "max", "additive"])?;
    for r in demo_rows() {
        w.write_record([r.label.to_string(), r.max.to_string(), r.additive.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// The four margin signals side by side, one row per sample.
pub fn write_demo_traces<W: Write>(writer: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["time", "a", "b", "c", "d"])?;
    let base = demo_trace('a').expect("valid demo trace");
    for &t in base.times() {
        let mut row = vec![t.to_string()];
        row.extend(LABELS.iter().map(|&l| margin(l, t).to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// `(true, v)` for `v >= 0`, otherwise `(false, -v)`.
pub fn from_signed(v: f64) -> VBool {
    if v >= 0.0 {
        VBool::new(true, v)
    } else {
        VBool::new(false, -v)
    }
}

/// Signed robustness of `p ∧ q` under both conjunctions on a square grid of
/// signed argument values `lo, lo + step, …, hi`.
pub fn isobar_grid(lo: f64, hi: f64, step: f64) -> Vec<[f64; 4]> {
    let n = ((hi - lo) / step).round() as usize;
    let axis: Vec<f64> = (0..=n).map(|i| lo + i as f64 * step).collect();
    let mut rows = Vec::with_capacity(axis.len() * axis.len());
    for &p in &axis {
        for &q in &axis {
            let (a, b) = (from_signed(p), from_signed(q));
            rows.push([p, q, a.and_max(b).signed(), a.and_add(b).signed()]);
        }
    }
    rows
}

pub fn write_isobars<W: Write>(lo: f64, hi: f64, step: f64, writer: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["p", "q", "and_max", "and_add"])?;
    for row in isobar_grid(lo, hi, step) {
        w.write_record(row.iter().map(f64::to_string))?;
    }
    w.flush()?;
    Ok(())
}
