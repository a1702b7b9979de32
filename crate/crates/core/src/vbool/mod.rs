//! Quantitative semantics over VBool values.

mod monitor;
mod value;

pub use monitor::{eval_robust, Monitor, Semantics, SemanticsConfig};
pub use value::{always_op, eventually_op, until_op, VBool};
