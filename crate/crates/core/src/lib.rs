//! Falsification of signal temporal logic requirements with VBool robustness.

pub mod stl;
pub mod trace;
pub mod vbool;
pub mod transform;
pub mod sut;
pub mod falsify;
pub mod demo;
pub mod laws;
