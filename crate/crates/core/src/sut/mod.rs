//! Systems under test and their input generators.

mod external;
pub mod interp;
mod models;

pub use external::ExternalCommand;
pub use models::{DeltaSigma, StaticSwitched};

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trace::{Trace, TraceError};

#[derive(Debug, Error)]
pub enum SutError {
    #[error("parameter vector has {got} entries, expected {expected}")]
    Dimension { got: usize, expected: usize },
    #[error("parameter `{name}` = {value} outside [{lo}, {hi}]")]
    OutOfRange {
        name: String,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error("state became NaN at step {step}")]
    NotANumber { step: usize },
    #[error("external model failed: {0}")]
    External(String),
    #[error(transparent)]
    Trace(#[from] TraceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    #[default]
    Pchip,
    Linear,
}

/// How one input signal is built from its share of the parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InputKind {
    /// One value held over the horizon.
    Constant { range: (f64, f64) },
    /// `count` values evenly spaced over `[0, horizon]`, interpolated.
    ControlPoints {
        count: usize,
        range: (f64, f64),
        #[serde(default)]
        interpolation: Interpolation,
    },
    /// Square wave with 50% duty: `base` until `delay`, then alternating
    /// `base + amplitude` and `base` every half period. Period and
    /// amplitude are the parameters.
    Pulse {
        base: f64,
        delay: f64,
        period: (f64, f64),
        amplitude: (f64, f64),
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputParam {
    pub name: String,
    #[serde(flatten)]
    pub kind: InputKind,
}

impl InputParam {
    pub fn constant(name: &str, lo: f64, hi: f64) -> Self {
        InputParam {
            name: name.into(),
            kind: InputKind::Constant { range: (lo, hi) },
        }
    }

    /// Names and bounds of the scalar parameters this input consumes.
    pub fn scalars(&self) -> Vec<(String, (f64, f64))> {
        match &self.kind {
            InputKind::Constant { range } => vec![(self.name.clone(), *range)],
            InputKind::ControlPoints { count, range, .. } => (0..*count)
                .map(|i| (format!("{}[{i}]", self.name), *range))
                .collect(),
            InputKind::Pulse {
                period, amplitude, ..
            } => vec![
                (format!("{}.period", self.name), *period),
                (format!("{}.amplitude", self.name), *amplitude),
            ],
        }
    }

    fn validate(&self) -> Result<(), SutError> {
        if let InputKind::ControlPoints { count: 0, .. } = self.kind {
            return Err(SutError::Config(format!(
                "input `{}` needs at least one control point",
                self.name
            )));
        }
        for (name, (lo, hi)) in self.scalars() {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(SutError::Config(format!("bad range [{lo}, {hi}] for `{name}`")));
            }
        }
        Ok(())
    }

    fn signal(&self, values: &[f64], times: &[f64], horizon: f64) -> Vec<f64> {
        match &self.kind {
            InputKind::Constant { .. } => vec![values[0]; times.len()],
            InputKind::ControlPoints {
                count,
                interpolation,
                ..
            } => {
                if *count == 1 {
                    return vec![values[0]; times.len()];
                }
                let xs: Vec<f64> = (0..*count)
                    .map(|i| horizon * i as f64 / (*count - 1) as f64)
                    .collect();
                match interpolation {
                    Interpolation::Linear => times
                        .iter()
                        .map(|&t| interp::linear(&xs, values, t))
                        .collect(),
                    Interpolation::Pchip => {
                        let p = interp::Pchip::new(&xs, values);
                        times.iter().map(|&t| p.eval(t)).collect()
                    }
                }
            }
            InputKind::Pulse { base, delay, .. } => {
                let (period, amplitude) = (values[0], values[1]);
                times
                    .iter()
                    .map(|&t| {
                        if t < *delay || period <= 0.0 {
                            *base
                        } else if (t - delay).rem_euclid(period) < period / 2.0 {
                            base + amplitude
                        } else {
                            *base
                        }
                    })
                    .collect()
            }
        }
    }
}

/// Box-constrained search space.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSpace {
    pub names: Vec<String>,
    pub bounds: Vec<(f64, f64)>,
}

impl ParameterSpace {
    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn check(&self, point: &[f64]) -> Result<(), SutError> {
        if point.len() != self.dim() {
            return Err(SutError::Dimension {
                got: point.len(),
                expected: self.dim(),
            });
        }
        for ((name, &(lo, hi)), &value) in self.names.iter().zip(&self.bounds).zip(point) {
            if !(value >= lo && value <= hi) {
                return Err(SutError::OutOfRange {
                    name: name.clone(),
                    value,
                    lo,
                    hi,
                });
            }
        }
        Ok(())
    }
}

/// Sample times `0, dt, 2dt, …` up to the horizon.
pub fn time_grid(horizon: f64, dt: f64) -> Vec<f64> {
    let n = (horizon / dt).round() as usize + 1;
    (0..n).map(|k| k as f64 * dt).collect()
}

/// Builds the input trace for `point` (the concatenated scalars of `params`).
pub fn generate_inputs(
    params: &[InputParam],
    point: &[f64],
    horizon: f64,
    dt: f64,
) -> Result<Trace, SutError> {
    if !(horizon > 0.0 && dt > 0.0) {
        return Err(SutError::Config(format!(
            "horizon and step must be positive (got {horizon}, {dt})"
        )));
    }
    let space = input_space(params)?;
    space.check(point)?;
    let times = time_grid(horizon, dt);
    let mut trace = Trace::new(times.clone())?;
    let mut offset = 0;
    for p in params {
        let n = p.scalars().len();
        trace.insert_signal(&p.name, p.signal(&point[offset..offset + n], &times, horizon))?;
        offset += n;
    }
    Ok(trace)
}

fn input_space(params: &[InputParam]) -> Result<ParameterSpace, SutError> {
    let mut names = Vec::new();
    let mut bounds = Vec::new();
    for p in params {
        p.validate()?;
        for (n, b) in p.scalars() {
            names.push(n);
            bounds.push(b);
        }
    }
    Ok(ParameterSpace { names, bounds })
}

/// Fixed-step discrete dynamics. The state is a plain vector so models can
/// be stored behind one trait object.
pub trait Dynamics: Send + Sync {
    fn input_names(&self) -> Vec<String>;
    fn output_names(&self) -> Vec<String>;
    fn initial_state(&self, init: &[f64]) -> Vec<f64>;
    /// Outputs at the current sample, advancing `state` to the next one.
    fn step(&self, state: &mut Vec<f64>, inputs: &[f64]) -> Vec<f64>;
}

#[derive(Clone)]
pub enum Simulator {
    Stepped(Arc<dyn Dynamics>),
    External(ExternalCommand),
}

impl std::fmt::Debug for Simulator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Simulator::Stepped(_) => f.write_str("Stepped"),
            Simulator::External(c) => f.debug_tuple("External").field(c).finish(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SutModel {
    pub name: String,
    pub inputs: Vec<InputParam>,
    /// Initial-state parameters with their ranges.
    pub initial: Vec<(String, (f64, f64))>,
    pub dt: f64,
    pub horizon: f64,
    pub simulator: Simulator,
}

impl SutModel {
    pub fn parameter_space(&self) -> Result<ParameterSpace, SutError> {
        let mut space = input_space(&self.inputs)?;
        for (n, b) in &self.initial {
            space.names.push(n.clone());
            space.bounds.push(*b);
        }
        Ok(space)
    }

    /// Splits a search point into input scalars and initial-state values.
    pub fn split<'p>(&self, point: &'p [f64]) -> Result<(&'p [f64], &'p [f64]), SutError> {
        let space = self.parameter_space()?;
        space.check(point)?;
        Ok(point.split_at(space.dim() - self.initial.len()))
    }

    /// Inputs and outputs for one search point.
    pub fn run(&self, point: &[f64]) -> Result<Trace, SutError> {
        let (input_point, init) = self.split(point)?;
        let inputs = generate_inputs(&self.inputs, input_point, self.horizon, self.dt)?;
        self.simulate(&inputs, init)
    }

    pub fn simulate(&self, inputs: &Trace, init: &[f64]) -> Result<Trace, SutError> {
        match &self.simulator {
            Simulator::Stepped(d) => {
                let mut state = d.initial_state(init);
                simulate_from(d.as_ref(), &mut state, inputs, 0)
            }
            Simulator::External(cmd) => cmd.simulate(inputs, init),
        }
    }
}

/// Runs `dynamics` over every sample of `inputs` starting from `state`,
/// leaving the final state in `state`. `first_step` only labels errors.
pub fn simulate_from(
    dynamics: &dyn Dynamics,
    state: &mut Vec<f64>,
    inputs: &Trace,
    first_step: usize,
) -> Result<Trace, SutError> {
    let in_names = dynamics.input_names();
    let out_names = dynamics.output_names();
    let columns: Vec<&[f64]> = in_names
        .iter()
        .map(|n| inputs.signal(n))
        .collect::<Result<_, _>>()?;
    let mut outputs: Vec<Vec<f64>> = vec![Vec::with_capacity(inputs.len()); out_names.len()];
    let mut u = vec![0.0; in_names.len()];
    for k in 0..inputs.len() {
        for (slot, col) in u.iter_mut().zip(&columns) {
            *slot = col[k];
        }
        let y = dynamics.step(state, &u);
        if y.iter().chain(state.iter()).any(|v| v.is_nan()) {
            return Err(SutError::NotANumber {
                step: first_step + k,
            });
        }
        for (col, v) in outputs.iter_mut().zip(y) {
            col.push(v);
        }
    }
    let mut trace = inputs.clone();
    for (name, col) in out_names.iter().zip(outputs) {
        trace.insert_signal(name, col)?;
    }
    Ok(trace)
}

/// Model selection as written in campaign files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    StaticSwitched {
        thresh: f64,
        #[serde(default = "StaticSwitched::default_horizon")]
        horizon: f64,
        #[serde(default = "StaticSwitched::default_dt")]
        dt: f64,
    },
    DeltaSigma {
        #[serde(default = "DeltaSigma::default_u_range")]
        u_range: (f64, f64),
        #[serde(default = "DeltaSigma::default_init_range")]
        init_range: (f64, f64),
    },
    External {
        command: Vec<String>,
        inputs: Vec<InputParam>,
        #[serde(default)]
        initial: Vec<(String, (f64, f64))>,
        dt: f64,
        horizon: f64,
    },
}

impl ModelConfig {
    pub fn build(&self) -> Result<SutModel, SutError> {
        let model = match self {
            ModelConfig::StaticSwitched {
                thresh,
                horizon,
                dt,
            } => StaticSwitched::new(*thresh).model(*horizon, *dt),
            ModelConfig::DeltaSigma {
                u_range,
                init_range,
            } => DeltaSigma.model(*u_range, *init_range),
            ModelConfig::External {
                command,
                inputs,
                initial,
                dt,
                horizon,
            } => {
                let cmd = ExternalCommand::new(command.clone())?;
                SutModel {
                    name: "external".into(),
                    inputs: inputs.clone(),
                    initial: initial.clone(),
                    dt: *dt,
                    horizon: *horizon,
                    simulator: Simulator::External(cmd),
                }
            }
        };
        model.parameter_space()?;
        if !(model.dt > 0.0 && model.horizon > 0.0) {
            return Err(SutError::Config("horizon and dt must be positive".into()));
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_input() {
        let t = generate_inputs(&[InputParam::constant("u", 0.0, 1.0)], &[0.3], 1.0, 0.1).unwrap();
        assert_eq!(t.len(), 11);
        assert!(t.signal("u").unwrap().iter().all(|&v| v == 0.3));
    }

    #[test]
    fn linear_ramp_input() {
        let p = InputParam {
            name: "u".into(),
            kind: InputKind::ControlPoints {
                count: 2,
                range: (0.0, 100.0),
                interpolation: Interpolation::Linear,
            },
        };
        let t = generate_inputs(&[p], &[0.0, 100.0], 10.0, 1.0).unwrap();
        let u = t.signal("u").unwrap();
        for (k, v) in u.iter().enumerate() {
            assert!((v - 10.0 * k as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn pulse_input() {
        let p = InputParam {
            name: "theta".into(),
            kind: InputKind::Pulse {
                base: 8.9,
                delay: 3.0,
                period: (10.0, 30.0),
                amplitude: (0.1, 61.0),
            },
        };
        let t = generate_inputs(&[p], &[10.0, 61.0], 40.0, 0.5).unwrap();
        let value = |time: f64| t.signal("theta").unwrap()[(time / 0.5) as usize];
        assert_eq!(value(0.0), 8.9);
        assert_eq!(value(3.0), 69.9);
        assert_eq!(value(7.5), 69.9);
        assert_eq!(value(8.0), 8.9);
        assert_eq!(value(13.0), 69.9);
    }

    #[test]
    fn out_of_range_point() {
        let err = generate_inputs(&[InputParam::constant("u", 0.0, 1.0)], &[1.5], 1.0, 0.1)
            .unwrap_err();
        assert!(matches!(err, SutError::OutOfRange { .. }));
        let err = generate_inputs(&[InputParam::constant("u", 0.0, 1.0)], &[], 1.0, 0.1)
            .unwrap_err();
        assert!(matches!(err, SutError::Dimension { .. }));
    }

    #[test]
    fn input_config_json() {
        let text = r#"[
            {"name": "throttle", "kind": "control_points", "count": 7, "range": [0, 100]},
            {"name": "brake", "kind": "control_points", "count": 3, "range": [0, 500], "interpolation": "pchip"},
            {"name": "w", "kind": "constant", "range": [900, 1100]}
        ]"#;
        let params: Vec<InputParam> = serde_json::from_str(text).unwrap();
        assert_eq!(input_space(&params).unwrap().dim(), 11);
    }
}
