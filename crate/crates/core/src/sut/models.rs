use std::sync::Arc;

use super::{Dynamics, InputParam, Simulator, SutModel};

/// Memoryless switched output over two constant inputs in `[0, 1]`:
/// `y = -2(u1 + u2) - 5` when both inputs reach `thresh`, otherwise
/// `y = 2((u1 + 1)^2 + (u2 + 1)^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StaticSwitched {
    pub thresh: f64,
}

impl StaticSwitched {
    /// Requirement checked against this model.
    pub const SPEC: &'static str = "alw (y >= 0)";

    pub fn new(thresh: f64) -> Self {
        StaticSwitched { thresh }
    }

    pub fn output(&self, u1: f64, u2: f64) -> f64 {
        if u1 >= self.thresh && u2 >= self.thresh {
            -2.0 * (u1 + u2) - 5.0
        } else {
            2.0 * ((u1 + 1.0).powi(2) + (u2 + 1.0).powi(2))
        }
    }

    pub(super) fn default_horizon() -> f64 {
        1.0
    }

    pub(super) fn default_dt() -> f64 {
        0.1
    }

    pub fn model(self, horizon: f64, dt: f64) -> SutModel {
        SutModel {
            name: "static_switched".into(),
            inputs: vec![
                InputParam::constant("u1", 0.0, 1.0),
                InputParam::constant("u2", 0.0, 1.0),
            ],
            initial: Vec::new(),
            dt,
            horizon,
            simulator: Simulator::Stepped(Arc::new(self)),
        }
    }
}

impl Dynamics for StaticSwitched {
    fn input_names(&self) -> Vec<String> {
        vec!["u1".into(), "u2".into()]
    }

    fn output_names(&self) -> Vec<String> {
        vec!["y".into()]
    }

    fn initial_state(&self, _: &[f64]) -> Vec<f64> {
        Vec::new()
    }

    fn step(&self, _: &mut Vec<f64>, u: &[f64]) -> Vec<f64> {
        vec![self.output(u[0], u[1])]
    }
}

/// Third-order delta-sigma modulator surrogate: three cascaded integrators
/// with one-bit feedback `v = sign(x3)` (`sign(0) = 1`), run for 64 steps.
///
/// ```text
/// x1' = x1 + (U - v)
/// x2' = x2 + (x1 - v)
/// x3' = x3 + (x2 - v)
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DeltaSigma;

impl DeltaSigma {
    pub const STEPS: usize = 64;

    pub(super) fn default_u_range() -> (f64, f64) {
        (-0.35, 0.35)
    }

    pub(super) fn default_init_range() -> (f64, f64) {
        (-0.1, 0.1)
    }

    pub fn model(self, u_range: (f64, f64), init_range: (f64, f64)) -> SutModel {
        SutModel {
            name: "delta_sigma".into(),
            inputs: vec![InputParam::constant("U", u_range.0, u_range.1)],
            initial: ["x1_init", "x2_init", "x3_init"]
                .iter()
                .map(|n| (n.to_string(), init_range))
                .collect(),
            dt: 1.0,
            horizon: (Self::STEPS - 1) as f64,
            simulator: Simulator::Stepped(Arc::new(self)),
        }
    }
}

impl Dynamics for DeltaSigma {
    fn input_names(&self) -> Vec<String> {
        vec!["U".into()]
    }

    fn output_names(&self) -> Vec<String> {
        vec!["x1".into(), "x2".into(), "x3".into(), "v".into()]
    }

    fn initial_state(&self, init: &[f64]) -> Vec<f64> {
        let mut s = init.to_vec();
        s.resize(3, 0.0);
        s
    }

    fn step(&self, state: &mut Vec<f64>, u: &[f64]) -> Vec<f64> {
        let (x1, x2, x3) = (state[0], state[1], state[2]);
        let v = if x3 >= 0.0 { 1.0 } else { -1.0 };
        state[0] = x1 + (u[0] - v);
        state[1] = x2 + (x1 - v);
        state[2] = x3 + (x2 - v);
        vec![x1, x2, x3, v]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sut::{generate_inputs, simulate_from};

    #[test]
    fn static_switched_outputs() {
        let m = StaticSwitched::new(0.7).model(1.0, 0.1);
        let t = m.run(&[1.0, 1.0]).unwrap();
        assert!(t.signal("y").unwrap().iter().all(|&y| y == -9.0));
        let t = m.run(&[0.0, 0.0]).unwrap();
        assert!(t.signal("y").unwrap().iter().all(|&y| y == 4.0));
    }

    #[test]
    fn static_switched_positive_outside_region() {
        let m = StaticSwitched::new(0.9);
        for i in 0..=20 {
            for j in 0..=20 {
                let (u1, u2) = (i as f64 / 20.0, j as f64 / 20.0);
                let inside = u1 >= 0.9 && u2 >= 0.9;
                assert_eq!(m.output(u1, u2) < 0.0, inside, "{u1} {u2}");
            }
        }
    }

    #[test]
    fn delta_sigma_matches_recursion() {
        let m = DeltaSigma.model((-0.35, 0.35), (-0.1, 0.1));
        let point = [0.2, 0.05, -0.03, 0.0];
        let t = m.run(&point).unwrap();
        assert_eq!(t.len(), 64);
        let (mut a, mut b, mut c) = (0.05f64, -0.03f64, 0.0f64);
        for k in 0..64 {
            assert_eq!(t.signal("x1").unwrap()[k], a);
            assert_eq!(t.signal("x2").unwrap()[k], b);
            assert_eq!(t.signal("x3").unwrap()[k], c);
            let v = if c < 0.0 { -1.0 } else { 1.0 };
            let (na, nb, nc) = (a + (0.2 - v), b + (a - v), c + (b - v));
            a = na;
            b = nb;
            c = nc;
        }
    }

    #[test]
    fn simulation_is_horizon_additive() {
        let d = DeltaSigma;
        let all = generate_inputs(&[InputParam::constant("U", -1.0, 1.0)], &[0.1], 19.0, 1.0)
            .unwrap();
        let half = generate_inputs(&[InputParam::constant("U", -1.0, 1.0)], &[0.1], 9.0, 1.0)
            .unwrap();
        let init = [0.01, -0.02, 0.03];
        let mut s = d.initial_state(&init);
        let whole = simulate_from(&d, &mut s, &all, 0).unwrap();
        let mut s = d.initial_state(&init);
        let first = simulate_from(&d, &mut s, &half, 0).unwrap();
        let second = simulate_from(&d, &mut s, &half, 10).unwrap();
        let x3 = whole.signal("x3").unwrap();
        assert_eq!(&x3[..10], first.signal("x3").unwrap());
        assert_eq!(&x3[10..], second.signal("x3").unwrap());
    }
}
