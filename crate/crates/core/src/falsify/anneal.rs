use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Simulated annealing schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnealConfig {
    pub initial_temperature: f64,
    /// Temperature factor applied after every iteration.
    pub cooling: f64,
    /// Iterations without a new best point before restarting from a fresh
    /// uniform point at the initial temperature.
    pub restart_after: usize,
}

impl Default for AnnealConfig {
    fn default() -> Self {
        AnnealConfig {
            initial_temperature: 0.5,
            cooling: 0.97,
            restart_after: 100,
        }
    }
}

impl AnnealConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.initial_temperature >= 0.0 && self.initial_temperature.is_finite()) {
            return Err("initial_temperature must be a non-negative number".into());
        }
        if !(self.cooling > 0.0 && self.cooling <= 1.0) {
            return Err("cooling must lie in (0, 1]".into());
        }
        if self.restart_after == 0 {
            return Err("restart_after must be at least 1".into());
        }
        Ok(())
    }
}

/// Folds `x` back into `[lo, hi]` by mirroring at the bounds.
pub fn reflect(x: f64, lo: f64, hi: f64) -> f64 {
    let w = hi - lo;
    if w <= 0.0 {
        return lo;
    }
    let y = (x - lo).rem_euclid(2.0 * w);
    let y = if y > w { 2.0 * w - y } else { y };
    (lo + y).clamp(lo, hi)
}

pub fn uniform_point(bounds: &[(f64, f64)], rng: &mut impl Rng) -> Vec<f64> {
    bounds
        .iter()
        .map(|&(lo, hi)| if hi > lo { rng.random_range(lo..=hi) } else { lo })
        .collect()
}

/// Gaussian proposal around `current` with per-dimension standard deviation
/// `temperature × (hi − lo)`, reflected into the box.
pub fn anneal_step(
    current: &[f64],
    temperature: f64,
    bounds: &[(f64, f64)],
    rng: &mut impl Rng,
) -> Vec<f64> {
    current
        .iter()
        .zip(bounds)
        .map(|(&x, &(lo, hi))| {
            let sigma = temperature * (hi - lo);
            if !(sigma > 0.0) {
                return x;
            }
            let step = Normal::new(0.0, sigma).expect("positive sigma").sample(rng);
            reflect(x + step, lo, hi)
        })
        .collect()
}

/// Metropolis acceptance for minimisation. Worse points are accepted with
/// probability `exp(-Δ / (T·s))` where `s = max(|current|, 1e-12)` makes the
/// rule independent of the robustness scale of the semantics.
pub fn accept(current: f64, proposal: f64, temperature: f64, rng: &mut impl Rng) -> bool {
    if proposal <= current {
        return true;
    }
    if temperature <= 0.0 || !proposal.is_finite() {
        return false;
    }
    if !current.is_finite() {
        return true;
    }
    let scale = current.abs().max(1e-12);
    let p = (-(proposal - current) / (temperature * scale)).exp();
    rng.random::<f64>() < p
}
