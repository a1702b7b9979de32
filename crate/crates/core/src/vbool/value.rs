use std::fmt;
use std::ops::Not;

use crate::stl::Connective;

/// A truth value paired with a non-negative robustness.
///
/// Unlike signed STL robustness the truth is explicit, so "true with
/// robustness 0" and "false with robustness 0" are different values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VBool {
    truth: bool,
    robustness: f64,
}

impl VBool {
    pub const TOP: VBool = VBool {
        truth: true,
        robustness: f64::INFINITY,
    };
    pub const BOTTOM: VBool = VBool {
        truth: false,
        robustness: f64::INFINITY,
    };

    /// Panics if `robustness` is negative or NaN.
    pub fn new(truth: bool, robustness: f64) -> Self {
        assert!(
            robustness >= 0.0,
            "robustness must be non-negative, got {robustness}"
        );
        VBool { truth, robustness }
    }

    pub fn truth(self) -> bool {
        self.truth
    }

    pub fn robustness(self) -> f64 {
        self.robustness
    }

    /// `+r` when true, `-r` when false.
    pub fn signed(self) -> f64 {
        if self.truth {
            self.robustness
        } else {
            -self.robustness
        }
    }

    /// `x <=v y`.
    pub fn leq(x: f64, y: f64) -> Self {
        if x <= y {
            VBool::new(true, if x == y { 0.0 } else { y - x })
        } else {
            VBool::new(false, x - y)
        }
    }

    /// `x <v y`: truth is strict, robustness `|y - x|`.
    pub fn lt(x: f64, y: f64) -> Self {
        let r = if x == y { 0.0 } else { (y - x).abs() };
        VBool::new(x < y, r)
    }

    pub fn geq(x: f64, y: f64) -> Self {
        Self::leq(y, x)
    }

    pub fn gt(x: f64, y: f64) -> Self {
        Self::lt(y, x)
    }

    /// `x =v y`: robustness is the constant `k` either way.
    pub fn eq(x: f64, y: f64, k: f64) -> Self {
        VBool::new(x == y, k)
    }

    pub fn and_max(self, other: VBool) -> Self {
        match (self.truth, other.truth) {
            (true, true) => VBool::new(true, self.robustness.min(other.robustness)),
            (false, true) => self,
            (true, false) => other,
            (false, false) => VBool::new(false, self.robustness.max(other.robustness)),
        }
    }

    pub fn or_max(self, other: VBool) -> Self {
        !((!self).and_max(!other))
    }

    /// Parallel-resistance combination when both are true, sum when both
    /// are false.
    pub fn and_add(self, other: VBool) -> Self {
        match (self.truth, other.truth) {
            (true, true) => {
                let (x, y) = (self.robustness, other.robustness);
                if x == 0.0 || y == 0.0 {
                    VBool::new(true, 0.0)
                } else {
                    VBool::new(true, 1.0 / (1.0 / x + 1.0 / y))
                }
            }
            (false, true) => self,
            (true, false) => other,
            (false, false) => VBool::new(false, self.robustness + other.robustness),
        }
    }

    pub fn or_add(self, other: VBool) -> Self {
        !((!self).and_add(!other))
    }

    pub fn and(self, other: VBool, connective: Connective) -> Self {
        match connective {
            Connective::Max => self.and_max(other),
            Connective::Additive => self.and_add(other),
        }
    }

    pub fn or(self, other: VBool, connective: Connective) -> Self {
        match connective {
            Connective::Max => self.or_max(other),
            Connective::Additive => self.or_add(other),
        }
    }

    /// Step-width weighting `#'`: false robustness multiplied by `dt`, true
    /// robustness divided by it.
    pub fn sharp_prime(self, dt: f64) -> Self {
        debug_assert!(dt > 0.0);
        if self.truth {
            VBool::new(true, self.robustness / dt)
        } else {
            VBool::new(false, self.robustness * dt)
        }
    }

    /// `#`: robustness multiplied by `k` whatever the truth.
    pub fn sharp(self, k: f64) -> Self {
        debug_assert!(k > 0.0);
        VBool::new(self.truth, self.robustness * k)
    }

    /// `lhs ->+ rhs = not(lhs # k) or+ rhs`.
    pub fn implies_add(lhs: VBool, rhs: VBool, k: f64) -> Self {
        (!lhs.sharp(k)).or_add(rhs)
    }

    pub fn implies_max(lhs: VBool, rhs: VBool) -> Self {
        (!lhs).or_max(rhs)
    }
}

impl Not for VBool {
    type Output = VBool;

    fn not(self) -> VBool {
        VBool {
            truth: !self.truth,
            robustness: self.robustness,
        }
    }
}

impl fmt::Display for VBool {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = if self.truth { "⊤" } else { "⊥" };
        write!(f, "({t}, {})", self.robustness)
    }
}

/// Conjunction over a window. Additive folds `#'`-weighted samples; an empty
/// window gives `⊤v`.
pub fn always_op(samples: &[VBool], widths: &[f64], connective: Connective) -> VBool {
    debug_assert_eq!(samples.len(), widths.len());
    match connective {
        Connective::Max => samples.iter().fold(VBool::TOP, |acc, &s| acc.and_max(s)),
        Connective::Additive => samples
            .iter()
            .zip(widths)
            .fold(VBool::TOP, |acc, (&s, &dt)| acc.and_add(s.sharp_prime(dt))),
    }
}

/// Dual of [`always_op`]: `not always(not samples)`.
pub fn eventually_op(samples: &[VBool], widths: &[f64], connective: Connective) -> VBool {
    let negated: Vec<VBool> = samples.iter().map(|&s| !s).collect();
    !always_op(&negated, widths, connective)
}

/// Until over a window.
///
/// `prefix` holds the left operand from the evaluation instant onwards and
/// `release` the right operand at the same indices; `window` selects the
/// candidate release positions (offsets into both slices). For each
/// candidate `j` the right operand at `j` is conjoined with the left operand
/// on `[0, j)`, and the results are disjoined. An empty window gives `⊥v`.
pub fn until_op(
    prefix: &[VBool],
    release: &[VBool],
    widths: &[f64],
    window: std::ops::Range<usize>,
    connective: Connective,
) -> VBool {
    let weight = |v: VBool, dt: f64| match connective {
        Connective::Max => v,
        Connective::Additive => v.sharp_prime(dt),
    };
    let mut result = VBool::BOTTOM;
    let mut held = VBool::TOP;
    let mut next = 0;
    for j in window {
        while next < j {
            held = held.and(weight(prefix[next], widths[next]), connective);
            next += 1;
        }
        let candidate = weight(release[j], widths[j]).and(held, connective);
        result = result.or(candidate, connective);
    }
    result
}
