//! One-dimensional interpolation through control points.

/// Piecewise-linear interpolation; `xs` strictly increasing. Values outside
/// the knot range are clamped to the end values.
pub fn linear(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    assert_eq!(xs.len(), ys.len());
    assert!(!xs.is_empty());
    if xs.len() == 1 || x <= xs[0] {
        return ys[0];
    }
    let n = xs.len();
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let i = xs.partition_point(|&k| k <= x) - 1;
    let s = (x - xs[i]) / (xs[i + 1] - xs[i]);
    ys[i] + s * (ys[i + 1] - ys[i])
}

/// Shape-preserving piecewise cubic Hermite interpolant (Fritsch–Carlson
/// slopes). Monotone data give a monotone curve and the interpolant never
/// leaves the range of neighbouring knots.
#[derive(Debug, Clone)]
pub struct Pchip {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl Pchip {
    pub fn new(xs: &[f64], ys: &[f64]) -> Self {
        assert_eq!(xs.len(), ys.len());
        assert!(!xs.is_empty());
        assert!(xs.windows(2).all(|w| w[0] < w[1]), "knots must increase");
        let n = xs.len();
        let mut slopes = vec![0.0; n];
        if n == 2 {
            let d = (ys[1] - ys[0]) / (xs[1] - xs[0]);
            slopes = vec![d, d];
        } else if n > 2 {
            let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
            let delta: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();
            for i in 1..n - 1 {
                if delta[i - 1] * delta[i] > 0.0 {
                    // weighted harmonic mean
                    let w1 = 2.0 * h[i] + h[i - 1];
                    let w2 = h[i] + 2.0 * h[i - 1];
                    slopes[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
                }
            }
            slopes[0] = end_slope(h[0], h[1], delta[0], delta[1]);
            slopes[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }
        Pchip {
            xs: xs.to_vec(),
            ys: ys.to_vec(),
            slopes,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if n == 1 || x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        let i = self.xs.partition_point(|&k| k <= x) - 1;
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.ys[i]
            + h10 * h * self.slopes[i]
            + h01 * self.ys[i + 1]
            + h11 * h * self.slopes[i + 1]
    }
}

/// Three-point end slope, limited so it keeps the sign of the first secant
/// and does not overshoot.
fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if d.signum() != d0.signum() || d0 == 0.0 {
        0.0
    } else if d0.signum() != d1.signum() && d.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn linear_ramp() {
        let xs = [0.0, 10.0];
        let ys = [0.0, 100.0];
        assert_eq!(linear(&xs, &ys, 2.5), 25.0);
        assert_eq!(linear(&xs, &ys, 10.0), 100.0);
        assert_eq!(linear(&xs, &ys, -1.0), 0.0);
    }

    #[test]
    fn pchip_hits_knots_and_reproduces_lines() {
        let xs = [0.0, 1.0, 2.0, 4.0];
        let ys = [1.0, 3.0, 5.0, 9.0];
        let p = Pchip::new(&xs, &ys);
        for (x, y) in xs.iter().zip(ys) {
            assert!((p.eval(*x) - y).abs() < 1e-12);
        }
        assert!((p.eval(3.0) - 7.0).abs() < 1e-12);
    }

    #[test]
    fn pchip_flat_between_equal_knots() {
        let p = Pchip::new(&[0.0, 1.0, 2.0, 3.0], &[0.0, 1.0, 1.0, 0.0]);
        for i in 0..=20 {
            let x = 1.0 + i as f64 / 20.0;
            assert!((p.eval(x) - 1.0).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn pchip_stays_within_knot_range(ys in proptest::collection::vec(0.0f64..100.0, 2..9)) {
            let xs: Vec<f64> = (0..ys.len()).map(|i| i as f64 * 1.5).collect();
            let p = Pchip::new(&xs, &ys);
            let lo = ys.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            for i in 0..=200 {
                let x = xs[xs.len() - 1] * i as f64 / 200.0;
                let v = p.eval(x);
                prop_assert!(v >= lo - 1e-9 && v <= hi + 1e-9);
            }
        }

        #[test]
        fn pchip_monotone_on_monotone_data(steps in proptest::collection::vec(0.0f64..10.0, 1..8)) {
            let mut ys = vec![0.0];
            for s in &steps {
                ys.push(ys.last().unwrap() + s);
            }
            let xs: Vec<f64> = (0..ys.len()).map(|i| i as f64).collect();
            let p = Pchip::new(&xs, &ys);
            let mut prev = p.eval(0.0);
            for i in 1..=400 {
                let v = p.eval(xs[xs.len() - 1] * i as f64 / 400.0);
                prop_assert!(v >= prev - 1e-9);
                prev = v;
            }
        }
    }
}
