/// `e(t) = exp(−1/t)` for `t > 0`, 0 otherwise.
#[inline]
fn e(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

#[inline]
fn de(t: f64) -> f64 {
    if t > 0.0 {
        e(t) / (t * t)
    } else {
        0.0
    }
}

/// Smooth step: 0 on `t ≤ 0`, 1 on `t ≥ 1`, `C^∞` in between.
#[inline]
pub fn smooth_step(t: f64) -> f64 {
    let (a, b) = (e(t), e(1.0 - t));
    a / (a + b)
}

#[inline]
fn smooth_step_prime(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        return 0.0;
    }
    let (a, b) = (e(t), e(1.0 - t));
    let s = a + b;
    (de(t) * b + a * de(1.0 - t)) / (s * s)
}

/// Tensor-product cutoff `ψ(x) = Π χ(x_j)` with `χ(t) = s((3 − |t|)/2)`:
/// equal to 1 on `[−1,1]ⁿ`, vanishing outside `(−3,3)ⁿ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CutoffPsi {
    n: usize,
}

impl CutoffPsi {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "cutoff dimension must be positive");
        Self { n }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn chi(t: f64) -> f64 {
        smooth_step(0.5 * (3.0 - t.abs()))
    }

    #[inline]
    pub fn chi_prime(t: f64) -> f64 {
        -0.5 * t.signum() * smooth_step_prime(0.5 * (3.0 - t.abs()))
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        x.iter().map(|t| Self::chi(*t)).product()
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|j| {
                x.iter().enumerate().map(|(k, t)| if k == j { Self::chi_prime(*t) } else { Self::chi(*t) }).product()
            })
            .collect()
    }

    /// `‖Dψ‖_∞`, measured as the 1-D maximum of `|χ′|` (dense scan of the
    /// transition plus golden-section refinement).
    pub fn grad_sup(&self) -> f64 {
        let f = |t: f64| Self::chi_prime(t).abs();
        let steps = 20_000;
        let (mut bi, mut bv) = (0, 0.0);
        for i in 0..=steps {
            let v = f(1.0 + 2.0 * i as f64 / steps as f64);
            if v > bv {
                bi = i;
                bv = v;
            }
        }
        let h = 2.0 / steps as f64;
        let (mut a, mut b) = (1.0 + (bi as f64 - 1.0) * h, 1.0 + (bi as f64 + 1.0) * h);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..80 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if f(c) > f(d) {
                b = d;
            } else {
                a = c;
            }
        }
        bv.max(f(0.5 * (a + b)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plateau_support_and_midpoint() {
        let psi = CutoffPsi::new(3);
        assert_eq!(psi.eval(&[0.0, 0.0, 0.0]), 1.0);
        assert_eq!(psi.eval(&[1.0, -1.0, 0.5]), 1.0);
        assert_eq!(psi.eval(&[3.0, 0.0, 0.0]), 0.0);
        assert_eq!(CutoffPsi::chi(2.0), 0.5);
        assert_eq!(CutoffPsi::chi(-2.0), 0.5);
    }

    #[test]
    fn derivative_matches_differences() {
        for &t in &[-2.7, -1.5, 1.2, 2.0, 2.5] {
            let h = 1e-6;
            let fd = (CutoffPsi::chi(t + h) - CutoffPsi::chi(t - h)) / (2.0 * h);
            assert!((fd - CutoffPsi::chi_prime(t)).abs() < 1e-6);
        }
    }

    #[test]
    fn second_differences_stay_bounded() {
        let h = 1e-3;
        let worst = (0..4000)
            .map(|i| -3.5 + 7.0 * i as f64 / 4000.0)
            .map(|t| ((CutoffPsi::chi(t + h) - 2.0 * CutoffPsi::chi(t) + CutoffPsi::chi(t - h)) / (h * h)).abs())
            .fold(0.0, f64::max);
        assert!(worst < 10.0, "{worst}");
    }

    #[test]
    fn gradient_sup_is_attained_in_transition() {
        let m = CutoffPsi::new(1).grad_sup();
        // symmetric step: the steepest slope sits at the midpoint t = 2
        assert!((m - CutoffPsi::chi_prime(-2.0)).abs() < 1e-9, "{m}");
    }
}
