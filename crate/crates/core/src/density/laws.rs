//! Radial building blocks `φ(|ξ|)` and how their derivatives accumulate.
//!
//! For a radial function the ξ-gradient is `g·ξ` and the ξ-Hessian is
//! `a·I + b·ξξᵀ`; every primitive below returns `(value, g, a, b)`.

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Radial {
    pub value: f64,
    pub g: f64,
    pub a: f64,
    pub b: f64,
}

impl Radial {

    #[inline]
    pub fn add_grad(&self, scale: f64, xi: &[f64], out: &mut [f64]) {
        let c = scale * self.g;
        for (o, x) in out.iter_mut().zip(xi) {
            *o += c * x;
        }
    }

    #[inline]
    pub fn add_hess(&self, scale: f64, xi: &[f64], out: &mut [f64]) {
        let n = xi.len();
        for i in 0..n {
            out[i * n + i] += scale * self.a;
            if self.b != 0.0 {
                for j in 0..n {
                    out[i * n + j] += scale * self.b * xi[i] * xi[j];
                }
            }
        }
    }
}

#[inline]
pub(crate) fn sq_norm(xi: &[f64]) -> f64 {
    xi.iter().map(|x| x * x).sum()
}

/// `(1 + |ξ|²)^{s/2}`.
#[inline]
pub(crate) fn reg_power(s: f64, r2: f64) -> Radial {
    let w = 1.0 + r2;
    let value = w.powf(0.5 * s);
    let g = s * value / w;
    Radial { value, g, a: g, b: s * (s - 2.0) * value / (w * w) }
}

/// `|ξ|^s`, with the limits at `ξ = 0` (infinite Hessian when `s < 2`).
#[inline]
pub(crate) fn raw_power(s: f64, r2: f64) -> Radial {
    if r2 == 0.0 {
        let a = if s > 2.0 {
            0.0
        } else if s == 2.0 {
            2.0
        } else {
            f64::INFINITY
        };
        return Radial { value: 0.0, g: 0.0, a, b: 0.0 };
    }
    let value = r2.powf(0.5 * s);
    let g = s * value / r2;
    Radial { value, g, a: g, b: s * (s - 2.0) * value / (r2 * r2) }
}

/// `t^p log^α(1+t)` composed with `t = (1+|ξ|²)^{1/2}` (regularized) or
/// `t = |ξ|` (raw).
pub(crate) fn log_power(p: f64, alpha: f64, r2: f64, regularized: bool) -> Radial {
    let t = if regularized { (1.0 + r2).sqrt() } else { r2.sqrt() };
    if t == 0.0 {
        let e = p + alpha;
        let a = if e > 2.0 {
            0.0
        } else if e == 2.0 {
            2.0
        } else {
            f64::INFINITY
        };
        return Radial { value: 0.0, g: 0.0, a, b: 0.0 };
    }
    let l = t.ln_1p();
    let u = 1.0 + t;
    let tp = t.powf(p);
    let la = l.powf(alpha);
    let la1 = l.powf(alpha - 1.0);
    let la2 = l.powf(alpha - 2.0);
    let value = tp * la;
    let d1 = p * tp / t * la + alpha * tp * la1 / u;
    let d2 = p * (p - 1.0) * tp / (t * t) * la + 2.0 * p * alpha * tp / t * la1 / u
        + alpha * (alpha - 1.0) * tp * la2 / (u * u)
        - alpha * tp * la1 / (u * u);
    // ∇t = ξ/t, ∇²t = I/t − ξξᵀ/t³ in both variants
    let g = d1 / t;
    Radial { value, g, a: g, b: (d2 - d1 / t) / (t * t) }
}

/// Radial eigenvalues `(tangential, radial)` of the log-power Hessian as a
/// function of `t`, used to declare its envelope.
pub(crate) fn log_power_eigs(p: f64, alpha: f64, t: f64) -> (f64, f64) {
    let r2 = t * t - 1.0;
    let rad = log_power(p, alpha, r2.max(0.0), true);
    (rad.a, rad.a + rad.b * r2.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(f: impl Fn(f64) -> Radial, r: f64) {
        // radial derivative φ'(r) = g·r; compare to FD of value
        let h = 1e-6;
        let phi = |r: f64| f(r * r).value;
        let d1 = (phi(r + h) - phi(r - h)) / (2.0 * h);
        let rad = f(r * r);
        assert!((d1 - rad.g * r).abs() < 1e-6 * (1.0 + d1.abs()), "{d1} vs {}", rad.g * r);
        // φ''(r) = a + b r²
        let d2 = (phi(r + h) - 2.0 * phi(r) + phi(r - h)) / (h * h);
        assert!((d2 - (rad.a + rad.b * r * r)).abs() < 1e-3 * (1.0 + d2.abs()));
    }

    #[test]
    fn primitives_match_radial_differences() {
        for &r in &[0.3, 1.0, 2.7] {
            fd_check(|r2| reg_power(3.0, r2), r);
            fd_check(|r2| reg_power(1.5, r2), r);
            fd_check(|r2| raw_power(2.5, r2), r);
            fd_check(|r2| log_power(2.0, 1.0, r2, true), r);
            fd_check(|r2| log_power(1.5, 0.5, r2, false), r);
        }
    }

    #[test]
    fn raw_limits_at_origin() {
        assert_eq!(raw_power(2.0, 0.0).a, 2.0);
        assert_eq!(raw_power(3.0, 0.0).a, 0.0);
        assert!(raw_power(1.5, 0.0).a.is_infinite());
    }
}
