use rayon::prelude::*;

use crate::density::Domain;
use crate::error::{Error, Result};
use crate::solve::DiscreteField;

/// Radial bump `Φ(x) = C·exp(−1/(1−|x|²))` on the unit ball, scaled to
/// `Φ_ε(x) = ε^{−n} Φ(x/ε)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mollifier {
    n: usize,
    eps: f64,
    normalization: f64,
}

/// Points per axis of the quadrature fixing the normalization constant.
const QUADRATURE_POINTS: usize = 64;

impl Mollifier {
    pub fn new(n: usize, eps: f64) -> Result<Self> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::invalid("eps", "mollifier radius must be positive"));
        }
        Ok(Self { n, eps, normalization: 1.0 / Self::raw_mass(n, QUADRATURE_POINTS) })
    }

    #[inline]
    pub fn profile(r2: f64) -> f64 {
        if r2 < 1.0 {
            (-1.0 / (1.0 - r2)).exp()
        } else {
            0.0
        }
    }

    /// Midpoint-rule integral of the unnormalized profile over `[−1,1]ⁿ`.
    pub fn raw_mass(n: usize, points: usize) -> f64 {
        let h = 2.0 / points as f64;
        let total = points.pow(n as u32);
        let mut terms = Vec::with_capacity(total);
        for idx in 0..total {
            let mut rem = idx;
            let mut r2 = 0.0;
            for _ in 0..n {
                let t = -1.0 + h * ((rem % points) as f64 + 0.5);
                r2 += t * t;
                rem /= points;
            }
            terms.push(Self::profile(r2));
        }
        crate::linalg::pairwise_sum(&terms) * h.powi(n as i32)
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    /// `Φ_ε(z)`.
    pub fn kernel(&self, z: &[f64]) -> f64 {
        let r2 = z.iter().map(|v| v * v).sum::<f64>() / (self.eps * self.eps);
        self.normalization * self.eps.powi(-(self.n as i32)) * Self::profile(r2)
    }
}

/// `u ∗ Φ_ε` at the grid nodes of `target`, by discrete convolution with the
/// sampled kernel renormalized to unit mass (constants are preserved exactly).
///
/// `target` must be a grid-aligned box with at least `ε` of field on every
/// side; values are never extrapolated.
pub fn mollify(u: &DiscreteField, eps: f64, target: &Domain) -> Result<DiscreteField> {
    let grid = u.grid();
    let n = grid.dim();
    let s = grid.spacing();
    if !(eps >= 2.0 * s * (1.0 - 1e-12)) {
        return Err(Error::MollifierTooNarrow { eps, spacing: s });
    }
    let moll = Mollifier::new(n, eps)?;
    let reach = ((eps / s) * (1.0 - 1e-12)).ceil() as i64 - 1;

    // margin, in nodes, between the target and the grid boundary
    let available = ((grid.domain().inner_distance(target) / s) + 1e-9).floor();
    if available < reach as f64 {
        return Err(Error::MarginTooSmall { eps, needed: reach as usize, available: available.max(0.0) as usize });
    }
    let out = u.restrict(target)?;

    let side = (2 * reach + 1) as usize;
    let mut stencil: Vec<(Vec<i64>, f64)> = Vec::new();
    for idx in 0..side.pow(n as u32) {
        let mut rem = idx;
        let k: Vec<i64> = (0..n)
            .map(|_| {
                let v = (rem % side) as i64 - reach;
                rem /= side;
                v
            })
            .collect();
        let z: Vec<f64> = k.iter().map(|v| *v as f64 * s).collect();
        let w = moll.kernel(&z);
        if w > 0.0 {
            stencil.push((k, w));
        }
    }
    let mass: f64 = crate::linalg::pairwise_sum(&stencil.iter().map(|p| p.1).collect::<Vec<_>>());
    for p in stencil.iter_mut() {
        p.1 /= mass;
    }

    // offset of the target's first node inside the source grid
    let origin: Vec<usize> = {
        let lo_t = out.grid().domain().bounding_box().0;
        let lo_g = grid.domain().bounding_box().0;
        lo_t.iter().zip(&lo_g).map(|(a, b)| ((a - b) / s).round() as usize).collect()
    };
    let sub = out.grid().clone();
    let src = u.values();
    let values: Vec<f64> = (0..sub.node_count())
        .into_par_iter()
        .map(|i| {
            let m = sub.multi_index(i);
            let mut acc = Vec::with_capacity(stencil.len());
            let mut node = vec![0usize; n];
            for (k, w) in &stencil {
                for j in 0..n {
                    node[j] = (m[j] + origin[j]) .wrapping_add_signed(k[j] as isize);
                }
                acc.push(w * src[grid.linear_index(&node)]);
            }
            crate::linalg::pairwise_sum(&acc)
        })
        .collect();
    DiscreteField::from_values(sub, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solve::Grid;

    #[test]
    fn kernel_has_unit_mass() {
        for n in 1..=2 {
            // the 64-point rule is within 2e-7 of the continuum mass
            let fine = Mollifier::raw_mass(n, 1024);
            let coarse = Mollifier::raw_mass(n, QUADRATURE_POINTS);
            assert!(((fine - coarse) / fine).abs() < 2e-7, "n={n}: {fine} vs {coarse}");
        }
        // sampled at 64 points across its support the kernel has unit mass
        let m = Mollifier::new(1, 0.5).unwrap();
        let s = 1.0 / 64.0;
        let mass: f64 = (0..64).map(|i| m.kernel(&[-0.5 + s * (i as f64 + 0.5)]) * s).sum();
        assert!((mass - 1.0).abs() < 1e-8);
    }

    #[test]
    fn constants_and_affine_fields_are_preserved() {
        let g = Grid::cube(2, 1.0, 41).unwrap();
        let target = Domain::cube(2, 0.5);
        let c = DiscreteField::from_fn(g.clone(), |_| 3.25);
        let m = mollify(&c, 0.2, &target).unwrap();
        assert!(m.values().iter().all(|v| (v - 3.25).abs() < 1e-14));
        let a = DiscreteField::from_fn(g, |x| x[0] - 2.0 * x[1]);
        let m = mollify(&a, 0.2, &target).unwrap();
        let exact = a.restrict(&target).unwrap();
        assert!(m.sup_distance(&exact) < 1e-12);
    }

    #[test]
    fn rejects_thin_kernels_and_margins() {
        let g = Grid::cube(1, 1.0, 21).unwrap();
        let u = DiscreteField::from_fn(g, |x| x[0]);
        assert!(matches!(mollify(&u, 0.15, &Domain::cube(1, 0.5)), Err(Error::MollifierTooNarrow { .. })));
        assert!(matches!(mollify(&u, 0.8, &Domain::cube(1, 0.5)), Err(Error::MarginTooSmall { .. })));
    }
}
