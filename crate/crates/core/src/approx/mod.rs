//! Frozen-coefficient approximation.
//!
//! A smooth cutoff `ψ` translated to the centres of a cube lattice of side
//! `2/h` gives a partition of unity `φ_{i,h}`; the approximant is
//! `f_h(x,ξ) = Σ φ_{i,h}(x) f(x_{i,h}, ξ)`. Mollification and the diagonal
//! choice of scales complete the construction.

mod cover;
mod cutoff;
mod diagonal;
mod mollify;

pub use cover::CubeCover;
pub use cutoff::{smooth_step, CutoffPsi};
pub use diagonal::{diagonal_select, DiagonalOptions, DiagonalSelection, DiagonalStep};
pub use mollify::{mollify, Mollifier};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::density::{Density, DensityModel, Domain, GrowthEnvelope, Shape};
use crate::error::{Error, Result};

/// `f_h` for a base model at one scale `h`.
#[derive(Clone, Debug)]
pub struct Approximant {
    base: DensityModel,
    /// `f_h ≡ f` when f does not depend on x; evaluated directly.
    autonomous: bool,
    cover: CubeCover,
    psi: CutoffPsi,
    envelope: GrowthEnvelope,
}

impl Approximant {
    /// Builds `f_h` around `target`, enforcing `12√n/h < dist(target, ∂Ω)`.
    pub fn new(base: DensityModel, h: u32, target: &Domain) -> Result<Self> {
        let cover = CubeCover::admissible(h, target, base.domain())?;
        Ok(Self::with_cover(base, cover))
    }

    /// Builds `f_h` on an existing cover. The cover's cube centres must lie in
    /// the base model's domain.
    pub fn with_cover(base: DensityModel, cover: CubeCover) -> Self {
        let n = cover.dim();
        let psi = CutoffPsi::new(n);
        let env = base.envelope();
        // |D_x φ| ≤ (3ⁿ+1)h‖Dψ‖, at most 3ⁿ terms, centres within 3√n/h
        let three_n = 3f64.powi(n as i32);
        let factor = three_n * (three_n + 1.0) * 3.0 * (n as f64).sqrt() * psi.grad_sup();
        let envelope = GrowthEnvelope {
            mixed_bound: factor * env.mixed_bound,
            lipschitz_x: factor * env.lipschitz_x,
            ..env.clone()
        };
        Self { autonomous: base.is_autonomous(), base, cover, psi, envelope }
    }

    pub fn base(&self) -> &DensityModel {
        &self.base
    }

    pub fn cover(&self) -> &CubeCover {
        &self.cover
    }

    pub fn psi(&self) -> &CutoffPsi {
        &self.psi
    }

    pub fn h(&self) -> u32 {
        self.cover.h()
    }

    /// Calls `f(center, weight)` for every active term.
    fn for_each_term(&self, x: &[f64], mut f: impl FnMut(&[f64], f64)) {
        let (aw, _) = self
            .cover
            .axis_weights(x)
            .unwrap_or_else(|_| panic!("approximant evaluated outside its covered region at {x:?}"));
        let n = x.len();
        let hf = self.cover.h() as f64;
        let mut idx = vec![0usize; n];
        let mut center = vec![0.0; n];
        loop {
            let mut w = 1.0;
            for (j, (k0, ws, _)) in aw.axes.iter().enumerate() {
                w *= ws[idx[j]];
                center[j] = 2.0 * (k0 + idx[j] as i64) as f64 / hf;
            }
            f(&center, w);
            // odometer over the active ranges
            let mut j = 0;
            loop {
                if j == n {
                    return;
                }
                idx[j] += 1;
                if idx[j] < aw.axes[j].2 {
                    break;
                }
                idx[j] = 0;
                j += 1;
            }
        }
    }

    /// Checked `f_h(x, ξ)`.
    pub fn eval_fh(&self, x: &[f64], xi: &[f64]) -> Result<f64> {
        if xi.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: xi.len() });
        }
        if xi.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { xi: xi.to_vec() });
        }
        self.cover.axis_weights(x)?;
        Ok(self.value(x, xi))
    }
}

impl Density for Approximant {
    fn dim(&self) -> usize {
        self.cover.dim()
    }

    fn domain(&self) -> &Domain {
        self.cover.covered_region()
    }

    fn envelope(&self) -> &GrowthEnvelope {
        &self.envelope
    }

    fn value(&self, x: &[f64], xi: &[f64]) -> f64 {
        if self.autonomous {
            return self.base.value(x, xi);
        }
        let mut s = 0.0;
        self.for_each_term(x, |c, w| s += w * self.base.value(c, xi));
        s
    }

    fn gradient(&self, x: &[f64], xi: &[f64], out: &mut [f64]) {
        if self.autonomous {
            return self.base.gradient(x, xi, out);
        }
        out.iter_mut().for_each(|o| *o = 0.0);
        let mut tmp = vec![0.0; xi.len()];
        self.for_each_term(x, |c, w| {
            self.base.gradient(c, xi, &mut tmp);
            for (o, t) in out.iter_mut().zip(&tmp) {
                *o += w * t;
            }
        });
    }

    fn hessian(&self, x: &[f64], xi: &[f64], out: &mut [f64]) {
        if self.autonomous {
            return self.base.hessian(x, xi, out);
        }
        out.iter_mut().for_each(|o| *o = 0.0);
        let mut tmp = vec![0.0; out.len()];
        self.for_each_term(x, |c, w| {
            self.base.hessian(c, xi, &mut tmp);
            for (o, t) in out.iter_mut().zip(&tmp) {
                *o += w * t;
            }
        });
    }

    fn degenerate(&self) -> bool {
        self.base.degenerate()
    }
}

/// Largest `|D_x φ_{j,h}(x)| / (h‖Dψ‖_∞)` over `samples` random points of
/// the covered region and all active `j`, by central differences.
pub fn dphi_bound_check(approx: &Approximant, samples: usize, seed: u64) -> Result<f64> {
    let cover = approx.cover();
    let n = cover.dim();
    let hf = cover.h() as f64;
    let delta = 1e-6 / hf;
    let region = cover.covered_region();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = region.bounding_box();
    let pts: Vec<Vec<f64>> = (0..samples)
        .map(|_| lo.iter().zip(&hi).map(|(a, b)| rng.gen_range(a + delta..b - delta)).collect())
        .collect();
    let per_x: Vec<Result<f64>> = pts
        .par_iter()
        .map(|x| {
            let here = cover.partition_weights(x)?;
            let mut worst: f64 = 0.0;
            let mut grads = vec![vec![0.0; n]; here.len()];
            for l in 0..n {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[l] += delta;
                xm[l] -= delta;
                if !region.contains(&xp) || !region.contains(&xm) {
                    return Err(Error::StencilOutside { x: x.clone(), step: delta });
                }
                let wp = cover.partition_weights(&xp)?;
                let wm = cover.partition_weights(&xm)?;
                let find = |w: &[(Vec<i64>, f64)], k: &[i64]| w.iter().find(|(i, _)| i == k).map(|(_, v)| *v).unwrap_or(0.0);
                for (j, (k, _)) in here.iter().enumerate() {
                    grads[j][l] = (find(&wp, k) - find(&wm, k)) / (2.0 * delta);
                }
            }
            for g in &grads {
                worst = worst.max(crate::linalg::norm(g));
            }
            Ok(worst)
        })
        .collect();
    let mut worst: f64 = 0.0;
    for r in per_x {
        worst = worst.max(r?);
    }
    Ok(worst / (hf * approx.psi().grad_sup()))
}

/// Lattice-aligned sample points of the target: `per_cell` points per cube
/// side along each axis.
fn target_samples(cover: &CubeCover, per_cell: usize) -> Vec<Vec<f64>> {
    let target = cover.target();
    let n = cover.dim();
    let step = cover.side() / per_cell as f64;
    let (lo, hi) = target.bounding_box();
    let ranges: Vec<(i64, i64)> =
        lo.iter().zip(&hi).map(|(a, b)| ((a / step).ceil() as i64, (b / step).floor() as i64)).collect();
    let mut out = Vec::new();
    let mut idx: Vec<i64> = ranges.iter().map(|r| r.0).collect();
    loop {
        let x: Vec<f64> = idx.iter().map(|i| *i as f64 * step).collect();
        if target.shape() == Shape::Box || target.contains(&x) {
            out.push(x);
        }
        let mut j = 0;
        loop {
            if j == n {
                return out;
            }
            idx[j] += 1;
            if idx[j] <= ranges[j].1 {
                break;
            }
            idx[j] = ranges[j].0;
            j += 1;
        }
    }
}

fn xi_samples(n: usize, m: f64) -> Vec<Vec<f64>> {
    let dirs: Vec<Vec<f64>> = match n {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..8).map(|i| {
            let t = std::f64::consts::TAU * i as f64 / 8.0;
            vec![t.cos(), t.sin()]
        }).collect(),
        _ => (0..n)
            .flat_map(|j| {
                [1.0, -1.0].into_iter().map(move |s| {
                    let mut v = vec![0.0; n];
                    v[j] = s;
                    v
                })
            })
            .collect(),
    };
    let mut out = vec![vec![0.0; n]];
    for r in [0.25, 0.5, 0.75, 1.0] {
        for d in &dirs {
            out.push(d.iter().map(|c| c * r * m).collect());
        }
    }
    out
}

/// `sup |f_h − f|` over lattice-aligned points of the target (`per_cell`
/// per cube side and axis) and ξ on radii up to `xi_max`.
pub fn sup_error(approx: &Approximant, xi_max: f64, per_cell: usize) -> f64 {
    let pts = target_samples(approx.cover(), per_cell.max(1));
    let xis = xi_samples(approx.dim(), xi_max);
    let base = approx.base();
    pts.par_iter()
        .map(|x| xis.iter().map(|xi| (approx.value(x, xi) - base.value(x, xi)).abs()).fold(0.0, f64::max))
        .collect::<Vec<_>>()
        .into_iter()
        .fold(0.0, f64::max)
}

/// `(3√n·H/h)(1+M²)^{q/2}`, the uniform bound on `|f_h − f|` for a model
/// normalized at zero with x-Lipschitz constant `lipschitz`.
pub fn sup_error_bound(n: usize, q: f64, lipschitz: f64, h: u32, xi_max: f64) -> f64 {
    3.0 * (n as f64).sqrt() * lipschitz / h as f64 * (1.0 + xi_max * xi_max).powf(0.5 * q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{normalize_at_zero, Coefficient};

    fn example_iv() -> DensityModel {
        normalize_at_zero(&DensityModel::example_iv(Domain::cube(2, 3.0), 2.0, 3.0).unwrap())
    }

    #[test]
    fn autonomous_model_is_reproduced() {
        let f = DensityModel::regularized_power(Domain::cube(2, 3.0), 2.5).unwrap();
        let a = Approximant::new(f.clone(), 8, &Domain::cube(2, 0.5)).unwrap();
        for x in [[0.1, 0.2], [-0.37, 0.5]] {
            let v = a.value(&x, &[1.0, -2.0]);
            assert_eq!(v, f.value(&x, &[1.0, -2.0]));
        }
        assert_eq!(sup_error(&a, 2.0, 4), 0.0);
    }

    #[test]
    fn zero_normalized_model_vanishes_at_origin() {
        let a = Approximant::new(example_iv(), 8, &Domain::cube(2, 0.5)).unwrap();
        assert_eq!(a.eval_fh(&[0.3, 0.1], &[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn pointwise_error_within_bound() {
        let a = Approximant::new(example_iv(), 16, &Domain::cube(2, 0.5)).unwrap();
        let err = sup_error(&a, 2.0, 6);
        let bound = sup_error_bound(2, 3.0, 0.5, 16, 2.0);
        assert!(err > 0.0 && err <= bound, "{err} vs {bound}");
    }

    #[test]
    fn hessian_is_convex_combination() {
        let f = DensityModel::double_phase(Domain::cube(2, 3.0), 2.0, 3.0, Coefficient::positive_part(1, 0.5), false).unwrap();
        let a = Approximant::new(f.clone(), 8, &Domain::cube(2, 0.5)).unwrap();
        let x = [0.11, 0.07];
        let xi = [1.5, -0.3];
        let mut h = vec![0.0; 4];
        a.hessian(&x, &xi, &mut h);
        let lam = crate::linalg::sym_eigenvalues(&h, 2)[0];
        let mut lo = f64::INFINITY;
        for (k, _) in a.cover().partition_weights(&x).unwrap() {
            let c = a.cover().center(&k);
            lo = lo.min(crate::linalg::sym_eigenvalues(&f.hess_xi(&c, &xi).unwrap(), 2)[0]);
        }
        assert!(lam >= lo - 1e-10);
    }

    #[test]
    fn dphi_quotient_respects_bound() {
        let f = DensityModel::regularized_power(Domain::cube(1, 3.0), 2.0).unwrap();
        let a = Approximant::new(f, 8, &Domain::cube(1, 0.5)).unwrap();
        let q = dphi_bound_check(&a, 500, 1).unwrap();
        assert!(q > 0.25 && q <= 4.0, "{q}");
    }

    #[test]
    fn home_weight_is_flat_at_cube_center() {
        // by symmetry of the neighbours, D_x φ vanishes at a centre
        let cover = CubeCover::new(8, &Domain::cube(2, 0.5)).unwrap();
        let d = 1e-6;
        let w = |x: [f64; 2]| cover.partition_weights(&x).unwrap().iter().find(|(k, _)| k == &vec![1, 1]).map(|p| p.1).unwrap_or(0.0);
        let c = [0.25, 0.25];
        assert!((w([c[0] + d, c[1]]) - w([c[0] - d, c[1]])).abs() < 1e-12);
    }
}
