use super::cutoff::CutoffPsi;
use crate::density::{Domain, Shape};
use crate::error::{Error, Result};

/// Closed cubes of side `2/h` centred on the lattice `(2/h)ℤⁿ`, restricted
/// to a neighbourhood of a target set `B_R`.
///
/// Weights are available on the *covered region*: the bounding box of the
/// target dilated by `1/h`. Every lattice point within `3/h` (sup-norm) of
/// that region belongs to the cover.
#[derive(Clone, Debug, PartialEq)]
pub struct CubeCover {
    h: u32,
    n: usize,
    target: Domain,
    /// Per-axis inclusive lattice index range.
    k_range: Vec<(i64, i64)>,
    region: Domain,
}

/// Weights of one point: per-axis `(first lattice index, normalized weights)`.
#[derive(Clone, Debug)]
pub(crate) struct AxisWeights {
    pub axes: Vec<(i64, [f64; 3], usize)>,
}

impl CubeCover {
    /// Cover of `target` at scale `h`, without checking admissibility.
    pub fn new(h: u32, target: &Domain) -> Result<Self> {
        if h == 0 {
            return Err(Error::invalid("h", "scale must be a positive integer"));
        }
        let n = target.dim();
        let hf = h as f64;
        let (lo, hi) = target.bounding_box();
        let k_range = lo
            .iter()
            .zip(&hi)
            .map(|(l, u)| (((l - 4.0 / hf) * hf / 2.0).floor() as i64, ((u + 4.0 / hf) * hf / 2.0).ceil() as i64))
            .collect();
        let region = Domain::new(target.center().to_vec(), Shape::Box, target.extent() + 1.0 / hf)?;
        Ok(Self { h, n, target: target.clone(), k_range, region })
    }

    /// Cover of `target` at scale `h`, rejecting `h` unless
    /// `12√n/h < dist(target, ∂omega)`.
    pub fn admissible(h: u32, target: &Domain, omega: &Domain) -> Result<Self> {
        let lhs = 12.0 * (target.dim() as f64).sqrt() / h.max(1) as f64;
        let dist = omega.inner_distance(target);
        if h == 0 || !(lhs < dist) {
            return Err(Error::InadmissibleScale { h, lhs, dist });
        }
        Self::new(h, target)
    }

    /// Smallest admissible integer scale for `target` inside `omega`.
    pub fn min_admissible_h(target: &Domain, omega: &Domain) -> Option<u32> {
        let dist = omega.inner_distance(target);
        if !(dist > 0.0) {
            return None;
        }
        let h = (12.0 * (target.dim() as f64).sqrt() / dist).floor() as u32 + 1;
        Some(h)
    }

    pub fn h(&self) -> u32 {
        self.h
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn side(&self) -> f64 {
        2.0 / self.h as f64
    }

    pub fn target(&self) -> &Domain {
        &self.target
    }

    /// Where partition weights are defined.
    pub fn covered_region(&self) -> &Domain {
        &self.region
    }

    pub fn center_count(&self) -> usize {
        self.k_range.iter().map(|(a, b)| (b - a + 1) as usize).product()
    }

    /// Centre of the cube with lattice index `k`.
    pub fn center(&self, k: &[i64]) -> Vec<f64> {
        k.iter().map(|k| 2.0 * *k as f64 / self.h as f64).collect()
    }

    /// Normalized per-axis weights. The 1-D cutoff sums factor, so
    /// `σ_h = Π σ_j` and `φ_i = Π χ_j/σ_j`.
    pub(crate) fn axis_weights(&self, x: &[f64]) -> Result<(AxisWeights, f64)> {
        if x.len() != self.n || !self.region.contains(x) {
            return Err(Error::OutsideCover { x: x.to_vec() });
        }
        let hf = self.h as f64;
        let mut sigma = 1.0;
        let mut axes = Vec::with_capacity(self.n);
        for (j, &xj) in x.iter().enumerate() {
            let u = xj * hf;
            let k0 = (u / 2.0).round() as i64 - 1;
            let mut w = [0.0; 3];
            let mut s = 0.0;
            for (i, wi) in w.iter_mut().enumerate() {
                let k = k0 + i as i64;
                *wi = CutoffPsi::chi(u - 2.0 * k as f64);
                s += *wi;
            }
            // trim leading zeros so the active range starts at a positive weight
            let mut first = 0;
            while first < 2 && w[first] == 0.0 {
                first += 1;
            }
            let mut len = 3 - first;
            while len > 1 && w[first + len - 1] == 0.0 {
                len -= 1;
            }
            let mut packed = [0.0; 3];
            for i in 0..len {
                packed[i] = w[first + i] / s;
            }
            let kf = k0 + first as i64;
            let (lo, hi) = self.k_range[j];
            if kf < lo || kf + len as i64 - 1 > hi {
                return Err(Error::OutsideCover { x: x.to_vec() });
            }
            sigma *= s;
            axes.push((kf, packed, len));
        }
        Ok((AxisWeights { axes }, sigma))
    }

    /// `σ_h(x) = Σ_i ψ(h(x − x_i))`.
    pub fn sigma(&self, x: &[f64]) -> Result<f64> {
        Ok(self.axis_weights(x)?.1)
    }

    /// Active lattice indices and their weights `φ_{i,h}(x)`; at most `3ⁿ`
    /// entries, all positive, summing to 1.
    pub fn partition_weights(&self, x: &[f64]) -> Result<Vec<(Vec<i64>, f64)>> {
        let (aw, _) = self.axis_weights(x)?;
        let mut out = vec![(Vec::with_capacity(self.n), 1.0)];
        for (k0, w, len) in &aw.axes {
            let mut next = Vec::with_capacity(out.len() * len);
            for (idx, wt) in &out {
                for i in 0..*len {
                    let mut k = idx.clone();
                    k.push(k0 + i as i64);
                    next.push((k, wt * w[i]));
                }
            }
            out = next;
        }
        out.retain(|p| p.1 > 0.0);
        Ok(out)
    }
}
