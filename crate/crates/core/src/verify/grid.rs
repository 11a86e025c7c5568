use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::density::Domain;
use crate::error::{Error, Result};

/// Discretization of the "for every x, for every ξ" quantifiers.
///
/// `xi_samples` all satisfy `|ξ| ≤ xi_cap`; the optional `ladder` holds
/// log-spaced radii beyond the cap used to expose wrong growth exponents.
#[derive(Clone, Debug)]
pub struct SampleGrid {
    pub x_samples: Vec<Vec<f64>>,
    pub xi_samples: Vec<Vec<f64>>,
    pub ladder: Vec<Vec<f64>>,
    pub xi_cap: f64,
    pub seed: u64,
    star: bool,
    region: Domain,
    n_xi: usize,
}

fn random_direction(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let r = crate::linalg::norm(&v);
        if r > 1e-3 && r <= 1.0 {
            return v.into_iter().map(|c| c / r).collect();
        }
    }
}

fn random_point(rng: &mut ChaCha8Rng, region: &Domain) -> Vec<f64> {
    let n = region.dim();
    loop {
        let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let inside = match region.shape() {
            crate::density::Shape::Box => true,
            crate::density::Shape::Ball => crate::linalg::norm(&u) <= 1.0,
        };
        if inside {
            return u.iter().zip(region.center()).map(|(c, o)| o + region.extent() * c).collect();
        }
    }
}

impl SampleGrid {
    /// `n_x` points uniform in `region` and `n_xi` gradients uniform in
    /// radius on `[0, xi_cap]`, plus `ξ = 0` and `xi_cap·e₁`.
    pub fn new(region: Domain, n_x: usize, n_xi: usize, xi_cap: f64, seed: u64) -> Result<Self> {
        if n_x == 0 || n_xi == 0 {
            return Err(Error::invalid("samples", "sample grid must be nonempty"));
        }
        if !(xi_cap > 0.0 && xi_cap.is_finite()) {
            return Err(Error::invalid("xi_cap", "must be positive and finite"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x_samples = (0..n_x).map(|_| random_point(&mut rng, &region)).collect();
        let mut grid = Self {
            x_samples,
            xi_samples: Vec::new(),
            ladder: Vec::new(),
            xi_cap,
            seed,
            star: false,
            region,
            n_xi,
        };
        grid.fill_xi();
        Ok(grid)
    }

    /// Samples a concentric copy of `domain` shrunk to 90%, leaving room for
    /// finite-difference stencils.
    pub fn for_domain(domain: &Domain, n_x: usize, n_xi: usize, xi_cap: f64, seed: u64) -> Result<Self> {
        Self::new(domain.with_extent(0.9 * domain.extent())?, n_x, n_xi, xi_cap, seed)
    }

    fn fill_xi(&mut self) {
        let n = self.region.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x9e37_79b9_7f4a_7c15);
        let lo = if self.star { 1.0f64.min(self.xi_cap) } else { 0.0 };
        let mut xs = Vec::with_capacity(self.n_xi + 2);
        let mut e1 = vec![0.0; n];
        e1[0] = self.xi_cap;
        if self.star {
            let mut unit = vec![0.0; n];
            unit[0] = lo;
            xs.push(unit);
        } else {
            xs.push(vec![0.0; n]);
        }
        xs.push(e1);
        for _ in 0..self.n_xi {
            let r = rng.gen_range(lo..=self.xi_cap);
            xs.push(random_direction(&mut rng, n).into_iter().map(|c| c * r).collect());
        }
        self.xi_samples = xs;
    }

    /// Adds `count` log-spaced radii from `xi_cap` up to `max_radius` along
    /// random directions.
    pub fn with_ladder(mut self, max_radius: f64, count: usize) -> Self {
        let n = self.region.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x5851_f42d_4c95_7f2d);
        self.ladder = (1..=count)
            .filter(|_| max_radius > self.xi_cap)
            .map(|i| {
                let t = i as f64 / count as f64;
                let r = self.xi_cap * (max_radius / self.xi_cap).powf(t);
                random_direction(&mut rng, n).into_iter().map(|c| c * r).collect()
            })
            .collect();
        self
    }

    /// Restricts every ξ-sample to `|ξ| ≥ 1` and switches the weights to
    /// pure powers of `|ξ|`, for the large-|ξ| variants of the assumptions.
    pub fn star(mut self) -> Self {
        self.star = true;
        self.fill_xi();
        self
    }

    pub fn is_star(&self) -> bool {
        self.star
    }

    pub fn region(&self) -> &Domain {
        &self.region
    }

    pub fn dim(&self) -> usize {
        self.region.dim()
    }

    /// Regular samples followed by the ladder.
    pub fn all_xi(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.xi_samples.iter().chain(self.ladder.iter())
    }

    /// `(1+|ξ|²)^{e/2}`, or `|ξ|^e` in star mode.
    #[inline]
    pub fn weight(&self, r2: f64, e: f64) -> f64 {
        if self.star {
            r2.powf(0.5 * e)
        } else {
            (1.0 + r2).powf(0.5 * e)
        }
    }

    pub fn describe(&self) -> String {
        format!(
            "x={} xi={} ladder={} cap={} seed={}{}",
            self.x_samples.len(),
            self.xi_samples.len(),
            self.ladder.len(),
            self.xi_cap,
            self.seed,
            if self.star { " star" } else { "" }
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn samples_respect_bounds() {
        let g = SampleGrid::new(Domain::ball(2, 0.5), 200, 300, 7.0, 3).unwrap().with_ladder(1e3, 10);
        assert!(g.x_samples.iter().all(|x| crate::linalg::norm(x) <= 0.5 + 1e-15));
        assert!(g.xi_samples.iter().all(|x| crate::linalg::norm(x) <= 7.0 + 1e-12));
        let top = g.ladder.last().unwrap();
        assert!((crate::linalg::norm(top) - 1e3).abs() < 1e-9);
        let s = g.clone().star();
        assert!(s.xi_samples.iter().all(|x| crate::linalg::norm(x) >= 1.0 - 1e-12));
    }

    #[test]
    fn seeded_sampling_is_reproducible() {
        let a = SampleGrid::new(Domain::cube(3, 1.0), 10, 10, 5.0, 42).unwrap();
        let b = SampleGrid::new(Domain::cube(3, 1.0), 10, 10, 5.0, 42).unwrap();
        assert_eq!(a.x_samples, b.x_samples);
        assert_eq!(a.xi_samples, b.xi_samples);
    }
}
