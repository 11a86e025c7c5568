//! Dirichlet problems on tensor grids: discrete energies, a nonlinear
//! conjugate-gradient minimizer, infinity regularization and interior
//! gradient diagnostics.

mod energy;
mod grid;
mod precond;

pub use energy::{cell_gradients, discrete_energy, discrete_energy_gradient};
pub use grid::{DiscreteField, Grid};

use energy::{energy_and_gradient_with, CellStencil};
use precond::DirichletPreconditioner;

use crate::density::{Density, DensityModel, Domain, GrowthEnvelope};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm};

#[derive(Clone, Debug, PartialEq)]
pub struct SolveConfig {
    /// Stop once the discrete L² norm of the energy gradient,
    /// `|∇E| / vol^{1/2}`, falls below this.
    pub grad_tol: f64,
    pub max_iters: usize,
    /// Armijo sufficient-decrease parameter.
    pub c1: f64,
    /// Backtracking factor.
    pub backtrack: f64,
    /// Polak–Ribière restart period.
    pub restart_every: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self { grad_tol: 1e-8, max_iters: 20_000, c1: 1e-4, backtrack: 0.5, restart_every: 50 }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.grad_tol > 0.0) {
            return Err(Error::InvalidSolveConfig("grad_tol must be positive".into()));
        }
        if !(self.c1 > 0.0 && self.c1 < 0.5) {
            return Err(Error::InvalidSolveConfig("c1 must lie in (0, 1/2)".into()));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::InvalidSolveConfig("backtrack must lie in (0, 1)".into()));
        }
        if self.max_iters == 0 || self.restart_every == 0 {
            return Err(Error::InvalidSolveConfig("max_iters and restart_every must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub field: DiscreteField,
    pub energy: f64,
    pub grad_norm: f64,
    pub iters: usize,
    pub converged: bool,
    /// Energy of the starting field followed by every accepted iterate.
    pub energy_trace: Vec<f64>,
}

impl SolveResult {
    pub fn initial_energy(&self) -> f64 {
        self.energy_trace[0]
    }
}

/// `|ξ|²`, for the harmonic extension.
struct Dirichlet {
    domain: Domain,
    envelope: GrowthEnvelope,
}

impl Density for Dirichlet {
    fn dim(&self) -> usize {
        self.domain.dim()
    }
    fn domain(&self) -> &Domain {
        &self.domain
    }
    fn envelope(&self) -> &GrowthEnvelope {
        &self.envelope
    }
    fn value(&self, _: &[f64], xi: &[f64]) -> f64 {
        dot(xi, xi)
    }
    fn gradient(&self, _: &[f64], xi: &[f64], out: &mut [f64]) {
        for (o, x) in out.iter_mut().zip(xi) {
            *o = 2.0 * x;
        }
    }
    fn hessian(&self, _: &[f64], xi: &[f64], out: &mut [f64]) {
        let n = xi.len();
        out.iter_mut().for_each(|o| *o = 0.0);
        for i in 0..n {
            out[i * n + i] = 2.0;
        }
    }
}

fn check_field<D: Density + ?Sized>(density: &D, field: &DiscreteField) -> Result<()> {
    let g = field.grid();
    if g.dim() != density.dim() {
        return Err(Error::DimensionMismatch { expected: density.dim(), got: g.dim() });
    }
    let (lo, hi) = g.domain().bounding_box();
    for x in [lo, hi] {
        if !density.domain().contains(&x) {
            return Err(Error::OutsideDomain { x });
        }
    }
    if field.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidGrid("field has non-finite values".into()));
    }
    Ok(())
}

/// Discrete harmonic extension of the boundary data: the minimizer of
/// `Σ vol·|Du_c|²`, by linear conjugate gradients.
pub fn harmonic_extension(boundary: &DiscreteField) -> DiscreteField {
    let grid = boundary.grid();
    let n = grid.dim();
    let quad = Dirichlet {
        domain: grid.domain().clone(),
        envelope: GrowthEnvelope::new(n, 2.0, 2.0, 2.0, 2.0, 0.0, 0.0).expect("valid"),
    };
    let st = CellStencil::new(grid);
    let pre = DirichletPreconditioner::new(grid);
    let mask = boundary.boundary_mask();
    let mut u: Vec<f64> = boundary.values().iter().zip(mask).map(|(v, b)| if *b { *v } else { 0.0 }).collect();
    // the preconditioner is the exact inverse Hessian: one Newton step, then
    // one refinement against rounding
    for _ in 0..2 {
        let (_, g) = energy_and_gradient_with(&quad, grid, &st, &u, mask);
        for (ui, zi) in u.iter_mut().zip(pre.apply(&g)) {
            *ui -= zi;
        }
    }
    boundary.with_interior(u).expect("same length")
}

/// Minimizes the discrete energy over fields sharing `boundary`'s boundary
/// data, starting from the harmonic extension.
pub fn minimize<D: Density + ?Sized>(density: &D, boundary: &DiscreteField, cfg: &SolveConfig) -> Result<SolveResult> {
    check_field(density, boundary)?;
    if density.degenerate() {
        return Err(Error::RawModel);
    }
    minimize_from(density, &harmonic_extension(boundary), cfg)
}

struct Problem<'a, D: ?Sized> {
    density: &'a D,
    grid: &'a Grid,
    st: CellStencil,
    mask: &'a [bool],
    norm_scale: f64,
}

impl<D: Density + ?Sized> Problem<'_, D> {
    fn eval(&self, u: &[f64]) -> (f64, Vec<f64>) {
        energy_and_gradient_with(self.density, self.grid, &self.st, u, self.mask)
    }

    fn grad_norm(&self, g: &[f64]) -> f64 {
        norm(g) * self.norm_scale
    }
}

fn step(u: &[f64], d: &[f64], alpha: f64) -> Vec<f64> {
    u.iter().zip(d).map(|(a, b)| a + alpha * b).collect()
}

/// Nonlinear conjugate gradients (Polak–Ribière+, periodic restarts),
/// preconditioned by the inverse discrete Laplacian, with an
/// Armijo backtracking line search, from `initial` (whose boundary values are
/// kept fixed).
pub fn minimize_from<D: Density + ?Sized>(density: &D, initial: &DiscreteField, cfg: &SolveConfig) -> Result<SolveResult> {
    cfg.validate()?;
    check_field(density, initial)?;
    if density.degenerate() {
        return Err(Error::RawModel);
    }
    let grid = initial.grid();
    let prob = Problem {
        density,
        grid,
        st: CellStencil::new(grid),
        mask: initial.boundary_mask(),
        norm_scale: 1.0 / grid.cell_volume().sqrt(),
    };
    let mut u = initial.values().to_vec();
    let (mut e, mut g) = prob.eval(&u);
    if !e.is_finite() {
        return Err(Error::InfiniteEnergy);
    }
    let mut trace = vec![e];
    let pre = DirichletPreconditioner::new(grid);
    let mut z = pre.apply(&g);
    let mut d: Vec<f64> = z.iter().map(|v| -v).collect();
    let mut alpha_guess = 1.0;
    let mut since_restart = 0;
    let mut iters = 0;
    let mut gnorm = prob.grad_norm(&g);

    while gnorm > cfg.grad_tol && iters < cfg.max_iters {
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            d = z.iter().map(|v| -v).collect();
            slope = dot(&g, &d);
            since_restart = 0;
        }
        let accepted = match line_search(&prob, &u, e, &d, slope, alpha_guess, cfg) {
            Some(s) => Some(s),
            None => {
                // one preconditioned steepest-descent retry before giving up
                d = z.iter().map(|v| -v).collect();
                slope = dot(&g, &d);
                since_restart = 0;
                line_search(&prob, &u, e, &d, slope, 1.0, cfg)
            }
        };
        let Some((alpha, u_new, e_new, g_new)) = accepted else {
            return Err(Error::LineSearchFailed { iter: iters, grad_norm: gnorm });
        };
        iters += 1;
        since_restart += 1;
        let z_new = pre.apply(&g_new);
        let beta = if since_restart >= cfg.restart_every {
            since_restart = 0;
            0.0
        } else {
            let num: f64 = g_new.iter().zip(z_new.iter().zip(&z)).map(|(a, (zn, zo))| a * (zn - zo)).sum();
            (num / dot(&g, &z)).max(0.0)
        };
        for (di, zi) in d.iter_mut().zip(&z_new) {
            *di = -zi + beta * *di;
        }
        alpha_guess = (2.0 * alpha).min(1.0);
        u = u_new;
        e = e_new;
        g = g_new;
        z = z_new;
        gnorm = prob.grad_norm(&g);
        trace.push(e);
    }
    Ok(SolveResult {
        field: initial.with_interior(u)?,
        energy: e,
        grad_norm: gnorm,
        iters,
        converged: gnorm <= cfg.grad_tol,
        energy_trace: trace,
    })
}

/// Returns `(α, u + αd, E, ∇E)` for an accepted step.
///
/// A trial step is first refined by a secant on the directional derivative,
/// then backtracked. Steps pass the Armijo test, or — once the energy
/// difference is below rounding — keep the energy within rounding of its
/// current value while shrinking the directional derivative.
fn line_search<D: Density + ?Sized>(
    prob: &Problem<'_, D>,
    u: &[f64],
    e0: f64,
    d: &[f64],
    slope: f64,
    alpha0: f64,
    cfg: &SolveConfig,
) -> Option<(f64, Vec<f64>, f64, Vec<f64>)> {
    // energy differences below this are rounding, not information
    let noise = 16.0 * f64::EPSILON * e0.abs().max(1.0);
    let accept = |alpha: f64, e: f64, g: &[f64]| {
        if !e.is_finite() {
            return false;
        }
        if e <= e0 + cfg.c1 * alpha * slope {
            return true;
        }
        e <= e0 + noise && dot(g, d).abs() <= 0.9 * slope.abs()
    };
    let mut alpha = alpha0;
    let trial = step(u, d, alpha);
    let (et, gt) = prob.eval(&trial);
    let slope_t = dot(&gt, d);
    if et.is_finite() && slope_t > slope {
        let a_star = alpha * slope / (slope - slope_t);
        if a_star.is_finite() && a_star > 0.0 {
            let cand = step(u, d, a_star);
            let (ec, gc) = prob.eval(&cand);
            if accept(a_star, ec, &gc) && (ec <= et || !accept(alpha, et, &gt)) {
                return Some((a_star, cand, ec, gc));
            }
        }
    }
    if accept(alpha, et, &gt) {
        return Some((alpha, trial, et, gt));
    }
    for _ in 0..60 {
        alpha *= cfg.backtrack;
        let cand = step(u, d, alpha);
        let (ec, gc) = prob.eval(&cand);
        if accept(alpha, ec, &gc) {
            return Some((alpha, cand, ec, gc));
        }
    }
    None
}

/// `f_k = f + (1/k)(1+|ξ|²)^{q/2}` with `q` from the model's envelope.
pub fn regularize_infinity(model: &DensityModel, k: f64) -> Result<DensityModel> {
    if !(k >= 1.0) || !k.is_finite() {
        return Err(Error::invalid("k", format!("regularization index must be >= 1, got {k}")));
    }
    Ok(DensityModel::penalized(model, 1.0 / k))
}

/// `max |Du_c|` over cells whose centres lie in the ball of radius `rho`
/// around the grid centre.
pub fn interior_sup_gradient(field: &DiscreteField, rho: f64) -> Result<f64> {
    let grid = field.grid();
    let half = grid.domain().extent();
    let h = grid.spacing();
    if !(rho > 0.0) || rho > half - 2.0 * h + 1e-12 * half {
        return Err(Error::RadiusTooLarge { rho, half_width: half, spacing: h });
    }
    let n = grid.dim();
    let center = grid.domain().center();
    let du = cell_gradients(field);
    let mut best: f64 = 0.0;
    for c in 0..grid.cell_count() {
        if crate::linalg::dist(&grid.cell_center(c), center) <= rho * (1.0 + 1e-12) {
            best = best.max(norm(&du[c * n..(c + 1) * n]));
        }
    }
    Ok(best)
}

/// `K = max_{0 ≤ t < 1} (1 − t^q) / (t^p + M(t^q − 1) + 1)`: dense grid,
/// then golden-section refinement around the best grid point.
pub fn compute_example_iv_k(p: f64, q: f64, m: f64) -> Result<f64> {
    if !(p > 1.0 && q > 1.0) || !p.is_finite() || !q.is_finite() {
        return Err(Error::InvalidExponents(format!("need p, q > 1, got p={p}, q={q}")));
    }
    let den = |t: f64| t.powf(p) + m * (t.powf(q) - 1.0) + 1.0;
    let ratio = |t: f64| (1.0 - t.powf(q)) / den(t);
    const STEPS: usize = 10_000;
    let mut best = (0usize, f64::NEG_INFINITY);
    for i in 0..STEPS {
        let t = i as f64 / STEPS as f64;
        let dv = den(t);
        if !(dv > 0.0) {
            return Err(Error::NonpositiveDenominator { t, value: dv });
        }
        let r = ratio(t);
        if r > best.1 {
            best = (i, r);
        }
    }
    let h = 1.0 / STEPS as f64;
    let (mut a, mut b) = ((best.0 as f64 - 1.0).max(0.0) * h, ((best.0 + 1) as f64 * h).min(1.0 - 1e-15));
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    for _ in 0..100 {
        if ratio(c) > ratio(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - phi * (b - a);
        d = a + phi * (b - a);
    }
    Ok(best.1.max(ratio(0.5 * (a + b))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::Coefficient;

    fn power(n: usize, p: f64) -> DensityModel {
        DensityModel::regularized_power(Domain::cube(n, 2.0), p).unwrap()
    }

    /// `ξ²` in 1-D as a double-phase model would give `(1+ξ²)`; build it directly.
    fn square(n: usize) -> DensityModel {
        let env = GrowthEnvelope::new(n, 2.0, 2.0, 2.0, 2.0, 0.0, 0.0).unwrap();
        DensityModel::custom(
            "square",
            Domain::cube(n, 2.0),
            env,
            |_, xi| dot(xi, xi),
            |_, xi, g| g.iter_mut().zip(xi).for_each(|(o, x)| *o = 2.0 * x),
            |_, xi, h| (0..xi.len()).for_each(|i| h[i * xi.len() + i] = 2.0),
        )
    }

    #[test]
    fn affine_energy_is_exact() {
        for nodes in [3, 9, 17] {
            let u = DiscreteField::from_fn(Grid::new(Domain::new(vec![0.5], crate::density::Shape::Box, 0.5).unwrap(), nodes).unwrap(), |x| x[0]);
            assert!((discrete_energy(&square(1), &u) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn double_phase_affine_energy() {
        let d = Domain::new(vec![0.5, 0.5], crate::density::Shape::Box, 0.5).unwrap();
        let f = DensityModel::double_phase(Domain::cube(2, 2.0), 2.0, 3.0, Coefficient::constant(1.0), false).unwrap();
        let want = 2.0 + 2f64.powf(1.5);
        for nodes in [9, 17] {
            let u = DiscreteField::from_fn(Grid::new(d.clone(), nodes).unwrap(), |x| x[0]);
            assert!((discrete_energy(&f, &u) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_matches_differences() {
        let f = DensityModel::double_phase(Domain::cube(2, 2.0), 2.0, 2.5, Coefficient::positive_part(1, 0.5), false).unwrap();
        let grid = Grid::cube(2, 1.0, 7).unwrap();
        let u = DiscreteField::from_fn(grid, |x| (3.0 * x[0]).sin() + x[1] * x[1]);
        let g = discrete_energy_gradient(&f, &u);
        for i in 0..u.values().len() {
            if u.boundary_mask()[i] {
                assert_eq!(g[i], 0.0);
                continue;
            }
            let h = 1e-6;
            let mut v = u.values().to_vec();
            v[i] += h;
            let ep = discrete_energy(&f, &u.with_interior(v.clone()).unwrap());
            v[i] -= 2.0 * h;
            let em = discrete_energy(&f, &u.with_interior(v).unwrap());
            let fd = (ep - em) / (2.0 * h);
            assert!((fd - g[i]).abs() <= 1e-6 * g[i].abs().max(1e-3), "{i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn affine_data_is_stationary_for_quadratics() {
        let u = DiscreteField::from_fn(Grid::cube(2, 1.0, 9).unwrap(), |x| 0.3 * x[0] - 2.0 * x[1] + 1.0);
        let g = discrete_energy_gradient(&square(2), &u);
        assert!(g.iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn one_dimensional_minimizer_is_affine() {
        let grid = Grid::new(Domain::new(vec![0.5], crate::density::Shape::Box, 0.5).unwrap(), 33).unwrap();
        let b = DiscreteField::from_fn(grid, |x| if x[0] > 0.5 { 1.0 } else { 0.0 });
        let r = minimize(&power(1, 3.0), &b, &SolveConfig::default()).unwrap();
        assert!(r.converged);
        let affine = DiscreteField::from_fn(b.grid().clone(), |x| x[0]);
        assert!(r.field.sup_distance(&affine) < 1e-6);
        assert!(r.energy_trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn harmonic_extension_reproduces_affine() {
        let b = DiscreteField::from_fn(Grid::cube(2, 1.0, 11).unwrap(), |x| x[0] + 0.5 * x[1]);
        let h = harmonic_extension(&b);
        assert!(h.sup_distance(&b) < 1e-10);
    }

    #[test]
    fn raw_models_are_rejected() {
        let f = DensityModel::double_phase(Domain::cube(2, 2.0), 1.5, 2.0, Coefficient::constant(1.0), true).unwrap();
        let b = DiscreteField::from_fn(Grid::cube(2, 1.0, 5).unwrap(), |x| x[0]);
        assert!(matches!(minimize(&f, &b, &SolveConfig::default()), Err(Error::RawModel)));
        let fk = regularize_infinity(&f, 2.0).unwrap();
        assert!(minimize(&fk, &b, &SolveConfig::default()).unwrap().converged);
    }

    #[test]
    fn regularization_adds_penalty() {
        let f = power(2, 2.0);
        let f1 = regularize_infinity(&f, 1.0).unwrap();
        assert_eq!(f1.eval(&[0.0, 0.0], &[0.0, 0.0]).unwrap(), 2.0);
        assert!(regularize_infinity(&f, 0.5).is_err());
    }

    #[test]
    fn sup_gradient_of_affine_field() {
        let u = DiscreteField::from_fn(Grid::cube(2, 1.0, 17).unwrap(), |x| 3.0 * x[0] - 4.0 * x[1]);
        assert!((interior_sup_gradient(&u, 0.5).unwrap() - 5.0).abs() < 1e-12);
        assert!(matches!(interior_sup_gradient(&u, 0.95), Err(Error::RadiusTooLarge { .. })));
    }

    #[test]
    fn example_iv_constant() {
        assert!((compute_example_iv_k(2.0, 4.0, 0.5).unwrap() - 2.0).abs() < 1e-12);
        assert!((compute_example_iv_k(3.0, 3.0, 0.5).unwrap() - 2.0).abs() < 1e-12);
        assert!(matches!(compute_example_iv_k(2.0, 4.0, 2.0), Err(Error::NonpositiveDenominator { .. })));
    }
}
