//! Sampling audits of a density against the convexity, growth and
//! x-regularity assumptions, the gap condition and coercivity.
//!
//! Every estimator returns the best constant certified on the sample set:
//! an infimum for `m`, suprema for `M`, `K` and `H`.

mod grid;
mod h5;

pub use grid::SampleGrid;
pub use h5::{check_h5, h5_curve, H5Options, H5Result};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::density::{Density, DensityModel};
use crate::error::{Error, Result};
use crate::linalg::{dist, sym_eigenvalues};

/// Relative slack allowed between declared and measured constants.
pub const AUDIT_SLACK: f64 = 0.05;
/// Absolute floor below which a measured x-regularity constant counts as 0.
pub const FD_FLOOR: f64 = 1e-8;

fn check_samples<D: Density + ?Sized>(model: &D, grid: &SampleGrid) -> Result<()> {
    if grid.dim() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), got: grid.dim() });
    }
    if let Some(x) = grid.x_samples.iter().find(|x| !model.domain().contains(x)) {
        return Err(Error::OutsideDomain { x: x.clone() });
    }
    Ok(())
}

/// Per-x reduction over all ξ, in parallel over x; the first error in sample
/// order wins.
fn fold_x<D, T, F>(model: &D, grid: &SampleGrid, f: F) -> Result<Vec<T>>
where
    D: Density + ?Sized,
    T: Send,
    F: Fn(&[f64]) -> Result<T> + Sync + Send,
{
    check_samples(model, grid)?;
    grid.x_samples.par_iter().map(|x| f(x)).collect::<Vec<_>>().into_iter().collect()
}

/// Largest `m` with `λ_min(f_ξξ) ≥ m·(1+|ξ|²)^{(p-2)/2}` on the samples.
pub fn estimate_m<D: Density + ?Sized>(model: &D, grid: &SampleGrid) -> Result<f64> {
    let n = model.dim();
    let p = model.envelope().p;
    let per_x = fold_x(model, grid, |x| {
        let mut h = vec![0.0; n * n];
        let mut best = (f64::INFINITY, Vec::new());
        for xi in grid.all_xi() {
            model.hessian(x, xi, &mut h);
            if h.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteHessian { x: x.to_vec(), xi: xi.clone() });
            }
            let lam = sym_eigenvalues(&h, n)[0];
            let r = lam / grid.weight(crate::linalg::dot(xi, xi), p - 2.0);
            if r < best.0 {
                best = (r, xi.clone());
            }
        }
        Ok((best.0, x.to_vec(), best.1))
    })?;
    let (m, x, xi) = per_x.into_iter().fold((f64::INFINITY, vec![], vec![]), |a, b| if b.0 < a.0 { b } else { a });
    if m < 0.0 {
        return Err(Error::ConvexityViolation { value: m, x, xi });
    }
    Ok(m)
}

fn spectral_ratios<D: Density + ?Sized>(model: &D, grid: &SampleGrid) -> Result<Vec<(f64, f64)>> {
    let n = model.dim();
    let q = model.envelope().q;
    let xis: Vec<&Vec<f64>> = grid.all_xi().collect();
    let per_x = fold_x(model, grid, |x| {
        let mut h = vec![0.0; n * n];
        let mut out = Vec::with_capacity(xis.len());
        for xi in &xis {
            model.hessian(x, xi, &mut h);
            if h.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteHessian { x: x.to_vec(), xi: xi.to_vec() });
            }
            let e = sym_eigenvalues(&h, n);
            let norm = e[0].abs().max(e[n - 1].abs());
            let r2 = crate::linalg::dot(xi, xi);
            out.push((r2.sqrt(), norm / grid.weight(r2, q - 2.0)));
        }
        Ok(out)
    })?;
    // max over x for each ξ
    let mut best: Vec<(f64, f64)> = xis.iter().map(|xi| (crate::linalg::norm(xi), 0.0)).collect();
    for row in per_x {
        for (b, (_, r)) in best.iter_mut().zip(row) {
            b.1 = b.1.max(r);
        }
    }
    Ok(best)
}

/// Smallest `M` with `|f_ξξ| ≤ M·(1+|ξ|²)^{(q-2)/2}` on the samples.
pub fn estimate_big_m<D: Density + ?Sized>(model: &D, grid: &SampleGrid) -> Result<f64> {
    Ok(spectral_ratios(model, grid)?.into_iter().map(|(_, r)| r).fold(0.0, f64::max))
}

/// Log-log slope of the running Hessian bound `M(c)` (samples with
/// `|ξ| ≤ c`) against the cap `c`. A correct envelope gives a slope near
/// zero; a declared `q` below the true growth makes it grow.
pub fn growth_slope<D: Density + ?Sized>(model: &D, grid: &SampleGrid) -> Result<f64> {
    let mut ratios = spectral_ratios(model, grid)?;
    ratios.sort_by(|a, b| a.0.total_cmp(&b.0));
    let top = ratios.last().map(|r| r.0).unwrap_or(grid.xi_cap);
    let lo = grid.xi_cap / 4.0;
    if !(top > lo) {
        return Ok(0.0);
    }
    let steps = 8;
    let mut pts = Vec::new();
    for i in 0..=steps {
        let c = lo * (top / lo).powf(i as f64 / steps as f64);
        let m = ratios.iter().filter(|r| r.0 <= c * (1.0 + 1e-12)).map(|r| r.1).fold(0.0, f64::max);
        if m > 0.0 {
            pts.push((c.ln(), m.ln()));
        }
    }
    if pts.len() < 2 {
        return Ok(0.0);
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Ok(sxy / sxx)
}

/// Smallest `K` with `|D_x ∇_ξ f|_F ≤ K·(1+|ξ|²)^{(q-1)/2}`, using central
/// differences of step `dx` in each spatial direction.
pub fn estimate_k<D: Density + ?Sized>(model: &D, grid: &SampleGrid, dx: f64) -> Result<f64> {
    let n = model.dim();
    let q = model.envelope().q;
    let dom = model.domain();
    let per_x = fold_x(model, grid, |x| {
        let mut plus = x.to_vec();
        let mut minus = x.to_vec();
        for j in 0..n {
            plus[j] += dx;
            minus[j] -= dx;
            if !dom.contains(&plus) || !dom.contains(&minus) {
                return Err(Error::StencilOutside { x: x.to_vec(), step: dx });
            }
            plus[j] = x[j];
            minus[j] = x[j];
        }
        let mut gp = vec![0.0; n];
        let mut gm = vec![0.0; n];
        let mut best: f64 = 0.0;
        for xi in grid.all_xi() {
            let mut fro = 0.0;
            for j in 0..n {
                plus[j] += dx;
                minus[j] -= dx;
                model.gradient(&plus, xi, &mut gp);
                model.gradient(&minus, xi, &mut gm);
                plus[j] = x[j];
                minus[j] = x[j];
                for i in 0..n {
                    let d = (gp[i] - gm[i]) / (2.0 * dx);
                    fro += d * d;
                }
            }
            best = best.max(fro.sqrt() / grid.weight(crate::linalg::dot(xi, xi), q - 1.0));
        }
        Ok(best)
    })?;
    Ok(per_x.into_iter().fold(0.0, f64::max))
}

/// Smallest `H` with `|g(x,ξ) − g(y,ξ)| ≤ H|x−y|(1+|ξ|²)^{q/2}` where
/// `g = f − f(·,0)`, over `pair_count` random pairs. The subtraction is done
/// here, so normalizing beforehand is harmless but not required.
pub fn estimate_h<D: Density + ?Sized>(model: &D, grid: &SampleGrid, pair_count: usize) -> Result<f64> {
    check_samples(model, grid)?;
    let n = model.dim();
    let q = model.envelope().q;
    let dom = model.domain();
    let mut rng = ChaCha8Rng::seed_from_u64(grid.seed ^ 0xd1b5_4a32_d192_ed03);
    let scale = grid.region().extent();
    let mut pairs = Vec::with_capacity(pair_count);
    for i in 0..pair_count {
        let x = grid.x_samples[i % grid.x_samples.len()].clone();
        let dir: Vec<f64> = {
            let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let r = crate::linalg::norm(&v).max(1e-12);
            v.into_iter().map(|c| c / r).collect()
        };
        let mut delta = scale * 10f64.powf(rng.gen_range(-4.0..0.0));
        let mut y: Vec<f64>;
        loop {
            y = x.iter().zip(&dir).map(|(a, d)| a + delta * d).collect();
            if dom.contains(&y) {
                break;
            }
            y = x.iter().zip(&dir).map(|(a, d)| a - delta * d).collect();
            if dom.contains(&y) {
                break;
            }
            delta *= 0.5;
        }
        if dist(&x, &y) >= 1e-8 {
            pairs.push((x, y));
        }
    }
    let zero = vec![0.0; n];
    let per_pair: Vec<f64> = pairs
        .par_iter()
        .map(|(x, y)| {
            let d = dist(x, y);
            let (fx0, fy0) = (model.value(x, &zero), model.value(y, &zero));
            grid.all_xi()
                .map(|xi| {
                    let g = (model.value(x, xi) - fx0) - (model.value(y, xi) - fy0);
                    g.abs() / (d * grid.weight(crate::linalg::dot(xi, xi), q))
                })
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(per_pair.into_iter().fold(0.0, f64::max))
}

/// The gap condition `q ≤ p(n+1)/n`, compared as `q·n ≤ p·(n+1)` with a
/// relative slack of 1e-12.
pub fn check_gap(p: f64, q: f64, n: usize) -> Result<bool> {
    crate::density::check_exponents(p, q)?;
    if n == 0 {
        return Err(Error::invalid("n", "dimension must be at least 1"));
    }
    let lhs = q * n as f64;
    let rhs = p * (n + 1) as f64;
    Ok(lhs <= rhs + 1e-12 * rhs)
}

/// Exact form of [`check_gap`] for rational exponents `p = pn/pd`, `q = qn/qd`.
pub fn check_gap_rational(p: (i64, i64), q: (i64, i64), n: usize) -> Result<bool> {
    let (pn, pd) = p;
    let (qn, qd) = q;
    if pd <= 0 || qd <= 0 {
        return Err(Error::InvalidExponents("denominators must be positive".into()));
    }
    if pn <= pd || (qn as i128) * (pd as i128) < (pn as i128) * (qd as i128) {
        return Err(Error::InvalidExponents(format!("need 1 < p <= q, got p={pn}/{pd}, q={qn}/{qd}")));
    }
    let n = n as i128;
    // q n <= p (n+1)  <=>  qn·n·pd <= pn·(n+1)·qd
    Ok((qn as i128) * n * (pd as i128) <= (pn as i128) * (n + 1) * (qd as i128))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Coercivity {
    pub c: f64,
    pub c_omega: f64,
    /// `c > 0`: the bound `f ≥ c|ξ|^p − c_Ω` holds nontrivially on the samples.
    pub holds: bool,
}

/// Fits `f(x,ξ) ≥ c|ξ|^p − c_Ω` with `c_Ω = max_x f(x,0) + H·diam(Ω)` and
/// `c` the largest constant compatible with the samples.
pub fn check_coercivity<D: Density + ?Sized>(model: &D, grid: &SampleGrid) -> Result<Coercivity> {
    check_samples(model, grid)?;
    let n = model.dim();
    let env = model.envelope();
    let zero = vec![0.0; n];
    let f0 = grid.x_samples.iter().map(|x| model.value(x, &zero)).fold(f64::NEG_INFINITY, f64::max);
    let c_omega = f0 + env.lipschitz_x * model.domain().diameter();
    let c = grid
        .x_samples
        .par_iter()
        .map(|x| {
            grid.all_xi()
                .filter(|xi| xi.iter().any(|v| *v != 0.0))
                .map(|xi| (model.value(x, xi) + c_omega) / crate::linalg::norm(xi).powf(env.p))
                .fold(f64::INFINITY, f64::min)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    Ok(Coercivity { c, c_omega, holds: c > 0.0 })
}

/// Number of samples violating `f(x,ξ) ≥ c|ξ|^p − c_Ω` for a given pair,
/// beyond a relative rounding allowance of 1e-12.
pub fn coercivity_violations<D: Density + ?Sized>(model: &D, grid: &SampleGrid, c: f64, c_omega: f64) -> Result<usize> {
    check_samples(model, grid)?;
    let p = model.envelope().p;
    Ok(grid
        .x_samples
        .iter()
        .map(|x| {
            grid.all_xi()
                .filter(|xi| {
                    let lower = c * crate::linalg::norm(xi).powf(p) - c_omega;
                    model.value(x, xi) < lower - 1e-12 * (1.0 + lower.abs())
                })
                .count()
        })
        .sum())
}

/// Audit knobs beyond the sample grid.
#[derive(Clone, Debug)]
pub struct AuditOptions {
    pub eps_list: Vec<f64>,
    /// Centre of the (H5) balls; defaults to the domain centre.
    pub h5_point: Option<Vec<f64>>,
    pub h5: H5Options,
    pub fd_step: f64,
    pub pair_count: usize,
}

impl Default for AuditOptions {
    fn default() -> Self {
        Self { eps_list: vec![0.2, 0.1, 0.05, 0.025], h5_point: None, h5: H5Options::default(), fd_step: 1e-4, pair_count: 400 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AssumptionCheck {
    pub name: &'static str,
    pub declared: f64,
    pub measured: f64,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct AssumptionReport {
    pub m_measured: f64,
    pub big_m_measured: f64,
    pub k_measured: f64,
    pub h_measured: f64,
    pub gap_ok: bool,
    pub coercivity: Coercivity,
    pub h5_curve: Vec<(f64, f64)>,
    pub h5_heuristic: bool,
    pub h5_ok: bool,
    pub growth_slope: f64,
    pub envelope_mismatch: bool,
    pub checks: Vec<AssumptionCheck>,
    pub sample_meta: String,
}

impl AssumptionReport {
    /// Every constant within slack, gap condition, (H5) and growth slope.
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass) && self.gap_ok && self.h5_ok && !self.envelope_mismatch
    }
}

/// Measures every constant and compares it with the declared envelope.
pub fn audit(model: &DensityModel, grid: &SampleGrid, opts: &AuditOptions) -> Result<AssumptionReport> {
    let env = model.envelope().clone();
    let m = estimate_m(model, grid)?;
    let big_m = estimate_big_m(model, grid)?;
    let slope = growth_slope(model, grid)?;
    let k = estimate_k(model, grid, opts.fd_step)?;
    let h = estimate_h(model, grid, opts.pair_count)?;
    let gap_ok = check_gap(env.p, env.q, env.n)?;
    let coercivity = check_coercivity(model, grid)?;

    let x0 = opts.h5_point.clone().unwrap_or_else(|| model.domain().center().to_vec());
    let curve = h5_curve(model, &x0, &opts.eps_list, &opts.h5)?;
    let h5_heuristic = curve.iter().any(|r| r.heuristic);
    let h5_curve: Vec<(f64, f64)> = curve.iter().map(|r| (r.eps, r.c_eps)).collect();
    let mut sorted = h5_curve.clone();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let h5_ok = sorted.iter().all(|(_, c)| *c >= 1.0 - 1e-12) && sorted.windows(2).all(|w| w[0].1 <= w[1].1 + 1e-9);

    let upper = |name, declared: f64, measured: f64| AssumptionCheck {
        name,
        declared,
        measured,
        pass: measured <= declared * (1.0 + AUDIT_SLACK) + FD_FLOOR,
    };
    let checks = vec![
        AssumptionCheck { name: "m", declared: env.convexity, measured: m, pass: m >= env.convexity * (1.0 - AUDIT_SLACK) },
        upper("M", env.hessian_bound, big_m),
        upper("K", env.mixed_bound, k),
        upper("H", env.lipschitz_x, h),
    ];
    Ok(AssumptionReport {
        m_measured: m,
        big_m_measured: big_m,
        k_measured: k,
        h_measured: h,
        gap_ok,
        coercivity,
        h5_curve,
        h5_heuristic,
        h5_ok,
        growth_slope: slope,
        envelope_mismatch: slope > 0.5,
        checks,
        sample_meta: grid.describe(),
    })
}
