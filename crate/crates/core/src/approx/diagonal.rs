use super::{mollify, Approximant, CubeCover};
use crate::density::{Density, DensityModel, Domain};
use crate::error::{Error, Result};
use crate::solve::{discrete_energy, DiscreteField};
use crate::verify::check_gap;

#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalOptions {
    /// Largest scale tried before giving up.
    pub h_max: u32,
}

impl Default for DiagonalOptions {
    fn default() -> Self {
        Self { h_max: 512 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalStep {
    pub k: usize,
    pub eps: f64,
    pub h: u32,
    /// `|∫f_h(x,Du_ε) − ∫f(x,Du_ε)|`.
    pub gap: f64,
    /// `∫f_h(x,Du_ε)`.
    pub energy: f64,
    /// `|∫f_h(x,Du_ε) − ∫f(x,Du)|`.
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalSelection {
    pub steps: Vec<DiagonalStep>,
    /// `∫f(x,Du)` on the target.
    pub reference_energy: f64,
}

impl DiagonalSelection {
    pub fn final_residual(&self) -> Option<f64> {
        self.steps.last().map(|s| s.residual)
    }
}

/// For `k = 1, 2, …` mollifies `u` at `eps_seq[k−1]` and picks the smallest
/// admissible `h_k > h_{k−1}` whose energy gap is below `2^{−k}`. Energies
/// are midpoint-rule quadratures over the grid of `u` restricted to `target`.
pub fn diagonal_select(
    model: &DensityModel,
    u: &DiscreteField,
    eps_seq: &[f64],
    target: &Domain,
    opts: &DiagonalOptions,
) -> Result<DiagonalSelection> {
    let env = model.envelope();
    if !check_gap(env.p, env.q, env.n)? {
        return Err(Error::GapViolated { p: env.p, q: env.q, n: env.n });
    }
    if eps_seq.is_empty() || eps_seq.iter().any(|e| !(*e > 0.0) || !e.is_finite()) || eps_seq.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::BadEpsSequence);
    }
    let reference_energy = discrete_energy(model, &u.restrict(target)?);
    if !reference_energy.is_finite() {
        return Err(Error::InfiniteEnergy);
    }
    let h_min = CubeCover::min_admissible_h(target, model.domain())
        .ok_or_else(|| Error::invalid("target", "target must lie strictly inside the model domain"))?;

    let mut steps = Vec::with_capacity(eps_seq.len());
    let mut h_prev = 0u32;
    for (i, &eps) in eps_seq.iter().enumerate() {
        let k = i + 1;
        let tol = 0.5f64.powi(k as i32);
        let u_k = mollify(u, eps, target)?;
        let exact = discrete_energy(model, &u_k);
        if !exact.is_finite() {
            return Err(Error::InfiniteEnergy);
        }
        let mut best = (0u32, f64::INFINITY);
        let mut chosen = None;
        for h in h_min.max(h_prev + 1)..=opts.h_max {
            let approx = Approximant::new(model.clone(), h, target)?;
            let energy = discrete_energy(&approx, &u_k);
            let gap = (energy - exact).abs();
            if gap < tol {
                chosen = Some(DiagonalStep { k, eps, h, gap, energy, residual: (energy - reference_energy).abs() });
                break;
            }
            if gap < best.1 {
                best = (h, gap);
            }
        }
        let step = chosen.ok_or(Error::NoAdmissibleScale { k, h_max: opts.h_max, best_h: best.0, best_gap: best.1 })?;
        h_prev = step.h;
        steps.push(step);
    }
    Ok(DiagonalSelection { steps, reference_energy })
}
