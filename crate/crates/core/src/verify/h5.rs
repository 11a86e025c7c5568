use crate::density::{DensityModel, Density, H5Selector};
use crate::error::{Error, Result};
use crate::linalg::dist;

/// Sampling resolution for the comparison-point check.
#[derive(Clone, Debug)]
pub struct H5Options {
    /// Largest |ξ| in the ratio test.
    pub xi_cap: f64,
    /// Radii in `(0, xi_cap]` (ξ = 0 is always included).
    pub radial_steps: usize,
    /// Directions per radius.
    pub directions: usize,
    /// Lattice points per ε along each axis (ignored when `spacing` is set).
    pub ball_resolution: usize,
    /// Absolute lattice spacing. Sample sets then nest as ε grows, and
    /// no extra sphere points are added.
    pub spacing: Option<f64>,
}

impl Default for H5Options {
    fn default() -> Self {
        Self { xi_cap: 20.0, radial_steps: 16, directions: 8, ball_resolution: 8, spacing: None }
    }
}

#[derive(Clone, Debug)]
pub struct H5Result {
    pub eps: f64,
    pub y_tilde: Vec<f64>,
    pub c_eps: f64,
    /// Ratios dropped because `f(y,ξ) < 1e-12`.
    pub skipped: usize,
    pub total: usize,
    /// True when ỹ came from the probe-set fallback.
    pub heuristic: bool,
}

/// Lattice points of spacing `h` centred at `x` inside the closed ball,
/// plus (without a fixed spacing) points on the sphere itself.
fn ball_points(x: &[f64], eps: f64, opts: &H5Options) -> Vec<Vec<f64>> {
    let n = x.len();
    let h = opts.spacing.unwrap_or(eps / opts.ball_resolution.max(1) as f64);
    let k = (eps / h + 1e-9).floor() as i64;
    let side = (2 * k + 1) as usize;
    let mut pts = Vec::new();
    let total = side.pow(n as u32);
    for idx in 0..total {
        let mut rem = idx;
        let mut off = vec![0.0; n];
        for o in off.iter_mut() {
            *o = ((rem % side) as i64 - k) as f64 * h;
            rem /= side;
        }
        if crate::linalg::norm(&off) <= eps * (1.0 + 1e-12) {
            pts.push(x.iter().zip(&off).map(|(a, b)| a + b).collect());
        }
    }
    if opts.spacing.is_none() {
        for d in sphere_directions(n, 8 * opts.ball_resolution.max(1)) {
            pts.push(x.iter().zip(&d).map(|(a, b)| a + eps * b).collect());
        }
    }
    pts
}

/// Deterministic unit directions: ±1 in 1-D, `count` angles in 2-D, axes and
/// diagonals otherwise.
fn sphere_directions(n: usize, count: usize) -> Vec<Vec<f64>> {
    match n {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..count)
            .map(|i| {
                let t = std::f64::consts::TAU * i as f64 / count as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        _ => {
            let mut out = Vec::new();
            for j in 0..n {
                for s in [1.0, -1.0] {
                    let mut v = vec![0.0; n];
                    v[j] = s;
                    out.push(v);
                }
            }
            for mask in 0..(1usize << n) {
                let v: Vec<f64> = (0..n)
                    .map(|j| if mask >> j & 1 == 1 { -1.0 } else { 1.0 } / (n as f64).sqrt())
                    .collect();
                out.push(v);
            }
            out
        }
    }
}

fn xi_probe(n: usize, opts: &H5Options) -> Vec<Vec<f64>> {
    let dirs = sphere_directions(n, opts.directions.max(1));
    let mut out = vec![vec![0.0; n]];
    for s in 1..=opts.radial_steps {
        let r = opts.xi_cap * s as f64 / opts.radial_steps as f64;
        for d in &dirs {
            out.push(d.iter().map(|c| c * r).collect());
        }
    }
    out
}

/// Picks ỹ in the closed ball `B̄_ε(x)` with the model's selector and
/// measures `c(ε) = max f(ỹ,ξ)/f(y,ξ)` over sampled `(y, ξ)`.
pub fn check_h5(model: &DensityModel, x: &[f64], eps: f64, opts: &H5Options) -> Result<H5Result> {
    if x.len() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), got: x.len() });
    }
    if !(eps > 0.0) || !model.domain().contains_ball(x, eps) {
        return Err(Error::BallNotContained { x: x.to_vec(), eps });
    }
    let ys = ball_points(x, eps, opts);
    let xis = xi_probe(x.len(), opts);

    let selector = model.h5_selector();
    let heuristic = matches!(selector, H5Selector::ProbeSet);
    let score: Box<dyn Fn(&[f64]) -> f64> = match selector {
        H5Selector::Autonomous => Box::new(|y: &[f64]| dist(x, y)),
        H5Selector::Minimize(f) => Box::new(move |y: &[f64]| f(y)),
        H5Selector::ProbeSet => {
            let probe: Vec<Vec<f64>> = [0.0, 0.5, 1.0, 2.0, 5.0]
                .iter()
                .map(|r| {
                    let mut v = vec![0.0; x.len()];
                    v[0] = *r;
                    v
                })
                .collect();
            let base: Vec<f64> = probe.iter().map(|p| model.value(x, p).max(1e-300)).collect();
            Box::new(move |y: &[f64]| probe.iter().zip(&base).map(|(p, b)| model.value(y, p) / b).sum())
        }
    };
    let mut best = x.to_vec();
    let mut best_score = score(x);
    for y in &ys {
        let s = score(y);
        let closer = dist(x, y) < dist(x, &best);
        if s < best_score || (s == best_score && closer) {
            best = y.clone();
            best_score = s;
        }
    }

    let mut c: f64 = 1.0;
    let mut skipped = 0;
    let mut total = 0;
    let y_tilde_values: Vec<f64> = xis.iter().map(|xi| model.value(&best, xi)).collect();
    for y in ys.iter().chain(std::iter::once(&best)) {
        for (xi, num) in xis.iter().zip(&y_tilde_values) {
            total += 1;
            let den = model.value(y, xi);
            if den < 1e-12 {
                skipped += 1;
                continue;
            }
            c = c.max(num / den);
        }
    }
    if skipped as f64 > 0.01 * total as f64 {
        return Err(Error::H5Unreliable { skipped, total });
    }
    Ok(H5Result { eps, y_tilde: best, c_eps: c, skipped, total, heuristic })
}

/// `check_h5` over a list of radii.
pub fn h5_curve(model: &DensityModel, x: &[f64], eps_list: &[f64], opts: &H5Options) -> Result<Vec<H5Result>> {
    eps_list.iter().map(|&e| check_h5(model, x, e, opts)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{Coefficient, Domain};

    #[test]
    fn autonomous_model_has_unit_constant() {
        let f = DensityModel::regularized_power(Domain::cube(2, 1.0), 3.0).unwrap();
        let r = check_h5(&f, &[0.1, 0.2], 0.2, &H5Options::default()).unwrap();
        assert!((r.c_eps - 1.0).abs() <= 1e-12);
        assert_eq!(r.y_tilde, vec![0.1, 0.2]);
    }

    #[test]
    fn ball_must_be_inside() {
        let f = DensityModel::regularized_power(Domain::cube(2, 1.0), 3.0).unwrap();
        assert!(matches!(check_h5(&f, &[0.9, 0.0], 0.2, &H5Options::default()), Err(Error::BallNotContained { .. })));
    }

    #[test]
    fn example_iv_selector_minimizes_coefficient() {
        let f = DensityModel::example_iv(Domain::ball(2, 1.0), 2.0, 3.0).unwrap();
        let r = check_h5(&f, &[0.0, 0.3], 0.1, &H5Options::default()).unwrap();
        assert!((r.y_tilde[1] - 0.2).abs() < 1e-12, "{:?}", r.y_tilde);
        assert!(r.c_eps >= 1.0);
        assert!(!r.heuristic);
    }

    #[test]
    fn normalized_models_skip_only_the_origin() {
        let f = DensityModel::double_phase(Domain::cube(2, 1.0), 2.0, 3.0, Coefficient::positive_part(1, 1.0), false).unwrap();
        let g = crate::density::normalize_at_zero(&f);
        let r = check_h5(&g, &[0.0, 0.0], 0.1, &H5Options::default()).unwrap();
        assert!(r.skipped > 0 && (r.skipped as f64) < 0.01 * r.total as f64);
    }
}
