//! Energy densities `f(x, ξ)` and the catalog of (p,q)-growth models.
//!
//! Every model carries closed-form value, ξ-gradient and ξ-Hessian, the
//! domain on which its coefficients are defined, and a declared
//! [`GrowthEnvelope`]. Declared constants are claims; [`crate::verify`]
//! measures them.

mod coefficient;
mod laws;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

pub use coefficient::{Coefficient, CoefficientForm};
pub(crate) use coefficient::{parse_f64, parse_list};

use crate::error::{Error, Result};
use laws::{log_power, log_power_eigs, raw_power, reg_power, sq_norm};

/// Raw `key -> value` parameters, as they appear under `model.` in a config.
pub type Params = BTreeMap<String, String>;

/// |ξ| horizon up to which the declared x-regularity constants of
/// variable-exponent models hold; matches the verifier's radial ladder.
pub const VARIABLE_EXPONENT_HORIZON: f64 = 1e3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shape {
    Box,
    Ball,
}

/// An axis-aligned box (`extent` = half-width) or a Euclidean ball
/// (`extent` = radius).
#[derive(Clone, Debug, PartialEq)]
pub struct Domain {
    center: Vec<f64>,
    shape: Shape,
    extent: f64,
}

impl Domain {
    pub fn new(center: Vec<f64>, shape: Shape, extent: f64) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::invalid("domain.center", "dimension must be at least 1"));
        }
        if !(extent > 0.0 && extent.is_finite()) {
            return Err(Error::invalid("domain.extent", "extent must be positive and finite"));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("domain.center", "center must be finite"));
        }
        Ok(Self { center, shape, extent })
    }

    /// `[-half_width, half_width]ⁿ`.
    pub fn cube(n: usize, half_width: f64) -> Self {
        Self::new(vec![0.0; n], Shape::Box, half_width).expect("valid cube")
    }

    /// Ball of the given radius centred at the origin.
    pub fn ball(n: usize, radius: f64) -> Self {
        Self::new(vec![0.0; n], Shape::Ball, radius).expect("valid ball")
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    /// Same shape and centre, different extent.
    pub fn with_extent(&self, extent: f64) -> Result<Self> {
        Self::new(self.center.clone(), self.shape, extent)
    }

    fn slack(&self) -> f64 {
        1e-9 * self.extent.max(1.0)
    }

    /// Membership in the closure, up to a relative rounding slack.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && self.distance_to_boundary(x) >= -self.slack()
    }

    /// Signed distance to the boundary, positive inside.
    pub fn distance_to_boundary(&self, x: &[f64]) -> f64 {
        match self.shape {
            Shape::Box => self
                .center
                .iter()
                .zip(x)
                .map(|(c, xi)| self.extent - (xi - c).abs())
                .fold(f64::INFINITY, f64::min),
            Shape::Ball => self.extent - crate::linalg::dist(x, &self.center),
        }
    }

    /// `dist(inner, ∂self)`; negative when `inner` is not contained.
    pub fn inner_distance(&self, inner: &Domain) -> f64 {
        let off: Vec<f64> = inner.center.iter().zip(&self.center).map(|(a, b)| (a - b).abs()).collect();
        let r = inner.extent;
        match (self.shape, inner.shape) {
            (Shape::Box, Shape::Box) => off.iter().map(|o| self.extent - o - r).fold(f64::INFINITY, f64::min),
            (Shape::Box, Shape::Ball) => off.iter().map(|o| self.extent - o).fold(f64::INFINITY, f64::min) - r,
            (Shape::Ball, Shape::Ball) => self.extent - crate::linalg::norm(&off) - r,
            (Shape::Ball, Shape::Box) => {
                let far: f64 = off.iter().map(|o| (o + r) * (o + r)).sum::<f64>().sqrt();
                self.extent - far
            }
        }
    }

    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.center.iter().map(|c| c - self.extent).collect(),
            self.center.iter().map(|c| c + self.extent).collect(),
        )
    }

    pub fn diameter(&self) -> f64 {
        match self.shape {
            Shape::Box => 2.0 * self.extent * (self.dim() as f64).sqrt(),
            Shape::Ball => 2.0 * self.extent,
        }
    }

    /// `B_r(x) ⋐ self`.
    pub fn contains_ball(&self, x: &[f64], r: f64) -> bool {
        self.distance_to_boundary(x) > r
    }
}

/// The constants `(n, p, q, m, M, K, H)` of the growth, convexity and
/// x-regularity assumptions.
#[derive(Clone, Debug, PartialEq)]
pub struct GrowthEnvelope {
    pub n: usize,
    pub p: f64,
    pub q: f64,
    /// Lower bound `m` on the scaled ξ-Hessian.
    pub convexity: f64,
    /// Upper bound `M` on the scaled ξ-Hessian.
    pub hessian_bound: f64,
    /// Bound `K` on the mixed derivative `f_{ξx}`.
    pub mixed_bound: f64,
    /// Lipschitz bound `H` of `x ↦ f(x,ξ) − f(x,0)`.
    pub lipschitz_x: f64,
}

impl GrowthEnvelope {
    pub fn new(n: usize, p: f64, q: f64, m: f64, big_m: f64, k: f64, h: f64) -> Result<Self> {
        check_exponents(p, q)?;
        if n == 0 {
            return Err(Error::invalid("n", "dimension must be at least 1"));
        }
        if !(m > 0.0 && big_m > 0.0) {
            return Err(Error::invalid("envelope", format!("need m > 0 and M > 0, got m={m}, M={big_m}")));
        }
        if !(k >= 0.0 && h >= 0.0) {
            return Err(Error::invalid("envelope", format!("need K >= 0 and H >= 0, got K={k}, H={h}")));
        }
        Ok(Self { n, p, q, convexity: m, hessian_bound: big_m, mixed_bound: k, lipschitz_x: h })
    }
}

pub(crate) fn check_exponents(p: f64, q: f64) -> Result<()> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::InvalidExponents(format!("p must exceed 1, got {p}")));
    }
    if !(q >= p) || !q.is_finite() {
        return Err(Error::InvalidExponents(format!("q must be at least p = {p}, got {q}")));
    }
    Ok(())
}

/// Anything that can be integrated: catalog models and approximants alike.
///
/// The methods are unchecked: callers guarantee `x` lies in [`domain`](Density::domain)
/// and both slices have length [`dim`](Density::dim). Output buffers are
/// overwritten; Hessians are row-major `n × n`.
pub trait Density: Send + Sync {
    fn dim(&self) -> usize;
    fn domain(&self) -> &Domain;
    fn envelope(&self) -> &GrowthEnvelope;
    fn value(&self, x: &[f64], xi: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], xi: &[f64], out: &mut [f64]);
    fn hessian(&self, x: &[f64], xi: &[f64], out: &mut [f64]);

    /// Raw powers with exponent below 2: not C² at ξ = 0.
    fn degenerate(&self) -> bool {
        false
    }
}

impl<T: Density + ?Sized> Density for Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn domain(&self) -> &Domain {
        (**self).domain()
    }
    fn envelope(&self) -> &GrowthEnvelope {
        (**self).envelope()
    }
    fn value(&self, x: &[f64], xi: &[f64]) -> f64 {
        (**self).value(x, xi)
    }
    fn gradient(&self, x: &[f64], xi: &[f64], out: &mut [f64]) {
        (**self).gradient(x, xi, out)
    }
    fn hessian(&self, x: &[f64], xi: &[f64], out: &mut [f64]) {
        (**self).hessian(x, xi, out)
    }
    fn degenerate(&self) -> bool {
        (**self).degenerate()
    }
}

/// Catalog tag.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Kind {
    DoublePhase,
    VariableExponent,
    LogPower,
    SumStructure,
    ExampleIv,
    Anisotropic,
    Custom,
}

impl Kind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Kind::DoublePhase => "double-phase",
            Kind::VariableExponent => "variable-exponent",
            Kind::LogPower => "log-power",
            Kind::SumStructure => "sum-structure",
            Kind::ExampleIv => "example-iv",
            Kind::Anisotropic => "anisotropic",
            Kind::Custom => "custom",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Kind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "double-phase" => Kind::DoublePhase,
            "variable-exponent" => Kind::VariableExponent,
            "log-power" => Kind::LogPower,
            "sum-structure" => Kind::SumStructure,
            "example-iv" => Kind::ExampleIv,
            "anisotropic" => Kind::Anisotropic,
            "custom" => Kind::Custom,
            other => return Err(Error::UnknownKind(other.to_string())),
        })
    }
}

type ValueFn = dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync;
type VecFn = dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync;

struct CustomLaw {
    value: Box<ValueFn>,
    gradient: Box<VecFn>,
    hessian: Box<VecFn>,
}

#[derive(Clone)]
enum Law {
    DoublePhase { p: f64, q: f64, a: Coefficient, raw: bool },
    LogPower { p: f64, alpha: f64, raw: bool },
    VariableExponent { a: Coefficient, exponent: Coefficient },
    SumStructure { terms: Vec<(Coefficient, f64)>, primary: usize },
    ExampleIv { p: f64, q: f64, a: Coefficient },
    Anisotropic { exponents: Vec<f64> },
    Custom(Arc<CustomLaw>),
    Normalized(DensityModel),
    Penalized { base: DensityModel, weight: f64, q: f64 },
}

/// How the comparison point `ỹ` of the (H5) check is chosen.
#[derive(Clone)]
pub enum H5Selector {
    /// No x-dependence: `ỹ = x`.
    Autonomous,
    /// Minimize this function over the closed ball.
    Minimize(Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>),
    /// No structural selector known; minimize the density over a probe set of ξ.
    ProbeSet,
}

impl fmt::Debug for H5Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            H5Selector::Autonomous => f.write_str("Autonomous"),
            H5Selector::Minimize(_) => f.write_str("Minimize(..)"),
            H5Selector::ProbeSet => f.write_str("ProbeSet"),
        }
    }
}

struct ModelInner {
    kind: Kind,
    label: String,
    params: Params,
    envelope: GrowthEnvelope,
    domain: Domain,
    law: Law,
}

/// A catalog or custom energy density. Cheap to clone; immutable.
#[derive(Clone)]
pub struct DensityModel {
    inner: Arc<ModelInner>,
}

impl fmt::Debug for DensityModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DensityModel")
            .field("kind", &self.inner.kind)
            .field("label", &self.inner.label)
            .field("envelope", &self.inner.envelope)
            .finish()
    }
}

fn power_m(s: f64) -> f64 {
    s * (s - 1.0).min(1.0)
}

fn power_big_m(s: f64) -> f64 {
    s * (s - 1.0).max(1.0)
}

fn fmt_params(pairs: &[(&str, String)]) -> Params {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

impl DensityModel {
    fn build(kind: Kind, label: String, params: Params, envelope: GrowthEnvelope, domain: Domain, law: Law) -> Self {
        Self { inner: Arc::new(ModelInner { kind, label, params, envelope, domain, law }) }
    }

    /// `(1+|ξ|²)^{p/2} + a(x)(1+|ξ|²)^{q/2}`, or `|ξ|^p + a(x)|ξ|^q` when `raw`.
    ///
    /// For raw powers the declared constants are meant in the large-|ξ|
    /// sense (weights `|ξ|^{p-2}` etc.).
    pub fn double_phase(domain: Domain, p: f64, q: f64, a: Coefficient, raw: bool) -> Result<Self> {
        check_exponents(p, q)?;
        let n = domain.dim();
        a.check_dim("a", n)?;
        let (lo, hi) = a.range_on(&domain);
        if lo < 0.0 {
            return Err(Error::invalid("a", format!("double-phase coefficient must be nonnegative, inf = {lo}")));
        }
        let la = a.lipschitz();
        let env = GrowthEnvelope::new(n, p, q, power_m(p), power_big_m(p) + hi * power_big_m(q), la * q, la)?;
        let label = format!("double-phase(p={p}, q={q}{})", if raw { ", raw" } else { "" });
        let params = fmt_params(&[("p", p.to_string()), ("q", q.to_string()), ("raw", raw.to_string())]);
        Ok(Self::build(Kind::DoublePhase, label, params, env, domain, Law::DoublePhase { p, q, a, raw }))
    }

    /// `(1+|ξ|²)^{p/2}`: the double-phase model with `a ≡ 0`.
    pub fn regularized_power(domain: Domain, p: f64) -> Result<Self> {
        Self::double_phase(domain, p, p, Coefficient::constant(0.0), false)
    }

    /// `t^p log^α(1+t)` with `t = (1+|ξ|²)^{1/2}`, or `t = |ξ|` when `raw`.
    /// `q` is the declared upper growth exponent (default `p + 1`).
    pub fn log_power(domain: Domain, p: f64, alpha: f64, q: Option<f64>, raw: bool) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::invalid("alpha", "must be positive"));
        }
        let q = q.unwrap_or(p + 1.0);
        check_exponents(p, q)?;
        if q == p {
            return Err(Error::InvalidExponents("log-power needs q > p to absorb the logarithm".into()));
        }
        // 1-D scan of the radial Hessian eigenvalues in t ∈ [1, 1e6]
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for i in 0..=4000 {
            let t = 10f64.powf(6.0 * i as f64 / 4000.0);
            let (tan, rad) = log_power_eigs(p, alpha, t);
            let w_p = t.powf(p - 2.0);
            let w_q = t.powf(q - 2.0);
            lo = lo.min(tan.min(rad) / w_p);
            hi = hi.max(tan.abs().max(rad.abs()) / w_q);
        }
        let env = GrowthEnvelope::new(domain.dim(), p, q, 0.98 * lo, 1.02 * hi, 0.0, 0.0)?;
        let label = format!("log-power(p={p}, alpha={alpha}{})", if raw { ", raw" } else { "" });
        let params = fmt_params(&[
            ("p", p.to_string()),
            ("alpha", alpha.to_string()),
            ("q", q.to_string()),
            ("raw", raw.to_string()),
        ]);
        Ok(Self::build(Kind::LogPower, label, params, env, domain, Law::LogPower { p, alpha, raw }))
    }

    /// `a(x)(1+|ξ|²)^{p(x)/2}`.
    pub fn variable_exponent(domain: Domain, a: Coefficient, exponent: Coefficient) -> Result<Self> {
        let n = domain.dim();
        a.check_dim("a", n)?;
        exponent.check_dim("exponent", n)?;
        let (a_lo, a_hi) = a.range_on(&domain);
        if !(a_lo > 0.0) {
            return Err(Error::invalid("a", format!("variable-exponent coefficient needs a positive lower bound, inf = {a_lo}")));
        }
        let (p, q) = exponent.range_on(&domain);
        check_exponents(p, q)?;
        let (la, lp) = (a.lipschitz(), exponent.lipschitz());
        let log_w = (1.0 + VARIABLE_EXPONENT_HORIZON * VARIABLE_EXPONENT_HORIZON).ln();
        let k = la * q + a_hi * lp * (1.0 + 0.5 * q * log_w);
        let h = la + a_hi * lp * 0.5 * log_w;
        let env = GrowthEnvelope::new(n, p, q, a_lo * power_m(p), a_hi * power_big_m(q), k, h)?;
        let label = format!("variable-exponent(p in [{p}, {q}])");
        Ok(Self::build(Kind::VariableExponent, label, Params::new(), env, domain, Law::VariableExponent { a, exponent }))
    }

    /// `Σ a_i(x)(1+|ξ|²)^{s_i/2}`; `primary` indexes the term whose
    /// coefficient is bounded below by a positive constant.
    pub fn sum_structure(domain: Domain, terms: Vec<(Coefficient, f64)>, primary: usize) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::MissingParam("terms".into()));
        }
        if primary >= terms.len() {
            return Err(Error::invalid("primary", format!("index {} out of range", primary + 1)));
        }
        let n = domain.dim();
        let mut big_m = 0.0;
        let mut k = 0.0;
        let mut h = 0.0;
        let mut q: f64 = 0.0;
        for (i, (a, s)) in terms.iter().enumerate() {
            let name = format!("a{}", i + 1);
            a.check_dim(&name, n)?;
            if !(*s > 1.0) {
                return Err(Error::InvalidExponents(format!("s{} must exceed 1, got {s}", i + 1)));
            }
            let (lo, hi) = a.range_on(&domain);
            if lo < 0.0 {
                return Err(Error::invalid(name, format!("coefficient must be nonnegative, inf = {lo}")));
            }
            big_m += hi * power_big_m(*s);
            k += a.lipschitz() * s;
            h += a.lipschitz();
            q = q.max(*s);
        }
        let (c_primary, _) = terms[primary].0.range_on(&domain);
        if !(c_primary > 0.0) {
            return Err(Error::invalid(
                format!("a{}", primary + 1),
                format!("primary coefficient needs a positive lower bound, inf = {c_primary}"),
            ));
        }
        let p = terms[primary].1;
        let env = GrowthEnvelope::new(n, p, q, c_primary * power_m(p), big_m, k, h)?;
        let label = format!("sum-structure({} terms)", terms.len());
        Ok(Self::build(Kind::SumStructure, label, Params::new(), env, domain, Law::SumStructure { terms, primary }))
    }

    /// `|ξ|^p + a(x)(|ξ|^q − 1) + 1` with `a(x₁,x₂) = x₂/2` for `x₂ > 0`, 0 otherwise.
    pub fn example_iv(domain: Domain, p: f64, q: f64) -> Result<Self> {
        check_exponents(p, q)?;
        if domain.dim() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, got: domain.dim() });
        }
        let a = Coefficient::positive_part(1, 0.5);
        let (_, hi) = a.range_on(&domain);
        let la = a.lipschitz();
        let env = GrowthEnvelope::new(2, p, q, power_m(p), power_big_m(p) + hi * power_big_m(q), la * q, la)?;
        let label = format!("example-iv(p={p}, q={q})");
        let params = fmt_params(&[("p", p.to_string()), ("q", q.to_string())]);
        Ok(Self::build(Kind::ExampleIv, label, params, env, domain, Law::ExampleIv { p, q, a }))
    }

    /// `Σ_i (1+ξ_i²)^{p_i/2}`, with `p = min p_i`, `q = max p_i`.
    pub fn anisotropic(domain: Domain, exponents: Vec<f64>) -> Result<Self> {
        if exponents.len() != domain.dim() {
            return Err(Error::DimensionMismatch { expected: domain.dim(), got: exponents.len() });
        }
        let p = exponents.iter().cloned().fold(f64::INFINITY, f64::min);
        let q = exponents.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        check_exponents(p, q)?;
        let m = exponents.iter().map(|s| power_m(*s)).fold(f64::INFINITY, f64::min);
        let big_m = exponents.iter().map(|s| power_big_m(*s)).fold(0.0, f64::max);
        let env = GrowthEnvelope::new(domain.dim(), p, q, m, big_m, 0.0, 0.0)?;
        let label = format!("anisotropic({exponents:?})");
        Ok(Self::build(Kind::Anisotropic, label, Params::new(), env, domain, Law::Anisotropic { exponents }))
    }

    /// User-supplied density. `gradient` and `hessian` write into zeroed buffers.
    pub fn custom<V, G, H>(label: &str, domain: Domain, envelope: GrowthEnvelope, value: V, gradient: G, hessian: H) -> Self
    where
        V: Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
        G: Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
        H: Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        let law = Law::Custom(Arc::new(CustomLaw {
            value: Box::new(value),
            gradient: Box::new(gradient),
            hessian: Box::new(hessian),
        }));
        Self::build(Kind::Custom, label.to_string(), Params::new(), envelope, domain, law)
    }

    /// `f + weight·(1+|ξ|²)^{q/2}` with `q` taken from the envelope.
    pub(crate) fn penalized(base: &DensityModel, weight: f64) -> Self {
        let env = base.envelope();
        let q = env.q;
        let mut envelope = env.clone();
        envelope.hessian_bound += weight * power_big_m(q);
        let label = format!("{} + {weight}(1+|xi|^2)^(q/2)", base.label());
        Self::build(
            base.kind(),
            label,
            base.inner.params.clone(),
            envelope,
            base.domain().clone(),
            Law::Penalized { base: base.clone(), weight, q },
        )
    }

    pub fn kind(&self) -> Kind {
        self.inner.kind
    }

    pub fn label(&self) -> &str {
        &self.inner.label
    }

    pub fn params(&self) -> &Params {
        &self.inner.params
    }

    /// True when f does not depend on x.
    pub fn is_autonomous(&self) -> bool {
        match &self.inner.law {
            Law::DoublePhase { a, .. } => a.is_constant(),
            Law::ExampleIv { .. } => false,
            Law::LogPower { .. } | Law::Anisotropic { .. } => true,
            Law::VariableExponent { a, exponent } => a.is_constant() && exponent.is_constant(),
            Law::SumStructure { terms, .. } => terms.iter().all(|(a, _)| a.is_constant()),
            Law::Custom(_) => false,
            Law::Normalized(b) | Law::Penalized { base: b, .. } => b.is_autonomous(),
        }
    }

    /// True when the law uses pure powers `|ξ|^s`, so (H2)–(H6) are only
    /// meaningful for `|ξ| ≥ 1`.
    pub fn uses_raw_powers(&self) -> bool {
        match &self.inner.law {
            Law::DoublePhase { raw, .. } | Law::LogPower { raw, .. } => *raw,
            Law::ExampleIv { .. } => true,
            Law::Normalized(b) => b.uses_raw_powers(),
            _ => false,
        }
    }

    /// True for models built by [`normalize_at_zero`].
    pub fn is_normalized(&self) -> bool {
        matches!(self.inner.law, Law::Normalized(_))
    }

    /// The structural (H5) selector for this kind.
    pub fn h5_selector(&self) -> H5Selector {
        if self.is_autonomous() {
            return H5Selector::Autonomous;
        }
        match &self.inner.law {
            Law::DoublePhase { a, .. } | Law::ExampleIv { a, .. } => {
                let a = a.clone();
                H5Selector::Minimize(Arc::new(move |y| a.eval(y)))
            }
            Law::VariableExponent { exponent, a } => {
                if exponent.is_constant() {
                    let a = a.clone();
                    H5Selector::Minimize(Arc::new(move |y| a.eval(y)))
                } else {
                    let e = exponent.clone();
                    H5Selector::Minimize(Arc::new(move |y| e.eval(y)))
                }
            }
            Law::SumStructure { terms, primary } => {
                let primary = *primary;
                let terms = terms.clone();
                if terms.len() == 1 {
                    H5Selector::Minimize(Arc::new(move |y| terms[0].0.eval(y)))
                } else {
                    H5Selector::Minimize(Arc::new(move |y| {
                        terms.iter().enumerate().filter(|(i, _)| *i != primary).map(|(_, (a, _))| a.eval(y)).sum()
                    }))
                }
            }
            Law::Normalized(b) | Law::Penalized { base: b, .. } => b.h5_selector(),
            Law::Custom(_) => H5Selector::ProbeSet,
            Law::LogPower { .. } | Law::Anisotropic { .. } => H5Selector::Autonomous,
        }
    }

    fn check_args(&self, x: &[f64], xi: &[f64]) -> Result<()> {
        let n = self.dim();
        if x.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: x.len() });
        }
        if xi.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: xi.len() });
        }
        if !self.inner.domain.contains(x) {
            return Err(Error::OutsideDomain { x: x.to_vec() });
        }
        if xi.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { xi: xi.to_vec() });
        }
        Ok(())
    }

    /// `f(x, ξ)`, rejecting points outside the domain.
    pub fn eval(&self, x: &[f64], xi: &[f64]) -> Result<f64> {
        self.check_args(x, xi)?;
        Ok(self.value(x, xi))
    }

    /// `∇_ξ f(x, ξ)`.
    pub fn grad_xi(&self, x: &[f64], xi: &[f64]) -> Result<Vec<f64>> {
        self.check_args(x, xi)?;
        let mut g = vec![0.0; self.dim()];
        self.gradient(x, xi, &mut g);
        Ok(g)
    }

    /// `∇²_ξ f(x, ξ)`, row-major.
    pub fn hess_xi(&self, x: &[f64], xi: &[f64]) -> Result<Vec<f64>> {
        self.check_args(x, xi)?;
        let n = self.dim();
        let mut h = vec![0.0; n * n];
        self.hessian(x, xi, &mut h);
        Ok(h)
    }
}

impl Law {
    fn value(&self, x: &[f64], xi: &[f64]) -> f64 {
        match self {
            Law::DoublePhase { p, q, a, raw } => {
                let r2 = sq_norm(xi);
                let c = a.eval(x);
                if *raw {
                    raw_power(*p, r2).value + if c != 0.0 { c * raw_power(*q, r2).value } else { 0.0 }
                } else {
                    reg_power(*p, r2).value + if c != 0.0 { c * reg_power(*q, r2).value } else { 0.0 }
                }
            }
            Law::LogPower { p, alpha, raw } => log_power(*p, *alpha, sq_norm(xi), !raw).value,
            Law::VariableExponent { a, exponent } => a.eval(x) * reg_power(exponent.eval(x), sq_norm(xi)).value,
            Law::SumStructure { terms, .. } => {
                let r2 = sq_norm(xi);
                terms.iter().map(|(a, s)| a.eval(x) * reg_power(*s, r2).value).sum()
            }
            Law::ExampleIv { p, q, a } => {
                let r2 = sq_norm(xi);
                raw_power(*p, r2).value + a.eval(x) * (raw_power(*q, r2).value - 1.0) + 1.0
            }
            Law::Anisotropic { exponents } => {
                exponents.iter().zip(xi).map(|(s, v)| reg_power(*s, v * v).value).sum()
            }
            Law::Custom(c) => (c.value)(x, xi),
            Law::Normalized(b) => {
                let z = if xi.len() <= 8 { b.value(x, &[0.0; 8][..xi.len()]) } else { b.value(x, &vec![0.0; xi.len()]) };
                b.value(x, xi) - z
            }
            Law::Penalized { base, weight, q } => base.value(x, xi) + weight * reg_power(*q, sq_norm(xi)).value,
        }
    }

    fn gradient(&self, x: &[f64], xi: &[f64], out: &mut [f64]) {
        match self {
            Law::DoublePhase { p, q, a, raw } => {
                let r2 = sq_norm(xi);
                let c = a.eval(x);
                let (rp, rq) = if *raw { (raw_power(*p, r2), raw_power(*q, r2)) } else { (reg_power(*p, r2), reg_power(*q, r2)) };
                rp.add_grad(1.0, xi, out);
                if c != 0.0 {
                    rq.add_grad(c, xi, out);
                }
            }
            Law::LogPower { p, alpha, raw } => log_power(*p, *alpha, sq_norm(xi), !raw).add_grad(1.0, xi, out),
            Law::VariableExponent { a, exponent } => {
                reg_power(exponent.eval(x), sq_norm(xi)).add_grad(a.eval(x), xi, out)
            }
            Law::SumStructure { terms, .. } => {
                let r2 = sq_norm(xi);
                for (a, s) in terms {
                    reg_power(*s, r2).add_grad(a.eval(x), xi, out);
                }
            }
            Law::ExampleIv { p, q, a } => {
                let r2 = sq_norm(xi);
                raw_power(*p, r2).add_grad(1.0, xi, out);
                raw_power(*q, r2).add_grad(a.eval(x), xi, out);
            }
            Law::Anisotropic { exponents } => {
                for ((o, s), v) in out.iter_mut().zip(exponents).zip(xi) {
                    *o += reg_power(*s, v * v).g * v;
                }
            }
            Law::Custom(c) => (c.gradient)(x, xi, out),
            Law::Normalized(b) => b.inner.law.gradient(x, xi, out),
            Law::Penalized { base, weight, q } => {
                base.inner.law.gradient(x, xi, out);
                reg_power(*q, sq_norm(xi)).add_grad(*weight, xi, out);
            }
        }
    }

    fn hessian(&self, x: &[f64], xi: &[f64], out: &mut [f64]) {
        match self {
            Law::DoublePhase { p, q, a, raw } => {
                let r2 = sq_norm(xi);
                let c = a.eval(x);
                let (rp, rq) = if *raw { (raw_power(*p, r2), raw_power(*q, r2)) } else { (reg_power(*p, r2), reg_power(*q, r2)) };
                rp.add_hess(1.0, xi, out);
                if c != 0.0 {
                    rq.add_hess(c, xi, out);
                }
            }
            Law::LogPower { p, alpha, raw } => log_power(*p, *alpha, sq_norm(xi), !raw).add_hess(1.0, xi, out),
            Law::VariableExponent { a, exponent } => {
                reg_power(exponent.eval(x), sq_norm(xi)).add_hess(a.eval(x), xi, out)
            }
            Law::SumStructure { terms, .. } => {
                let r2 = sq_norm(xi);
                for (a, s) in terms {
                    reg_power(*s, r2).add_hess(a.eval(x), xi, out);
                }
            }
            Law::ExampleIv { p, q, a } => {
                let r2 = sq_norm(xi);
                raw_power(*p, r2).add_hess(1.0, xi, out);
                let c = a.eval(x);
                if c != 0.0 {
                    raw_power(*q, r2).add_hess(c, xi, out);
                }
            }
            Law::Anisotropic { exponents } => {
                let n = xi.len();
                for (i, (s, v)) in exponents.iter().zip(xi).enumerate() {
                    let r = reg_power(*s, v * v);
                    out[i * n + i] += r.a + r.b * v * v;
                }
            }
            Law::Custom(c) => (c.hessian)(x, xi, out),
            Law::Normalized(b) => b.inner.law.hessian(x, xi, out),
            Law::Penalized { base, weight, q } => {
                base.inner.law.hessian(x, xi, out);
                reg_power(*q, sq_norm(xi)).add_hess(*weight, xi, out);
            }
        }
    }

    fn degenerate(&self) -> bool {
        match self {
            Law::DoublePhase { p, raw, .. } => *raw && *p < 2.0,
            Law::LogPower { p, alpha, raw } => *raw && p + alpha < 2.0,
            Law::ExampleIv { p, .. } => *p < 2.0,
            Law::Normalized(b) => b.inner.law.degenerate(),
            _ => false,
        }
    }
}

impl Density for DensityModel {
    fn dim(&self) -> usize {
        self.inner.domain.dim()
    }

    fn domain(&self) -> &Domain {
        &self.inner.domain
    }

    fn envelope(&self) -> &GrowthEnvelope {
        &self.inner.envelope
    }

    #[inline]
    fn value(&self, x: &[f64], xi: &[f64]) -> f64 {
        self.inner.law.value(x, xi)
    }

    #[inline]
    fn gradient(&self, x: &[f64], xi: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        self.inner.law.gradient(x, xi, out)
    }

    #[inline]
    fn hessian(&self, x: &[f64], xi: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        self.inner.law.hessian(x, xi, out)
    }

    fn degenerate(&self) -> bool {
        self.inner.law.degenerate()
    }
}

fn req<'a>(params: &'a Params, key: &str) -> Result<&'a str> {
    params.get(key).map(|s| s.as_str()).ok_or_else(|| Error::MissingParam(key.to_string()))
}

fn req_f64(params: &Params, key: &str) -> Result<f64> {
    parse_f64(key, req(params, key)?)
}

fn opt_bool(params: &Params, key: &str) -> Result<bool> {
    match params.get(key).map(|s| s.trim()) {
        None => Ok(false),
        Some("true") => Ok(true),
        Some("false") => Ok(false),
        Some(v) => Err(Error::invalid(key, format!("`{v}` is not a boolean"))),
    }
}

/// Builds a catalog model from its tag and raw parameters.
///
/// Parameter names per kind (coefficients use the layouts of
/// [`Coefficient::from_params`]):
///
/// | kind | parameters |
/// |------|------------|
/// | `double-phase` | `p`, `q`, `a`, optional `raw` |
/// | `log-power` | `p`, `alpha`, optional `q`, `raw` |
/// | `variable-exponent` | `a`, `exponent` |
/// | `sum-structure` | `terms`, `a1..aN`, `s1..sN`, optional `primary` (1-based) |
/// | `example-iv` | `p`, `q` |
/// | `anisotropic` | `exponents` (comma list) |
pub fn instantiate(kind: &str, params: &Params, domain: Domain) -> Result<DensityModel> {
    let kind: Kind = kind.parse()?;
    let mut model = match kind {
        Kind::DoublePhase => DensityModel::double_phase(
            domain,
            req_f64(params, "p")?,
            req_f64(params, "q")?,
            Coefficient::from_params("a", params)?,
            opt_bool(params, "raw")?,
        )?,
        Kind::LogPower => {
            let q = match params.get("q") {
                Some(v) => Some(parse_f64("q", v)?),
                None => None,
            };
            DensityModel::log_power(domain, req_f64(params, "p")?, req_f64(params, "alpha")?, q, opt_bool(params, "raw")?)?
        }
        Kind::VariableExponent => DensityModel::variable_exponent(
            domain,
            Coefficient::from_params("a", params)?,
            Coefficient::from_params("exponent", params)?,
        )?,
        Kind::SumStructure => {
            let count = req_f64(params, "terms")?;
            if count < 1.0 || count.fract() != 0.0 {
                return Err(Error::invalid("terms", "must be a positive integer"));
            }
            let mut terms = Vec::new();
            for i in 1..=(count as usize) {
                let a = Coefficient::from_params(&format!("a{i}"), params)?;
                let s = req_f64(params, &format!("s{i}"))?;
                terms.push((a, s));
            }
            let primary = match params.get("primary") {
                Some(v) => {
                    let k = parse_f64("primary", v)?;
                    if k < 1.0 || k.fract() != 0.0 {
                        return Err(Error::invalid("primary", "must be a positive integer"));
                    }
                    k as usize - 1
                }
                None => 0,
            };
            DensityModel::sum_structure(domain, terms, primary)?
        }
        Kind::ExampleIv => DensityModel::example_iv(domain, req_f64(params, "p")?, req_f64(params, "q")?)?,
        Kind::Anisotropic => DensityModel::anisotropic(domain, parse_list("exponents", req(params, "exponents")?)?)?,
        Kind::Custom => {
            return Err(Error::invalid("kind", "custom densities are built programmatically with DensityModel::custom"))
        }
    };
    // keep the caller's parameters for reporting
    Arc::get_mut(&mut model.inner).expect("fresh model").params = params.clone();
    Ok(model)
}

/// `g(x, ξ) = f(x, ξ) − f(x, 0)`; same ξ-derivatives, `g(x, 0) ≡ 0`.
pub fn normalize_at_zero(model: &DensityModel) -> DensityModel {
    let envelope = model.envelope().clone();
    let label = if model.is_normalized() { model.label().to_string() } else { format!("normalized({})", model.label()) };
    DensityModel::build(
        model.kind(),
        label,
        model.inner.params.clone(),
        envelope,
        model.domain().clone(),
        Law::Normalized(model.clone()),
    )
}
