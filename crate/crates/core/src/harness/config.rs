use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::approx::CubeCover;
use crate::density::{instantiate, normalize_at_zero, DensityModel, Domain, Params};
use crate::error::{Error, Result};
use crate::solve::{DiscreteField, Grid, SolveConfig};

/// Dirichlet data for the solve ladder.
#[derive(Clone, Debug, PartialEq)]
pub enum BoundarySpec {
    /// `u = sin(π x₁)`.
    SinPiX1,
    /// `u = offset + slope·x`.
    Affine { slope: Vec<f64>, offset: f64 },
}

impl BoundarySpec {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            BoundarySpec::SinPiX1 => (std::f64::consts::PI * x[0]).sin(),
            BoundarySpec::Affine { slope, offset } => offset + crate::linalg::dot(slope, x),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub id: String,
    pub seed: u64,
    pub parallel: bool,
    pub output: Option<PathBuf>,

    pub model_kind: String,
    /// Kind-specific parameters (`model.<name>` keys).
    pub model_params: Params,
    /// Replace f by `f − f(·,0)`.
    pub normalize: bool,

    pub dim: usize,
    /// Half-width of the cube Ω.
    pub extent: f64,
    /// Half-width of the target cube B_R.
    pub radius: f64,
    /// Radius of the ball where interior gradients are measured.
    pub rho: f64,

    pub grid_sizes: Vec<usize>,
    pub h_list: Vec<u32>,
    /// Mollifier radii of the diagonal selection (empty: skipped).
    pub eps_list: Vec<f64>,
    pub xi_max: f64,

    pub xi_cap: f64,
    pub samples: usize,
    pub xi_samples: usize,
    pub h5_eps: Vec<f64>,

    pub solver: SolveConfig,
    pub boundary: BoundarySpec,
    /// Penalty indices of the `f_k` ladder for pure-power models.
    pub regularize_k: Vec<f64>,
}

impl ExperimentConfig {
    /// A double-phase config with every optional key at its default.
    pub fn minimal() -> Self {
        let mut params = Params::new();
        params.insert("p".into(), "2".into());
        params.insert("q".into(), "2.5".into());
        params.insert("a.form".into(), "positive-part".into());
        params.insert("a.axis".into(), "2".into());
        params.insert("a.scale".into(), "0.5".into());
        Self {
            id: "experiment".into(),
            seed: 0,
            parallel: false,
            output: None,
            model_kind: "double-phase".into(),
            model_params: params,
            normalize: false,
            dim: 2,
            extent: 3.0,
            radius: 1.0,
            rho: 0.5,
            grid_sizes: vec![17, 33],
            h_list: vec![],
            eps_list: vec![],
            xi_max: 2.0,
            xi_cap: 20.0,
            samples: 200,
            xi_samples: 32,
            h5_eps: vec![0.2, 0.1, 0.05, 0.025],
            solver: SolveConfig::default(),
            boundary: BoundarySpec::SinPiX1,
            regularize_k: vec![1.0, 2.0, 5.0, 10.0],
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    /// Parses and validates `key = value` text.
    pub fn parse(text: &str) -> Result<Self> {
        let mut raw = RawConfig::parse(text)?;
        let d = Self::minimal();
        let mut model_params = Params::new();
        let model_kind = raw.take("model.kind").ok_or_else(|| Error::ConfigMissingKey("model.kind".into()))?;
        let normalize = raw.bool_or("model.normalize", false)?;
        let keys: Vec<String> = raw.map.keys().filter(|k| k.starts_with("model.")).cloned().collect();
        for k in keys {
            let v = raw.take(&k).unwrap();
            model_params.insert(k["model.".len()..].to_string(), v);
        }
        let solver = SolveConfig {
            grad_tol: raw.f64_or("solver.grad_tol", d.solver.grad_tol)?,
            max_iters: raw.num_or("solver.max_iters", d.solver.max_iters)?,
            c1: raw.f64_or("solver.c1", d.solver.c1)?,
            backtrack: raw.f64_or("solver.backtrack", d.solver.backtrack)?,
            restart_every: raw.num_or("solver.restart_every", d.solver.restart_every)?,
        };
        let boundary = match raw.take("boundary.kind").as_deref() {
            None | Some("sin-pi-x1") => BoundarySpec::SinPiX1,
            Some("affine") => {
                let slope = raw.list_or("boundary.slope", vec![1.0])?;
                let offset = raw.f64_or("boundary.offset", 0.0)?;
                BoundarySpec::Affine { slope, offset }
            }
            Some(other) => {
                return Err(Error::ConfigMalformed {
                    key: "boundary.kind".into(),
                    value: other.into(),
                    expected: "`sin-pi-x1` or `affine`",
                })
            }
        };
        let cfg = Self {
            id: raw.take("id").unwrap_or(d.id),
            seed: raw.num_or("seed", d.seed)?,
            parallel: raw.bool_or("parallel", d.parallel)?,
            output: raw.take("output").map(PathBuf::from),
            model_kind,
            model_params,
            normalize,
            dim: raw.num("domain.dim")?,
            extent: raw.f64("domain.extent")?,
            radius: raw.f64("domain.R")?,
            rho: raw.f64("domain.rho")?,
            grid_sizes: raw.list_or("grid.sizes", d.grid_sizes)?,
            h_list: raw.list_or("approx.h", d.h_list)?,
            eps_list: raw.list_or("approx.eps", d.eps_list)?,
            xi_max: raw.f64_or("approx.xi_max", d.xi_max)?,
            xi_cap: raw.f64_or("verify.xi_cap", d.xi_cap)?,
            samples: raw.num_or("verify.samples", d.samples)?,
            xi_samples: raw.num_or("verify.xi_samples", d.xi_samples)?,
            h5_eps: raw.list_or("verify.eps", d.h5_eps)?,
            solver,
            boundary,
            regularize_k: raw.list_or("regularize.k", d.regularize_k)?,
        };
        if let Some(k) = raw.map.keys().next() {
            return Err(Error::ConfigInvalid { keys: k.clone(), reason: "unknown key".into() });
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Every key, one per line, in a fixed order; `parse(to_text())` returns
    /// an equal config.
    pub fn to_text(&self) -> String {
        fn list<T: std::fmt::Display>(v: &[T]) -> String {
            v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
        }
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("id", self.id.clone());
        kv("seed", self.seed.to_string());
        kv("parallel", self.parallel.to_string());
        if let Some(o) = &self.output {
            kv("output", o.display().to_string());
        }
        kv("model.kind", self.model_kind.clone());
        kv("model.normalize", self.normalize.to_string());
        for (k, v) in &self.model_params {
            kv(&format!("model.{k}"), v.clone());
        }
        kv("domain.dim", self.dim.to_string());
        kv("domain.extent", self.extent.to_string());
        kv("domain.R", self.radius.to_string());
        kv("domain.rho", self.rho.to_string());
        kv("grid.sizes", list(&self.grid_sizes));
        kv("approx.h", list(&self.h_list));
        kv("approx.eps", list(&self.eps_list));
        kv("approx.xi_max", self.xi_max.to_string());
        kv("verify.xi_cap", self.xi_cap.to_string());
        kv("verify.samples", self.samples.to_string());
        kv("verify.xi_samples", self.xi_samples.to_string());
        kv("verify.eps", list(&self.h5_eps));
        kv("solver.grad_tol", self.solver.grad_tol.to_string());
        kv("solver.max_iters", self.solver.max_iters.to_string());
        kv("solver.c1", self.solver.c1.to_string());
        kv("solver.backtrack", self.solver.backtrack.to_string());
        kv("solver.restart_every", self.solver.restart_every.to_string());
        match &self.boundary {
            BoundarySpec::SinPiX1 => kv("boundary.kind", "sin-pi-x1".into()),
            BoundarySpec::Affine { slope, offset } => {
                kv("boundary.kind", "affine".into());
                kv("boundary.slope", list(slope));
                kv("boundary.offset", offset.to_string());
            }
        }
        kv("regularize.k", list(&self.regularize_k));
        s
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |keys: &str, reason: String| Err(Error::ConfigInvalid { keys: keys.into(), reason });
        if self.dim == 0 {
            return bad("domain.dim", "dimension must be positive".into());
        }
        if !(self.rho > 0.0 && self.rho < self.radius) {
            return bad("domain.rho, domain.R", format!("need 0 < rho < R, got rho={} and R={}", self.rho, self.radius));
        }
        if !(self.radius < self.extent) {
            return bad("domain.R, domain.extent", format!("need R < extent, got R={} and extent={}", self.radius, self.extent));
        }
        if self.grid_sizes.is_empty()
            || self.grid_sizes.iter().any(|n| *n < 3 || n % 2 == 0)
            || self.grid_sizes.windows(2).any(|w| w[1] <= w[0])
        {
            return bad("grid.sizes", "grid sizes must be odd, at least 3, and strictly increasing".into());
        }
        for &n in &self.grid_sizes {
            let s = 2.0 * self.radius / (n - 1) as f64;
            if self.rho > self.radius - 2.0 * s {
                return bad("domain.rho, grid.sizes", format!("rho={} leaves fewer than two cells of margin at N={n}", self.rho));
            }
        }
        let dist = self.extent - self.radius;
        let lhs_of = |h: u32| 12.0 * (self.dim as f64).sqrt() / h as f64;
        for &h in &self.h_list {
            if h == 0 || !(lhs_of(h) < dist) {
                return bad(
                    "approx.h",
                    format!("h={h} violates 12*sqrt(n)/h < dist(B_R, boundary): {} >= {dist}", if h == 0 { f64::INFINITY } else { lhs_of(h) }),
                );
            }
        }
        if self.eps_list.iter().any(|e| !(*e > 0.0)) || self.eps_list.windows(2).any(|w| w[1] >= w[0]) {
            return bad("approx.eps", "mollifier radii must be positive and strictly decreasing".into());
        }
        if let Some(e) = self.eps_list.first() {
            if self.radius + e > self.extent {
                return bad("approx.eps, domain.R", format!("R + eps = {} exceeds the domain extent", self.radius + e));
            }
        }
        if !(self.xi_max > 0.0) {
            return bad("approx.xi_max", "must be positive".into());
        }
        if !(self.xi_cap > 0.0) || self.samples == 0 || self.xi_samples == 0 {
            return bad("verify.xi_cap, verify.samples, verify.xi_samples", "must be positive".into());
        }
        if self.h5_eps.iter().any(|e| !(*e > 0.0)) {
            return bad("verify.eps", "radii must be positive".into());
        }
        if self.regularize_k.iter().any(|k| !(*k >= 1.0)) || self.regularize_k.windows(2).any(|w| w[1] <= w[0]) {
            return bad("regularize.k", "indices must be >= 1 and strictly increasing".into());
        }
        if let BoundarySpec::Affine { slope, .. } = &self.boundary {
            if slope.len() != self.dim {
                return bad("boundary.slope, domain.dim", format!("slope has {} entries for dimension {}", slope.len(), self.dim));
            }
        }
        self.solver.validate().map_err(|e| Error::ConfigInvalid { keys: "solver.*".into(), reason: e.to_string() })?;
        self.build_model()?;
        Ok(())
    }

    pub fn omega(&self) -> Domain {
        Domain::cube(self.dim, self.extent)
    }

    pub fn target(&self) -> Domain {
        Domain::cube(self.dim, self.radius)
    }

    pub fn build_model(&self) -> Result<DensityModel> {
        let m = instantiate(&self.model_kind, &self.model_params, self.omega())?;
        Ok(if self.normalize { normalize_at_zero(&m) } else { m })
    }

    /// Boundary datum sampled on an `N`-node grid over B_R.
    pub fn boundary_field(&self, nodes: usize) -> Result<DiscreteField> {
        let g = Grid::new(self.target(), nodes)?;
        Ok(DiscreteField::from_fn(g, |x| self.boundary.eval(x)))
    }

    /// Smallest admissible scale for the configured domains.
    pub fn min_h(&self) -> Option<u32> {
        CubeCover::min_admissible_h(&self.target(), &self.omega())
    }
}

/// The raw key → value map, consumed as keys are read.
struct RawConfig {
    map: BTreeMap<String, String>,
}

impl RawConfig {
    fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::ConfigSyntax { line: i + 1, reason: format!("expected `key = value`, got `{line}`") })?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return Err(Error::ConfigSyntax { line: i + 1, reason: "empty key".into() });
            }
            if map.insert(k.to_string(), v.to_string()).is_some() {
                return Err(Error::ConfigSyntax { line: i + 1, reason: format!("duplicate key `{k}`") });
            }
        }
        Ok(Self { map })
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.map.remove(key)
    }

    fn parsed<T: std::str::FromStr>(&mut self, key: &str, expected: &'static str) -> Result<Option<T>> {
        match self.take(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| Error::ConfigMalformed { key: key.into(), value: v, expected }),
        }
    }

    fn f64(&mut self, key: &str) -> Result<f64> {
        self.parsed(key, "a number")?.ok_or_else(|| Error::ConfigMissingKey(key.into()))
    }

    fn f64_or(&mut self, key: &str, default: f64) -> Result<f64> {
        Ok(self.parsed(key, "a number")?.unwrap_or(default))
    }

    fn num<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        self.parsed(key, "a non-negative integer")?.ok_or_else(|| Error::ConfigMissingKey(key.into()))
    }

    fn num_or<T: std::str::FromStr>(&mut self, key: &str, default: T) -> Result<T> {
        Ok(self.parsed(key, "a non-negative integer")?.unwrap_or(default))
    }

    fn bool_or(&mut self, key: &str, default: bool) -> Result<bool> {
        Ok(self.parsed(key, "`true` or `false`")?.unwrap_or(default))
    }

    fn list_or<T: std::str::FromStr>(&mut self, key: &str, default: Vec<T>) -> Result<Vec<T>> {
        let Some(v) = self.take(key) else { return Ok(default) };
        if v.is_empty() {
            return Ok(vec![]);
        }
        v.split(',')
            .map(|s| s.trim().parse())
            .collect::<std::result::Result<Vec<T>, _>>()
            .map_err(|_| Error::ConfigMalformed { key: key.into(), value: v, expected: "a comma-separated list" })
    }
}
