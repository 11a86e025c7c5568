use std::fmt;
use std::sync::Arc;

use super::{Domain, Params};
use crate::error::{Error, Result};

type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Closed-form families a coefficient can take. Axes are 0-based here; the
/// config schema uses 1-based axes (`axis = 2` is `x₂`).
#[derive(Clone, Debug, PartialEq)]
pub enum CoefficientForm {
    Constant(f64),
    /// `offset + slope · x`
    Affine { offset: f64, slope: Vec<f64> },
    /// `scale · max(x_axis, 0)`
    PositivePart { axis: usize, scale: f64 },
    /// `offset + scale · |x_axis|`
    AbsValue { offset: f64, axis: usize, scale: f64 },
    /// User callback with declared bounds over the domain.
    Custom { lo: f64, hi: f64 },
}

/// A spatial coefficient `a(x)` (or a variable exponent `p(x)`) given as a
/// closed-form callback with a declared Lipschitz constant.
#[derive(Clone)]
pub struct Coefficient {
    form: CoefficientForm,
    lipschitz: f64,
    f: ScalarFn,
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Coefficient")
            .field("form", &self.form)
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

impl Coefficient {
    pub fn constant(c: f64) -> Self {
        Self { form: CoefficientForm::Constant(c), lipschitz: 0.0, f: Arc::new(move |_| c) }
    }

    pub fn affine(offset: f64, slope: Vec<f64>) -> Self {
        let lipschitz = crate::linalg::norm(&slope);
        let s = slope.clone();
        Self {
            form: CoefficientForm::Affine { offset, slope },
            lipschitz,
            f: Arc::new(move |x| offset + crate::linalg::dot(&s, x)),
        }
    }

    pub fn positive_part(axis: usize, scale: f64) -> Self {
        Self {
            form: CoefficientForm::PositivePart { axis, scale },
            lipschitz: scale.abs(),
            f: Arc::new(move |x| scale * x[axis].max(0.0)),
        }
    }

    pub fn abs_value(offset: f64, axis: usize, scale: f64) -> Self {
        Self {
            form: CoefficientForm::AbsValue { offset, axis, scale },
            lipschitz: scale.abs(),
            f: Arc::new(move |x| offset + scale * x[axis].abs()),
        }
    }

    /// Arbitrary callback. `lipschitz`, `lo` and `hi` are claims about the
    /// callback on the domain it will be used with.
    pub fn custom<F>(f: F, lipschitz: f64, lo: f64, hi: f64) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self { form: CoefficientForm::Custom { lo, hi }, lipschitz, f: Arc::new(f) }
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn form(&self) -> &CoefficientForm {
        &self.form
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.form, CoefficientForm::Constant(_))
            || matches!(&self.form, CoefficientForm::Affine { slope, .. } if slope.iter().all(|s| *s == 0.0))
    }

    /// Largest axis index referenced by the closed form, if any.
    fn max_axis(&self) -> Option<usize> {
        match &self.form {
            CoefficientForm::Affine { slope, .. } => Some(slope.len().saturating_sub(1)),
            CoefficientForm::PositivePart { axis, .. } | CoefficientForm::AbsValue { axis, .. } => Some(*axis),
            _ => None,
        }
    }

    pub(crate) fn check_dim(&self, name: &str, n: usize) -> Result<()> {
        if let CoefficientForm::Affine { slope, .. } = &self.form {
            if slope.len() != n {
                return Err(Error::invalid(name, format!("slope has {} entries, dimension is {n}", slope.len())));
            }
        }
        if let Some(a) = self.max_axis() {
            if a >= n {
                return Err(Error::invalid(name, format!("axis {} exceeds dimension {n}", a + 1)));
            }
        }
        Ok(())
    }

    /// Exact range `(inf, sup)` of the coefficient over the (closed) domain.
    pub fn range_on(&self, domain: &Domain) -> (f64, f64) {
        let (lo, hi) = domain.bounding_box();
        match &self.form {
            CoefficientForm::Constant(c) => (*c, *c),
            CoefficientForm::Affine { offset, slope } => {
                let mid = offset + crate::linalg::dot(slope, domain.center());
                let spread = match domain.shape() {
                    super::Shape::Box => domain.extent() * slope.iter().map(|s| s.abs()).sum::<f64>(),
                    super::Shape::Ball => domain.extent() * crate::linalg::norm(slope),
                };
                (mid - spread, mid + spread)
            }
            CoefficientForm::PositivePart { axis, scale } => {
                let a = scale * lo[*axis].max(0.0);
                let b = scale * hi[*axis].max(0.0);
                (a.min(b), a.max(b))
            }
            CoefficientForm::AbsValue { offset, axis, scale } => {
                let (l, h) = (lo[*axis], hi[*axis]);
                let min_abs = if l <= 0.0 && h >= 0.0 { 0.0 } else { l.abs().min(h.abs()) };
                let max_abs = l.abs().max(h.abs());
                let a = offset + scale * min_abs;
                let b = offset + scale * max_abs;
                (a.min(b), a.max(b))
            }
            CoefficientForm::Custom { lo, hi } => (*lo, *hi),
        }
    }

    /// Parses the coefficient stored under `name` in a parameter map.
    ///
    /// Accepted layouts (axes 1-based):
    /// ```text
    /// a = 0.5                      # constant shorthand
    /// a.form = constant            a.value = 0.5
    /// a.form = affine              a.offset = 1    a.slope = 0.5, 0
    /// a.form = positive-part       a.axis = 2      a.scale = 0.5
    /// a.form = abs                 a.offset = 1    a.axis = 1   a.scale = 1
    /// ```
    pub fn from_params(name: &str, params: &Params) -> Result<Self> {
        if let Some(v) = params.get(name) {
            let c = parse_f64(name, v)?;
            return Ok(Self::constant(c));
        }
        let key = |s: &str| format!("{name}.{s}");
        let form = params.get(&key("form")).ok_or_else(|| Error::MissingParam(name.to_string()))?;
        let num = |s: &str| -> Result<f64> {
            let k = key(s);
            let v = params.get(&k).ok_or_else(|| Error::MissingParam(k.clone()))?;
            parse_f64(&k, v)
        };
        let num_or = |s: &str, d: f64| -> Result<f64> {
            if params.contains_key(&key(s)) {
                num(s)
            } else {
                Ok(d)
            }
        };
        let axis = || -> Result<usize> {
            let a = num("axis")?;
            if a < 1.0 || a.fract() != 0.0 {
                return Err(Error::invalid(key("axis"), "axis must be a positive integer (1-based)"));
            }
            Ok(a as usize - 1)
        };
        match form.trim() {
            "constant" => Ok(Self::constant(num("value")?)),
            "affine" => {
                let k = key("slope");
                let raw = params.get(&k).ok_or_else(|| Error::MissingParam(k.clone()))?;
                let slope = parse_list(&k, raw)?;
                Ok(Self::affine(num_or("offset", 0.0)?, slope))
            }
            "positive-part" => Ok(Self::positive_part(axis()?, num_or("scale", 1.0)?)),
            "abs" => Ok(Self::abs_value(num_or("offset", 0.0)?, axis()?, num_or("scale", 1.0)?)),
            other => Err(Error::invalid(key("form"), format!("unknown coefficient form `{other}`"))),
        }
    }
}

pub(crate) fn parse_f64(name: &str, v: &str) -> Result<f64> {
    let x: f64 = v.trim().parse().map_err(|_| Error::invalid(name, format!("`{v}` is not a number")))?;
    if !x.is_finite() {
        return Err(Error::invalid(name, "value must be finite"));
    }
    Ok(x)
}

pub(crate) fn parse_list(name: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').map(|s| parse_f64(name, s)).collect()
}
