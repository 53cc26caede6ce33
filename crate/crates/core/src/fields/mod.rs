//! Closed-form test fields with exact derivatives.
//!
//! A [`ScalarField`] bundles a value callback with optional Euclidean
//! gradient and Hessian callbacks in the flat coordinate layout
//! `(x_1..x_n, y_1..y_n, t)`. Missing callbacks, or the
//! [`Strategy::FiniteDifference`] strategy, fall back to central differences.

mod poly;

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{HmvpError, Result};
use crate::hgroup::{self, Point};

pub use poly::{parse_polynomial, PolySpec, Term};

type ValueFn = dyn Fn(&Point) -> f64 + Send + Sync;
type GradientFn = dyn Fn(&Point) -> Vec<f64> + Send + Sync;
type HessianFn = dyn Fn(&Point) -> DMatrix<f64> + Send + Sync;

/// Relative step policy for central differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdPolicy {
    /// Step factor for first derivatives, scaled by `max(1, |coord|)`.
    pub first: f64,
    /// Step factor for second differences of values.
    pub second: f64,
}

impl Default for FdPolicy {
    fn default() -> Self {
        Self {
            first: f64::EPSILON.cbrt(),
            second: f64::EPSILON.powf(0.25),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Strategy {
    /// Use analytic callbacks where present, differences otherwise.
    Analytic,
    /// Ignore analytic callbacks entirely.
    FiniteDifference(FdPolicy),
}

/// Evaluatable `u: H^n -> R` with a differentiation strategy.
#[derive(Clone)]
pub struct ScalarField {
    name: String,
    n: usize,
    value: Arc<ValueFn>,
    gradient: Option<Arc<GradientFn>>,
    hessian: Option<Arc<HessianFn>>,
    strategy: Strategy,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("analytic_gradient", &self.gradient.is_some())
            .field("analytic_hessian", &self.hessian.is_some())
            .field("strategy", &self.strategy)
            .finish()
    }
}

impl ScalarField {
    /// A field known only through its values.
    pub fn new<F>(name: impl Into<String>, n: usize, value: F) -> Self
    where
        F: Fn(&Point) -> f64 + Send + Sync + 'static,
    {
        assert!(n >= 1, "H^n requires n >= 1");
        Self {
            name: name.into(),
            n,
            value: Arc::new(value),
            gradient: None,
            hessian: None,
            strategy: Strategy::Analytic,
        }
    }

    pub fn with_gradient<G>(mut self, gradient: G) -> Self
    where
        G: Fn(&Point) -> Vec<f64> + Send + Sync + 'static,
    {
        self.gradient = Some(Arc::new(gradient));
        self
    }

    pub fn with_hessian<H>(mut self, hessian: H) -> Self
    where
        H: Fn(&Point) -> DMatrix<f64> + Send + Sync + 'static,
    {
        self.hessian = Some(Arc::new(hessian));
        self
    }

    pub fn with_strategy(mut self, strategy: Strategy) -> Self {
        self.strategy = strategy;
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn has_analytic_gradient(&self) -> bool {
        self.gradient.is_some()
    }

    pub fn has_analytic_hessian(&self) -> bool {
        self.hessian.is_some()
    }

    /// Raw evaluation; no dimension or finiteness checks.
    #[inline]
    pub fn value(&self, p: &Point) -> f64 {
        (self.value)(p)
    }

    pub fn checked_value(&self, p: &Point) -> Result<f64> {
        self.check_dim(p)?;
        let v = (self.value)(p);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(HmvpError::Domain {
                field: self.name.clone(),
                at: p.to_string(),
            })
        }
    }

    fn check_dim(&self, p: &Point) -> Result<()> {
        if p.n() != self.n {
            return Err(HmvpError::DimensionMismatch {
                expected: self.n,
                found: p.n(),
            });
        }
        Ok(())
    }

    fn policy(&self) -> Option<FdPolicy> {
        match self.strategy {
            Strategy::Analytic => None,
            Strategy::FiniteDifference(p) => Some(p),
        }
    }

    fn diff_error(&self, p: &Point) -> HmvpError {
        HmvpError::Differentiation {
            field: self.name.clone(),
            at: p.to_string(),
        }
    }

    /// Euclidean gradient `(u_x1.., u_y1.., u_t)`.
    pub fn euclidean_gradient(&self, p: &Point) -> Result<Vec<f64>> {
        self.check_dim(p)?;
        let grad = match (&self.gradient, self.policy()) {
            (Some(g), None) => g(p),
            (_, policy) => self.fd_gradient(p, policy.unwrap_or_default().first),
        };
        if grad.iter().all(|g| g.is_finite()) {
            Ok(grad)
        } else {
            Err(self.diff_error(p))
        }
    }

    /// Euclidean Hessian, `(2n+1) x (2n+1)`.
    pub fn euclidean_hessian(&self, p: &Point) -> Result<DMatrix<f64>> {
        self.check_dim(p)?;
        let hess = match (&self.hessian, &self.gradient, self.policy()) {
            (Some(h), _, None) => h(p),
            (None, Some(g), None) => fd_jacobian_of_gradient(g.as_ref(), p, FdPolicy::default().first),
            (_, _, policy) => self.fd_hessian(p, policy.unwrap_or_default().second),
        };
        if hess.iter().all(|h| h.is_finite()) {
            Ok(hess)
        } else {
            Err(self.diff_error(p))
        }
    }

    fn fd_gradient(&self, p: &Point, factor: f64) -> Vec<f64> {
        let c = p.coords();
        (0..c.len())
            .map(|k| {
                let h = factor * c[k].abs().max(1.0);
                let plus = shifted(p, &[(k, h)]);
                let minus = shifted(p, &[(k, -h)]);
                (self.value(&plus) - self.value(&minus)) / (2.0 * h)
            })
            .collect()
    }

    fn fd_hessian(&self, p: &Point, factor: f64) -> DMatrix<f64> {
        let c = p.coords();
        let d = c.len();
        let steps: Vec<f64> = c.iter().map(|v| factor * v.abs().max(1.0)).collect();
        let f0 = self.value(p);
        let mut out = DMatrix::zeros(d, d);
        for i in 0..d {
            let hi = steps[i];
            let fp = self.value(&shifted(p, &[(i, hi)]));
            let fm = self.value(&shifted(p, &[(i, -hi)]));
            out[(i, i)] = (fp - 2.0 * f0 + fm) / (hi * hi);
            for j in 0..i {
                let hj = steps[j];
                let fpp = self.value(&shifted(p, &[(i, hi), (j, hj)]));
                let fpm = self.value(&shifted(p, &[(i, hi), (j, -hj)]));
                let fmp = self.value(&shifted(p, &[(i, -hi), (j, hj)]));
                let fmm = self.value(&shifted(p, &[(i, -hi), (j, -hj)]));
                let v = (fpp - fpm - fmp + fmm) / (4.0 * hi * hj);
                out[(i, j)] = v;
                out[(j, i)] = v;
            }
        }
        out
    }

    /// `a * u + b`.
    pub fn affine(&self, a: f64, b: f64) -> ScalarField {
        let base = self.clone();
        let mut out = ScalarField::new(
            format!("{a}*({})+{b}", self.name),
            self.n,
            move |p| a * base.value(p) + b,
        )
        .with_strategy(self.strategy);
        if let Some(g) = self.gradient.clone() {
            out = out.with_gradient(move |p| g(p).into_iter().map(|v| a * v).collect());
        }
        if let Some(h) = self.hessian.clone() {
            out = out.with_hessian(move |p| h(p) * a);
        }
        out
    }
}

fn shifted(p: &Point, moves: &[(usize, f64)]) -> Point {
    let mut c = p.coords().to_vec();
    for &(k, h) in moves {
        c[k] += h;
    }
    Point::from_raw(p.n(), c.into_iter().collect())
}

fn fd_jacobian_of_gradient(g: &GradientFn, p: &Point, factor: f64) -> DMatrix<f64> {
    let c = p.coords();
    let d = c.len();
    let mut out = DMatrix::zeros(d, d);
    for k in 0..d {
        let h = factor * c[k].abs().max(1.0);
        let gp = g(&shifted(p, &[(k, h)]));
        let gm = g(&shifted(p, &[(k, -h)]));
        for i in 0..d {
            out[(i, k)] = (gp[i] - gm[i]) / (2.0 * h);
        }
    }
    (&out + out.transpose()) * 0.5
}

/// Coordinate selector for [`make_coordinate`]; indices are zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coordinate {
    X(usize),
    Y(usize),
    T,
}

impl Coordinate {
    fn index(self, n: usize) -> Result<usize> {
        match self {
            Coordinate::X(i) if i < n => Ok(i),
            Coordinate::Y(i) if i < n => Ok(n + i),
            Coordinate::T => Ok(2 * n),
            other => Err(HmvpError::InvalidArgument(format!(
                "coordinate {other:?} out of range for n = {n}"
            ))),
        }
    }

    fn label(self) -> String {
        match self {
            Coordinate::X(i) => format!("x{}", i + 1),
            Coordinate::Y(i) => format!("y{}", i + 1),
            Coordinate::T => "t".into(),
        }
    }
}

/// The coordinate function `x_k`, `y_k` or `t`.
pub fn make_coordinate(n: usize, coordinate: Coordinate) -> Result<ScalarField> {
    if n == 0 {
        return Err(HmvpError::InvalidArgument("n must be at least 1".into()));
    }
    let k = coordinate.index(n)?;
    let d = 2 * n + 1;
    Ok(ScalarField::new(coordinate.label(), n, move |p| p.coords()[k])
        .with_gradient(move |_| {
            let mut g = vec![0.0; d];
            g[k] = 1.0;
            g
        })
        .with_hessian(move |_| DMatrix::zeros(d, d)))
}

/// `|x|^2 + |y|^2`; its horizontal Laplacian is `4n` everywhere.
pub fn make_square_norm(n: usize) -> ScalarField {
    let d = 2 * n + 1;
    ScalarField::new("sqnorm", n, |p| p.horizontal_norm_sq())
        .with_gradient(move |p| {
            let mut g: Vec<f64> = p.horizontal().iter().map(|c| 2.0 * c).collect();
            g.push(0.0);
            g
        })
        .with_hessian(move |_| {
            let mut h = DMatrix::zeros(d, d);
            for i in 0..d - 1 {
                h[(i, i)] = 2.0;
            }
            h
        })
}

/// `||P||^gamma` with analytic gradient; Hessian by differences of the gradient.
pub fn make_gauge_power(n: usize, gamma: f64) -> Result<ScalarField> {
    if gamma == 0.0 || !gamma.is_finite() {
        return Err(HmvpError::InvalidArgument(format!(
            "gauge power exponent must be finite and nonzero, got {gamma}"
        )));
    }
    Ok(
        ScalarField::new(format!("gauge^{gamma}"), n, move |p| {
            hgroup::gauge_norm(p).powf(gamma)
        })
        .with_gradient(move |p| {
            // d N^g = (g/4) N^(g-4) d(N^4),  N^4 = A^2 + t^2,  A = |z|^2
            let a = p.horizontal_norm_sq();
            let t = p.t();
            let n4 = a * a + t * t;
            let scale = gamma * n4.powf(gamma / 4.0 - 1.0);
            let mut g: Vec<f64> = p.horizontal().iter().map(|z| scale * a * z).collect();
            g.push(0.5 * scale * t);
            g
        }),
    )
}

/// `log ||P||`, the `gamma -> 0` member of the gauge family.
pub fn make_gauge_log(n: usize) -> ScalarField {
    ScalarField::new("loggauge", n, |p| hgroup::gauge_norm(p).ln()).with_gradient(|p| {
        let a = p.horizontal_norm_sq();
        let t = p.t();
        let inv = 1.0 / (a * a + t * t);
        let mut g: Vec<f64> = p.horizontal().iter().map(|z| inv * a * z).collect();
        g.push(0.5 * inv * t);
        g
    })
}

/// Polynomial in `(x, y, t)` with exact derivatives.
pub fn make_polynomial(n: usize, spec: PolySpec) -> Result<ScalarField> {
    spec.validate(n)?;
    let name = spec.to_string();
    let spec = Arc::new(spec);
    let (s1, s2, s3) = (spec.clone(), spec.clone(), spec);
    Ok(ScalarField::new(name, n, move |p| s1.value(p.coords()))
        .with_gradient(move |p| s2.gradient(p.coords()))
        .with_hessian(move |p| s3.hessian(p.coords())))
}

pub fn make_polynomial_str(n: usize, spec: &str) -> Result<ScalarField> {
    make_polynomial(n, parse_polynomial(n, spec)?)
}

/// `v(Q) = u(P0 o Q)`.
pub fn left_translate_field(u: &ScalarField, p0: &Point) -> Result<ScalarField> {
    if p0.n() != u.n() {
        return Err(HmvpError::DimensionMismatch {
            expected: u.n(),
            found: p0.n(),
        });
    }
    let n = u.n();
    let d = 2 * n + 1;
    // Jacobian of Q -> P0 o Q: identity plus the t-row (2 y0, -2 x0, 1).
    let mut jac = DMatrix::<f64>::identity(d, d);
    for i in 0..n {
        jac[(2 * n, i)] = 2.0 * p0.y()[i];
        jac[(2 * n, n + i)] = -2.0 * p0.x()[i];
    }
    let (base, anchor) = (u.clone(), p0.clone());
    let mut out = ScalarField::new(format!("{}@{}", u.name(), p0), n, move |q| {
        base.value(&hgroup::mul_unchecked(&anchor, q))
    })
    .with_strategy(u.strategy);
    if let Some(g) = u.gradient.clone() {
        let (anchor, jac) = (p0.clone(), jac.clone());
        out = out.with_gradient(move |q| {
            let gu = g(&hgroup::mul_unchecked(&anchor, q));
            (0..d)
                .map(|k| (0..d).map(|i| jac[(i, k)] * gu[i]).sum())
                .collect()
        });
    }
    if let Some(h) = u.hessian.clone() {
        let anchor = p0.clone();
        out = out.with_hessian(move |q| {
            let hu = h(&hgroup::mul_unchecked(&anchor, q));
            jac.transpose() * hu * &jac
        });
    }
    Ok(out)
}

/// Parses the textual field names used on the command line:
/// `x1`, `y1`, `t`, `sqnorm`, `gauge^<gamma>`, `loggauge`, `poly:<spec>`.
/// Anything else is tried as a bare polynomial such as `x + x^2`.
pub fn parse_field(n: usize, spec: &str) -> Result<ScalarField> {
    let s = spec.trim();
    let parse_err = |reason: &str| HmvpError::Parse {
        input: spec.to_string(),
        reason: reason.to_string(),
    };
    if let Some(rest) = s.strip_prefix("poly:") {
        return make_polynomial_str(n, rest);
    }
    if let Some(rest) = s.strip_prefix("gauge^") {
        let gamma: f64 = rest.trim().parse().map_err(|_| parse_err("bad exponent"))?;
        return make_gauge_power(n, gamma);
    }
    match s {
        "t" => return make_coordinate(n, Coordinate::T),
        "sqnorm" => return Ok(make_square_norm(n)),
        "loggauge" => return Ok(make_gauge_log(n)),
        "x" => return make_coordinate(n, Coordinate::X(0)),
        "y" => return make_coordinate(n, Coordinate::Y(0)),
        _ => {}
    }
    let (head, tail) = s.split_at(1.min(s.len()));
    if let Ok(i) = tail.parse::<usize>() {
        if i >= 1 {
            match head {
                "x" => return make_coordinate(n, Coordinate::X(i - 1)),
                "y" => return make_coordinate(n, Coordinate::Y(i - 1)),
                _ => {}
            }
        }
    }
    make_polynomial_str(n, s).map_err(|_| parse_err("unknown field name"))
}

/// Largest relative disagreement between analytic and finite-difference
/// gradient/Hessian at the given points.
pub fn fd_cross_check(u: &ScalarField, points: &[Point]) -> Result<f64> {
    let fd = u.clone().with_strategy(Strategy::FiniteDifference(FdPolicy::default()));
    let mut worst = 0.0f64;
    for p in points {
        let (ga, gf) = (u.euclidean_gradient(p)?, fd.euclidean_gradient(p)?);
        let gscale = 1.0 + ga.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in ga.iter().zip(&gf) {
            worst = worst.max((a - b).abs() / gscale);
        }
        let (ha, hf) = (u.euclidean_hessian(p)?, fd.euclidean_hessian(p)?);
        let hscale = 1.0 + ha.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in ha.iter().zip(hf.iter()) {
            worst = worst.max((a - b).abs() / hscale);
        }
    }
    Ok(worst)
}
