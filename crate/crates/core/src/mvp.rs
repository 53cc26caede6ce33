//! Mean-value expansions across shrinking radii.
//!
//! For coefficients `alpha`, `beta` and a ball `B(P, eps)` the residual is
//! `R(eps) = alpha/2 (min + max) + beta avg - u(P)`. At a non-characteristic
//! point of a smooth field `R(eps) / eps^2` tends to
//! `beta C ((p-2) Delta_inf u + Delta_H u)(P)`. The routines here sample the
//! relevant quantities on a decreasing radius sequence, extrapolate them to
//! `eps -> 0` and compare with predictions computed from derivatives.

use std::fmt::Write as _;

use crate::error::{HmvpError, Result};
use crate::extrapolate::{extrapolate, Extrapolation};
use crate::fields::{left_translate_field, ScalarField};
use crate::gaugeball::{
    ball_average, ball_extrema, c_constant, BallSpec, ConstantSource, ExtremaConfig,
    ExtremumResult, MVPCoefficients, QuadratureSpec, ScaledCoords,
};
use crate::hgroup::{horizontal_gradient, horizontal_hessian, horizontal_hessian_sym, Point};
use crate::operators::{self, gradient_threshold};

/// Relative tolerance for limits compared against a nonzero prediction
/// when the fit itself does not bound the error more tightly.
pub const LIMIT_RTOL: f64 = 0.02;

/// `eps_k = 0.4 * 2^-k`, `k = 0..5`.
pub fn default_eps_sequence() -> Vec<f64> {
    (0..6).map(|k| 0.4 * 0.5f64.powi(k)).collect()
}

fn check_eps(eps: &[f64]) -> Result<()> {
    if eps.len() < 2 {
        return Err(HmvpError::InvalidArgument(
            "an eps sequence needs at least two radii".into(),
        ));
    }
    if eps.iter().any(|e| !(*e > 0.0) || !e.is_finite()) || eps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(HmvpError::InvalidArgument(
            "eps sequence must be positive and strictly decreasing".into(),
        ));
    }
    Ok(())
}

fn check_dims(u: &ScalarField, p: &Point) -> Result<()> {
    if u.n() != p.n() {
        return Err(HmvpError::DimensionMismatch {
            expected: u.n(),
            found: p.n(),
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportKind {
    Residual,
    MeanValueConstant,
    ExtremaLimits,
    TwoSided,
}

/// Quantities measured at one radius. Entries not computed by a given
/// report kind are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsRecord {
    pub eps: f64,
    pub avg: Option<f64>,
    pub avg_error: Option<f64>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub residual: Option<f64>,
    pub max_scaled: Option<ScaledCoords>,
    pub min_scaled: Option<ScaledCoords>,
    pub c_hat: Option<f64>,
    pub lhs_max: Option<f64>,
    pub lhs_min: Option<f64>,
}

impl EpsRecord {
    fn new(eps: f64) -> Self {
        Self {
            eps,
            avg: None,
            avg_error: None,
            min: None,
            max: None,
            residual: None,
            max_scaled: None,
            min_scaled: None,
            c_hat: None,
            lhs_max: None,
            lhs_min: None,
        }
    }

    pub fn residual_over_eps2(&self) -> Option<f64> {
        self.residual.map(|r| r / (self.eps * self.eps))
    }

    fn with_extrema(mut self, ext: &ExtremumResult) -> Self {
        self.min = Some(ext.min);
        self.max = Some(ext.max);
        self.max_scaled = Some(ext.max_scaled.clone());
        self.min_scaled = Some(ext.min_scaled.clone());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    /// `|limit - target| <= tolerance`.
    Equal,
    /// `limit >= target - tolerance`.
    AtLeast,
    /// `limit <= target + tolerance`.
    AtMost,
}

/// A fitted limit compared with its prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitCheck {
    pub name: String,
    pub fit: Extrapolation,
    pub target: f64,
    pub bound: Bound,
    pub tolerance: f64,
    pub passed: bool,
}

impl LimitCheck {
    fn new(name: impl Into<String>, fit: Extrapolation, target: f64, bound: Bound, tolerance: f64) -> Self {
        let d = fit.limit - target;
        let passed = match bound {
            Bound::Equal => d.abs() <= tolerance,
            Bound::AtLeast => d >= -tolerance,
            Bound::AtMost => d <= tolerance,
        };
        Self {
            name: name.into(),
            fit,
            target,
            bound,
            tolerance,
            passed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionReport {
    pub kind: ReportKind,
    pub center: Point,
    pub coefficients: Option<MVPCoefficients>,
    pub records: Vec<EpsRecord>,
    pub checks: Vec<LimitCheck>,
    /// Prediction for the limit of `R / eps^2` (or of `C` for the
    /// mean-value constant report).
    pub predicted_limit: Option<f64>,
    /// Half the modulus of the imaginary curvature, `2 |u_t| / |grad_H u|`,
    /// computed from the commutator `[X_1, Y_1] u = -4 u_t`.
    pub half_curvature: Option<f64>,
    pub converged: bool,
}

impl ExpansionReport {
    pub fn passed(&self) -> bool {
        self.converged && self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&LimitCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn eps(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.eps).collect()
    }

    /// CSV with a header row. Columns that the report kind does not compute
    /// are left empty.
    pub fn to_csv(&self, digits: usize) -> String {
        let n = self.center.n();
        let mut header: Vec<String> = ["eps", "avg", "min", "max", "R", "R_over_eps2"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        for prefix in ["", "min_"] {
            header.extend((1..=n).map(|i| format!("{prefix}xi_over_eps_{i}")));
            header.extend((1..=n).map(|i| format!("{prefix}eta_over_eps_{i}")));
            header.push(format!("{prefix}t_over_eps3"));
        }
        header.extend(["C_hat", "lhs_max", "lhs_min", "predicted_limit"].map(String::from));
        let mut out = header.join(",");
        out.push('\n');
        let cell = |v: Option<f64>| v.map(|v| format_sig(v, digits)).unwrap_or_default();
        for r in &self.records {
            let mut row = vec![
                format_sig(r.eps, digits),
                cell(r.avg),
                cell(r.min),
                cell(r.max),
                cell(r.residual),
                cell(r.residual_over_eps2()),
            ];
            for s in [&r.max_scaled, &r.min_scaled] {
                match s {
                    Some(s) => {
                        row.extend(s.horizontal.iter().map(|v| format_sig(*v, digits)));
                        row.push(format_sig(s.t_over_eps3, digits));
                    }
                    None => row.extend(std::iter::repeat_n(String::new(), 2 * n + 1)),
                }
            }
            row.extend([cell(r.c_hat), cell(r.lhs_max), cell(r.lhs_min), cell(self.predicted_limit)]);
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }
}

/// Formats `v` with `digits` significant digits, plain notation for
/// moderate exponents and scientific notation otherwise.
pub fn format_sig(v: f64, digits: usize) -> String {
    let digits = digits.clamp(1, 17);
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let sci = format!("{:.*e}", digits - 1, v);
    let exp: i32 = sci.rsplit('e').next().and_then(|e| e.parse().ok()).unwrap_or(0);
    if (-5..digits as i32).contains(&exp) {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        let s = format!("{:.*}", decimals, v);
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        let (mantissa, e) = sci.split_once('e').expect("scientific format");
        let mantissa = if mantissa.contains('.') {
            mantissa.trim_end_matches('0').trim_end_matches('.')
        } else {
            mantissa
        };
        format!("{mantissa}e{e}")
    }
}

fn check_coefficients(u: &ScalarField, coeffs: &MVPCoefficients) -> Result<()> {
    if coeffs.n != u.n() {
        return Err(HmvpError::DimensionMismatch {
            expected: u.n(),
            found: coeffs.n,
        });
    }
    coeffs.check()
}

struct ResidualSample {
    record: EpsRecord,
    converged: bool,
}

fn residual_sample(
    u: &ScalarField,
    center: &Point,
    eps: f64,
    coeffs: &MVPCoefficients,
    quad: &QuadratureSpec,
    search: &ExtremaConfig,
) -> Result<ResidualSample> {
    let ball = BallSpec::new(center.clone(), eps)?;
    let u0 = u.checked_value(center)?;
    let avg = ball_average(u, &ball, quad)?;
    let ext = ball_extrema(u, &ball, search)?;
    let residual = 0.5 * coeffs.alpha * (ext.min + ext.max) + coeffs.beta * avg.value - u0;
    let mut record = EpsRecord::new(eps).with_extrema(&ext);
    record.avg = Some(avg.value);
    record.avg_error = Some(avg.error_estimate);
    record.residual = Some(residual);
    Ok(ResidualSample {
        record,
        converged: ext.converged,
    })
}

/// `R(eps) = alpha/2 (min + max) + beta avg - u(P)` over the closed ball.
pub fn expansion_residual(
    u: &ScalarField,
    center: &Point,
    eps: f64,
    coeffs: &MVPCoefficients,
    quad: &QuadratureSpec,
) -> Result<f64> {
    check_dims(u, center)?;
    check_coefficients(u, coeffs)?;
    let s = residual_sample(u, center, eps, coeffs, quad, &ExtremaConfig::default())?;
    Ok(s.record.residual.expect("residual recorded"))
}

/// Largest quadrature error estimate divided by `eps^2`.
fn scaled_quadrature_error(records: &[EpsRecord]) -> f64 {
    records
        .iter()
        .filter_map(|r| r.avg_error.map(|e| e / (r.eps * r.eps)))
        .fold(0.0, f64::max)
}

fn residual_tolerance(fit: &Extrapolation, quad_err: f64, target: f64) -> f64 {
    5.0 * fit.fit_error.max(quad_err) + 1e-9 * (1.0 + target.abs())
}

/// Predicted limit of `R / eps^2`: `beta C ((p-2) Delta_inf u + Delta_H u)(P)`.
/// `None` at characteristic points unless `p = 2`.
pub fn predicted_residual_limit(u: &ScalarField, center: &Point, coeffs: &MVPCoefficients) -> Result<Option<f64>> {
    let op = operators::delta_p_or_degenerate(u, center, coeffs.p)?;
    if !op.degenerate {
        return Ok(Some(coeffs.beta * coeffs.c * op.core));
    }
    if coeffs.p == 2.0 {
        return Ok(Some(coeffs.beta * coeffs.c * operators::delta_h(u, center)?));
    }
    Ok(None)
}

/// Samples `R(eps)` along `eps`, extrapolates `R / eps^2` and compares it
/// with the operator prediction.
pub fn residual_report(
    u: &ScalarField,
    center: &Point,
    eps: &[f64],
    coeffs: &MVPCoefficients,
    quad: &QuadratureSpec,
    search: &ExtremaConfig,
) -> Result<ExpansionReport> {
    check_dims(u, center)?;
    check_coefficients(u, coeffs)?;
    check_eps(eps)?;
    let samples = eps
        .iter()
        .map(|&e| residual_sample(u, center, e, coeffs, quad, search))
        .collect::<Result<Vec<_>>>()?;
    let converged = samples.iter().all(|s| s.converged);
    let records: Vec<EpsRecord> = samples.into_iter().map(|s| s.record).collect();
    let predicted = predicted_residual_limit(u, center, coeffs)?;
    let ratios: Vec<f64> = records.iter().map(|r| r.residual_over_eps2().expect("residual")).collect();
    let fit = extrapolate(eps, &ratios)?;
    let mut checks = Vec::new();
    if let Some(target) = predicted {
        let tol = residual_tolerance(&fit, scaled_quadrature_error(&records), target);
        checks.push(LimitCheck::new("R_over_eps2", fit, target, Bound::Equal, tol));
    }
    Ok(ExpansionReport {
        kind: ReportKind::Residual,
        center: center.clone(),
        coefficients: Some(*coeffs),
        records,
        checks,
        predicted_limit: predicted,
        half_curvature: None,
        converged,
    })
}

/// Estimates `C = (avg - u(P)) / (Delta_H u(P) eps^2)` along `eps` and
/// compares its limit with the calibrated constant.
pub fn verify_mean_value_constant(
    u: &ScalarField,
    center: &Point,
    eps: &[f64],
    quad: &QuadratureSpec,
) -> Result<ExpansionReport> {
    check_dims(u, center)?;
    check_eps(eps)?;
    let n = u.n();
    let lap = operators::delta_h(u, center)?;
    let u0 = u.checked_value(center)?;
    let hess = horizontal_hessian_sym(u, center)?;
    if lap.abs() <= 1e-10 * (1.0 + hess.max_abs()) {
        return Err(HmvpError::DegenerateEstimate(format!(
            "Delta_H u vanishes at {center}; C cannot be estimated"
        )));
    }
    let mut records = Vec::with_capacity(eps.len());
    for &e in eps {
        let avg = ball_average(u, &BallSpec::new(center.clone(), e)?, quad)?;
        let mut r = EpsRecord::new(e);
        r.avg = Some(avg.value);
        r.avg_error = Some(avg.error_estimate);
        r.c_hat = Some((avg.value - u0) / (lap * e * e));
        records.push(r);
    }
    let c_hats: Vec<f64> = records.iter().map(|r| r.c_hat.expect("c_hat")).collect();
    let fit = extrapolate(eps, &c_hats)?;
    let target = c_constant(n, ConstantSource::Calibrated)?;
    let tol = 5.0 * fit.fit_error.max(scaled_quadrature_error(&records) / lap.abs()) + 1e-9;
    Ok(ExpansionReport {
        kind: ReportKind::MeanValueConstant,
        center: center.clone(),
        coefficients: None,
        records,
        checks: vec![LimitCheck::new("C", fit, target, Bound::Equal, tol)],
        predicted_limit: Some(target),
        half_curvature: None,
        converged: true,
    })
}

/// `2 |u_t| / |grad_H u|` from the first commutator of the frame.
fn half_imaginary_curvature(u: &ScalarField, center: &Point) -> Result<f64> {
    let n = center.n();
    let h = horizontal_hessian(u, center)?;
    // X_1 Y_1 u - Y_1 X_1 u = -4 u_t
    let commutator = h.get(0, n) - h.get(n, 0);
    let grad = horizontal_gradient(u, center)?;
    Ok(0.5 * commutator.abs() / grad.norm())
}

fn extrema_tolerance(fit: &Extrapolation, target: f64) -> f64 {
    (5.0 * fit.fit_error).max(LIMIT_RTOL * target.abs().max(1.0))
}

/// Tracks the scaled positions of the extrema of `u` on `B(P, eps)`.
///
/// The max direction should tend to `nu = grad_H u / |grad_H u|`, the min
/// direction to `-nu`, and `|t| / eps^3` at both to `2 |u_t| / |grad_H u|`.
pub fn verify_extrema_limits(
    u: &ScalarField,
    center: &Point,
    eps: &[f64],
    search: &ExtremaConfig,
) -> Result<ExpansionReport> {
    check_dims(u, center)?;
    check_eps(eps)?;
    let n = u.n();
    let nu = operators::unit_normal(u, center)?;
    let grad = u.euclidean_gradient(center)?;
    let grad_h = horizontal_gradient(u, center)?;
    let t_target = 2.0 * grad[2 * n].abs() / grad_h.norm();
    let half_curvature = half_imaginary_curvature(u, center)?;
    let moved = left_translate_field(u, center)?;
    let origin = Point::origin(n);
    let mut records = Vec::with_capacity(eps.len());
    let mut converged = true;
    for &e in eps {
        let ext = ball_extrema(&moved, &BallSpec::new(origin.clone(), e)?, search)?;
        converged &= ext.converged;
        records.push(EpsRecord::new(e).with_extrema(&ext));
    }
    let series = |f: &dyn Fn(&EpsRecord) -> f64| -> Result<Extrapolation> {
        let v: Vec<f64> = records.iter().map(f).collect();
        extrapolate(eps, &v)
    };
    let mut checks = Vec::new();
    for a in 0..2 * n {
        let target = nu.as_slice()[a];
        let label = if a < n { format!("xi_{}", a + 1) } else { format!("eta_{}", a - n + 1) };
        let hi = series(&|r| r.max_scaled.as_ref().expect("max").horizontal[a])?;
        checks.push(LimitCheck::new(format!("max_{label}"), hi, target, Bound::Equal, extrema_tolerance(&hi, target)));
        let lo = series(&|r| r.min_scaled.as_ref().expect("min").horizontal[a])?;
        checks.push(LimitCheck::new(format!("min_{label}"), lo, -target, Bound::Equal, extrema_tolerance(&lo, target)));
        let sum = series(&|r| {
            r.max_scaled.as_ref().expect("max").horizontal[a] + r.min_scaled.as_ref().expect("min").horizontal[a]
        })?;
        checks.push(LimitCheck::new(format!("antipodal_{label}"), sum, 0.0, Bound::Equal, extrema_tolerance(&sum, 0.0)));
    }
    let hi_t = series(&|r| r.max_scaled.as_ref().expect("max").t_over_eps3)?;
    checks.push(LimitCheck::new("max_t_over_eps3", hi_t, t_target, Bound::Equal, extrema_tolerance(&hi_t, t_target)));
    let lo_t = series(&|r| r.min_scaled.as_ref().expect("min").t_over_eps3)?;
    checks.push(LimitCheck::new("min_t_over_eps3", lo_t, t_target, Bound::Equal, extrema_tolerance(&lo_t, t_target)));
    checks.push(LimitCheck::new(
        "half_curvature",
        hi_t,
        half_curvature,
        Bound::Equal,
        extrema_tolerance(&hi_t, half_curvature),
    ));
    Ok(ExpansionReport {
        kind: ReportKind::ExtremaLimits,
        center: center.clone(),
        coefficients: None,
        records,
        checks,
        predicted_limit: Some(t_target),
        half_curvature: Some(half_curvature),
        converged,
    })
}

/// Checks both one-sided expansions at the measured extrema directions
/// `h` (max) and `l` (min):
/// `LHS(h) = beta C eps^2 (Delta_H u + (p-2) <D2* u h, h>)` satisfies
/// `(LHS(h) - R) / eps^2 -> limit >= 0` and `(LHS(l) - R) / eps^2 -> limit <= 0`
/// for `alpha >= 0`, with both inequalities reversed when `alpha < 0`.
pub fn verify_two_sided_expansion(
    u: &ScalarField,
    center: &Point,
    eps: &[f64],
    coeffs: &MVPCoefficients,
    quad: &QuadratureSpec,
    search: &ExtremaConfig,
) -> Result<ExpansionReport> {
    check_dims(u, center)?;
    check_coefficients(u, coeffs)?;
    check_eps(eps)?;
    operators::unit_normal(u, center)?;
    let hess = horizontal_hessian_sym(u, center)?;
    let lap = hess.trace();
    let mut report = residual_report(u, center, eps, coeffs, quad, search)?;
    let scale = coeffs.beta * coeffs.c;
    for r in &mut report.records {
        let e2 = r.eps * r.eps;
        let h = &r.max_scaled.as_ref().expect("max").horizontal;
        let l = &r.min_scaled.as_ref().expect("min").horizontal;
        r.lhs_max = Some(scale * e2 * (lap + (coeffs.p - 2.0) * hess.quadratic_form(h)));
        r.lhs_min = Some(scale * e2 * (lap + (coeffs.p - 2.0) * hess.quadratic_form(l)));
    }
    let quad_err = scaled_quadrature_error(&report.records);
    let gap = |f: &dyn Fn(&EpsRecord) -> f64| -> Result<Extrapolation> {
        let v: Vec<f64> = report.records.iter().map(f).collect();
        extrapolate(eps, &v)
    };
    let upper = gap(&|r| (r.lhs_max.expect("lhs") - r.residual.expect("R")) / (r.eps * r.eps))?;
    let lower = gap(&|r| (r.lhs_min.expect("lhs") - r.residual.expect("R")) / (r.eps * r.eps))?;
    let (bu, bl) = if coeffs.alpha >= 0.0 {
        (Bound::AtLeast, Bound::AtMost)
    } else {
        (Bound::AtMost, Bound::AtLeast)
    };
    let tol_u = residual_tolerance(&upper, quad_err, scale * lap);
    let tol_l = residual_tolerance(&lower, quad_err, scale * lap);
    report.checks.push(LimitCheck::new("max_side", upper, 0.0, bu, tol_u));
    report.checks.push(LimitCheck::new("min_side", lower, 0.0, bl, tol_l));
    report.kind = ReportKind::TwoSided;
    Ok(report)
}

/// Outcome at one sample point of [`classify_field`].
#[derive(Debug, Clone, PartialEq)]
pub struct PointClassification {
    pub point: Point,
    /// Extrapolated `R / eps^2`; `None` for skipped points.
    pub limit: Option<Extrapolation>,
    pub core: Option<f64>,
    pub tolerance: f64,
    pub harmonic: Option<bool>,
    /// Whether the residual verdict matches the sign test on the core.
    pub core_agrees: Option<bool>,
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationReport {
    pub p: f64,
    pub points: Vec<PointClassification>,
}

impl ClassificationReport {
    /// True iff at least one point was examined and every examined point
    /// has a vanishing residual limit.
    pub fn harmonic(&self) -> bool {
        let examined: Vec<_> = self.points.iter().filter(|c| c.harmonic.is_some()).collect();
        !examined.is_empty() && examined.iter().all(|c| c.harmonic == Some(true))
    }

    pub fn consistent(&self) -> bool {
        self.points.iter().all(|c| c.core_agrees != Some(false))
    }

    pub fn skipped(&self) -> usize {
        self.points.iter().filter(|c| c.skipped.is_some()).count()
    }
}

/// Declares `u` p-harmonic on `points` when the extrapolated `R / eps^2`
/// is below `1e-3 (1 + |Delta_H u| + |Delta_inf u|)` at every point with a
/// nondegenerate horizontal gradient.
pub fn classify_field(
    u: &ScalarField,
    points: &[Point],
    coeffs: &MVPCoefficients,
    eps: &[f64],
    quad: &QuadratureSpec,
    search: &ExtremaConfig,
) -> Result<ClassificationReport> {
    check_coefficients(u, coeffs)?;
    check_eps(eps)?;
    let mut out = Vec::with_capacity(points.len());
    for point in points {
        check_dims(u, point)?;
        let grad = horizontal_gradient(u, point)?;
        let threshold = gradient_threshold(u.checked_value(point)?);
        if grad.norm() < threshold {
            out.push(PointClassification {
                point: point.clone(),
                limit: None,
                core: None,
                tolerance: 0.0,
                harmonic: None,
                core_agrees: None,
                skipped: Some(format!("degenerate gradient |grad_H u| = {:e}", grad.norm())),
            });
            continue;
        }
        let lap = operators::delta_h(u, point)?;
        let inf = operators::delta_inf(u, point)?;
        let core = (coeffs.p - 2.0) * inf + lap;
        let scale = 1.0 + lap.abs() + inf.abs();
        let tolerance = 1e-3 * scale;
        let report = residual_report(u, point, eps, coeffs, quad, search)?;
        let fit = report
            .check("R_over_eps2")
            .map(|c| c.fit)
            .expect("prediction exists at nondegenerate points");
        let harmonic = fit.limit.abs() <= tolerance;
        let core_harmonic = core.abs() <= 1e-6 * scale;
        out.push(PointClassification {
            point: point.clone(),
            limit: Some(fit),
            core: Some(core),
            tolerance,
            harmonic: Some(harmonic),
            core_agrees: Some(harmonic == core_harmonic),
            skipped: None,
        });
    }
    Ok(ClassificationReport { p: coeffs.p, points: out })
}
