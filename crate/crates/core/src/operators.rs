//! Pointwise subelliptic operators.
//!
//! `Delta_H u = tr D2*_H u`, `Delta_inf u = <D2*_H u nu, nu>` with
//! `nu = grad_H u / |grad_H u|`, and
//! `Delta_p u = |grad_H u|^(p-2) ((p-2) Delta_inf u + Delta_H u)`.

use nalgebra::{Matrix3, SymmetricEigen};

use crate::error::{HmvpError, Result};
use crate::fields::ScalarField;
use crate::hgroup::{horizontal_gradient, horizontal_hessian_sym, HorizontalVector, Point};

/// Relative part of the degeneracy threshold `g_min = 1e-8 (1 + |u(P)|)`.
pub const GRADIENT_FLOOR: f64 = 1e-8;

pub fn gradient_threshold(u_value: f64) -> f64 {
    GRADIENT_FLOOR * (1.0 + u_value.abs())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorValue {
    /// `|grad_H u|^(p-2) * core`.
    pub value: f64,
    /// `(p-2) Delta_inf u + Delta_H u`; zero iff `u` solves the equation at `P`.
    pub core: f64,
    pub gradient_norm: f64,
    pub degenerate: bool,
}

pub fn delta_h(u: &ScalarField, p: &Point) -> Result<f64> {
    Ok(horizontal_hessian_sym(u, p)?.trace())
}

/// Unit horizontal normal, or a degenerate-gradient error.
pub fn unit_normal(u: &ScalarField, p: &Point) -> Result<HorizontalVector> {
    let grad = horizontal_gradient(u, p)?;
    let norm = grad.norm();
    let threshold = gradient_threshold(u.checked_value(p)?);
    if norm < threshold {
        return Err(HmvpError::DegenerateGradient { norm, threshold });
    }
    Ok(grad.normalized().expect("nonzero gradient"))
}

pub fn delta_inf(u: &ScalarField, p: &Point) -> Result<f64> {
    let nu = unit_normal(u, p)?;
    Ok(horizontal_hessian_sym(u, p)?.quadratic_form(nu.as_slice()))
}

pub(crate) fn check_p(p: f64) -> Result<()> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(HmvpError::InvalidArgument(format!(
            "p must lie in (1, inf), got {p}"
        )));
    }
    Ok(())
}

/// The p-Laplacian at a non-characteristic point.
pub fn delta_p(u: &ScalarField, point: &Point, p: f64) -> Result<OperatorValue> {
    check_p(p)?;
    let grad = horizontal_gradient(u, point)?;
    let norm = grad.norm();
    let threshold = gradient_threshold(u.checked_value(point)?);
    if norm < threshold {
        return Err(HmvpError::DegenerateGradient { norm, threshold });
    }
    let hess = horizontal_hessian_sym(u, point)?;
    let nu = grad.normalized().expect("nonzero gradient");
    let lap = hess.trace();
    let inf = hess.quadratic_form(nu.as_slice());
    let core = (p - 2.0) * inf + lap;
    let value = if p == 2.0 { core } else { norm.powf(p - 2.0) * core };
    Ok(OperatorValue {
        value,
        core,
        gradient_norm: norm,
        degenerate: false,
    })
}

/// Like [`delta_p`] but reports degeneracy in-band instead of failing.
pub fn delta_p_or_degenerate(u: &ScalarField, point: &Point, p: f64) -> Result<OperatorValue> {
    match delta_p(u, point, p) {
        Err(HmvpError::DegenerateGradient { norm, .. }) => Ok(OperatorValue {
            value: f64::NAN,
            core: f64::NAN,
            gradient_norm: norm,
            degenerate: true,
        }),
        other => other,
    }
}

/// Kohn matrix `M(P)` for `n = 1`: `Delta_H u = tr(M(P) D2 u(P))`.
pub fn kohn_matrix(p: &Point) -> Result<Matrix3<f64>> {
    if p.n() != 1 {
        return Err(HmvpError::DimensionMismatch {
            expected: 1,
            found: p.n(),
        });
    }
    let (x, y) = (p.x()[0], p.y()[0]);
    Ok(Matrix3::new(
        1.0,
        0.0,
        2.0 * y,
        0.0,
        1.0,
        -2.0 * x,
        2.0 * y,
        -2.0 * x,
        4.0 * (x * x + y * y),
    ))
}

pub fn kohn_min_eigenvalue(p: &Point) -> Result<f64> {
    let m = kohn_matrix(p)?;
    let eig = SymmetricEigen::new(m);
    Ok(eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min))
}

/// `tr(M(P) D2 u(P))` with the Euclidean Hessian.
pub fn kohn_trace(u: &ScalarField, p: &Point) -> Result<f64> {
    let m = kohn_matrix(p)?;
    let h = u.euclidean_hessian(p)?;
    let mut acc = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            acc += m[(i, j)] * h[(j, i)];
        }
    }
    Ok(acc)
}
