//! Limits of sequences sampled at shrinking radii.
//!
//! The limit is the intercept of a least-squares polynomial in `eps`
//! (degree 2 with four or more samples, degree 1 otherwise). The error
//! estimate is the larger of the residual standard error of the intercept and
//! twice the drift of the intercept when the coarsest sample is dropped.

use nalgebra::{DMatrix, DVector};

use crate::error::{HmvpError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extrapolation {
    pub limit: f64,
    pub fit_error: f64,
    /// Observed order `q` in `|v(eps) - limit| ~ eps^q`, when measurable.
    pub order: Option<f64>,
    pub degree: usize,
}

fn intercept(eps: &[f64], values: &[f64], degree: usize) -> Option<(f64, f64)> {
    let m = eps.len();
    let scale = eps.iter().cloned().fold(0.0, f64::max);
    let a = DMatrix::from_fn(m, degree + 1, |i, j| (eps[i] / scale).powi(j as i32));
    let b = DVector::from_column_slice(values);
    let svd = a.clone().svd(true, true);
    let coef = svd.solve(&b, 1e-14).ok()?;
    let dof = m as f64 - (degree + 1) as f64;
    let resid = (&a * &coef - &b).norm();
    let se = if dof > 0.0 {
        // standard error of the intercept: s * sqrt((A^T A)^-1 [0,0])
        let ata = a.transpose() * &a;
        let var00 = ata.try_inverse().map(|m| m[(0, 0)]).unwrap_or(f64::INFINITY);
        (resid / dof.sqrt()) * var00.max(0.0).sqrt()
    } else {
        0.0
    };
    Some((coef[0], se))
}

/// Extrapolates `values[k]` sampled at `eps[k]` to `eps -> 0`.
pub fn extrapolate(eps: &[f64], values: &[f64]) -> Result<Extrapolation> {
    let m = eps.len();
    if m < 2 || values.len() != m {
        return Err(HmvpError::DegenerateEstimate(format!(
            "need at least two samples with matching lengths, got {} and {}",
            m,
            values.len()
        )));
    }
    if eps.iter().any(|e| !(*e > 0.0)) || values.iter().any(|v| !v.is_finite()) {
        return Err(HmvpError::DegenerateEstimate(
            "samples must be finite with positive radii".into(),
        ));
    }
    let degree = if m >= 4 { 2 } else { 1 };
    let (limit, se) = intercept(eps, values, degree)
        .ok_or_else(|| HmvpError::DegenerateEstimate("singular fit".into()))?;
    let coarsest = (0..m)
        .max_by(|&a, &b| eps[a].total_cmp(&eps[b]))
        .expect("nonempty");
    let (e2, v2): (Vec<f64>, Vec<f64>) = (0..m)
        .filter(|&k| k != coarsest)
        .map(|k| (eps[k], values[k]))
        .unzip();
    let drift = if e2.len() > degree {
        intercept(&e2, &v2, degree).map(|(l, _)| (l - limit).abs()).unwrap_or(0.0)
    } else {
        let finest = (0..m).min_by(|&a, &b| eps[a].total_cmp(&eps[b])).unwrap();
        (values[finest] - limit).abs()
    };
    let scale = 1.0 + values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let floor = 64.0 * f64::EPSILON * scale;
    let order = observed_order(eps, values, limit, floor);
    Ok(Extrapolation {
        limit,
        fit_error: se.max(2.0 * drift),
        order,
        degree,
    })
}

fn observed_order(eps: &[f64], values: &[f64], limit: f64, floor: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = eps
        .iter()
        .zip(values)
        .filter(|(_, v)| (*v - limit).abs() > floor)
        .map(|(e, v)| (e.ln(), (v - limit).abs().ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_quadratics() {
        let eps = [0.4, 0.2, 0.1, 0.05];
        let vals: Vec<f64> = eps.iter().map(|e| 2.0 - 6.0 * e * e + 0.5 * e).collect();
        let x = extrapolate(&eps, &vals).unwrap();
        assert!((x.limit - 2.0).abs() < 1e-12);
        assert!(x.fit_error < 1e-10);
    }

    #[test]
    fn recovers_order() {
        let eps: Vec<f64> = (0..6).map(|k| 0.4 * 0.5f64.powi(k)).collect();
        let vals: Vec<f64> = eps.iter().map(|e| 1.0 + e.powi(3)).collect();
        let x = extrapolate(&eps, &vals).unwrap();
        assert!((x.limit - 1.0).abs() < 5e-3);
        assert!(x.fit_error >= (x.limit - 1.0).abs());
    }

    #[test]
    fn constant_sequence_has_no_order() {
        let x = extrapolate(&[0.2, 0.1, 0.05], &[3.0, 3.0, 3.0]).unwrap();
        assert!((x.limit - 3.0).abs() < 1e-14);
        assert!(x.order.is_none());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(extrapolate(&[0.1], &[1.0]).is_err());
        assert!(extrapolate(&[0.1, 0.0], &[1.0, 1.0]).is_err());
        assert!(extrapolate(&[0.2, 0.1], &[1.0, f64::NAN]).is_err());
    }
}
