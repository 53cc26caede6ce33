use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use statrs::function::gamma::gamma;

use super::{ball_average, BallSpec, QuadratureSpec};
use crate::error::{HmvpError, Result};
use crate::fields;
use crate::operators::check_p;

/// Which expression produces the mean-value constant `C(n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConstantSource {
    /// `avg_{B(0,1)}(|x|^2 + |y|^2) / (4n)`: the value that makes the
    /// second-order mean-value expansion exact on the calibration field.
    Calibrated,
    /// `I_{n+1} / (2 (n+1) I_n)` with `I_k = int_0^1 (1 - s^2)^(k/2) ds`.
    PaperIntegral,
    /// The closed Gamma-function expression.
    PaperGamma,
}

impl ConstantSource {
    pub const ALL: [ConstantSource; 3] = [
        ConstantSource::Calibrated,
        ConstantSource::PaperIntegral,
        ConstantSource::PaperGamma,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ConstantSource::Calibrated => "calibrated",
            ConstantSource::PaperIntegral => "paper-integral",
            ConstantSource::PaperGamma => "paper-gamma",
        }
    }
}

impl fmt::Display for ConstantSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ConstantSource {
    type Err = HmvpError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "calibrated" => Ok(ConstantSource::Calibrated),
            "paper-integral" | "integral" => Ok(ConstantSource::PaperIntegral),
            "paper-gamma" | "gamma" => Ok(ConstantSource::PaperGamma),
            other => Err(HmvpError::Parse {
                input: other.to_string(),
                reason: "expected calibrated, paper-integral or paper-gamma".into(),
            }),
        }
    }
}

/// Coefficients of the mean-value relation
/// `u(P) = alpha/2 (min + max) + beta avg + o(eps^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MVPCoefficients {
    pub n: usize,
    pub p: f64,
    pub c: f64,
    pub alpha: f64,
    pub beta: f64,
    pub source: ConstantSource,
}

impl MVPCoefficients {
    /// Coefficients with `C(n)` taken from `source`.
    pub fn for_source(n: usize, p: f64, source: ConstantSource) -> Result<Self> {
        let c = c_constant(n, source)?;
        let mut out = alpha_beta(n, p, c)?;
        out.source = source;
        Ok(out)
    }

    pub fn calibrated(n: usize, p: f64) -> Result<Self> {
        Self::for_source(n, p, ConstantSource::Calibrated)
    }

    /// Verifies `alpha + beta = 1` to rounding.
    pub fn check(&self) -> Result<()> {
        let tol = 4.0 * f64::EPSILON * (self.alpha.abs() + self.beta.abs());
        if (self.alpha + self.beta - 1.0).abs() > tol {
            return Err(HmvpError::InvalidArgument(format!(
                "inconsistent coefficients: alpha + beta = {}",
                self.alpha + self.beta
            )));
        }
        Ok(())
    }
}

/// `alpha = 2(p-2)C / (2(p-2)C + 1)`, `beta = 1 / (2(p-2)C + 1)`.
pub fn alpha_beta(n: usize, p: f64, c: f64) -> Result<MVPCoefficients> {
    check_p(p)?;
    if !(c > 0.0 && c < 0.5) {
        return Err(HmvpError::InvalidArgument(format!(
            "C must lie in (0, 1/2), got {c}"
        )));
    }
    let num = 2.0 * (p - 2.0) * c;
    let den = num + 1.0;
    Ok(MVPCoefficients {
        n,
        p,
        c,
        alpha: num / den,
        beta: 1.0 / den,
        source: ConstantSource::Calibrated,
    })
}

/// Surface measure of the unit sphere in `R^(2n)`: `2 pi^n / (n-1)!`.
pub fn unit_sphere_area(n: usize) -> f64 {
    2.0 * PI.powi(n as i32) / gamma(n as f64)
}

fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 40)
}

/// `I_k = int_0^1 (1 - s^2)^(k/2) ds`, by adaptive quadrature after `s = sin(theta)`.
pub fn slice_moment(k: usize) -> f64 {
    let e = (k + 1) as i32;
    adaptive_simpson(&|th: f64| th.cos().powi(e), 0.0, PI / 2.0, 1e-14)
}

/// Lebesgue measure of `B(0, eps)` in `R^(2n+1)`:
/// `eps^(2n+2) (omega(2n) / n) I_n`.
pub fn ball_volume(n: usize, eps: f64) -> Result<f64> {
    if n == 0 {
        return Err(HmvpError::InvalidArgument("n must be at least 1".into()));
    }
    if !(eps > 0.0) {
        return Err(HmvpError::InvalidArgument(format!("radius must be positive, got {eps}")));
    }
    Ok(eps.powi(2 * n as i32 + 2) * unit_sphere_area(n) / n as f64 * slice_moment(n))
}

pub fn c_constant(n: usize, source: ConstantSource) -> Result<f64> {
    if n == 0 {
        return Err(HmvpError::InvalidArgument("n must be at least 1".into()));
    }
    let nf = n as f64;
    match source {
        ConstantSource::PaperIntegral => {
            Ok(slice_moment(n + 1) / (2.0 * (nf + 1.0) * slice_moment(n)))
        }
        ConstantSource::PaperGamma => Ok(gamma((nf + 3.0) / 2.0).powi(2)
            / ((2.0 * nf + 1.0) * gamma(nf / 2.0 + 1.0) * gamma(nf / 2.0 + 2.0))),
        ConstantSource::Calibrated => {
            let quad = QuadratureSpec::calibration(n)?;
            let avg = ball_average(&fields::make_square_norm(n), &BallSpec::centered(n, 1.0)?, &quad)?;
            Ok(avg.value / (4.0 * nf))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn beta_moment(k: usize) -> f64 {
        // I_k = sqrt(pi) Gamma(k/2 + 1) / (2 Gamma(k/2 + 3/2))
        let a = k as f64 / 2.0;
        PI.sqrt() * gamma(a + 1.0) / (2.0 * gamma(a + 1.5))
    }

    #[test]
    fn slice_moments_match_beta_function() {
        for k in 0..8 {
            assert!((slice_moment(k) - beta_moment(k)).abs() < 1e-13, "k = {k}");
        }
        assert!((slice_moment(1) - PI / 4.0).abs() < 1e-14);
        assert!((slice_moment(2) - 2.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn volume_examples() {
        let v1 = ball_volume(1, 1.0).unwrap();
        assert!((v1 - PI * PI / 2.0).abs() < 1e-13);
        let v2 = ball_volume(1, 2.0).unwrap();
        assert!((v2 - 16.0 * PI * PI / 2.0).abs() < 1e-11);
        for n in 1..4 {
            let ratio = ball_volume(n, 0.3).unwrap() / ball_volume(n, 1.0).unwrap();
            assert!((ratio / 0.3f64.powi(2 * n as i32 + 2) - 1.0).abs() < 1e-12);
        }
        assert!(ball_volume(1, 0.0).is_err());
    }

    #[test]
    fn constants_for_n1() {
        let integral = c_constant(1, ConstantSource::PaperIntegral).unwrap();
        assert!((integral - 2.0 / (3.0 * PI)).abs() < 1e-13);
        let g = c_constant(1, ConstantSource::PaperGamma).unwrap();
        assert!((g - 8.0 / (9.0 * PI)).abs() < 1e-13);
        let cal = c_constant(1, ConstantSource::Calibrated).unwrap();
        assert!((cal - 1.0 / (3.0 * PI)).abs() < 1e-12);
    }

    #[test]
    fn calibrated_is_half_the_integral_form() {
        for n in 1..=2 {
            let cal = c_constant(n, ConstantSource::Calibrated).unwrap();
            let integral = c_constant(n, ConstantSource::PaperIntegral).unwrap();
            assert!((cal - 0.5 * integral).abs() < 1e-10, "n = {n}");
        }
        let cal2 = c_constant(2, ConstantSource::Calibrated).unwrap();
        assert!((cal2 - 3.0 * PI / 128.0).abs() < 1e-10);
    }

    #[test]
    fn alpha_beta_examples() {
        let c = alpha_beta(1, 2.0, 0.1).unwrap();
        assert_eq!((c.alpha, c.beta), (0.0, 1.0));
        let c = alpha_beta(1, 4.0, 1.0 / (3.0 * PI)).unwrap();
        assert!((2.0 * 2.0 / (3.0 * PI) - 0.424413).abs() < 1e-6);
        let k = 4.0 / (3.0 * PI);
        assert!((c.alpha - k / (1.0 + k)).abs() < 1e-14);
        assert!((c.beta - 1.0 / (1.0 + k)).abs() < 1e-14);
        assert!((c.alpha - 0.29796).abs() < 1e-5);
        assert!(alpha_beta(1, 1.0, 0.1).is_err());
        assert!(alpha_beta(1, 3.0, 0.5).is_err());
        assert!(alpha_beta(1, 3.0, 0.0).is_err());
        assert!("gamma".parse::<ConstantSource>().is_ok());
        assert!("nope".parse::<ConstantSource>().is_err());
    }

    proptest::proptest! {
        #[test]
        fn coefficient_identities(p in 1.0001..50.0f64, c in 0.001..0.4999f64) {
            let k = alpha_beta(1, p, c).unwrap();
            let tol = 4.0 * f64::EPSILON * (k.alpha.abs() + k.beta.abs());
            proptest::prop_assert!((k.alpha + k.beta - 1.0).abs() <= tol);
            proptest::prop_assert!(k.beta > 0.0);
            if p != 2.0 {
                let ratio = k.alpha / (2.0 * k.beta * k.c);
                proptest::prop_assert!((ratio - (p - 2.0)).abs() <= 1e-12 * (p - 2.0).abs());
            }
        }
    }
}
