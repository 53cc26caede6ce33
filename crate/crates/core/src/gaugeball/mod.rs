//! Gauge balls: volume, averages, extrema and the mean-value constants.
//!
//! `B(P, eps) = P o delta_eps(B(0, 1))`; Lebesgue measure is left-invariant,
//! so every routine works on the unit ball and maps nodes through
//! `q -> P o delta_eps(q)`.

mod constants;
mod extrema;
mod quadrature;

pub use constants::{
    alpha_beta, ball_volume, c_constant, slice_moment, unit_sphere_area, ConstantSource,
    MVPCoefficients,
};
pub use extrema::{ball_extrema, ExtremaConfig, ExtremumResult, ScaledCoords};
pub use quadrature::{
    ball_average, indicator_volume, AverageResult, BallRule, QuadratureMethod, QuadratureSpec,
};

use crate::error::{HmvpError, Result};
use crate::hgroup::{self, Coords, Point};

/// Gauge ball `B(center, radius)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BallSpec {
    pub center: Point,
    pub radius: f64,
}

impl BallSpec {
    pub fn new(center: Point, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(HmvpError::InvalidArgument(format!(
                "ball radius must be positive and finite, got {radius}"
            )));
        }
        Ok(Self { center, radius })
    }

    pub fn centered(n: usize, radius: f64) -> Result<Self> {
        Self::new(Point::origin(n), radius)
    }

    pub fn n(&self) -> usize {
        self.center.n()
    }

    /// `center o delta_radius(q)` for `q` in flat layout.
    #[inline]
    pub(crate) fn map_unit(&self, q: &[f64]) -> Point {
        let n = self.n();
        let eps = self.radius;
        let mut c = Coords::with_capacity(2 * n + 1);
        for &v in &q[..2 * n] {
            c.push(eps * v);
        }
        c.push(eps * eps * q[2 * n]);
        hgroup::mul_unchecked(&self.center, &Point::from_raw(n, c))
    }
}
