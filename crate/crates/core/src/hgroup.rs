//! Heisenberg group algebra and horizontal calculus.
//!
//! Points of `H^n` are stored as `(x_1..x_n, y_1..y_n, t)`. The horizontal
//! frame is `X_i = d/dx_i + 2 y_i d/dt`, `Y_i = d/dy_i - 2 x_i d/dt`, always
//! ordered `X_1..X_n, Y_1..Y_n`.

use std::fmt;

use smallvec::SmallVec;

use crate::error::{HmvpError, Result};
use crate::fields::ScalarField;

pub type Coords = SmallVec<[f64; 5]>;

/// A point `(x, y, t)` of `H^n`.
#[derive(Clone, PartialEq)]
pub struct Point {
    n: usize,
    coords: Coords,
}

impl Point {
    pub fn new(x: &[f64], y: &[f64], t: f64) -> Result<Self> {
        if x.is_empty() || x.len() != y.len() {
            return Err(HmvpError::InvalidArgument(format!(
                "x and y must have the same positive length (got {} and {})",
                x.len(),
                y.len()
            )));
        }
        let mut coords = Coords::with_capacity(2 * x.len() + 1);
        coords.extend_from_slice(x);
        coords.extend_from_slice(y);
        coords.push(t);
        Self::from_coords(x.len(), &coords)
    }

    /// Builds a point from the flat layout `(x_1..x_n, y_1..y_n, t)`.
    pub fn from_coords(n: usize, coords: &[f64]) -> Result<Self> {
        if n == 0 || coords.len() != 2 * n + 1 {
            return Err(HmvpError::InvalidArgument(format!(
                "expected {} coordinates for n = {n}, got {}",
                2 * n + 1,
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(HmvpError::InvalidArgument(
                "point coordinates must be finite".into(),
            ));
        }
        Ok(Self {
            n,
            coords: Coords::from_slice(coords),
        })
    }

    /// Unchecked constructor for hot loops; the caller guarantees the layout.
    pub(crate) fn from_raw(n: usize, coords: Coords) -> Self {
        debug_assert_eq!(coords.len(), 2 * n + 1);
        Self { n, coords }
    }

    /// Point of `H^1`.
    pub fn h1(x: f64, y: f64, t: f64) -> Self {
        Self::from_raw(1, Coords::from_slice(&[x, y, t]))
    }

    pub fn origin(n: usize) -> Self {
        assert!(n >= 1, "H^n requires n >= 1");
        Self::from_raw(n, Coords::from_elem(0.0, 2 * n + 1))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn x(&self) -> &[f64] {
        &self.coords[..self.n]
    }

    pub fn y(&self) -> &[f64] {
        &self.coords[self.n..2 * self.n]
    }

    pub fn t(&self) -> f64 {
        self.coords[2 * self.n]
    }

    /// The horizontal part `(x, y)` as one slice of length `2n`.
    pub fn horizontal(&self) -> &[f64] {
        &self.coords[..2 * self.n]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn is_finite(&self) -> bool {
        self.coords.iter().all(|c| c.is_finite())
    }

    /// `|x|^2 + |y|^2`.
    pub fn horizontal_norm_sq(&self) -> f64 {
        self.horizontal().iter().map(|c| c * c).sum()
    }

    pub(crate) fn check_same_dim(&self, other: &Point) -> Result<()> {
        if self.n != other.n {
            return Err(HmvpError::DimensionMismatch {
                expected: self.n,
                found: other.n,
            });
        }
        Ok(())
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:?}, {:?}, {})", self.x(), self.y(), self.t())
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.coords.iter().map(|c| format!("{c}")).collect();
        write!(f, "({})", parts.join(", "))
    }
}

/// Group law without the dimension check.
pub(crate) fn mul_unchecked(p: &Point, q: &Point) -> Point {
    let n = p.n;
    let mut out = Coords::with_capacity(2 * n + 1);
    let mut twist = 0.0;
    for i in 0..2 * n {
        out.push(p.coords[i] + q.coords[i]);
    }
    for i in 0..n {
        // x_2 . y_1 - x_1 . y_2
        twist += q.coords[i] * p.coords[n + i] - p.coords[i] * q.coords[n + i];
    }
    out.push(p.coords[2 * n] + q.coords[2 * n] + 2.0 * twist);
    Point::from_raw(n, out)
}

/// `P o Q = (x1 + x2, y1 + y2, t1 + t2 + 2 (x2 . y1 - x1 . y2))`.
pub fn group_mul(p: &Point, q: &Point) -> Result<Point> {
    p.check_same_dim(q)?;
    Ok(mul_unchecked(p, q))
}

pub fn group_inv(p: &Point) -> Point {
    Point::from_raw(p.n, p.coords.iter().map(|c| -c).collect())
}

pub(crate) fn dilate_unchecked(r: f64, p: &Point) -> Point {
    let n = p.n;
    let mut out: Coords = p.coords.iter().map(|c| r * c).collect();
    out[2 * n] = r * r * p.t();
    Point::from_raw(n, out)
}

/// Anisotropic dilation `(rx, ry, r^2 t)`.
pub fn dilate(r: f64, p: &Point) -> Result<Point> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(HmvpError::InvalidArgument(format!(
            "dilation factor must be positive and finite, got {r}"
        )));
    }
    Ok(dilate_unchecked(r, p))
}

/// `((|x|^2 + |y|^2)^2 + t^2)^(1/4)`.
pub fn gauge_norm(p: &Point) -> f64 {
    let a = p.horizontal_norm_sq();
    let t = p.t();
    (a * a + t * t).sqrt().sqrt()
}

/// Left-invariant gauge distance `||P^-1 o Q||`.
pub fn gauge_distance(p: &Point, q: &Point) -> Result<f64> {
    p.check_same_dim(q)?;
    Ok(gauge_norm(&mul_unchecked(&group_inv(p), q)))
}

/// Homogeneous dimension `Q = 2n + 2`.
pub fn homogeneous_dimension(n: usize) -> usize {
    2 * n + 2
}

/// Coefficients of a horizontal vector in the frame `X_1..X_n, Y_1..Y_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizontalVector(Vec<f64>);

impl HorizontalVector {
    pub fn new(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.is_empty() || !coefficients.len().is_multiple_of(2) {
            return Err(HmvpError::InvalidArgument(format!(
                "horizontal vectors have even positive length, got {}",
                coefficients.len()
            )));
        }
        Ok(Self(coefficients))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn dot(&self, other: &HorizontalVector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// `self / |self|`, or `None` for the zero vector.
    pub fn normalized(&self) -> Option<HorizontalVector> {
        let norm = self.norm();
        (norm > 0.0).then(|| HorizontalVector(self.0.iter().map(|c| c / norm).collect()))
    }
}

/// A `2n x 2n` matrix in the horizontal frame, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizontalMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl HorizontalMatrix {
    fn zeros(dim: usize) -> Self {
        Self {
            dim,
            entries: vec![0.0; dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    fn set(&mut self, i: usize, j: usize, v: f64) {
        self.entries[i * self.dim + j] = v;
    }

    pub fn symmetrize(&self) -> SymHorizontalMatrix {
        let mut out = HorizontalMatrix::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                out.set(i, j, 0.5 * (self.get(i, j) + self.get(j, i)));
            }
        }
        SymHorizontalMatrix(out)
    }
}

/// Symmetrized horizontal Hessian `(D + D^T) / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymHorizontalMatrix(HorizontalMatrix);

impl SymHorizontalMatrix {
    pub fn dim(&self) -> usize {
        self.0.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0.get(i, j)
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.get(i, i)).sum()
    }

    /// `<M v, v>`.
    pub fn quadratic_form(&self, v: &[f64]) -> f64 {
        let d = self.dim();
        assert_eq!(v.len(), d, "quadratic form dimension");
        let mut acc = 0.0;
        for i in 0..d {
            for j in 0..d {
                acc += self.get(i, j) * v[i] * v[j];
            }
        }
        acc
    }

    pub fn max_abs(&self) -> f64 {
        self.0.entries.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Euclidean coordinate index and `d/dt` coefficient of frame vector `a`.
fn frame_component(p: &Point, a: usize) -> (usize, f64) {
    let n = p.n;
    if a < n {
        (a, 2.0 * p.y()[a])
    } else {
        (a, -2.0 * p.x()[a - n])
    }
}

/// Horizontal gradient `(X_1 u, .., X_n u, Y_1 u, .., Y_n u)(P)`.
pub fn horizontal_gradient(u: &ScalarField, p: &Point) -> Result<HorizontalVector> {
    let grad = u.euclidean_gradient(p)?;
    Ok(horizontal_from_euclidean(p, &grad))
}

pub(crate) fn horizontal_from_euclidean(p: &Point, grad: &[f64]) -> HorizontalVector {
    let n = p.n;
    let ut = grad[2 * n];
    let coeffs = (0..2 * n)
        .map(|a| {
            let (idx, c) = frame_component(p, a);
            grad[idx] + c * ut
        })
        .collect();
    HorizontalVector(coeffs)
}

/// Non-symmetrized horizontal Hessian with entry `(a, b) = V_a (V_b u)(P)`.
///
/// The diagonal blocks carry the commutator: `X_i Y_i u - Y_i X_i u = -4 u_t`.
pub fn horizontal_hessian(u: &ScalarField, p: &Point) -> Result<HorizontalMatrix> {
    let grad = u.euclidean_gradient(p)?;
    let hess = u.euclidean_hessian(p)?;
    let n = p.n;
    let tt = 2 * n;
    let ut = grad[tt];
    let mut out = HorizontalMatrix::zeros(2 * n);
    for a in 0..2 * n {
        let (ia, ca) = frame_component(p, a);
        for b in 0..2 * n {
            let (ib, cb) = frame_component(p, b);
            let mut v = hess[(ia, ib)] + cb * hess[(ia, tt)] + ca * hess[(tt, ib)]
                + ca * cb * hess[(tt, tt)];
            // V_a applied to the t-coefficient of V_b
            if a >= n && b < n && a - n == b {
                v += 2.0 * ut;
            } else if a < n && b >= n && b - n == a {
                v -= 2.0 * ut;
            }
            out.set(a, b, v);
        }
    }
    Ok(out)
}

pub fn horizontal_hessian_sym(u: &ScalarField, p: &Point) -> Result<SymHorizontalMatrix> {
    Ok(horizontal_hessian(u, p)?.symmetrize())
}

/// Remainder of the second-order horizontal Taylor polynomial at the origin:
/// `u(P) - [u(0) + <grad_H u(0), (x, y)> + t u_t(0) + 1/2 <D2* u(0) (x, y), (x, y)>]`.
pub fn taylor_residual(u: &ScalarField, p: &Point) -> Result<f64> {
    let origin = Point::origin(p.n);
    let u0 = u.checked_value(&origin)?;
    let grad = u.euclidean_gradient(&origin)?;
    let gh = horizontal_from_euclidean(&origin, &grad);
    let hs = horizontal_hessian_sym(u, &origin)?;
    let z = p.horizontal();
    let linear: f64 = gh.as_slice().iter().zip(z).map(|(a, b)| a * b).sum();
    let approx = u0 + linear + p.t() * grad[2 * p.n] + 0.5 * hs.quadratic_form(z);
    Ok(u.checked_value(p)? - approx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn identity_and_noncommutativity() {
        let p = Point::h1(0.3, -1.2, 2.0);
        assert_eq!(group_mul(&Point::origin(1), &p).unwrap(), p);
        let e1 = Point::h1(1.0, 0.0, 0.0);
        let e2 = Point::h1(0.0, 1.0, 0.0);
        assert_eq!(group_mul(&e1, &e2).unwrap(), Point::h1(1.0, 1.0, -2.0));
        assert_eq!(group_mul(&e2, &e1).unwrap(), Point::h1(1.0, 1.0, 2.0));
    }

    #[test]
    fn inverse_examples() {
        let p = Point::h1(1.0, 2.0, 3.0);
        let inv = group_inv(&p);
        assert_eq!(inv, Point::h1(-1.0, -2.0, -3.0));
        assert_eq!(group_mul(&p, &inv).unwrap(), Point::origin(1));
        assert_eq!(group_inv(&Point::origin(2)), Point::origin(2));
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let err = group_mul(&Point::origin(1), &Point::origin(2)).unwrap_err();
        assert!(matches!(err, HmvpError::DimensionMismatch { .. }));
        assert!(gauge_distance(&Point::origin(2), &Point::origin(1)).is_err());
        assert!(Point::new(&[1.0], &[1.0, 2.0], 0.0).is_err());
        assert!(Point::new(&[f64::NAN], &[1.0], 0.0).is_err());
    }

    #[test]
    fn dilation_examples() {
        let p = Point::h1(1.0, 1.0, 1.0);
        assert_eq!(dilate(1.0, &p).unwrap(), p);
        assert_eq!(dilate(2.0, &p).unwrap(), Point::h1(2.0, 2.0, 4.0));
        assert!(dilate(0.0, &p).is_err());
        assert!(dilate(-1.0, &p).is_err());
    }

    #[test]
    fn gauge_examples() {
        assert_eq!(gauge_norm(&Point::h1(1.0, 0.0, 0.0)), 1.0);
        assert_eq!(gauge_norm(&Point::h1(0.0, 0.0, 1.0)), 1.0);
        assert!((gauge_norm(&Point::h1(1.0, 1.0, 1.0)) - 5f64.powf(0.25)).abs() < 1e-15);
        let d = gauge_distance(&Point::h1(1.0, 0.0, 0.0), &Point::h1(0.0, 1.0, 0.0)).unwrap();
        assert!((d - 8f64.powf(0.25)).abs() < 1e-15);
        let q = Point::h1(0.4, -0.2, 0.7);
        assert_eq!(gauge_distance(&q, &q).unwrap(), 0.0);
        assert_eq!(gauge_distance(&Point::origin(1), &q).unwrap(), gauge_norm(&q));
    }

    #[test]
    fn gradient_examples() {
        let p = Point::h1(1.0, 2.0, 0.0);
        let t = fields::make_coordinate(1, fields::Coordinate::T).unwrap();
        assert_eq!(horizontal_gradient(&t, &p).unwrap().as_slice(), &[4.0, -2.0]);
        let x1 = fields::make_coordinate(2, fields::Coordinate::X(0)).unwrap();
        let q = Point::new(&[0.5, 1.0], &[-1.0, 2.0], 3.0).unwrap();
        assert_eq!(
            horizontal_gradient(&x1, &q).unwrap().as_slice(),
            &[1.0, 0.0, 0.0, 0.0]
        );
        let sq = fields::make_square_norm(1);
        let g = horizontal_gradient(&sq, &Point::h1(1.0, 2.0, 5.0)).unwrap();
        assert_eq!(g.as_slice(), &[2.0, 4.0]);
    }

    #[test]
    fn hessian_examples() {
        let p = Point::h1(0.7, -0.3, 1.1);
        let x1 = fields::make_coordinate(1, fields::Coordinate::X(0)).unwrap();
        assert_eq!(horizontal_hessian_sym(&x1, &p).unwrap().max_abs(), 0.0);
        let sq = fields::make_square_norm(1);
        let h = horizontal_hessian_sym(&sq, &p).unwrap();
        assert_eq!((h.get(0, 0), h.get(0, 1), h.get(1, 0), h.get(1, 1)), (2.0, 0.0, 0.0, 2.0));
        let t = fields::make_coordinate(1, fields::Coordinate::T).unwrap();
        let full = horizontal_hessian(&t, &p).unwrap();
        // X(Y t) = X(-2x) = -2, Y(X t) = Y(2y) = 2
        assert_eq!(full.get(0, 1), -2.0);
        assert_eq!(full.get(1, 0), 2.0);
        assert_eq!(full.symmetrize().max_abs(), 0.0);
    }

    #[test]
    fn taylor_residual_examples() {
        let p = Point::h1(0.3, -0.2, 0.05);
        let affine = fields::make_polynomial_str(1, "2 + x - 3*y + 5*t").unwrap();
        assert!(taylor_residual(&affine, &p).unwrap().abs() < 1e-14);
        let sq = fields::make_square_norm(1);
        assert!(taylor_residual(&sq, &p).unwrap().abs() < 1e-15);
        let cube = fields::make_polynomial_str(1, "x^3").unwrap();
        for s in [0.1, 0.01, 0.001] {
            let q = dilate(s, &Point::h1(1.0, 0.0, 0.0)).unwrap();
            let r = taylor_residual(&cube, &q).unwrap() / gauge_norm(&q).powi(2);
            assert!((r - s).abs() < 1e-12 * (1.0 + s));
        }
    }

    #[test]
    fn taylor_residual_is_little_o_of_gauge_squared() {
        let u = fields::make_polynomial_str(1, "x*y + t^2 + x^2*t + y^3 + 2*t").unwrap();
        let dir = Point::h1(0.6, -0.8, 0.5);
        let mut prev = f64::INFINITY;
        for s in [0.2, 0.1, 0.05, 0.025] {
            let q = dilate(s, &dir).unwrap();
            let r = (taylor_residual(&u, &q).unwrap() / gauge_norm(&q).powi(2)).abs();
            assert!(r < prev);
            prev = r;
        }
        assert!(prev < 0.05);
    }

    fn h1_point() -> impl Strategy<Value = Point> {
        (-3.0..3.0f64, -3.0..3.0f64, -5.0..5.0f64).prop_map(|(x, y, t)| Point::h1(x, y, t))
    }

    fn h2_point() -> impl Strategy<Value = Point> {
        proptest::collection::vec(-3.0..3.0f64, 5)
            .prop_map(|c| Point::from_coords(2, &c).unwrap())
    }

    proptest! {
        #[test]
        fn associativity(p in h2_point(), q in h2_point(), r in h2_point()) {
            let a = group_mul(&group_mul(&p, &q).unwrap(), &r).unwrap();
            let b = group_mul(&p, &group_mul(&q, &r).unwrap()).unwrap();
            let scale = 1.0 + [&p, &q, &r].iter()
                .flat_map(|v| v.coords().iter())
                .fold(0.0f64, |m, c| m.max(c.abs()));
            for (u, v) in a.coords().iter().zip(b.coords()) {
                prop_assert!((u - v).abs() <= 1e-12 * scale * scale);
            }
        }

        #[test]
        fn inverse_cancels(p in h2_point()) {
            let e = group_mul(&p, &group_inv(&p)).unwrap();
            prop_assert!(e.coords().iter().all(|c| c.abs() < 1e-12));
        }

        #[test]
        fn gauge_is_homogeneous(p in h1_point(), r in 0.01..10.0f64) {
            let lhs = gauge_norm(&dilate(r, &p).unwrap());
            prop_assert!(close(lhs, r * gauge_norm(&p), 1e-12));
        }

        #[test]
        fn dilation_is_a_homomorphism(p in h2_point(), q in h2_point(), r in 0.1..5.0f64) {
            let lhs = dilate(r, &group_mul(&p, &q).unwrap()).unwrap();
            let rhs = group_mul(&dilate(r, &p).unwrap(), &dilate(r, &q).unwrap()).unwrap();
            for (u, v) in lhs.coords().iter().zip(rhs.coords()) {
                prop_assert!(close(*u, *v, 1e-12));
            }
        }

        #[test]
        fn gauge_distance_is_symmetric(p in h1_point(), q in h1_point()) {
            let a = gauge_distance(&p, &q).unwrap();
            let b = gauge_distance(&q, &p).unwrap();
            prop_assert!(close(a, b, 1e-12));
        }
    }
}
