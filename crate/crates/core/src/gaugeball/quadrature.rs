//! Averages over gauge balls.
//!
//! The product rule slices the unit ball by `t = sin(theta)`, so the slice
//! radius `(1 - t^2)^(1/4)` and the Jacobian `cos(theta)` stay smooth in
//! `theta` and Gauss-Legendre in `theta` converges spectrally. Each slice is
//! a Euclidean ball of `R^(2n)` integrated in polar form: Gauss-Legendre in
//! the radius times a uniform rule on the circle (`n = 1`) or on `S^3` in
//! Hopf coordinates (`n = 2`). Nodes come in exact antipodal pairs
//! `(q, -q)`, so odd integrands cancel to the last bit.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use gauss_quad::legendre::GaussLegendre;

use super::BallSpec;
use crate::error::{HmvpError, Result};
use crate::exec::{pairwise_sum, Execution};
use crate::fields::ScalarField;
use crate::lds::{Halton, MAX_DIM};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QuadratureMethod {
    /// Product rule; for `n = 2` the radial count also sets the Hopf
    /// latitude nodes and the angular count applies to each circle.
    Product {
        t_nodes: usize,
        radial_nodes: usize,
        angular_nodes: usize,
    },
    /// Shifted Halton points in the bounding box, indicator-filtered.
    LowDiscrepancy { samples: u64, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub method: QuadratureMethod,
    pub execution: Execution,
}

impl QuadratureSpec {
    pub fn product(t_nodes: usize, radial_nodes: usize, angular_nodes: usize) -> Result<Self> {
        if t_nodes < 2 || radial_nodes < 2 || angular_nodes < 2 {
            return Err(HmvpError::InvalidArgument(format!(
                "product rule node counts must be >= 2, got {t_nodes},{radial_nodes},{angular_nodes}"
            )));
        }
        Ok(Self {
            method: QuadratureMethod::Product {
                t_nodes,
                radial_nodes,
                // antipodal pairing needs an even angular count
                angular_nodes: angular_nodes + angular_nodes % 2,
            },
            execution: Execution::default(),
        })
    }

    pub fn low_discrepancy(samples: u64, seed: u64) -> Result<Self> {
        if samples < 2 {
            return Err(HmvpError::InvalidArgument(
                "low-discrepancy sample count must be >= 2".into(),
            ));
        }
        Ok(Self {
            method: QuadratureMethod::LowDiscrepancy { samples, seed },
            execution: Execution::default(),
        })
    }

    /// Default rule for `H^n`: product for `n <= 2`, Halton otherwise.
    pub fn default_for(n: usize) -> Result<Self> {
        match n {
            1 => Self::product(32, 32, 64),
            2 => Self::product(16, 12, 16),
            _ => Self::low_discrepancy(400_000, 1),
        }
    }

    /// Rule used to calibrate `C(n)` on the radial field `|x|^2 + |y|^2`.
    pub fn calibration(n: usize) -> Result<Self> {
        match n {
            1 => Self::product(32, 32, 64),
            2 => Self::product(32, 16, 8),
            _ => Self::low_discrepancy(4_000_000, 1),
        }
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    fn coarse(&self) -> Option<Self> {
        match self.method {
            QuadratureMethod::Product {
                t_nodes,
                radial_nodes,
                angular_nodes,
            } => Self::product(
                (t_nodes / 2).max(2),
                (radial_nodes / 2).max(2),
                (angular_nodes / 2).max(2),
            )
            .ok()
            .map(|s| s.with_execution(self.execution)),
            QuadratureMethod::LowDiscrepancy { .. } => None,
        }
    }
}

impl fmt::Display for QuadratureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.method {
            QuadratureMethod::Product {
                t_nodes,
                radial_nodes,
                angular_nodes,
            } => write!(f, "product:{t_nodes},{radial_nodes},{angular_nodes}"),
            QuadratureMethod::LowDiscrepancy { samples, seed } => {
                write!(f, "lds:{samples}:seed={seed}")
            }
        }
    }
}

impl FromStr for QuadratureSpec {
    type Err = HmvpError;

    /// `product:T,R,A` or `lds:N[:seed=S]`.
    fn from_str(s: &str) -> Result<Self> {
        let fail = |reason: &str| HmvpError::Parse {
            input: s.to_string(),
            reason: reason.to_string(),
        };
        let mut parts = s.trim().split(':');
        match parts.next() {
            Some("product") => {
                let counts: Vec<usize> = parts
                    .next()
                    .ok_or_else(|| fail("missing node counts"))?
                    .split(',')
                    .map(|c| c.trim().parse::<usize>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| fail("node counts must be integers"))?;
                if counts.len() != 3 || parts.next().is_some() {
                    return Err(fail("expected product:T,R,A"));
                }
                Self::product(counts[0], counts[1], counts[2])
            }
            Some("lds") => {
                let samples: u64 = parts
                    .next()
                    .ok_or_else(|| fail("missing sample count"))?
                    .trim()
                    .parse()
                    .map_err(|_| fail("sample count must be an integer"))?;
                let mut seed = 1;
                if let Some(opt) = parts.next() {
                    seed = opt
                        .trim()
                        .strip_prefix("seed=")
                        .and_then(|v| v.parse().ok())
                        .ok_or_else(|| fail("expected seed=<integer>"))?;
                }
                if parts.next().is_some() {
                    return Err(fail("trailing fields"));
                }
                Self::low_discrepancy(samples, seed)
            }
            _ => Err(fail("expected product:... or lds:...")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AverageResult {
    pub value: f64,
    pub error_estimate: f64,
    pub evaluations: u64,
}

/// Gauss-Legendre on `[-1, 1]` with exactly mirrored nodes and weights.
fn symmetric_gauss_legendre(m: usize) -> Result<Vec<(f64, f64)>> {
    let rule = GaussLegendre::new(m).map_err(|e| HmvpError::Quadrature(e.to_string()))?;
    let mut pairs: Vec<(f64, f64)> = rule.as_node_weight_pairs().to_vec();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    for i in 0..m / 2 {
        let j = m - 1 - i;
        let node = 0.5 * (pairs[j].0 - pairs[i].0);
        let weight = 0.5 * (pairs[i].1 + pairs[j].1);
        pairs[i] = (-node, weight);
        pairs[j] = (node, weight);
    }
    if m % 2 == 1 {
        pairs[m / 2].0 = 0.0;
    }
    Ok(pairs)
}

/// Weighted node set on the unit gauge ball `B(0, 1)`, stored as antipodal
/// pairs: each stored node `q` stands for `q` and `-q` with the same weight.
#[derive(Debug, Clone)]
pub struct BallRule {
    n: usize,
    half_nodes: Vec<f64>,
    weights: Vec<f64>,
    total_weight: f64,
}

impl BallRule {
    pub fn product(n: usize, t_nodes: usize, radial_nodes: usize, angular_nodes: usize) -> Result<Self> {
        if n == 0 || n > 2 {
            return Err(HmvpError::InvalidArgument(format!(
                "product rule is available for n <= 2 only (n = {n})"
            )));
        }
        if t_nodes < 2 || radial_nodes < 2 || angular_nodes < 2 || !angular_nodes.is_multiple_of(2) {
            return Err(HmvpError::InvalidArgument(
                "node counts must be >= 2 with an even angular count".into(),
            ));
        }
        let theta = symmetric_gauss_legendre(t_nodes)?;
        let radial = symmetric_gauss_legendre(radial_nodes)?;
        let d = 2 * n + 1;
        let half = angular_nodes / 2;
        // sphere rule in R^(2n): (unit direction in flat (x, y) layout, weight), half set
        let mut sphere: Vec<(Vec<f64>, f64)> = Vec::new();
        match n {
            1 => {
                let w = 2.0 * PI / angular_nodes as f64;
                for k in 0..half {
                    let phi = 2.0 * PI * k as f64 / angular_nodes as f64;
                    sphere.push((vec![phi.cos(), phi.sin()], w));
                }
            }
            _ => {
                // S^3: (sqrt(1-w) e^{i phi1}, sqrt(w) e^{i phi2}), measure dw dphi1 dphi2 / 2
                let hopf = symmetric_gauss_legendre(radial_nodes)?;
                let dphi = 2.0 * PI / angular_nodes as f64;
                for &(xi, wx) in &hopf {
                    let w = 0.5 * (1.0 + xi);
                    let (a, b) = ((1.0 - w).sqrt(), w.sqrt());
                    for k1 in 0..half {
                        let p1 = dphi * k1 as f64;
                        for k2 in 0..angular_nodes {
                            let p2 = dphi * k2 as f64;
                            // layout (x1, x2, y1, y2)
                            let dir = vec![a * p1.cos(), b * p2.cos(), a * p1.sin(), b * p2.sin()];
                            sphere.push((dir, 0.5 * 0.5 * wx * dphi * dphi));
                        }
                    }
                }
            }
        }
        let mut half_nodes = Vec::with_capacity(theta.len() * radial.len() * sphere.len() * d);
        let mut weights = Vec::with_capacity(theta.len() * radial.len() * sphere.len());
        for &(xi, wt) in &theta {
            let th = 0.5 * PI * xi;
            let s = th.sin();
            let c = th.cos();
            let slice_r = (c * c).sqrt().sqrt(); // (1 - s^2)^(1/4)
            let wt = wt * 0.5 * PI * c;
            for &(eta, wr) in &radial {
                let r = 0.5 * slice_r * (1.0 + eta);
                let wr = wr * 0.5 * slice_r * r.powi(2 * n as i32 - 1);
                for (dir, ws) in &sphere {
                    half_nodes.extend(dir.iter().map(|v| r * v));
                    half_nodes.push(s);
                    weights.push(wt * wr * ws);
                }
            }
        }
        let total_weight = 2.0 * pairwise_sum(&weights);
        Ok(Self {
            n,
            half_nodes,
            weights,
            total_weight,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of nodes, counting both members of each antipodal pair.
    pub fn len(&self) -> usize {
        2 * self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Sum of weights; equals the volume of `B(0, 1)` up to quadrature error.
    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    /// All nodes with weights normalized to sum to one, pairs adjacent.
    pub fn normalized_nodes(&self) -> Vec<(Vec<f64>, f64)> {
        let d = 2 * self.n + 1;
        let mut out = Vec::with_capacity(self.len());
        for (k, w) in self.weights.iter().enumerate() {
            let q = &self.half_nodes[k * d..(k + 1) * d];
            out.push((q.to_vec(), w / self.total_weight));
            out.push((q.iter().map(|v| -v).collect(), w / self.total_weight));
        }
        out
    }

    /// Average of `u` over `ball` under this rule.
    pub fn average(&self, u: &ScalarField, ball: &BallSpec, execution: Execution) -> Result<f64> {
        const CHUNK: usize = 1024;
        let d = 2 * self.n + 1;
        let pairs = self.weights.len();
        let chunks = pairs.div_ceil(CHUNK);
        let partial = execution.map_indexed(chunks, |c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(pairs);
            let mut buf = Vec::with_capacity(hi - lo);
            let mut neg = [0.0; MAX_DIM];
            for k in lo..hi {
                let q = &self.half_nodes[k * d..(k + 1) * d];
                for (o, v) in neg.iter_mut().zip(q) {
                    *o = -v;
                }
                let a = u.value(&ball.map_unit(q));
                let b = u.value(&ball.map_unit(&neg[..d]));
                buf.push(self.weights[k] * (a + b));
            }
            pairwise_sum(&buf)
        });
        let value = pairwise_sum(&partial) / self.total_weight;
        if value.is_finite() {
            Ok(value)
        } else {
            Err(HmvpError::Quadrature(format!(
                "non-finite average of `{}` over B({}, {})",
                u.name(),
                ball.center,
                ball.radius
            )))
        }
    }
}

fn check_ball(u: &ScalarField, ball: &BallSpec) -> Result<()> {
    if u.n() != ball.n() {
        return Err(HmvpError::DimensionMismatch {
            expected: u.n(),
            found: ball.n(),
        });
    }
    Ok(())
}

/// Average of `u` over `B(center, eps)` with an error estimate.
///
/// Product rules report the change against the rule with every node count
/// halved; Halton estimates report the standard error over eight
/// interleaved batches.
pub fn ball_average(u: &ScalarField, ball: &BallSpec, quad: &QuadratureSpec) -> Result<AverageResult> {
    check_ball(u, ball)?;
    let n = ball.n();
    match quad.method {
        QuadratureMethod::Product {
            t_nodes,
            radial_nodes,
            angular_nodes,
        } => {
            let rule = BallRule::product(n, t_nodes, radial_nodes, angular_nodes)?;
            let value = rule.average(u, ball, quad.execution)?;
            let mut evaluations = rule.len() as u64;
            let coarse = quad.coarse().expect("product rule has a coarse companion");
            let error_estimate = match coarse.method {
                QuadratureMethod::Product {
                    t_nodes,
                    radial_nodes,
                    angular_nodes,
                } => {
                    let crule = BallRule::product(n, t_nodes, radial_nodes, angular_nodes)?;
                    evaluations += crule.len() as u64;
                    let cvalue = crule.average(u, ball, quad.execution)?;
                    (value - cvalue).abs() + 64.0 * f64::EPSILON * (1.0 + value.abs())
                }
                QuadratureMethod::LowDiscrepancy { .. } => unreachable!(),
            };
            Ok(AverageResult {
                value,
                error_estimate,
                evaluations,
            })
        }
        QuadratureMethod::LowDiscrepancy { samples, seed } => {
            let batches = lds_batches(n, samples, seed, quad.execution, |q| {
                u.value(&ball.map_unit(q))
            });
            let (sum, count) = batches
                .iter()
                .fold((0.0, 0u64), |acc, b| (acc.0 + b.sum, acc.1 + b.count));
            if count == 0 {
                return Err(HmvpError::Quadrature("no sample landed in the ball".into()));
            }
            let value = sum / count as f64;
            if !value.is_finite() {
                return Err(HmvpError::Quadrature(format!(
                    "non-finite average of `{}`",
                    u.name()
                )));
            }
            let means: Vec<f64> = batches
                .iter()
                .filter(|b| b.count > 0)
                .map(|b| b.sum / b.count as f64)
                .collect();
            Ok(AverageResult {
                value,
                error_estimate: standard_error(&means),
                evaluations: count,
            })
        }
    }
}

fn standard_error(means: &[f64]) -> f64 {
    let k = means.len() as f64;
    if k < 2.0 {
        return f64::INFINITY;
    }
    let m = means.iter().sum::<f64>() / k;
    let var = means.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (k - 1.0);
    (var / k).sqrt()
}

#[derive(Debug, Clone, Copy, Default)]
struct Batch {
    sum: f64,
    count: u64,
    total: u64,
}

const BATCHES: usize = 8;

/// Runs `f` on Halton points of `[-1, 1]^(2n) x [-1, 1]` inside `B(0, 1)`,
/// accumulated into eight interleaved batches in a fixed order.
fn lds_batches<F>(n: usize, samples: u64, seed: u64, execution: Execution, f: F) -> Vec<Batch>
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
{
    const CHUNK: u64 = 1 << 15;
    let d = 2 * n + 1;
    let halton = Halton::new(d, seed);
    let chunks = samples.div_ceil(CHUNK) as usize;
    let per_chunk = execution.map_indexed(chunks, |c| {
        let lo = c as u64 * CHUNK;
        let hi = (lo + CHUNK).min(samples);
        let mut u01 = [0.0; MAX_DIM];
        let mut q = [0.0; MAX_DIM];
        let mut vals = Vec::with_capacity((hi - lo) as usize);
        for i in lo..hi {
            halton.point(i, &mut u01[..d]);
            for k in 0..d {
                q[k] = 2.0 * u01[k] - 1.0;
            }
            let a: f64 = q[..2 * n].iter().map(|v| v * v).sum();
            if a * a + q[2 * n] * q[2 * n] < 1.0 {
                vals.push(f(&q[..d]));
            }
        }
        Batch {
            sum: pairwise_sum(&vals),
            count: vals.len() as u64,
            total: hi - lo,
        }
    });
    let mut out = vec![Batch::default(); BATCHES];
    for (c, b) in per_chunk.iter().enumerate() {
        let slot = &mut out[c % BATCHES];
        slot.sum += b.sum;
        slot.count += b.count;
        slot.total += b.total;
    }
    out
}

/// Monte Carlo (Halton) estimate of `|B(0, eps)|` by indicator integration,
/// with a batch standard error.
pub fn indicator_volume(n: usize, eps: f64, samples: u64, seed: u64, execution: Execution) -> Result<(f64, f64)> {
    if n == 0 || 2 * n + 1 > MAX_DIM {
        return Err(HmvpError::InvalidArgument(format!("unsupported n = {n}")));
    }
    if !(eps > 0.0) || samples < BATCHES as u64 {
        return Err(HmvpError::InvalidArgument(
            "need eps > 0 and at least eight samples".into(),
        ));
    }
    let batches = lds_batches(n, samples, seed, execution, |_| 1.0);
    let box_volume = 2f64.powi(2 * n as i32 + 1) * eps.powi(2 * n as i32 + 2);
    let (count, total) = batches
        .iter()
        .fold((0u64, 0u64), |acc, b| (acc.0 + b.count, acc.1 + b.total));
    let fractions: Vec<f64> = batches
        .iter()
        .filter(|b| b.total > 0)
        .map(|b| box_volume * b.count as f64 / b.total as f64)
        .collect();
    Ok((box_volume * count as f64 / total as f64, standard_error(&fractions)))
}

/// Node coordinates are finite and inside the closed unit ball.
#[cfg(test)]
fn rule_is_inside(rule: &BallRule) -> bool {
    use crate::hgroup;
    rule.normalized_nodes().iter().all(|(q, _)| {
        let p = hgroup::Point::from_coords(rule.n(), q).unwrap();
        hgroup::gauge_norm(&p) <= 1.0 + 1e-12
    })
}

#[cfg(test)]
mod tests {
    use super::super::ball_volume;
    use super::*;
    use crate::fields::{self, Coordinate};
    use crate::hgroup::Point;

    #[test]
    fn parses_specs() {
        let q: QuadratureSpec = "product:32,32,64".parse().unwrap();
        assert_eq!(q.to_string(), "product:32,32,64");
        let l: QuadratureSpec = "lds:100000:seed=7".parse().unwrap();
        assert_eq!(l.method, QuadratureMethod::LowDiscrepancy { samples: 100_000, seed: 7 });
        assert_eq!("lds:50".parse::<QuadratureSpec>().unwrap().to_string(), "lds:50:seed=1");
        for bad in ["product:1,2,3", "product:4,4", "lds:x", "lds:10:seed", "mc:10", "product:4,4,4:1"] {
            assert!(bad.parse::<QuadratureSpec>().is_err(), "{bad}");
        }
    }

    #[test]
    fn weights_reproduce_volume() {
        for (n, spec) in [(1, (16, 16, 32)), (2, (16, 12, 8))] {
            let rule = BallRule::product(n, spec.0, spec.1, spec.2).unwrap();
            let v = ball_volume(n, 1.0).unwrap();
            assert!((rule.total_weight() - v).abs() < 1e-10 * v, "n = {n}");
            assert!(rule_is_inside(&rule));
        }
        assert!(BallRule::product(3, 4, 4, 4).is_err());
    }

    #[test]
    fn average_examples() {
        let quad = QuadratureSpec::default_for(1).unwrap();
        let ball = BallSpec::centered(1, 1.0).unwrap();
        let x1 = fields::make_coordinate(1, Coordinate::X(0)).unwrap();
        assert_eq!(ball_average(&x1, &ball, &quad).unwrap().value, 0.0);
        let sq = fields::make_square_norm(1);
        let avg = ball_average(&sq, &ball, &quad).unwrap();
        assert!((avg.value - 4.0 / (3.0 * PI)).abs() < 1e-12);
        let c = ScalarField::new("const", 1, |_| 2.5);
        for eps in [0.1, 1.0, 3.0] {
            let b = BallSpec::new(Point::h1(0.3, 0.1, -2.0), eps).unwrap();
            assert!((ball_average(&c, &b, &quad).unwrap().value - 2.5).abs() < 1e-14);
        }
    }

    #[test]
    fn odd_fields_vanish_exactly() {
        let quad = QuadratureSpec::product(9, 7, 10).unwrap();
        let ball = BallSpec::centered(1, 0.7).unwrap();
        for s in ["x", "y", "t", "x^3 + x*y*t", "x*t - y^3 + t^3", "x*y^2"] {
            let u = fields::make_polynomial_str(1, s).unwrap();
            assert!(ball_average(&u, &ball, &quad).unwrap().value.abs() <= 1e-12, "{s}");
        }
        let u2 = fields::make_polynomial_str(2, "x1 + y2*t - x2^3").unwrap();
        let q2 = QuadratureSpec::product(6, 4, 6).unwrap();
        assert!(ball_average(&u2, &BallSpec::centered(2, 1.0).unwrap(), &q2).unwrap().value.abs() <= 1e-12);
    }

    #[test]
    fn slice_integral_oracle_n2() {
        // avg |z|^2 over B(0,1) in H^2 = (n/(n+1)) I_3 / I_2 = (2/3) (9 pi / 32)
        let quad = QuadratureSpec::calibration(2).unwrap();
        let avg = ball_average(&fields::make_square_norm(2), &BallSpec::centered(2, 1.0).unwrap(), &quad).unwrap();
        assert!((avg.value - 2.0 / 3.0 * 9.0 * PI / 32.0).abs() < 1e-10);
    }

    #[test]
    fn doubling_nodes_stays_within_error_estimate() {
        let ball = BallSpec::new(Point::h1(0.2, -0.1, 0.3), 0.5).unwrap();
        let fields_list = [
            fields::make_polynomial_str(1, "x^2*t + y^4 - t^2 + x").unwrap(),
            fields::make_gauge_power(1, 1.5).unwrap(),
            ScalarField::new("trig", 1, |p: &Point| (p.x()[0] + 2.0 * p.t()).sin() * p.y()[0].cos()),
        ];
        for u in &fields_list {
            let a = ball_average(u, &ball, &QuadratureSpec::product(12, 12, 24).unwrap()).unwrap();
            let b = ball_average(u, &ball, &QuadratureSpec::product(24, 24, 48).unwrap()).unwrap();
            assert!((a.value - b.value).abs() < a.error_estimate, "{}: {:e} vs {:e}", u.name(), (a.value - b.value).abs(), a.error_estimate);
        }
    }

    #[test]
    fn left_invariance() {
        let u = fields::make_polynomial_str(1, "x^2*y + t^2 - 3*x*t + y").unwrap();
        let p = Point::h1(0.4, -0.6, 0.2);
        let quad = QuadratureSpec::default_for(1).unwrap();
        let direct = ball_average(&u, &BallSpec::new(p.clone(), 0.3).unwrap(), &quad).unwrap();
        let moved = fields::left_translate_field(&u, &p).unwrap();
        let at_origin = ball_average(&moved, &BallSpec::centered(1, 0.3).unwrap(), &quad).unwrap();
        assert!((direct.value - at_origin.value).abs() < 1e-13);
    }

    #[test]
    fn low_discrepancy_agrees_with_product() {
        let u = fields::make_polynomial_str(1, "1 + x^2 + t").unwrap();
        let ball = BallSpec::centered(1, 1.0).unwrap();
        let lds = ball_average(&u, &ball, &QuadratureSpec::low_discrepancy(200_000, 3).unwrap()).unwrap();
        let exact = 1.0 + 2.0 / (3.0 * PI);
        assert!((lds.value - exact).abs() < 2e-3);
        assert!(lds.error_estimate < 1e-2);
    }

    #[test]
    fn execution_modes_agree_bitwise() {
        let u = fields::make_gauge_power(1, 0.7).unwrap();
        let ball = BallSpec::new(Point::h1(1.0, 0.5, 0.0), 0.4).unwrap();
        let seq = QuadratureSpec::product(16, 16, 32).unwrap().with_execution(Execution::Sequential);
        let par = seq.with_execution(Execution::Parallel);
        let a = ball_average(&u, &ball, &seq).unwrap();
        let b = ball_average(&u, &ball, &par).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        let l1 = QuadratureSpec::low_discrepancy(100_000, 2).unwrap();
        let a = ball_average(&u, &ball, &l1.with_execution(Execution::Sequential)).unwrap();
        let b = ball_average(&u, &ball, &l1.with_execution(Execution::Parallel)).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
    }

    #[test]
    fn non_finite_values_fail() {
        let u = ScalarField::new("half", 1, |p: &Point| if p.x()[0] > 0.0 { f64::NAN } else { 0.0 });
        let ball = BallSpec::centered(1, 1.0).unwrap();
        assert!(ball_average(&u, &ball, &QuadratureSpec::product(5, 4, 4).unwrap()).is_err());
        assert!(ball_average(&u, &ball, &QuadratureSpec::low_discrepancy(1000, 1).unwrap()).is_err());
    }

    #[test]
    fn indicator_volume_is_close() {
        let (v, se) = indicator_volume(1, 1.0, 1_000_000, 5, Execution::default()).unwrap();
        let exact = PI * PI / 2.0;
        assert!((v - exact).abs() / exact < 2e-3, "{v}");
        assert!(se < 1e-2);
    }
}
