//! Global extrema of a field over a closed gauge ball.
//!
//! The boundary sphere `{(rho w, t): rho^4 + t^2 = 1}` is parametrized by
//! hyperspherical angles for `w` on `S^(2n-1)` and an angle `sigma` with
//! `t = sin(sigma)`, `rho = |cos(sigma)|^(1/2)`. Every parameter value is
//! admissible, so a compass search needs no constraint handling there.
//! Interior candidates come from a Halton sample and are refined with
//! rejection outside the ball.

use super::BallSpec;
use crate::error::{HmvpError, Result};
use crate::exec::Execution;
use crate::fields::ScalarField;
use crate::hgroup::{self, Point};
use crate::lds::Halton;

use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtremaConfig {
    pub boundary_seeds: usize,
    pub interior_samples: usize,
    /// Number of best seeds refined for each of max and min.
    pub refine: usize,
    /// Final pattern step in parameter units.
    pub tolerance: f64,
    /// Evaluation budget per refined start.
    pub max_evaluations: usize,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for ExtremaConfig {
    fn default() -> Self {
        Self {
            boundary_seeds: 64,
            interior_samples: 64,
            refine: 8,
            tolerance: 1e-11,
            max_evaluations: 20_000,
            seed: 1,
            execution: Execution::default(),
        }
    }
}

impl ExtremaConfig {
    fn validate(&self) -> Result<()> {
        if self.boundary_seeds == 0 || self.refine == 0 {
            return Err(HmvpError::InvalidArgument(
                "extrema search needs at least one boundary seed and one refined start".into(),
            ));
        }
        if !(self.tolerance > 0.0) || self.max_evaluations == 0 {
            return Err(HmvpError::InvalidArgument(
                "extrema tolerance and budget must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// `(x/eps, y/eps)` and `|t|/eps^3` of `center^-1 o point`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledCoords {
    pub horizontal: Vec<f64>,
    pub t_over_eps3: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtremumResult {
    pub argmax: Point,
    pub argmin: Point,
    pub max: f64,
    pub min: f64,
    pub max_scaled: ScaledCoords,
    pub min_scaled: ScaledCoords,
    pub max_on_boundary: bool,
    pub min_on_boundary: bool,
    /// False when some refined start ran out of budget before reaching the
    /// final step size.
    pub converged: bool,
    pub evaluations: u64,
}

const BOUNDARY_SLACK: f64 = 1e-9;

/// Unit-ball point for boundary parameters `(angles..., sigma)`.
fn sphere_point(n: usize, params: &[f64], out: &mut [f64]) {
    let m = 2 * n;
    let sigma = params[m - 1];
    let rho = sigma.cos().abs().sqrt();
    let mut sin_prod = rho;
    for (k, &a) in params[..m - 1].iter().enumerate() {
        out[k] = sin_prod * a.cos();
        sin_prod *= a.sin();
    }
    out[m - 1] = sin_prod;
    out[m] = sigma.sin();
}

fn in_unit_ball(n: usize, q: &[f64]) -> bool {
    let a: f64 = q[..2 * n].iter().map(|v| v * v).sum();
    a * a + q[2 * n] * q[2 * n] <= 1.0
}

struct Search<'a> {
    u: &'a ScalarField,
    ball: &'a BallSpec,
    sign: f64,
}

#[derive(Clone)]
struct Candidate {
    q: Vec<f64>,
    value: f64,
}

impl Search<'_> {
    fn eval_q(&self, q: &[f64]) -> Result<f64> {
        let p = self.ball.map_unit(q);
        let v = self.u.value(&p);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(HmvpError::Domain {
                field: self.u.name().to_string(),
                at: p.to_string(),
            })
        }
    }

    /// Compass search maximizing `sign * u`. Returns the candidate, whether
    /// the step fell below tolerance and the evaluation count.
    fn compass(
        &self,
        start: &[f64],
        step: f64,
        cfg: &ExtremaConfig,
        to_q: &dyn Fn(&[f64], &mut [f64]) -> bool,
    ) -> Result<(Candidate, bool, u64)> {
        let n = self.ball.n();
        let mut q = vec![0.0; 2 * n + 1];
        let mut x = start.to_vec();
        to_q(&x, &mut q);
        let mut best = self.sign * self.eval_q(&q)?;
        let mut evals = 1u64;
        let mut h = step;
        while h >= cfg.tolerance {
            if evals as usize >= cfg.max_evaluations {
                break;
            }
            let mut improved = false;
            'dirs: for k in 0..x.len() {
                for dir in [1.0, -1.0] {
                    let mut y = x.clone();
                    y[k] += dir * h;
                    if !to_q(&y, &mut q) {
                        continue;
                    }
                    let v = self.sign * self.eval_q(&q)?;
                    evals += 1;
                    if v > best {
                        best = v;
                        x = y;
                        improved = true;
                        break 'dirs;
                    }
                }
            }
            if !improved {
                h *= 0.5;
            }
        }
        to_q(&x, &mut q);
        Ok((
            Candidate {
                q,
                value: self.sign * best,
            },
            h < cfg.tolerance,
            evals,
        ))
    }
}

fn scaled(n: usize, q: &[f64], eps: f64) -> ScaledCoords {
    ScaledCoords {
        horizontal: q[..2 * n].to_vec(),
        t_over_eps3: q[2 * n].abs() / eps,
    }
}

/// Indices of the `k` best values for `sign * v`, stable in index order.
fn best_indices(values: &[f64], sign: f64, k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| (sign * values[b]).total_cmp(&(sign * values[a])).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Locates max and min of `u` over the closed ball.
pub fn ball_extrema(u: &ScalarField, ball: &BallSpec, cfg: &ExtremaConfig) -> Result<ExtremumResult> {
    cfg.validate()?;
    let n = ball.n();
    if u.n() != n {
        return Err(HmvpError::DimensionMismatch {
            expected: u.n(),
            found: n,
        });
    }
    let m = 2 * n;
    let d = m + 1;

    let halton = Halton::new(m, cfg.seed);
    let boundary_params: Vec<Vec<f64>> = (0..cfg.boundary_seeds)
        .map(|i| {
            let mut s = vec![0.0; m];
            halton.point(i as u64, &mut s);
            for (k, v) in s.iter_mut().enumerate() {
                *v = if k == m - 1 {
                    PI * (*v - 0.5)
                } else if k == m - 2 {
                    2.0 * PI * *v
                } else {
                    PI * *v
                };
            }
            s
        })
        .collect();
    let interior: Vec<Vec<f64>> = {
        let box_halton = Halton::new(d, cfg.seed.wrapping_add(1));
        let mut out = Vec::with_capacity(cfg.interior_samples);
        let mut i = 0u64;
        let limit = 64 * cfg.interior_samples as u64 + 64;
        while out.len() < cfg.interior_samples && i < limit {
            let mut q = vec![0.0; d];
            box_halton.point(i, &mut q);
            q.iter_mut().for_each(|v| *v = 2.0 * *v - 1.0);
            if in_unit_ball(n, &q) {
                out.push(q);
            }
            i += 1;
        }
        out
    };

    let probe = Search { u, ball, sign: 1.0 };
    let bvals = cfg
        .execution
        .map_indexed(boundary_params.len(), |i| {
            let mut q = vec![0.0; d];
            sphere_point(n, &boundary_params[i], &mut q);
            probe.eval_q(&q)
        })
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
    let ivals = cfg
        .execution
        .map_indexed(interior.len(), |i| probe.eval_q(&interior[i]))
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
    let mut evaluations = (bvals.len() + ivals.len()) as u64;
    let mut converged = true;

    let on_sphere = |x: &[f64], q: &mut [f64]| {
        sphere_point(n, x, q);
        true
    };
    let in_ball = |x: &[f64], q: &mut [f64]| {
        q.copy_from_slice(x);
        in_unit_ball(n, q)
    };

    let mut pick = |sign: f64| -> Result<Candidate> {
        let search = Search { u, ball, sign };
        let starts = best_indices(&bvals, sign, cfg.refine);
        let runs = cfg
            .execution
            .map_indexed(starts.len(), |j| search.compass(&boundary_params[starts[j]], 0.25, cfg, &on_sphere));
        let mut best: Option<Candidate> = None;
        for run in runs {
            let (cand, ok, ev) = run?;
            evaluations += ev;
            converged &= ok;
            if best.as_ref().is_none_or(|b| sign * cand.value > sign * b.value) {
                best = Some(cand);
            }
        }
        let mut best = best.expect("at least one refined start");
        let istarts = best_indices(&ivals, sign, cfg.refine.min(ivals.len()));
        if istarts.first().is_some_and(|&i| sign * ivals[i] > sign * best.value) {
            let runs = cfg
                .execution
                .map_indexed(istarts.len(), |j| search.compass(&interior[istarts[j]], 0.125, cfg, &in_ball));
            for run in runs {
                let (cand, ok, ev) = run?;
                evaluations += ev;
                converged &= ok;
                if sign * cand.value > sign * best.value {
                    best = cand;
                }
            }
        }
        Ok(best)
    };

    let hi = pick(1.0)?;
    let lo = pick(-1.0)?;
    let eps = ball.radius;
    let on_boundary = |q: &[f64]| {
        hgroup::gauge_norm(&Point::from_raw(n, q.iter().copied().collect())) >= 1.0 - BOUNDARY_SLACK
    };
    Ok(ExtremumResult {
        argmax: ball.map_unit(&hi.q),
        argmin: ball.map_unit(&lo.q),
        max: hi.value,
        min: lo.value,
        max_scaled: scaled(n, &hi.q, eps),
        min_scaled: scaled(n, &lo.q, eps),
        max_on_boundary: on_boundary(&hi.q),
        min_on_boundary: on_boundary(&lo.q),
        converged,
        evaluations,
    })
}
