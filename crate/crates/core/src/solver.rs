//! Lattice solver for the mean-value relation on boxes in `H^1`.
//!
//! One sweep replaces every free lattice value by
//! `alpha/2 (m + M) + beta A`, where `m`, `M`, `A` are the min, max and
//! weighted average of the current iterate over a fixed node set of
//! `B(0, 1)` mapped to `P o delta_eps(.)`. Inside the box the iterate is
//! read by trilinear interpolation; outside the box and inside the
//! optional hole the boundary field is evaluated exactly. Sweeps are
//! Jacobi-style (double-buffered), so results do not depend on the
//! execution mode.

use std::fmt::Write as _;

use crate::error::{HmvpError, Result};
use crate::exec::Execution;
use crate::fields::ScalarField;
use crate::gaugeball::{BallRule, MVPCoefficients};
use crate::hgroup::{gauge_norm, Point};
use crate::mvp::format_sig;

/// Smallest admissible `eps / h_xy`: the ball must span three cells.
pub const MIN_EPS_OVER_H: f64 = 3.0;

/// Node counts of the unit-ball sample set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleSpec {
    /// Product rule `(t, radial, angular)` used for the average.
    pub average: (usize, usize, usize),
    /// Gauss-Legendre heights on the gauge sphere used for min/max.
    pub sphere_heights: usize,
    pub sphere_angles: usize,
}

impl Default for SampleSpec {
    fn default() -> Self {
        Self {
            average: (6, 4, 8),
            sphere_heights: 8,
            sphere_angles: 16,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GridProblem {
    pub lower: [f64; 3],
    pub upper: [f64; 3],
    pub h_xy: f64,
    pub h_t: f64,
    pub eps: f64,
    pub coefficients: MVPCoefficients,
    /// Dirichlet data; also evaluated outside the box.
    pub boundary: ScalarField,
    /// Lattice nodes with gauge norm at most this radius are fixed to the
    /// boundary field, and so are sample points landing there.
    pub hole_radius: Option<f64>,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub damping: f64,
    pub samples: SampleSpec,
    pub execution: Execution,
}

impl GridProblem {
    /// Problem with tolerance `1e-10`, at most 500 sweeps and damping 1
    /// for `p >= 2`, 0.5 below.
    pub fn new(
        lower: [f64; 3],
        upper: [f64; 3],
        h_xy: f64,
        h_t: f64,
        eps: f64,
        coefficients: MVPCoefficients,
        boundary: ScalarField,
    ) -> Result<Self> {
        let damping = if coefficients.p < 2.0 { 0.5 } else { 1.0 };
        let problem = Self {
            lower,
            upper,
            h_xy,
            h_t,
            eps,
            coefficients,
            boundary,
            hole_radius: None,
            tolerance: 1e-10,
            max_iterations: 500,
            damping,
            samples: SampleSpec::default(),
            execution: Execution::default(),
        };
        problem.validate()?;
        Ok(problem)
    }

    /// Cube `[a, b]^3`.
    pub fn cube(a: f64, b: f64, h_xy: f64, h_t: f64, eps: f64, coefficients: MVPCoefficients, boundary: ScalarField) -> Result<Self> {
        Self::new([a; 3], [b; 3], h_xy, h_t, eps, coefficients, boundary)
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(HmvpError::Config(m));
        if self.boundary.n() != 1 || self.coefficients.n != 1 {
            return cfg("the lattice solver supports n = 1 only".into());
        }
        self.coefficients.check()?;
        for a in 0..3 {
            if !(self.lower[a] < self.upper[a]) || !self.lower[a].is_finite() || !self.upper[a].is_finite() {
                return cfg(format!("empty or non-finite box along axis {a}"));
            }
        }
        if !(self.h_xy > 0.0 && self.h_t > 0.0 && self.eps > 0.0) {
            return cfg("spacings and eps must be positive".into());
        }
        if self.h_t > self.h_xy * self.h_xy * (1.0 + 1e-12) {
            return cfg(format!("need h_t <= h_xy^2, got h_t = {} and h_xy = {}", self.h_t, self.h_xy));
        }
        if self.eps < MIN_EPS_OVER_H * self.h_xy * (1.0 - 1e-12) {
            return cfg(format!(
                "need eps >= {MIN_EPS_OVER_H} h_xy, got eps = {} and h_xy = {}",
                self.eps, self.h_xy
            ));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return cfg(format!("damping must lie in (0, 1], got {}", self.damping));
        }
        if !(self.tolerance > 0.0) {
            return cfg("tolerance must be positive".into());
        }
        if let Some(r) = self.hole_radius {
            if !(r > 0.0) {
                return cfg("hole radius must be positive".into());
            }
        }
        Lattice::for_problem(self).map(|_| ())
    }
}

/// Node layout `(i, j, k)` with `t` fastest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lattice {
    pub dims: [usize; 3],
    pub lower: [f64; 3],
    pub spacing: [f64; 3],
}

impl Lattice {
    fn for_problem(problem: &GridProblem) -> Result<Self> {
        let spacing = [problem.h_xy, problem.h_xy, problem.h_t];
        let mut dims = [0; 3];
        for a in 0..3 {
            let cells = (problem.upper[a] - problem.lower[a]) / spacing[a];
            let rounded = cells.round();
            if (cells - rounded).abs() > 1e-8 * rounded.max(1.0) || rounded < 2.0 {
                return Err(HmvpError::Config(format!(
                    "box length along axis {a} is not a multiple (>= 2) of the spacing"
                )));
            }
            dims[a] = rounded as usize + 1;
        }
        Ok(Self {
            dims,
            lower: problem.lower,
            spacing,
        })
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dims[1] + j) * self.dims[2] + k
    }

    pub fn ijk(&self, idx: usize) -> (usize, usize, usize) {
        let k = idx % self.dims[2];
        let j = (idx / self.dims[2]) % self.dims[1];
        (idx / (self.dims[1] * self.dims[2]), j, k)
    }

    pub fn coords(&self, idx: usize) -> [f64; 3] {
        let (i, j, k) = self.ijk(idx);
        [
            self.lower[0] + i as f64 * self.spacing[0],
            self.lower[1] + j as f64 * self.spacing[1],
            self.lower[2] + k as f64 * self.spacing[2],
        ]
    }

    fn on_face(&self, idx: usize) -> bool {
        let (i, j, k) = self.ijk(idx);
        i == 0 || j == 0 || k == 0 || i + 1 == self.dims[0] || j + 1 == self.dims[1] || k + 1 == self.dims[2]
    }

    /// Trilinear interpolation, or `None` outside the box.
    #[inline]
    fn interpolate(&self, values: &[f64], p: [f64; 3]) -> Option<f64> {
        let mut base = [0usize; 3];
        let mut w = [0.0; 3];
        for a in 0..3 {
            let f = (p[a] - self.lower[a]) / self.spacing[a];
            let last = (self.dims[a] - 1) as f64;
            if !(f >= -1e-9) || f > last + 1e-9 {
                return None;
            }
            let c = (f.floor().max(0.0) as usize).min(self.dims[a] - 2);
            base[a] = c;
            w[a] = (f - c as f64).clamp(0.0, 1.0);
        }
        let (s1, s2) = (self.dims[1] * self.dims[2], self.dims[2]);
        let i0 = base[0] * s1 + base[1] * s2 + base[2];
        let lerp = |a: f64, b: f64, t: f64| a + t * (b - a);
        let plane = |off: usize| {
            let v00 = lerp(values[off], values[off + 1], w[2]);
            let v01 = lerp(values[off + s2], values[off + s2 + 1], w[2]);
            lerp(v00, v01, w[1])
        };
        Some(lerp(plane(i0), plane(i0 + s1), w[0]))
    }
}

/// Unit-ball nodes: weighted average set and min/max set (the latter also
/// contains the average nodes).
#[derive(Debug, Clone)]
struct SampleSet {
    average: Vec<([f64; 3], f64)>,
    extremal: Vec<[f64; 3]>,
}

impl SampleSet {
    fn new(spec: &SampleSpec, need_extrema: bool) -> Result<Self> {
        let (t, r, a) = spec.average;
        let rule = BallRule::product(1, t, r, a + a % 2)?;
        let average: Vec<([f64; 3], f64)> = rule
            .normalized_nodes()
            .into_iter()
            .map(|(q, w)| ([q[0], q[1], q[2]], w))
            .collect();
        let mut extremal = Vec::new();
        if need_extrema {
            extremal.extend(average.iter().map(|(q, _)| *q));
            let heights = gauss_legendre_heights(spec.sphere_heights.max(2))?;
            let angles = spec.sphere_angles.max(2) + spec.sphere_angles % 2;
            for s in heights {
                let rho = (1.0 - s * s).sqrt().sqrt();
                for k in 0..angles {
                    let phi = 2.0 * std::f64::consts::PI * k as f64 / angles as f64;
                    extremal.push([rho * phi.cos(), rho * phi.sin(), s]);
                }
            }
            extremal.push([0.0, 0.0, 1.0]);
            extremal.push([0.0, 0.0, -1.0]);
        }
        Ok(Self { average, extremal })
    }
}

/// Heights symmetric about zero, taken from a product rule's `t` nodes.
fn gauss_legendre_heights(m: usize) -> Result<Vec<f64>> {
    let rule = BallRule::product(1, m, 2, 2)?;
    let mut hs: Vec<f64> = rule.normalized_nodes().iter().map(|(q, _)| q[2]).collect();
    hs.sort_by(f64::total_cmp);
    hs.dedup();
    Ok(hs)
}

struct Context<'a> {
    problem: &'a GridProblem,
    lattice: Lattice,
    samples: SampleSet,
    fixed: Vec<bool>,
}

impl<'a> Context<'a> {
    fn new(problem: &'a GridProblem) -> Result<Self> {
        problem.validate()?;
        let lattice = Lattice::for_problem(problem)?;
        let samples = SampleSet::new(&problem.samples, problem.coefficients.alpha != 0.0)?;
        let fixed = (0..lattice.len())
            .map(|idx| lattice.on_face(idx) || in_hole(problem, lattice.coords(idx)))
            .collect();
        Ok(Self {
            problem,
            lattice,
            samples,
            fixed,
        })
    }

    fn boundary_value(&self, p: [f64; 3]) -> Result<f64> {
        let v = self.problem.boundary.value(&Point::h1(p[0], p[1], p[2]));
        if v.is_finite() {
            Ok(v)
        } else {
            Err(HmvpError::Config(format!(
                "boundary field `{}` is undefined at ({}, {}, {}), reached by the ball of radius {}",
                self.problem.boundary.name(),
                p[0],
                p[1],
                p[2],
                self.problem.eps
            )))
        }
    }

    #[inline]
    fn read(&self, values: &[f64], p: [f64; 3]) -> Result<f64> {
        if !in_hole(self.problem, p) {
            if let Some(v) = self.lattice.interpolate(values, p) {
                if v.is_finite() {
                    return Ok(v);
                }
                return Err(HmvpError::Config(format!(
                    "interpolation at ({}, {}, {}) touches an undefined hole node; enlarge the hole",
                    p[0], p[1], p[2]
                )));
            }
        }
        self.boundary_value(p)
    }

    /// Boundary field on the lattice; hole nodes may hold non-finite values
    /// as long as no sweep reads them.
    fn initial(&self) -> Result<Vec<f64>> {
        (0..self.lattice.len())
            .map(|idx| {
                let c = self.lattice.coords(idx);
                if self.fixed[idx] && in_hole(self.problem, c) {
                    Ok(self.problem.boundary.value(&Point::h1(c[0], c[1], c[2])))
                } else {
                    self.boundary_value(c)
                }
            })
            .collect()
    }

    fn update_node(&self, values: &[f64], idx: usize) -> Result<f64> {
        if self.fixed[idx] {
            return Ok(values[idx]);
        }
        let [x, y, t] = self.lattice.coords(idx);
        let e = self.problem.eps;
        let map = |q: &[f64; 3]| {
            let (qx, qy) = (e * q[0], e * q[1]);
            [x + qx, y + qy, t + e * e * q[2] + 2.0 * (qx * y - x * qy)]
        };
        let mut avg = 0.0;
        for (q, w) in &self.samples.average {
            avg += w * self.read(values, map(q))?;
        }
        let c = &self.problem.coefficients;
        let mut next = c.beta * avg;
        if c.alpha != 0.0 {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for q in &self.samples.extremal {
                let v = self.read(values, map(q))?;
                lo = lo.min(v);
                hi = hi.max(v);
            }
            next += 0.5 * c.alpha * (lo + hi);
        }
        let theta = self.problem.damping;
        Ok(if theta == 1.0 {
            next
        } else {
            (1.0 - theta) * values[idx] + theta * next
        })
    }

    /// One sweep into `out`; returns the sup-norm update.
    fn sweep(&self, values: &[f64], out: &mut [f64]) -> Result<f64> {
        const CHUNK: usize = 4096;
        let chunks = out.len().div_ceil(CHUNK);
        let mut errors: Vec<Option<HmvpError>> = vec![None; chunks];
        let mut sups = vec![0.0f64; chunks];
        {
            let results = self.problem.execution.map_indexed(chunks, |c| {
                let lo = c * CHUNK;
                let hi = (lo + CHUNK).min(values.len());
                let mut buf = Vec::with_capacity(hi - lo);
                let mut sup = 0.0f64;
                for idx in lo..hi {
                    let v = self.update_node(values, idx)?;
                    sup = sup.max((v - values[idx]).abs());
                    buf.push(v);
                }
                Ok::<_, HmvpError>((buf, sup))
            });
            for (c, r) in results.into_iter().enumerate() {
                match r {
                    Ok((buf, sup)) => {
                        out[c * CHUNK..c * CHUNK + buf.len()].copy_from_slice(&buf);
                        sups[c] = sup;
                    }
                    Err(e) => errors[c] = Some(e),
                }
            }
        }
        if let Some(e) = errors.into_iter().flatten().next() {
            return Err(e);
        }
        Ok(sups.into_iter().fold(0.0, f64::max))
    }
}

fn in_hole(problem: &GridProblem, p: [f64; 3]) -> bool {
    problem
        .hole_radius
        .is_some_and(|r| gauge_norm(&Point::h1(p[0], p[1], p[2])) <= r)
}

/// Applies one (damped) mean-value sweep to `values`.
pub fn dpp_apply(values: &[f64], problem: &GridProblem) -> Result<Vec<f64>> {
    let ctx = Context::new(problem)?;
    if values.len() != ctx.lattice.len() {
        return Err(HmvpError::Config(format!(
            "lattice has {} nodes, got {} values",
            ctx.lattice.len(),
            values.len()
        )));
    }
    let mut out = vec![0.0; values.len()];
    ctx.sweep(values, &mut out)?;
    Ok(out)
}

/// Boundary field sampled on the lattice (the initial iterate).
pub fn initial_values(problem: &GridProblem) -> Result<Vec<f64>> {
    Context::new(problem)?.initial()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSolution {
    pub lattice: Lattice,
    pub values: Vec<f64>,
    /// Nodes held at the boundary field (faces and hole).
    pub fixed: Vec<bool>,
    pub iterations: usize,
    pub final_update: f64,
    pub history: Vec<f64>,
    pub converged: bool,
}

impl GridSolution {
    pub fn interior_count(&self) -> usize {
        self.fixed.iter().filter(|f| !**f).count()
    }

    /// Rows `i,j,k,x,y,t,value` with a header.
    pub fn to_csv(&self, digits: usize) -> String {
        let mut out = String::from("i,j,k,x,y,t,value\n");
        for (idx, v) in self.values.iter().enumerate() {
            let (i, j, k) = self.lattice.ijk(idx);
            let [x, y, t] = self.lattice.coords(idx);
            let _ = writeln!(
                out,
                "{i},{j},{k},{},{},{},{}",
                format_sig(x, digits),
                format_sig(y, digits),
                format_sig(t, digits),
                format_sig(*v, digits)
            );
        }
        out
    }
}

/// Picard iteration of [`dpp_apply`] from the boundary field, until the
/// sup-norm update drops below the tolerance or the sweep budget runs out.
/// Non-convergence is reported through `converged`, not as an error.
pub fn dirichlet_solve(problem: &GridProblem) -> Result<GridSolution> {
    let ctx = Context::new(problem)?;
    let mut values = ctx.initial()?;
    let mut next = values.clone();
    let mut history = Vec::new();
    let mut converged = false;
    while history.len() < problem.max_iterations {
        let sup = ctx.sweep(&values, &mut next)?;
        std::mem::swap(&mut values, &mut next);
        history.push(sup);
        if sup < problem.tolerance {
            converged = true;
            break;
        }
    }
    Ok(GridSolution {
        lattice: ctx.lattice,
        values,
        fixed: ctx.fixed,
        iterations: history.len(),
        final_update: history.last().copied().unwrap_or(0.0),
        history,
        converged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReport {
    pub sup: f64,
    pub mean: f64,
    pub nodes: usize,
}

/// Sup and mean absolute error against `reference` over the free nodes.
pub fn error_report(solution: &GridSolution, reference: &ScalarField) -> Result<ErrorReport> {
    let mut sup = 0.0f64;
    let mut errs = Vec::new();
    for (idx, v) in solution.values.iter().enumerate() {
        if solution.fixed[idx] {
            continue;
        }
        let [x, y, t] = solution.lattice.coords(idx);
        let r = reference.checked_value(&Point::h1(x, y, t))?;
        let e = (v - r).abs();
        sup = sup.max(e);
        errs.push(e);
    }
    let mean = if errs.is_empty() {
        0.0
    } else {
        crate::exec::pairwise_sum(&errs) / errs.len() as f64
    };
    Ok(ErrorReport {
        sup,
        mean,
        nodes: errs.len(),
    })
}
