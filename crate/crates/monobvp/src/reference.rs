//! Reference solutions used to measure discretization error.
//!
//! Four independent constructions are available, so any one of them can be
//! cross-checked against the others:
//!
//! * [`manufactured`] — pick a smooth profile x*(t) with x*(0) = x*(1) = 0
//!   and build the forcing h = f(t, x*', x*) - x*'' that makes x* the exact
//!   continuum solution;
//! * [`shooting`] — integrate the initial value problem x'' = f(t, x', x) - h
//!   with a fixed-step fourth-order Runge-Kutta scheme and adjust the initial
//!   slope until x(1) = 0, with cubic Hermite dense output;
//! * [`fine_grid`] — solve the discrete system on a much finer grid and
//!   interpolate, with an accuracy estimate from a half-resolution rerun;
//! * [`linear_direct`] — for f(t, v, x) = a x with a >= 0 the discrete system
//!   is a single symmetric tridiagonal solve, no iteration at all.
//!
//! Every reference exposes a value and a derivative callable on [0, 1] and
//! (except manufactured ones, which are exact) an accuracy estimate, so
//! downstream error reports can state how far the yardstick itself might be
//! off.

use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::analysis::interpolants;
use crate::mesh::{tridiagonal_solve, Grid, MeshError, MeshFunction};
use crate::problems::{Fn1, Nonlinearity, ProblemError, RhsFunction};
use crate::solver::{solve, SolverError, SolverOptions};
use crate::system::{DiscreteProblem, SystemError};

/// A reference must vanish at the endpoints to within this tolerance.
const ENDPOINT_TOL: f64 = 1e-10;

/// Shooting gives up once the slope bracket would exceed this magnitude.
const BRACKET_LIMIT: f64 = 1e3;

#[derive(Debug, Error)]
pub enum ReferenceError {
    #[error("reference violates the boundary condition: |x({at})| = {value:e}")]
    EndpointViolation { at: f64, value: f64 },
    #[error("no sign change in x(1; s) for initial slopes up to |s| = {radius}")]
    BracketingFailure { radius: f64 },
    #[error("shooting root search stalled: bracket [{lo}, {hi}], |x(1)| = {endpoint:e}")]
    RootFindingFailure { lo: f64, hi: f64, endpoint: f64 },
    #[error("invalid reference parameter: {0}")]
    InvalidParameter(String),
    #[error("direct linear solve needs a nonnegative coefficient, got {0}")]
    NegativeCoefficient(f64),
    #[error("reference solve did not converge: {0}")]
    NotConverged(String),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// How a reference solution was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Manufactured,
    Shooting,
    FineGrid,
    LinearDirect,
}

/// A continuum solution candidate: value and derivative callables on [0, 1]
/// plus an estimate of its own accuracy (None for exact references).
#[derive(Clone)]
pub struct ReferenceSolution {
    provenance: Provenance,
    value: Fn1,
    derivative: Fn1,
    accuracy: Option<f64>,
}

impl ReferenceSolution {
    /// Wraps callables as a reference, enforcing the boundary conditions
    /// x(0) = x(1) = 0 to within 1e-10.
    pub fn new(
        provenance: Provenance,
        value: Fn1,
        derivative: Fn1,
        accuracy: Option<f64>,
    ) -> Result<Self, ReferenceError> {
        for at in [0.0, 1.0] {
            let v = value(at);
            if !(v.abs() <= ENDPOINT_TOL) {
                return Err(ReferenceError::EndpointViolation { at, value: v });
            }
        }
        Ok(ReferenceSolution {
            provenance,
            value,
            derivative,
            accuracy,
        })
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn value(&self, t: f64) -> f64 {
        (self.value)(t)
    }

    pub fn derivative(&self, t: f64) -> f64 {
        (self.derivative)(t)
    }

    /// Estimated worst-case error of the reference itself, when known.
    pub fn accuracy_estimate(&self) -> Option<f64> {
        self.accuracy
    }
}

/// A profile with two analytic derivatives, used to manufacture forcings.
#[derive(Clone)]
pub struct SmoothFunction {
    value: Fn1,
    first: Fn1,
    second: Fn1,
}

impl SmoothFunction {
    pub fn new(value: Fn1, first: Fn1, second: Fn1) -> Self {
        SmoothFunction {
            value,
            first,
            second,
        }
    }

    /// sin(pi t): the canonical smooth profile with vanishing endpoints and
    /// vanishing endpoint curvature.
    pub fn sin_pi() -> Self {
        Self::sin_multiple(1)
    }

    /// sin(m pi t) for m >= 1.
    pub fn sin_multiple(m: u32) -> Self {
        let w = m as f64 * std::f64::consts::PI;
        SmoothFunction {
            value: Arc::new(move |t| (w * t).sin()),
            first: Arc::new(move |t| w * (w * t).cos()),
            second: Arc::new(move |t| -w * w * (w * t).sin()),
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        (self.value)(t)
    }

    pub fn first(&self, t: f64) -> f64 {
        (self.first)(t)
    }

    pub fn second(&self, t: f64) -> f64 {
        (self.second)(t)
    }
}

/// Builds the forcing that makes `profile` the exact continuum solution for
/// the nonlinearity `f`, i.e. h(t) = f(t, x*'(t), x*(t)) - x*''(t).
///
/// Fails if the profile violates the boundary conditions or if the resulting
/// forcing does not vanish at the endpoints (which happens when
/// f(t, x*'(t), 0) is nonzero there — not every nonlinearity admits every
/// profile).
pub fn manufactured(
    f: &Nonlinearity,
    profile: &SmoothFunction,
) -> Result<(RhsFunction, ReferenceSolution), ReferenceError> {
    for at in [0.0, 1.0] {
        let v = profile.value(at);
        if !(v.abs() <= ENDPOINT_TOL) {
            return Err(ReferenceError::EndpointViolation { at, value: v });
        }
    }
    let h = {
        let f = f.clone();
        let p = profile.clone();
        RhsFunction::new(
            format!("manufactured({})", f.id()),
            Arc::new(move |t: f64| f.eval(t, p.first(t), p.value(t)) - p.second(t)),
        )?
    };
    let reference = ReferenceSolution::new(
        Provenance::Manufactured,
        profile.value.clone(),
        profile.first.clone(),
        None,
    )?;
    Ok((h, reference))
}

/// Node table from one fixed-step RK4 integration: positions, velocities,
/// and accelerations at t_i = i / steps.
#[derive(Clone)]
struct HermiteTable {
    steps: usize,
    xs: Arc<Vec<f64>>,
    vs: Arc<Vec<f64>>,
    accs: Arc<Vec<f64>>,
}

impl HermiteTable {
    /// Locates t in its cell and returns (cell index, local coordinate).
    fn cell(&self, t: f64) -> (usize, f64) {
        let t = t.clamp(0.0, 1.0);
        let scaled = t * self.steps as f64;
        let k = (scaled.floor() as usize).min(self.steps - 1);
        (k, scaled - k as f64)
    }

    fn value(&self, t: f64) -> f64 {
        let (k, theta) = self.cell(t);
        let dt = 1.0 / self.steps as f64;
        hermite(
            self.xs[k],
            dt * self.vs[k],
            self.xs[k + 1],
            dt * self.vs[k + 1],
            theta,
        )
    }

    fn derivative(&self, t: f64) -> f64 {
        let (k, theta) = self.cell(t);
        let dt = 1.0 / self.steps as f64;
        hermite(
            self.vs[k],
            dt * self.accs[k],
            self.vs[k + 1],
            dt * self.accs[k + 1],
            theta,
        )
    }
}

/// Cubic Hermite basis on [0, 1]; slopes are pre-scaled by the cell width.
fn hermite(p0: f64, m0: f64, p1: f64, m1: f64, theta: f64) -> f64 {
    let t2 = theta * theta;
    let t3 = t2 * theta;
    p0 * (2.0 * t3 - 3.0 * t2 + 1.0)
        + m0 * (t3 - 2.0 * t2 + theta)
        + p1 * (-2.0 * t3 + 3.0 * t2)
        + m1 * (t3 - t2)
}

/// RK4 integration of x'' = f(t, x', x) - h(t) from x(0) = 0, x'(0) = slope.
fn integrate(f: &Nonlinearity, h: &RhsFunction, slope: f64, steps: usize) -> HermiteTable {
    let acc = |t: f64, v: f64, x: f64| f.eval(t, v, x) - h.eval(t);
    let dt = 1.0 / steps as f64;
    let mut xs = Vec::with_capacity(steps + 1);
    let mut vs = Vec::with_capacity(steps + 1);
    let mut x = 0.0_f64;
    let mut v = slope;
    xs.push(x);
    vs.push(v);
    for i in 0..steps {
        let t = i as f64 / steps as f64;
        let k1x = v;
        let k1v = acc(t, v, x);
        let k2x = v + 0.5 * dt * k1v;
        let k2v = acc(t + 0.5 * dt, v + 0.5 * dt * k1v, x + 0.5 * dt * k1x);
        let k3x = v + 0.5 * dt * k2v;
        let k3v = acc(t + 0.5 * dt, v + 0.5 * dt * k2v, x + 0.5 * dt * k2x);
        let k4x = v + dt * k3v;
        let k4v = acc(t + dt, v + dt * k3v, x + dt * k3x);
        x += dt / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
        v += dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        xs.push(x);
        vs.push(v);
    }
    let accs: Vec<f64> = (0..=steps)
        .map(|i| {
            let t = i as f64 / steps as f64;
            acc(t, vs[i], xs[i])
        })
        .collect();
    HermiteTable {
        steps,
        xs: Arc::new(xs),
        vs: Arc::new(vs),
        accs: Arc::new(accs),
    }
}

/// Finds the initial slope with x(1; slope) = 0 and returns the slope with
/// its node table.
fn shoot(
    f: &Nonlinearity,
    h: &RhsFunction,
    steps: usize,
    root_tol: f64,
) -> Result<(f64, HermiteTable), ReferenceError> {
    let endpoint = |s: f64| {
        let table = integrate(f, h, s, steps);
        let terminal = *table.xs.last().expect("table is nonempty");
        (terminal, table)
    };

    // Bracket the root, widening geometrically from [-10, 10].
    let mut radius = 10.0_f64;
    let (mut lo, mut hi, mut f_lo, mut f_hi);
    loop {
        let (fl, tl) = endpoint(-radius);
        if fl.abs() <= root_tol {
            return Ok((-radius, tl));
        }
        let (fh, th) = endpoint(radius);
        if fh.abs() <= root_tol {
            return Ok((radius, th));
        }
        if fl.signum() != fh.signum() {
            lo = -radius;
            hi = radius;
            f_lo = fl;
            f_hi = fh;
            break;
        }
        radius *= 2.0;
        if radius > BRACKET_LIMIT {
            return Err(ReferenceError::BracketingFailure { radius });
        }
    }

    // Secant steps confined to the bracket, falling back to bisection
    // whenever the secant proposal escapes or stalls.
    for _ in 0..200 {
        let secant = hi - f_hi * (hi - lo) / (f_hi - f_lo);
        let cand = if secant.is_finite() && secant > lo && secant < hi {
            secant
        } else {
            0.5 * (lo + hi)
        };
        let (fc, table) = endpoint(cand);
        if fc.abs() <= root_tol {
            return Ok((cand, table));
        }
        if fc.signum() == f_lo.signum() {
            lo = cand;
            f_lo = fc;
        } else {
            hi = cand;
            f_hi = fc;
        }
        if hi - lo <= 1e-15 * (1.0 + lo.abs().max(hi.abs())) {
            let (fm, table) = endpoint(0.5 * (lo + hi));
            if fm.abs() <= 1e-9 {
                return Ok((0.5 * (lo + hi), table));
            }
            break;
        }
    }
    Err(ReferenceError::RootFindingFailure {
        lo,
        hi,
        endpoint: f_lo.abs().min(f_hi.abs()),
    })
}

/// Continuum reference by shooting: fixed-step RK4 with `steps` steps and a
/// slope search on x'(0) accepted once |x(1)| <= root_tol. The accuracy
/// estimate compares against a rerun at half resolution.
pub fn shooting(
    f: &Nonlinearity,
    h: &RhsFunction,
    steps: usize,
    root_tol: f64,
) -> Result<ReferenceSolution, ReferenceError> {
    if steps < 8 {
        return Err(ReferenceError::InvalidParameter(format!(
            "shooting needs at least 8 integration steps, got {steps}"
        )));
    }
    if !(root_tol > 0.0 && root_tol.is_finite()) {
        return Err(ReferenceError::InvalidParameter(format!(
            "shooting root tolerance must be positive and finite, got {root_tol}"
        )));
    }
    let (_, table) = shoot(f, h, steps, root_tol)?;
    let (_, half) = shoot(f, h, steps / 2, root_tol)?;
    let mut accuracy = 0.0_f64;
    for i in 0..=200 {
        let t = i as f64 / 200.0;
        accuracy = accuracy.max((table.value(t) - half.value(t)).abs());
    }
    let value_table = table.clone();
    let deriv_table = table;
    ReferenceSolution::new(
        Provenance::Shooting,
        Arc::new(move |t| value_table.value(t)),
        Arc::new(move |t| deriv_table.derivative(t)),
        Some(accuracy),
    )
}

fn converged_solve(
    f: &Nonlinearity,
    h: &RhsFunction,
    n: usize,
    opts: &SolverOptions,
) -> Result<MeshFunction, ReferenceError> {
    let p = DiscreteProblem::new(f.clone(), h.clone(), Grid::new(n)?)?;
    // any caller-supplied initial guess lives on the caller's grid, not ours
    let opts = SolverOptions {
        initial_guess: None,
        ..opts.clone()
    };
    let s = solve(&p, &opts)?;
    if !s.converged {
        return Err(ReferenceError::NotConverged(format!(
            "grid with {n} subintervals stalled at certificate {:e}",
            s.certificate
        )));
    }
    Ok(s.x)
}

/// Continuum reference from a fine-grid discrete solve: piecewise-linear
/// value and piecewise-linear derivative interpolants of the solution on
/// `n_ref` subintervals. The accuracy estimate is the worst nodal gap
/// against a solve on `n_ref / 2` subintervals.
pub fn fine_grid(
    f: &Nonlinearity,
    h: &RhsFunction,
    n_ref: usize,
    opts: &SolverOptions,
) -> Result<ReferenceSolution, ReferenceError> {
    if n_ref < 4 || n_ref % 2 != 0 {
        return Err(ReferenceError::InvalidParameter(format!(
            "fine-grid reference needs an even n_ref >= 4, got {n_ref}"
        )));
    }
    let fine = converged_solve(f, h, n_ref, opts)?;
    let half = converged_solve(f, h, n_ref / 2, opts)?;
    let fine_pair = interpolants(&fine);
    let half_pair = interpolants(&half);
    let mut accuracy = 0.0_f64;
    for k in 0..=n_ref / 2 {
        let t = half.grid().node(k);
        accuracy = accuracy.max((fine_pair.x_bar(t) - half_pair.x_bar(t)).abs());
    }
    let value_pair = fine_pair.clone();
    let deriv_pair = fine_pair;
    ReferenceSolution::new(
        Provenance::FineGrid,
        Arc::new(move |t| value_pair.x_bar(t)),
        Arc::new(move |t| deriv_pair.v_bar(t)),
        Some(accuracy),
    )
}

/// Solves the discrete system for f(t, v, x) = a x directly: one symmetric
/// tridiagonal solve with stencil (-1, 2 + a/n^2, -1) and right-hand side
/// h(k/n) / n^2. Requires a >= 0 so the system is positive definite.
pub fn linear_direct(
    a: f64,
    h: &RhsFunction,
    grid: Grid,
) -> Result<MeshFunction, ReferenceError> {
    if !(a >= 0.0) {
        return Err(ReferenceError::NegativeCoefficient(a));
    }
    let n = grid.n();
    let nf = n as f64;
    let inv_n2 = 1.0 / (nf * nf);
    let m = n - 1;
    let sub = vec![-1.0; m.saturating_sub(1)];
    let sup = vec![-1.0; m.saturating_sub(1)];
    let diag = vec![2.0 + a * inv_n2; m];
    let rhs: Vec<f64> = (1..n).map(|k| inv_n2 * h.eval(grid.node(k))).collect();
    let interior = tridiagonal_solve(&sub, &diag, &sup, &rhs)?;
    Ok(MeshFunction::from_interior(grid, &interior)?)
}
