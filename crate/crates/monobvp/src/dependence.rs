//! Continuous dependence of the solution on the forcing term.
//!
//! The experiment perturbs a base forcing h0 by oscillations
//! (A/(mπ))·sin(mπt). As m grows, the perturbation's sup norm A/(mπ)
//! vanishes while its derivative A·cos(mπt) keeps L² norm A/√2 — the
//! perturbed forcings approach h0 weakly but not in the derivative norm.
//! A solution map that is continuous along such families is genuinely
//! stable, not just stable under uniformly small perturbations.
//!
//! [`dependence_experiment`] measures how fast the solutions track h0 along
//! the family; it requires a nonlinearity with an affine velocity
//! decomposition f(t, v, x) = f1(t, x) + v·g(t), which is the structural
//! hypothesis making the solution map weakly continuous. The closed forms
//! for the linear cases decay like m^{-3}, two orders faster than the
//! forcing gap itself.
//!
//! [`solution_to_forcing_ratio`] reports ‖x‖ / ‖h‖ in the H¹-seminorm
//! pairing (interpolant quadrature over Simpson quadrature), a diagnostic
//! for how much of the forcing's strength survives into the solution.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::analysis::interpolants;
use crate::mesh::{Grid, MeshError, MeshFunction};
use crate::problems::{Nonlinearity, ProblemError, RhsFunction};
use crate::solver::{solve, SolverError, SolverOptions};
use crate::system::{DiscreteProblem, SystemError};

/// Simpson subintervals for the forcing-norm quadrature (20001 points).
const QUAD_CELLS: usize = 20_000;

#[derive(Debug, Error)]
pub enum DependenceError {
    #[error(
        "nonlinearity '{0}' has no affine velocity decomposition \
         f(t, v, x) = f1(t, x) + v*g(t); the dependence experiment requires one"
    )]
    MissingAffineDecomposition(String),
    #[error("forcing '{0}' has no registered derivative; the H1 forcing norm needs one")]
    MissingDerivative(String),
    #[error("family index must be at least 1, got {0}")]
    InvalidIndex(u32),
    #[error("forcing has zero H1 norm; the ratio is undefined")]
    UndefinedRatio,
    #[error("dependence solve did not converge: {0}")]
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

/// Oscillatory forcing family h0 + (A/(mπ))·sin(mπt), m = 1, 2, ...
///
/// Every member vanishes at the endpoints, the sup-norm gap to h0 is
/// A/(mπ), and the derivative gap A·cos(mπt) has constant L² norm A/√2.
#[derive(Clone)]
pub struct WeakFamily {
    h0: RhsFunction,
    amplitude: f64,
}

impl WeakFamily {
    pub fn new(h0: RhsFunction, amplitude: f64) -> Self {
        WeakFamily { h0, amplitude }
    }

    pub fn h0(&self) -> &RhsFunction {
        &self.h0
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    /// The m-th family member. Its derivative is populated analytically
    /// whenever h0 has one.
    pub fn member(&self, m: u32) -> Result<RhsFunction, DependenceError> {
        if m == 0 {
            return Err(DependenceError::InvalidIndex(0));
        }
        let w = m as f64 * PI;
        let a = self.amplitude;
        let base = self.h0.clone();
        let mut member = RhsFunction::new(
            format!("{}+osc{}", self.h0.id(), m),
            Arc::new(move |t: f64| base.eval(t) + (a / w) * (w * t).sin()),
        )?;
        if self.h0.has_deriv() {
            let base = self.h0.clone();
            member = member.with_deriv(Arc::new(move |t: f64| {
                base.deriv(t).expect("derivative presence checked") + a * (w * t).cos()
            }));
        }
        Ok(member)
    }
}

/// One measurement of the experiment: how far the solution for the m-th
/// member sits from the base solution. The conventional row m = 0 is the
/// base problem itself (all gaps zero); real members have m ≥ 1.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DependenceRow {
    pub m: u32,
    /// max_t |x_m(t) − x_0(t)|; the difference of two piecewise-affine
    /// interpolants on one grid peaks at a node, so this is exact.
    pub sup_gap: f64,
    /// ‖x_m − x_0‖_E on the reference grid.
    pub e_norm_gap: f64,
    /// Sup norm of the forcing perturbation, |A|/(mπ).
    pub h_sup_gap: f64,
}

fn converged(
    f: &Nonlinearity,
    h: &RhsFunction,
    grid: Grid,
    opts: &SolverOptions,
) -> Result<MeshFunction, DependenceError> {
    let p = DiscreteProblem::new(f.clone(), h.clone(), grid)?;
    // a caller-supplied initial guess belongs to the caller's grid
    let opts = SolverOptions {
        initial_guess: None,
        ..opts.clone()
    };
    let s = solve(&p, &opts)?;
    if !s.converged {
        return Err(DependenceError::NotConverged(format!(
            "forcing '{}' on {} subintervals stalled at certificate {:e}",
            h.id(),
            grid.n(),
            s.certificate
        )));
    }
    Ok(s.x)
}

/// Solves the base problem and every family member on `grid_ref` and
/// reports the solution gaps, ordered by m with the base row first.
///
/// Requires f to have an affine velocity decomposition — without that
/// structure the solution map need not be continuous along weakly
/// convergent forcing families, and the experiment would not be measuring
/// a meaningful quantity.
pub fn dependence_experiment(
    f: &Nonlinearity,
    fam: &WeakFamily,
    m_list: &[u32],
    grid_ref: Grid,
    opts: &SolverOptions,
) -> Result<Vec<DependenceRow>, DependenceError> {
    if f.affine_decomposition().is_none() {
        return Err(DependenceError::MissingAffineDecomposition(
            f.id().to_string(),
        ));
    }
    let mut ms: Vec<u32> = m_list.to_vec();
    ms.sort_unstable();
    ms.dedup();
    if ms.first() == Some(&0) {
        return Err(DependenceError::InvalidIndex(0));
    }
    let baseline = converged(f, fam.h0(), grid_ref, opts)?;
    let mut rows = vec![DependenceRow {
        m: 0,
        sup_gap: 0.0,
        e_norm_gap: 0.0,
        h_sup_gap: 0.0,
    }];
    for &m in &ms {
        let member = fam.member(m)?;
        let x_m = converged(f, &member, grid_ref, opts)?;
        let diff = x_m.sub(&baseline);
        let sup_gap = diff.values().iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        rows.push(DependenceRow {
            m,
            sup_gap,
            e_norm_gap: diff.norm_e(),
            h_sup_gap: fam.amplitude().abs() / (m as f64 * PI),
        });
    }
    Ok(rows)
}

/// Simpson quadrature of the squared forcing derivative on [0, 1].
fn forcing_h1_norm(h: &RhsFunction) -> Result<f64, DependenceError> {
    if !h.has_deriv() {
        return Err(DependenceError::MissingDerivative(h.id().to_string()));
    }
    let sq = |t: f64| {
        let d = h.deriv(t).expect("derivative presence checked");
        d * d
    };
    let step = 1.0 / QUAD_CELLS as f64;
    let mut integral = sq(0.0) + sq(1.0);
    for i in 1..QUAD_CELLS {
        let weight = if i % 2 == 1 { 4.0 } else { 2.0 };
        integral += weight * sq(i as f64 * step);
    }
    integral *= step / 3.0;
    Ok(integral.sqrt())
}

/// Solves the problem on `grid_ref` and returns
/// (∫ v̄² dt)^{1/2} / (∫ ḣ² dt)^{1/2} — the solution's derivative norm per
/// unit of forcing derivative norm. Diagnostic: reported, never asserted.
pub fn solution_to_forcing_ratio(
    f: &Nonlinearity,
    h: &RhsFunction,
    grid_ref: Grid,
    opts: &SolverOptions,
) -> Result<f64, DependenceError> {
    let denominator = forcing_h1_norm(h)?;
    if denominator == 0.0 {
        return Err(DependenceError::UndefinedRatio);
    }
    let x = converged(f, h, grid_ref, opts)?;
    Ok(interpolants(&x).h1_norm() / denominator)
}
