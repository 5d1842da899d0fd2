//! Solution-quality metrics.
//!
//! A discrete solution is only as good as the ways we can interrogate it.
//! This module provides:
//!
//! * [`interpolants`] — the piecewise-affine extension x̄ of a mesh function
//!   and the matching derivative interpolant v̄ built from backward
//!   difference quotients, with exact closed-form quadrature for ∫ v̄²;
//! * [`grid_errors`] — sup-norm gaps between a mesh function (and its
//!   difference quotients) and a continuum reference at the nodes;
//! * [`bound_report`] — the observed norms and difference-quotient maxima of
//!   a solution next to the a-priori quantities they are compared against,
//!   plus a suite of unconditional inequality checks;
//! * [`fit_rate`] — least-squares convergence-rate estimation on log-log
//!   (n, error) data;
//! * [`strong_form_check`] — a pointwise second-difference test that a
//!   continuum reference actually satisfies the differential equation, not
//!   just the discrete system.

use serde::Serialize;
use thiserror::Error;

use crate::mesh::MeshFunction;
use crate::problems::{Nonlinearity, RhsFunction};
use crate::reference::ReferenceSolution;
use crate::system::DiscreteProblem;

/// Sample count for sup-norm estimation when no analytic hint is registered.
const SUP_SAMPLES: usize = 20_001;

/// Additive slack for the inequality chain; covers accumulated roundoff.
const CHAIN_TOL: f64 = 1e-10;

/// Default step for the central second difference in the strong-form check.
const DEFAULT_SPACING: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("rate fit needs at least 3 points with positive error, got {got}")]
    InsufficientData { got: usize },
    #[error("rate fit needs at least two distinct grid sizes")]
    DegenerateData,
}

/// Continuous extensions of a mesh function: the piecewise-affine x̄ with
/// x̄(k/n) = x(k), and the derivative interpolant v̄ with
/// v̄(k/n) = nΔx(k−1) for k ≥ 1, constant on the first cell and affine on
/// every later cell.
#[derive(Debug, Clone)]
pub struct InterpolantPair {
    source: MeshFunction,
}

/// Builds the interpolant pair of a mesh function.
pub fn interpolants(x: &MeshFunction) -> InterpolantPair {
    InterpolantPair { source: x.clone() }
}

impl InterpolantPair {
    pub fn source(&self) -> &MeshFunction {
        &self.source
    }

    /// Piecewise-affine extension; exact at nodes (bitwise, not just within
    /// tolerance). Arguments outside [0, 1] are clamped.
    pub fn x_bar(&self, t: f64) -> f64 {
        let grid = self.source.grid();
        let n = grid.n();
        let nf = n as f64;
        let t = t.clamp(0.0, 1.0);
        let scaled = t * nf;
        // node arguments reproduce the stored values exactly
        let rounded = scaled.round();
        if t == rounded / nf {
            return self.source.value(rounded as usize);
        }
        let k = (scaled.floor() as usize).min(n - 1);
        let vals = self.source.values();
        vals[k] + nf * (vals[k + 1] - vals[k]) * (t - grid.node(k))
    }

    /// Derivative interpolant: constant nΔx(0) on [0, 1/n); on later cells
    /// affine, nΔx(k−1) + n²Δ²x(k−1)(t − k/n). Continuous on [0, 1].
    pub fn v_bar(&self, t: f64) -> f64 {
        let grid = self.source.grid();
        let n = grid.n();
        let nf = n as f64;
        let t = t.clamp(0.0, 1.0);
        let k = ((t * nf).floor() as usize).min(n - 1);
        let vals = self.source.values();
        if k == 0 {
            return nf * (vals[1] - vals[0]);
        }
        let quotient = nf * (vals[k] - vals[k - 1]);
        let second = vals[k + 1] - 2.0 * vals[k] + vals[k - 1];
        quotient + nf * nf * second * (t - grid.node(k))
    }

    /// (∫₀¹ v̄² dt)^{1/2} by exact per-cell quadrature: v̄ is affine on each
    /// cell, so each cell contributes (a² + ab + b²)/(3n) for endpoint
    /// values a, b (and a²/n for the constant first cell).
    pub fn h1_norm(&self) -> f64 {
        let n = self.source.grid().n();
        let nf = n as f64;
        let vals = self.source.values();
        let d: Vec<f64> = vals.windows(2).map(|w| w[1] - w[0]).collect();
        let mut sum = d[0] * d[0];
        for k in 1..n {
            let (a, b) = (d[k - 1], d[k]);
            sum += (a * a + a * b + b * b) / 3.0;
        }
        (nf * sum).sqrt()
    }

    /// max_t |x̄(t)|; attained at a node because x̄ is piecewise affine.
    pub fn sup_x_bar(&self) -> f64 {
        self.source
            .values()
            .iter()
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Sup-norm gaps between a mesh function and a continuum reference:
/// e_x over all nodes, e_v over the backward difference quotients.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ErrorPair {
    pub e_x: f64,
    pub e_v: f64,
}

/// Measures e_x = max_{0≤k≤n} |x(k) − ref(k/n)| and
/// e_v = max_{1≤k≤n} |nΔx(k−1) − ref'(k/n)|.
pub fn grid_errors(x: &MeshFunction, reference: &ReferenceSolution) -> ErrorPair {
    let grid = x.grid();
    let n = grid.n();
    let nf = n as f64;
    let vals = x.values();
    let mut e_x = 0.0_f64;
    for k in 0..=n {
        e_x = e_x.max((vals[k] - reference.value(grid.node(k))).abs());
    }
    let mut e_v = 0.0_f64;
    for k in 1..=n {
        let quotient = nf * (vals[k] - vals[k - 1]);
        e_v = e_v.max((quotient - reference.derivative(grid.node(k))).abs());
    }
    ErrorPair { e_x, e_v }
}

/// Pass/fail record of inequalities that hold for every mesh function (or,
/// for the last entry, every computed solution), each with additive slack
/// 1e-10:
///
/// * `norm_ratio`: ‖x‖_E ≤ 2‖x‖₀;
/// * `step_bound`: every |Δx(k−1)| ≤ ‖x‖_E;
/// * `partial_sum_bound`: Σ_{j≤k} |Δx(j−1)| ≤ √k·‖x‖_E (Cauchy–Schwarz);
/// * `sup_bound`: max_k |x(k)| ≤ √n·‖x‖_E;
/// * `interpolant_sup_bound`: max_t |x̄(t)| ≤ (∫ v̄²)^{1/2}, the discrete
///   Sobolev embedding on interpolants.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ChainChecks {
    pub norm_ratio: bool,
    pub step_bound: bool,
    pub partial_sum_bound: bool,
    pub sup_bound: bool,
    pub interpolant_sup_bound: bool,
}

impl ChainChecks {
    pub fn all_pass(&self) -> bool {
        self.norm_ratio
            && self.step_bound
            && self.partial_sum_bound
            && self.sup_bound
            && self.interpolant_sup_bound
    }
}

/// Observed solution magnitudes next to the a-priori quantities they are
/// traditionally bounded by.
///
/// `apriori_rhs` is the bound 2·n^{−3/2}·sup_h on ‖x‖_E suggested by
/// identifying the load functional with the element (1/n²)h; `apriori_ratio`
/// is ‖x‖_E divided by that bound, so values above 1 mean the bound fails.
/// (The continuum scaling ‖x‖_E ~ n^{−1/2}‖ẋ‖_{L²} makes it fail for all
/// but the smallest n; the ratio is reported, not asserted.) `q_bound` and
/// `n_bound` both equal 2·sup_h, the claimed uniform bounds on the
/// difference-quotient maximum Q_obs and the solution maximum N_obs.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub n: usize,
    #[serde(rename = "norm_E")]
    pub norm_e: f64,
    pub norm_0: f64,
    pub sup_h: f64,
    pub apriori_rhs: f64,
    pub apriori_ratio: f64,
    #[serde(rename = "Q_obs")]
    pub q_obs: f64,
    #[serde(rename = "Q_bound")]
    pub q_bound: f64,
    #[serde(rename = "N_obs")]
    pub n_obs: f64,
    #[serde(rename = "N_bound")]
    pub n_bound: f64,
    pub chain_checks: ChainChecks,
}

fn sampled_sup(h: &RhsFunction) -> f64 {
    (0..SUP_SAMPLES)
        .map(|i| h.eval(i as f64 / (SUP_SAMPLES - 1) as f64).abs())
        .fold(0.0_f64, f64::max)
}

/// Builds the full bound report for a computed solution of `p`.
///
/// `sup_h` comes from the forcing's analytic hint when registered, otherwise
/// from dense sampling at 20001 uniform points. The chain checks are
/// evaluated on `x` as given; they are meaningful for iterates near the
/// discrete solution (the first four hold for arbitrary mesh functions).
pub fn bound_report(p: &DiscreteProblem, x: &MeshFunction) -> BoundReport {
    let grid = x.grid();
    let n = grid.n();
    let nf = n as f64;
    let vals = x.values();
    let norm_e = x.norm_e();
    let norm_0 = x.norm_0();
    let sup_h = p.h().sup_norm_hint().unwrap_or_else(|| sampled_sup(p.h()));
    let apriori_rhs = 2.0 * nf.powf(-1.5) * sup_h;
    let apriori_ratio = if apriori_rhs > 0.0 {
        norm_e / apriori_rhs
    } else {
        0.0
    };

    let mut q_obs = 0.0_f64;
    let mut max_step = 0.0_f64;
    for k in 1..=n {
        let step = (vals[k] - vals[k - 1]).abs();
        max_step = max_step.max(step);
        q_obs = q_obs.max(nf * step);
    }
    let n_obs = vals.iter().fold(0.0_f64, |m, v| m.max(v.abs()));

    let mut partial_sum_bound = true;
    let mut running = 0.0_f64;
    for k in 1..=n {
        running += (vals[k] - vals[k - 1]).abs();
        if running > (k as f64).sqrt() * norm_e + CHAIN_TOL {
            partial_sum_bound = false;
            break;
        }
    }
    let pair = interpolants(x);
    let chain_checks = ChainChecks {
        norm_ratio: norm_e <= 2.0 * norm_0 + CHAIN_TOL,
        step_bound: max_step <= norm_e + CHAIN_TOL,
        partial_sum_bound,
        sup_bound: n_obs <= nf.sqrt() * norm_e + CHAIN_TOL,
        interpolant_sup_bound: pair.sup_x_bar() <= pair.h1_norm() + CHAIN_TOL,
    };

    BoundReport {
        n,
        norm_e,
        norm_0,
        sup_h,
        apriori_rhs,
        apriori_ratio,
        q_obs,
        q_bound: 2.0 * sup_h,
        n_obs,
        n_bound: 2.0 * sup_h,
        chain_checks,
    }
}

/// Least-squares fit of log(error) against log(n).
#[derive(Debug, Clone, Serialize)]
pub struct RateFit {
    pub points: Vec<(usize, f64)>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Fits error ≈ C·n^slope by least squares in log-log coordinates.
///
/// Nonpositive (or nonfinite) errors cannot be log-transformed; such points
/// are dropped with a warning. Fewer than 3 surviving points, or all points
/// at the same n, is an error.
pub fn fit_rate(points: &[(usize, f64)]) -> Result<RateFit, AnalysisError> {
    let mut kept: Vec<(usize, f64)> = Vec::with_capacity(points.len());
    for &(n, e) in points {
        if n >= 1 && e > 0.0 && e.is_finite() {
            kept.push((n, e));
        } else {
            log::warn!("rate fit: dropping unusable point (n = {n}, error = {e})");
        }
    }
    if kept.len() < 3 {
        return Err(AnalysisError::InsufficientData { got: kept.len() });
    }
    let xs: Vec<f64> = kept.iter().map(|&(n, _)| (n as f64).ln()).collect();
    let ys: Vec<f64> = kept.iter().map(|&(_, e)| e.ln()).collect();
    let count = xs.len() as f64;
    let x_mean = xs.iter().sum::<f64>() / count;
    let y_mean = ys.iter().sum::<f64>() / count;
    let sxx: f64 = xs.iter().map(|x| (x - x_mean) * (x - x_mean)).sum();
    if sxx <= 0.0 {
        return Err(AnalysisError::DegenerateData);
    }
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - x_mean) * (y - y_mean))
        .sum();
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let ss_tot: f64 = ys.iter().map(|y| (y - y_mean) * (y - y_mean)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let fitted = intercept + slope * x;
            (y - fitted) * (y - fitted)
        })
        .sum();
    let r_squared = if ss_tot == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    Ok(RateFit {
        points: kept,
        slope,
        intercept,
        r_squared,
    })
}

/// Worst pointwise violation of the differential equation by a reference,
/// using the default differencing step of 1e-3.
pub fn strong_form_check(
    reference: &ReferenceSolution,
    f: &Nonlinearity,
    h: &RhsFunction,
    sample_count: usize,
) -> f64 {
    strong_form_check_with_spacing(reference, f, h, sample_count, DEFAULT_SPACING)
}

/// Evaluates max over interior samples of
/// |ẍ_num(t) − f(t, ẋ(t), x(t)) + h(t)|, with ẍ_num a central second
/// difference of the reference value at the given spacing. Samples are
/// placed strictly inside [spacing, 1 − spacing] so the stencil never
/// leaves [0, 1].
pub fn strong_form_check_with_spacing(
    reference: &ReferenceSolution,
    f: &Nonlinearity,
    h: &RhsFunction,
    sample_count: usize,
    spacing: f64,
) -> f64 {
    assert!(sample_count >= 1, "need at least one sample");
    assert!(
        spacing > 0.0 && spacing < 0.5,
        "differencing step must lie in (0, 0.5), got {spacing}"
    );
    let mut worst = 0.0_f64;
    for i in 1..=sample_count {
        let t = spacing + (1.0 - 2.0 * spacing) * i as f64 / (sample_count + 1) as f64;
        let second = (reference.value(t + spacing) - 2.0 * reference.value(t)
            + reference.value(t - spacing))
            / (spacing * spacing);
        let rhs = f.eval(t, reference.derivative(t), reference.value(t)) - h.eval(t);
        worst = worst.max((second - rhs).abs());
    }
    worst
}
