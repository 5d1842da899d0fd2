//! Certificate-driven iteration for the discrete system.
//!
//! The a-posteriori certificate of an iterate x is
//!
//! ```text
//!     cert(x) = || riesz(residual(x)) ||_E / c,
//! ```
//!
//! where c is the strong-monotonicity constant of the discrete operator
//! (1 for the built-in monotone families). Strong monotonicity gives
//! ||x - x*||_E <= cert(x), so iterating until cert <= tol_cert bounds the
//! distance to the exact discrete solution, not just the residual size.
//!
//! Three methods share that stopping rule:
//!
//! * preconditioned descent: step along the Riesz representative of the
//!   residual, with a halving line search that insists on a certificate
//!   decrease by the factor (1 - tau c / 2);
//! * Newton: tridiagonal Newton steps with a halving line search that
//!   insists on any certificate decrease;
//! * hybrid (default): descent until the certificate drops below 1e-3, then
//!   Newton, falling back to a descent step whenever a Newton step is
//!   unavailable or fails to decrease the certificate.
//!
//! Everything is deterministic: same problem, options, and initial iterate
//! produce bit-identical iterates.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::{riesz_representative, Grid, MeshError, MeshFunction, NodeLoad};
use crate::problems::{Nonlinearity, RhsFunction};
use crate::system::{DiscreteProblem, SystemError};

/// Certificate level at which the hybrid method hands over to Newton.
const NEWTON_HANDOVER: f64 = 1e-3;

/// Line-search steps below this are treated as failure.
const STEP_FLOOR: f64 = 1e-16;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid solver options: {0}")]
    InvalidOptions(String),
    #[error("initial iterate lives on a different grid ({0} vs {1} subintervals)")]
    GridMismatch(usize, usize),
    #[error(
        "line search underflow at iteration {iteration}: step {step:e}, certificate {certificate:e}"
    )]
    LineSearchFailure {
        iteration: usize,
        step: f64,
        certificate: f64,
    },
    #[error("solver did not converge: {0}")]
    NotConverged(String),
    #[error("ratio undefined: identical forcing loads")]
    UndefinedRatio,
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    PreconditionedDescent,
    Newton,
    Hybrid,
}

impl Default for Method {
    fn default() -> Self {
        Method::Hybrid
    }
}

/// Iteration controls. `monotonicity_constant` is the c the certificate
/// divides by; leave it at 1 unless the operator is known to be better or
/// worse conditioned.
#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub method: Method,
    pub tol_cert: f64,
    pub max_iterations: usize,
    pub initial_step: f64,
    pub monotonicity_constant: f64,
    /// Starting iterate; the zero function when absent.
    pub initial_guess: Option<MeshFunction>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            method: Method::Hybrid,
            tol_cert: 1e-10,
            max_iterations: 100_000,
            initial_step: 1.0,
            monotonicity_constant: 1.0,
            initial_guess: None,
        }
    }
}

/// Final iterate with its certificate. `converged` is false only when the
/// iteration budget ran out; errors abort instead.
#[derive(Debug, Clone)]
pub struct Solution {
    pub x: MeshFunction,
    pub certificate: f64,
    pub iterations: usize,
    pub converged: bool,
    pub method_used: String,
}

/// A-posteriori error bound of an iterate: the energy norm of the Riesz
/// representative of the residual functional, divided by the
/// strong-monotonicity constant.
pub fn certificate(p: &DiscreteProblem, x: &MeshFunction, monotonicity_constant: f64) -> f64 {
    assert!(
        monotonicity_constant > 0.0,
        "monotonicity constant must be positive"
    );
    let load = NodeLoad::new(p.grid(), p.residual(x)).expect("residual length matches grid");
    riesz_representative(&load).norm_e() / monotonicity_constant
}

fn validate(opts: &SolverOptions) -> Result<(), SolverError> {
    if !(opts.tol_cert > 0.0 && opts.tol_cert.is_finite()) {
        return Err(SolverError::InvalidOptions(format!(
            "tol_cert must be positive and finite, got {}",
            opts.tol_cert
        )));
    }
    if !(opts.initial_step > 0.0 && opts.initial_step <= 1.0) {
        return Err(SolverError::InvalidOptions(format!(
            "initial_step must lie in (0, 1], got {}",
            opts.initial_step
        )));
    }
    if !(opts.monotonicity_constant > 0.0 && opts.monotonicity_constant.is_finite()) {
        return Err(SolverError::InvalidOptions(format!(
            "monotonicity_constant must be positive and finite, got {}",
            opts.monotonicity_constant
        )));
    }
    Ok(())
}

/// One descent step with the certificate-decrease line search. Returns the
/// accepted iterate and its certificate.
fn descent_step(
    p: &DiscreteProblem,
    x: &MeshFunction,
    cert: f64,
    iteration: usize,
    opts: &SolverOptions,
) -> Result<(MeshFunction, f64), SolverError> {
    let c = opts.monotonicity_constant;
    let load = NodeLoad::new(p.grid(), p.residual(x)).expect("residual length matches grid");
    let d = riesz_representative(&load);
    let mut tau = opts.initial_step;
    loop {
        let cand = x.add_scaled(-tau, &d);
        let cand_cert = certificate(p, &cand, c);
        if cand_cert <= (1.0 - 0.5 * tau * c) * cert {
            return Ok((cand, cand_cert));
        }
        tau *= 0.5;
        if tau < STEP_FLOOR {
            return Err(SolverError::LineSearchFailure {
                iteration,
                step: tau,
                certificate: cert,
            });
        }
    }
}

/// One Newton step with a certificate-decrease line search. In lenient mode
/// (the hybrid fallback path) every failure returns Ok(None) so the caller
/// can take a descent step instead.
fn newton_step(
    p: &DiscreteProblem,
    x: &MeshFunction,
    cert: f64,
    iteration: usize,
    opts: &SolverOptions,
    lenient: bool,
) -> Result<Option<(MeshFunction, f64)>, SolverError> {
    let c = opts.monotonicity_constant;
    let jac = match p.jacobian(x) {
        Ok(j) => j,
        Err(e) if lenient => {
            let _ = e;
            return Ok(None);
        }
        Err(e) => return Err(e.into()),
    };
    let direction = match jac.solve(&p.residual(x)) {
        Ok(d) => d,
        Err(e) if lenient => {
            let _ = e;
            return Ok(None);
        }
        Err(e) => return Err(e.into()),
    };
    let d = MeshFunction::from_interior(p.grid(), &direction).expect("interior length");
    let mut tau = 1.0;
    loop {
        let cand = x.add_scaled(-tau, &d);
        let cand_cert = certificate(p, &cand, c);
        if cand_cert < cert {
            return Ok(Some((cand, cand_cert)));
        }
        tau *= 0.5;
        if lenient && tau < 1e-4 {
            return Ok(None);
        }
        if tau < STEP_FLOOR {
            return Err(SolverError::LineSearchFailure {
                iteration,
                step: tau,
                certificate: cert,
            });
        }
    }
}

/// Runs the configured iteration from the initial iterate (zero by default)
/// until the certificate drops to `tol_cert` or the iteration budget is
/// exhausted. Budget exhaustion returns the best iterate with
/// `converged = false`; line-search underflow is an error.
pub fn solve(p: &DiscreteProblem, opts: &SolverOptions) -> Result<Solution, SolverError> {
    validate(opts)?;
    let mut x = match &opts.initial_guess {
        Some(g) => {
            if g.grid() != p.grid() {
                return Err(SolverError::GridMismatch(g.grid().n(), p.grid().n()));
            }
            g.clone()
        }
        None => MeshFunction::zero(p.grid()),
    };
    let c = opts.monotonicity_constant;
    let mut cert = certificate(p, &x, c);
    let mut iterations = 0usize;
    let mut used_descent = false;
    let mut used_newton = false;

    while cert > opts.tol_cert {
        if iterations >= opts.max_iterations {
            return Ok(Solution {
                x,
                certificate: cert,
                iterations,
                converged: false,
                method_used: method_label(opts.method, used_descent, used_newton),
            });
        }
        let (next, next_cert) = match opts.method {
            Method::PreconditionedDescent => {
                used_descent = true;
                descent_step(p, &x, cert, iterations, opts)?
            }
            Method::Newton => {
                used_newton = true;
                newton_step(p, &x, cert, iterations, opts, false)?.expect("strict mode returns Some")
            }
            Method::Hybrid => {
                if cert < NEWTON_HANDOVER && p.f().has_partials() {
                    match newton_step(p, &x, cert, iterations, opts, true)? {
                        Some(step) => {
                            used_newton = true;
                            step
                        }
                        None => {
                            used_descent = true;
                            descent_step(p, &x, cert, iterations, opts)?
                        }
                    }
                } else {
                    used_descent = true;
                    descent_step(p, &x, cert, iterations, opts)?
                }
            }
        };
        x = next;
        cert = next_cert;
        iterations += 1;
    }

    Ok(Solution {
        x,
        certificate: cert,
        iterations,
        converged: true,
        method_used: method_label(opts.method, used_descent, used_newton),
    })
}

fn method_label(method: Method, used_descent: bool, used_newton: bool) -> String {
    match method {
        Method::PreconditionedDescent => "preconditioned-descent".to_string(),
        Method::Newton => "newton".to_string(),
        Method::Hybrid => match (used_descent, used_newton) {
            (false, false) => "hybrid".to_string(),
            (true, false) => "hybrid(descent)".to_string(),
            (false, true) => "hybrid(newton)".to_string(),
            (true, true) => "hybrid(descent+newton)".to_string(),
        },
    }
}

/// Solves the problem for two forcings and returns
/// ||x1 - x2||_E / ||rho1 - rho2||_E, where rho_i is the Riesz
/// representative of the load (1/n^2) h_i(k/n). Strong monotonicity with
/// constant c predicts this ratio never exceeds 1/c.
pub fn lipschitz_inverse_check(
    f: &Nonlinearity,
    h1: &RhsFunction,
    h2: &RhsFunction,
    grid: Grid,
    opts: &SolverOptions,
) -> Result<f64, SolverError> {
    let p1 = DiscreteProblem::new(f.clone(), h1.clone(), grid)?;
    let p2 = DiscreteProblem::new(f.clone(), h2.clone(), grid)?;
    let s1 = solve(&p1, opts)?;
    let s2 = solve(&p2, opts)?;
    if !s1.converged {
        return Err(SolverError::NotConverged(format!(
            "first problem stalled at certificate {:e}",
            s1.certificate
        )));
    }
    if !s2.converged {
        return Err(SolverError::NotConverged(format!(
            "second problem stalled at certificate {:e}",
            s2.certificate
        )));
    }
    let n = grid.n() as f64;
    let inv_n2 = 1.0 / (n * n);
    let load = |h: &RhsFunction| {
        let values: Vec<f64> = (1..grid.n())
            .map(|k| inv_n2 * h.eval(grid.node(k)))
            .collect();
        riesz_representative(&NodeLoad::new(grid, values).expect("length matches"))
    };
    let rho1 = load(h1);
    let rho2 = load(h2);
    let denom = rho1.sub(&rho2).norm_e();
    if denom == 0.0 {
        return Err(SolverError::UndefinedRatio);
    }
    Ok(s1.x.sub(&s2.x).norm_e() / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{builtin, builtin_rhs, nonlinearity_ids};
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn spike_problem() -> DiscreteProblem {
        let h = RhsFunction::new("spike", Arc::new(|t: f64| 9.0 * (PI * t).sin().powi(2)))
            .unwrap();
        DiscreteProblem::new(builtin("linear").unwrap(), h, Grid::new(2).unwrap()).unwrap()
    }

    /// Forcing manufactured so that f = linear has exact solution sin(pi t).
    fn linear_sin_rhs() -> RhsFunction {
        RhsFunction::new(
            "linear-sin",
            Arc::new(|t: f64| (1.0 + PI * PI) * (PI * t).sin()),
        )
        .unwrap()
    }

    #[test]
    fn certificate_hand_value_at_zero_iterate() {
        let p = spike_problem();
        let x = MeshFunction::zero(p.grid());
        // residual (-2.25), riesz value -1.125, norm 1.125 sqrt(2)
        let want = 1.125 * 2.0_f64.sqrt();
        assert!((certificate(&p, &x, 1.0) - want).abs() < 1e-14);
        // certificate bounds the true error sqrt(2)
        assert!(2.0_f64.sqrt() <= certificate(&p, &x, 1.0));
    }

    #[test]
    fn certificate_vanishes_at_the_solution() {
        let p = spike_problem();
        let x = MeshFunction::from_values(p.grid(), vec![0.0, 1.0, 0.0]).unwrap();
        assert!(certificate(&p, &x, 1.0) < 1e-15);
    }

    #[test]
    fn certificate_scales_with_the_residual() {
        // f = 0 makes the residual affine in (x, h): doubling both doubles it
        let h1 = builtin_rhs("sin-pi").unwrap();
        let h2 = RhsFunction::new("sin-pi-x2", Arc::new(|t: f64| 2.0 * (PI * t).sin())).unwrap();
        let g = Grid::new(9).unwrap();
        let p1 = DiscreteProblem::new(builtin("zero").unwrap(), h1, g).unwrap();
        let p2 = DiscreteProblem::new(builtin("zero").unwrap(), h2, g).unwrap();
        let xi: Vec<f64> = (0..8).map(|i| (i as f64 * 0.37).sin()).collect();
        let x = MeshFunction::from_interior(g, &xi).unwrap();
        let x2 = MeshFunction::zero(g).add_scaled(2.0, &x);
        let a = certificate(&p1, &x, 1.0);
        let b = certificate(&p2, &x2, 1.0);
        assert!((b - 2.0 * a).abs() <= 1e-12 * (1.0 + b.abs()));
    }

    #[test]
    fn two_node_problem_solves_exactly() {
        let p = spike_problem();
        let s = solve(&p, &SolverOptions::default()).unwrap();
        assert!(s.converged);
        assert!((s.x.value(1) - 1.0).abs() < 1e-10);
        assert!(s.certificate <= 1e-10);
    }

    #[test]
    fn zero_forcing_is_exact_at_initialization_for_every_family() {
        for id in nonlinearity_ids() {
            let p = DiscreteProblem::new(
                builtin(id).unwrap(),
                RhsFunction::zero(),
                Grid::new(17).unwrap(),
            )
            .unwrap();
            let s = solve(&p, &SolverOptions::default()).unwrap();
            assert!(s.converged, "{id}");
            assert_eq!(s.iterations, 0, "{id}");
            assert_eq!(s.certificate, 0.0, "{id}");
            assert!(s.x.values().iter().all(|&v| v == 0.0), "{id}");
        }
    }

    #[test]
    fn descent_newton_and_hybrid_agree() {
        let g = Grid::new(32).unwrap();
        let mk = || {
            DiscreteProblem::new(builtin("linear").unwrap(), linear_sin_rhs(), g).unwrap()
        };
        let mut solutions = Vec::new();
        for method in [Method::PreconditionedDescent, Method::Newton, Method::Hybrid] {
            let opts = SolverOptions {
                method,
                ..Default::default()
            };
            let s = solve(&mk(), &opts).unwrap();
            assert!(s.converged, "{method:?}");
            solutions.push(s.x);
        }
        for other in &solutions[1..] {
            assert!(solutions[0].sub(other).norm_e() <= 2e-10);
        }
    }

    #[test]
    fn newton_on_affine_problem_converges_in_one_step() {
        let p = DiscreteProblem::new(
            builtin("linear").unwrap(),
            linear_sin_rhs(),
            Grid::new(64).unwrap(),
        )
        .unwrap();
        let opts = SolverOptions {
            method: Method::Newton,
            ..Default::default()
        };
        let s = solve(&p, &opts).unwrap();
        assert!(s.converged);
        assert_eq!(s.iterations, 1);
        assert_eq!(s.method_used, "newton");
    }

    #[test]
    fn hybrid_engages_newton_on_the_drift_family() {
        let p = DiscreteProblem::new(
            builtin("arctan-drift").unwrap(),
            builtin_rhs("sin-pi").unwrap(),
            Grid::new(64).unwrap(),
        )
        .unwrap();
        let s = solve(&p, &SolverOptions::default()).unwrap();
        assert!(s.converged);
        assert_eq!(s.method_used, "hybrid(descent+newton)");
    }

    #[test]
    fn hybrid_falls_back_to_descent_without_partials() {
        let p = DiscreteProblem::new(
            builtin("exp-arctan").unwrap(),
            builtin_rhs("bump").unwrap(),
            Grid::new(16).unwrap(),
        )
        .unwrap();
        let s = solve(&p, &SolverOptions::default()).unwrap();
        assert!(s.converged);
        assert_eq!(s.method_used, "hybrid(descent)");
    }

    #[test]
    fn linear_solution_tracks_the_sine_profile() {
        let g = Grid::new(64).unwrap();
        let p = DiscreteProblem::new(builtin("linear").unwrap(), linear_sin_rhs(), g).unwrap();
        let s = solve(&p, &SolverOptions::default()).unwrap();
        let mut worst = 0.0f64;
        for k in 0..=64 {
            let err = (s.x.value(k) - (PI * g.node(k)).sin()).abs();
            worst = worst.max(err);
        }
        assert!(worst < 3e-3, "max node error {worst}");
    }

    #[test]
    fn descent_certificates_never_increase() {
        let g = Grid::new(24).unwrap();
        let p = DiscreteProblem::new(builtin("arctan-drift").unwrap(), linear_sin_rhs(), g)
            .unwrap();
        // deterministic reruns expose the first k certificates
        let mut last = f64::INFINITY;
        for budget in 0..12 {
            let opts = SolverOptions {
                method: Method::PreconditionedDescent,
                max_iterations: budget,
                ..Default::default()
            };
            let s = solve(&p, &opts).unwrap();
            assert!(
                s.certificate <= last + 1e-15,
                "certificate rose from {last} to {} at budget {budget}",
                s.certificate
            );
            last = s.certificate;
        }
    }

    #[test]
    fn budget_exhaustion_reports_nonconvergence() {
        let p = DiscreteProblem::new(
            builtin("linear").unwrap(),
            linear_sin_rhs(),
            Grid::new(128).unwrap(),
        )
        .unwrap();
        let opts = SolverOptions {
            method: Method::PreconditionedDescent,
            max_iterations: 1,
            ..Default::default()
        };
        let s = solve(&p, &opts).unwrap();
        assert!(!s.converged);
        assert_eq!(s.iterations, 1);
        assert!(s.certificate > opts.tol_cert);
    }

    #[test]
    fn runaway_problem_fails_the_line_search() {
        // f = -50 x destroys monotonicity: every descent step grows the
        // residual, so the step halves to underflow
        let f = Nonlinearity::new("anti-monotone", Arc::new(|_, _, x: f64| -50.0 * x));
        let h = RhsFunction::new("spike", Arc::new(|t: f64| 9.0 * (PI * t).sin().powi(2)))
            .unwrap();
        let p = DiscreteProblem::new(f, h, Grid::new(2).unwrap()).unwrap();
        let opts = SolverOptions {
            method: Method::PreconditionedDescent,
            ..Default::default()
        };
        assert!(matches!(
            solve(&p, &opts),
            Err(SolverError::LineSearchFailure { .. })
        ));
    }

    #[test]
    fn newton_requires_partials() {
        let p = DiscreteProblem::new(
            builtin("exp-arctan").unwrap(),
            builtin_rhs("sin-pi").unwrap(),
            Grid::new(8).unwrap(),
        )
        .unwrap();
        let opts = SolverOptions {
            method: Method::Newton,
            ..Default::default()
        };
        assert!(matches!(
            solve(&p, &opts),
            Err(SolverError::System(SystemError::MissingPartials(_)))
        ));
    }

    #[test]
    fn solves_are_bit_deterministic() {
        let p = DiscreteProblem::new(
            builtin("arctan-drift").unwrap(),
            builtin_rhs("sin-pi").unwrap(),
            Grid::new(32).unwrap(),
        )
        .unwrap();
        let a = solve(&p, &SolverOptions::default()).unwrap();
        let b = solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(a.iterations, b.iterations);
        for (x, y) in a.x.values().iter().zip(b.x.values()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn custom_initial_guess_reaches_the_same_solution() {
        let g = Grid::new(32).unwrap();
        let p = DiscreteProblem::new(builtin("arctan-drift").unwrap(), linear_sin_rhs(), g)
            .unwrap();
        let base = solve(&p, &SolverOptions::default()).unwrap();
        let guess_interior: Vec<f64> = (0..31).map(|i| ((i * 7) % 5) as f64 * 0.2 - 0.4).collect();
        let opts = SolverOptions {
            initial_guess: Some(MeshFunction::from_interior(g, &guess_interior).unwrap()),
            ..Default::default()
        };
        let s = solve(&p, &opts).unwrap();
        assert!(s.converged);
        assert!(base.x.sub(&s.x).norm_e() <= 10.0 * opts.tol_cert);
    }

    #[test]
    fn initial_guess_grid_is_checked() {
        let p = spike_problem();
        let opts = SolverOptions {
            initial_guess: Some(MeshFunction::zero(Grid::new(5).unwrap())),
            ..Default::default()
        };
        assert!(matches!(
            solve(&p, &opts),
            Err(SolverError::GridMismatch(5, 2))
        ));
    }

    #[test]
    fn option_validation_rejects_bad_fields() {
        let p = spike_problem();
        for bad in [
            SolverOptions {
                tol_cert: 0.0,
                ..Default::default()
            },
            SolverOptions {
                initial_step: 1.5,
                ..Default::default()
            },
            SolverOptions {
                monotonicity_constant: -1.0,
                ..Default::default()
            },
        ] {
            assert!(matches!(
                solve(&p, &bad),
                Err(SolverError::InvalidOptions(_))
            ));
        }
    }

    #[test]
    fn inverse_is_an_isometry_for_zero_f() {
        let ratio = lipschitz_inverse_check(
            &builtin("zero").unwrap(),
            &builtin_rhs("sin-pi").unwrap(),
            &builtin_rhs("bump").unwrap(),
            Grid::new(32).unwrap(),
            &SolverOptions::default(),
        )
        .unwrap();
        assert!((ratio - 1.0).abs() <= 1e-8, "ratio {ratio}");
    }

    #[test]
    fn inverse_contracts_for_linear_f() {
        let ratio = lipschitz_inverse_check(
            &builtin("linear").unwrap(),
            &builtin_rhs("sin-pi").unwrap(),
            &builtin_rhs("bump").unwrap(),
            Grid::new(64).unwrap(),
            &SolverOptions::default(),
        )
        .unwrap();
        assert!(ratio <= 1.0 + 1e-8, "ratio {ratio}");
    }

    #[test]
    fn identical_forcings_make_the_ratio_undefined() {
        let r = lipschitz_inverse_check(
            &builtin("linear").unwrap(),
            &builtin_rhs("sin-pi").unwrap(),
            &builtin_rhs("sin-pi").unwrap(),
            Grid::new(16).unwrap(),
            &SolverOptions::default(),
        );
        assert!(matches!(r, Err(SolverError::UndefinedRatio)));
    }
}
