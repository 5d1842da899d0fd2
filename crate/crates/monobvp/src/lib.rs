//! Finite-difference machinery for the two-point boundary value problem
//!
//! ```text
//!     x''(t) = f(t, x'(t), x(t)) - h(t),   x(0) = x(1) = 0,
//! ```
//!
//! discretized on a uniform mesh of n subintervals of [0, 1]. The discrete
//! unknown is a mesh function vanishing at both endpoints; the scheme imposes
//!
//! ```text
//!     -D2x(k-1) + (1/n^2) f(k/n, n Dx(k-1), x(k)) = (1/n^2) h(k/n)
//! ```
//!
//! at the interior nodes k = 1..n-1, where D is the forward difference. The
//! nonlinear system is driven to zero by a preconditioned descent / Newton
//! iteration whose stopping rule is an a-posteriori error certificate: the
//! energy norm of the Riesz representative of the residual functional. For a
//! strongly monotone discrete operator this certificate is an upper bound on
//! the distance to the exact discrete solution, so "certificate below
//! tolerance" is a guarantee rather than a heuristic.
//!
//! Module map:
//!
//! * [`mesh`] - grids, mesh functions, discrete calculus, Riesz representatives
//! * [`problems`] - registry of nonlinearities f and forcings h, assumption probes
//! * [`system`] - the discrete nonlinear system: residual, weak pairing, Jacobian
//! * [`solver`] - certificate-driven iteration and Lipschitz-inverse checks
//! * [`reference`] - independent reference solutions (manufactured, shooting,
//!   fine grid, direct linear solve)
//! * [`analysis`] - interpolants, grid errors, bound reports, rate fitting
//! * [`dependence`] - continuous-dependence experiments under weak forcing
//!   perturbations

pub mod analysis;
pub mod dependence;
pub mod mesh;
pub mod problems;
pub mod reference;
pub mod solver;
pub mod system;

pub use analysis::{
    bound_report, fit_rate, grid_errors, interpolants, strong_form_check,
    strong_form_check_with_spacing, AnalysisError, BoundReport, ChainChecks, ErrorPair,
    InterpolantPair, RateFit,
};
pub use dependence::{
    dependence_experiment, solution_to_forcing_ratio, DependenceError, DependenceRow, WeakFamily,
};
pub use mesh::{riesz_representative, tridiagonal_solve, Grid, MeshError, MeshFunction, NodeLoad};
pub use problems::{
    builtin, builtin_rhs, nonlinearity_ids, probe_operator_monotonicity, probe_p1, probe_p2,
    rhs_ids, FamilyParams, Nonlinearity, ProbeRanges, ProbeReport, ProblemError, RhsFunction,
};
pub use reference::{
    fine_grid, linear_direct, manufactured, shooting, Provenance, ReferenceError,
    ReferenceSolution, SmoothFunction,
};
pub use solver::{
    certificate, lipschitz_inverse_check, solve, Method, Solution, SolverError, SolverOptions,
};
pub use system::{DiscreteProblem, SystemError, Tridiagonal};
