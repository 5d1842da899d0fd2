//! Registry of nonlinear terms f(t, x', x) and forcing terms h(t), plus
//! randomized probes of the structural assumptions the solver leans on.
//!
//! Registered nonlinearities (all satisfy f(t, 0, 0) = 0):
//!
//! | id                 | f(t, v, x)                                  |
//! |--------------------|---------------------------------------------|
//! | `zero`             | 0                                           |
//! | `linear`           | x                                           |
//! | `exp-arctan`       | g(t) exp(x - t^2) abs(arctan v)             |
//! | `arctan-arctan`    | g(t) arctan(x) abs(arctan v)                |
//! | `cubic-exp-arctan` | g(t) x^3 + exp(x - t^2) abs(arctan v)       |
//! | `arctan-drift`     | g(t) arctan(x) + g1(t) v                    |
//!
//! g must be continuous and non-negative on [0, 1] (default 1 + t); g1 is
//! unconstrained (default 4t(1 - t): unit peak, matching the scale of g, and
//! vanishing at the endpoints so that manufactured forcings for the drift
//! family stay admissible).
//!
//! The probes sample assumption inequalities at seeded random points and
//! report the minimum with a witness instead of asserting: two of the
//! registered families are *not* pairwise monotone in the pointwise sense,
//! and the reports are how that shows up.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::{Grid, MeshFunction};
use crate::system::DiscreteProblem;

/// Shared callable of one variable, `t -> f(t)`.
pub type Fn1 = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
/// Shared callable of two variables, `(r, t) -> f(r, t)`.
pub type Fn2 = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
/// Shared callable of three variables, `(t, v, x) -> f(t, v, x)`.
pub type Fn3 = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("unknown nonlinearity id {0:?}")]
    UnknownNonlinearity(String),
    #[error("unknown forcing id {0:?}")]
    UnknownRhs(String),
    #[error("coefficient g must be non-negative on [0, 1]; minimum is {0}")]
    NegativeCoefficient(f64),
    #[error("forcing {id:?} must vanish at the endpoints, got ({left:e}, {right:e})")]
    NonzeroEndpoints { id: String, left: f64, right: f64 },
    #[error("nonlinearity {0:?} has no dominator family")]
    MissingDominator(String),
}

/// Scalar coefficient functions the built-in families are parameterized by.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoefFn {
    /// intercept + slope * t
    Affine { intercept: f64, slope: f64 },
    /// scale * t * (1 - t)
    Bump { scale: f64 },
}

impl CoefFn {
    pub fn one() -> Self {
        CoefFn::Affine {
            intercept: 1.0,
            slope: 0.0,
        }
    }

    pub fn one_plus_t() -> Self {
        CoefFn::Affine {
            intercept: 1.0,
            slope: 1.0,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            CoefFn::Affine { intercept, slope } => intercept + slope * t,
            CoefFn::Bump { scale } => scale * t * (1.0 - t),
        }
    }

    /// Minimum over [0, 1]; used to validate non-negativity.
    pub fn min_on_unit(&self) -> f64 {
        match *self {
            CoefFn::Affine { intercept, slope } => intercept.min(intercept + slope),
            CoefFn::Bump { scale } => {
                if scale >= 0.0 {
                    0.0
                } else {
                    0.25 * scale
                }
            }
        }
    }
}

/// Coefficients for the built-in families: g scales the state term, g1 the
/// velocity term of the drift family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FamilyParams {
    #[serde(default = "default_g")]
    pub g: CoefFn,
    #[serde(default = "default_g1")]
    pub g1: CoefFn,
}

fn default_g() -> CoefFn {
    CoefFn::one_plus_t()
}

fn default_g1() -> CoefFn {
    CoefFn::Bump { scale: 4.0 }
}

impl Default for FamilyParams {
    fn default() -> Self {
        FamilyParams {
            g: default_g(),
            g1: default_g1(),
        }
    }
}

/// Decomposition f(t, v, x) = state_term(t, x) + v * velocity_coef(t), for
/// nonlinearities that are affine in the velocity argument. The
/// continuous-dependence experiment requires this structure.
#[derive(Clone)]
pub struct AffineDecomposition {
    state_term: Fn2,
    velocity_coef: Fn1,
}

impl AffineDecomposition {
    pub fn new(state_term: Fn2, velocity_coef: Fn1) -> Self {
        AffineDecomposition {
            state_term,
            velocity_coef,
        }
    }

    pub fn state_term(&self, t: f64, x: f64) -> f64 {
        (self.state_term)(t, x)
    }

    pub fn velocity_coef(&self, t: f64) -> f64 {
        (self.velocity_coef)(t)
    }
}

/// A nonlinearity f(t, v, x) with optional partial derivatives, an optional
/// dominator family r -> f_r(t) bounding |f| on state balls, an optional
/// velocity-affine decomposition, and a monotone-in-x flag.
#[derive(Clone)]
pub struct Nonlinearity {
    id: String,
    eval: Fn3,
    partial_v: Option<Fn3>,
    partial_x: Option<Fn3>,
    monotone_in_x: bool,
    affine: Option<AffineDecomposition>,
    dominator: Option<Fn2>, // (r, t) -> f_r(t)
}

impl Nonlinearity {
    pub fn new(id: impl Into<String>, eval: Fn3) -> Self {
        Nonlinearity {
            id: id.into(),
            eval,
            partial_v: None,
            partial_x: None,
            monotone_in_x: false,
            affine: None,
            dominator: None,
        }
    }

    pub fn with_partials(mut self, partial_v: Fn3, partial_x: Fn3) -> Self {
        self.partial_v = Some(partial_v);
        self.partial_x = Some(partial_x);
        self
    }

    pub fn with_partial_x(mut self, partial_x: Fn3) -> Self {
        self.partial_x = Some(partial_x);
        self
    }

    pub fn with_monotone_in_x(mut self, flag: bool) -> Self {
        self.monotone_in_x = flag;
        self
    }

    pub fn with_affine(mut self, affine: AffineDecomposition) -> Self {
        self.affine = Some(affine);
        self
    }

    pub fn with_dominator(mut self, dominator: Fn2) -> Self {
        self.dominator = Some(dominator);
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn eval(&self, t: f64, v: f64, x: f64) -> f64 {
        (self.eval)(t, v, x)
    }

    pub fn partial_v(&self, t: f64, v: f64, x: f64) -> Option<f64> {
        self.partial_v.as_ref().map(|p| p(t, v, x))
    }

    pub fn partial_x(&self, t: f64, v: f64, x: f64) -> Option<f64> {
        self.partial_x.as_ref().map(|p| p(t, v, x))
    }

    /// Both partials available (Newton steps possible).
    pub fn has_partials(&self) -> bool {
        self.partial_v.is_some() && self.partial_x.is_some()
    }

    pub fn monotone_in_x(&self) -> bool {
        self.monotone_in_x
    }

    pub fn affine_decomposition(&self) -> Option<&AffineDecomposition> {
        self.affine.as_ref()
    }

    /// Dominator value f_r(t), if the family carries one.
    pub fn dominator(&self, r: f64, t: f64) -> Option<f64> {
        self.dominator.as_ref().map(|d| d(r, t))
    }

    pub fn has_dominator(&self) -> bool {
        self.dominator.is_some()
    }
}

/// Ids accepted by [`builtin`], in listing order.
pub fn nonlinearity_ids() -> &'static [&'static str] {
    &[
        "zero",
        "linear",
        "exp-arctan",
        "arctan-arctan",
        "cubic-exp-arctan",
        "arctan-drift",
    ]
}

/// Builds a registered nonlinearity with default coefficients.
pub fn builtin(id: &str) -> Result<Nonlinearity, ProblemError> {
    builtin_with(id, &FamilyParams::default())
}

/// Builds a registered nonlinearity with explicit coefficients.
pub fn builtin_with(id: &str, params: &FamilyParams) -> Result<Nonlinearity, ProblemError> {
    let gmin = params.g.min_on_unit();
    if gmin < 0.0 {
        return Err(ProblemError::NegativeCoefficient(gmin));
    }
    let g = params.g;
    let g1 = params.g1;
    match id {
        "zero" => Ok(Nonlinearity::new("zero", Arc::new(|_, _, _| 0.0))
            .with_partials(Arc::new(|_, _, _| 0.0), Arc::new(|_, _, _| 0.0))
            .with_monotone_in_x(true)
            .with_affine(AffineDecomposition::new(
                Arc::new(|_, _| 0.0),
                Arc::new(|_| 0.0),
            ))
            .with_dominator(Arc::new(|_, _| 0.0))),
        "linear" => Ok(Nonlinearity::new("linear", Arc::new(|_, _, x| x))
            .with_partials(Arc::new(|_, _, _| 0.0), Arc::new(|_, _, _| 1.0))
            .with_monotone_in_x(true)
            .with_affine(AffineDecomposition::new(
                Arc::new(|_, x| x),
                Arc::new(|_| 0.0),
            ))
            // |x| <= r pointwise on the sampled ball, so the constant r dominates
            .with_dominator(Arc::new(|r, _| r))),
        "exp-arctan" => Ok(Nonlinearity::new(
            "exp-arctan",
            Arc::new(move |t, v, x| g.eval(t) * (x - t * t).exp() * v.atan().abs()),
        )
        // abs(arctan v) is not differentiable at v = 0: no velocity partial
        .with_partial_x(Arc::new(move |t, v, x| {
            g.eval(t) * (x - t * t).exp() * v.atan().abs()
        }))
        .with_monotone_in_x(true)
        // abs(arctan v) < pi/2 and exp(x) <= e^|r| on the ball
        .with_dominator(Arc::new(move |r, t| {
            r.abs().exp() * FRAC_PI_2 * g.eval(t) * (-t * t).exp()
        }))),
        "arctan-arctan" => Ok(Nonlinearity::new(
            "arctan-arctan",
            Arc::new(move |t, v, x| g.eval(t) * x.atan() * v.atan().abs()),
        )
        .with_partial_x(Arc::new(move |t, v, x| {
            g.eval(t) / (1.0 + x * x) * v.atan().abs()
        }))
        .with_monotone_in_x(true)
        .with_dominator(Arc::new(move |r, t| {
            g.eval(t) * r.abs().atan() * FRAC_PI_2
        }))),
        "cubic-exp-arctan" => Ok(Nonlinearity::new(
            "cubic-exp-arctan",
            Arc::new(move |t, v, x| {
                g.eval(t) * x.powi(3) + (x - t * t).exp() * v.atan().abs()
            }),
        )
        .with_partial_x(Arc::new(move |t, v, x| {
            3.0 * g.eval(t) * x * x + (x - t * t).exp() * v.atan().abs()
        }))
        .with_monotone_in_x(true)
        .with_dominator(Arc::new(move |r, t| {
            g.eval(t) * r.powi(3).abs() + r.abs().exp() * (-t * t).exp() * FRAC_PI_2
        }))),
        "arctan-drift" => Ok(Nonlinearity::new(
            "arctan-drift",
            Arc::new(move |t, v, x| g.eval(t) * x.atan() + g1.eval(t) * v),
        )
        .with_partials(
            Arc::new(move |t, _, _| g1.eval(t)),
            Arc::new(move |t, _, x| g.eval(t) / (1.0 + x * x)),
        )
        .with_monotone_in_x(true)
        .with_affine(AffineDecomposition::new(
            Arc::new(move |t, x| g.eval(t) * x.atan()),
            Arc::new(move |t| g1.eval(t)),
        ))),
        other => Err(ProblemError::UnknownNonlinearity(other.to_string())),
    }
}

/// A forcing term h(t) with optional derivative and sup-norm hint. Endpoint
/// values must vanish to 1e-12: the boundary-value problem requires it.
#[derive(Clone)]
pub struct RhsFunction {
    id: String,
    eval: Fn1,
    deriv: Option<Fn1>,
    sup_norm_hint: Option<f64>,
}

impl RhsFunction {
    pub fn new(id: impl Into<String>, eval: Fn1) -> Result<Self, ProblemError> {
        let id = id.into();
        let (left, right) = (eval(0.0), eval(1.0));
        if left.abs() > 1e-12 || right.abs() > 1e-12 {
            return Err(ProblemError::NonzeroEndpoints { id, left, right });
        }
        Ok(RhsFunction {
            id,
            eval,
            deriv: None,
            sup_norm_hint: None,
        })
    }

    pub fn with_deriv(mut self, deriv: Fn1) -> Self {
        self.deriv = Some(deriv);
        self
    }

    pub fn with_sup_norm_hint(mut self, hint: f64) -> Self {
        self.sup_norm_hint = Some(hint);
        self
    }

    pub fn zero() -> Self {
        RhsFunction {
            id: "zero".to_string(),
            eval: Arc::new(|_| 0.0),
            deriv: Some(Arc::new(|_| 0.0)),
            sup_norm_hint: Some(0.0),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.eval)(t)
    }

    pub fn deriv(&self, t: f64) -> Option<f64> {
        self.deriv.as_ref().map(|d| d(t))
    }

    pub fn has_deriv(&self) -> bool {
        self.deriv.is_some()
    }

    pub fn sup_norm_hint(&self) -> Option<f64> {
        self.sup_norm_hint
    }
}

/// Ids accepted by [`builtin_rhs`].
pub fn rhs_ids() -> &'static [&'static str] {
    &["zero", "sin-pi", "bump"]
}

/// Builds a registered forcing term.
pub fn builtin_rhs(id: &str) -> Result<RhsFunction, ProblemError> {
    match id {
        "zero" => Ok(RhsFunction::zero()),
        "sin-pi" => Ok(RhsFunction::new("sin-pi", Arc::new(|t| (PI * t).sin()))?
            .with_deriv(Arc::new(|t| PI * (PI * t).cos()))
            .with_sup_norm_hint(1.0)),
        "bump" => Ok(RhsFunction::new("bump", Arc::new(|t| t * (1.0 - t)))?
            .with_deriv(Arc::new(|t| 1.0 - 2.0 * t))
            .with_sup_norm_hint(0.25)),
        other => Err(ProblemError::UnknownRhs(other.to_string())),
    }
}

/// Sampling boxes for the probes: `state` bounds the x-type arguments,
/// `velocity` the v-type arguments. Time arguments always sample [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeRanges {
    pub state: (f64, f64),
    pub velocity: (f64, f64),
}

impl Default for ProbeRanges {
    fn default() -> Self {
        ProbeRanges {
            state: (-5.0, 5.0),
            velocity: (-50.0, 50.0),
        }
    }
}

/// Outcome of a randomized minimum search: the smallest sampled value of the
/// probed quantity, with the argument tuple that achieved it. Reruns with the
/// same seed reproduce the report bit for bit.
#[derive(Debug, Clone, Serialize)]
pub struct ProbeReport<W> {
    pub trials: usize,
    pub min_value: f64,
    pub witness: W,
    pub seed: u64,
}

/// Argument pair minimizing (x1 - x2)(f(t1, v1, x1) - f(t2, v2, x2)).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PairwiseWitness {
    pub t1: f64,
    pub v1: f64,
    pub x1: f64,
    pub t2: f64,
    pub v2: f64,
    pub x2: f64,
}

/// Argument tuple minimizing f_r(t) - |f(t, v, x)|.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DominatorWitness {
    pub t: f64,
    pub v: f64,
    pub x: f64,
}

/// Mesh-function pair minimizing <Ku - Kw, u - w> / ||u - w||^2.
#[derive(Debug, Clone, Serialize)]
pub struct OperatorWitness {
    pub trial: usize,
    pub pairing: f64,
    pub distance_sq: f64,
    pub first_interior: Vec<f64>,
    pub second_interior: Vec<f64>,
}

fn sample(rng: &mut ChaCha8Rng, range: (f64, f64)) -> f64 {
    rng.gen_range(range.0..range.1)
}

/// Samples the pairwise monotonicity inequality
/// (x1 - x2)(f(t1, v1, x1) - f(t2, v2, x2)) >= 0 at random argument pairs and
/// reports the minimum. Negative minima are expected for the product-form
/// families; this probe documents rather than asserts.
pub fn probe_p2(
    f: &Nonlinearity,
    ranges: &ProbeRanges,
    trials: usize,
    seed: u64,
) -> ProbeReport<PairwiseWitness> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_value = f64::INFINITY;
    let mut witness = PairwiseWitness {
        t1: 0.0,
        v1: 0.0,
        x1: 0.0,
        t2: 0.0,
        v2: 0.0,
        x2: 0.0,
    };
    for _ in 0..trials {
        let t1 = sample(&mut rng, (0.0, 1.0));
        let t2 = sample(&mut rng, (0.0, 1.0));
        let v1 = sample(&mut rng, ranges.velocity);
        let v2 = sample(&mut rng, ranges.velocity);
        let x1 = sample(&mut rng, ranges.state);
        let x2 = sample(&mut rng, ranges.state);
        let value = (x1 - x2) * (f.eval(t1, v1, x1) - f.eval(t2, v2, x2));
        if value < min_value {
            min_value = value;
            witness = PairwiseWitness {
                t1,
                v1,
                x1,
                t2,
                v2,
                x2,
            };
        }
    }
    ProbeReport {
        trials,
        min_value,
        witness,
        seed,
    }
}

/// Samples f_r(t) - |f(t, v, x)| over t in [0, 1], |x| <= r, v in the probe
/// velocity range. A non-negative minimum is evidence that the dominator
/// family actually dominates on the ball of radius r.
pub fn probe_p1(
    f: &Nonlinearity,
    r: f64,
    ranges: &ProbeRanges,
    trials: usize,
    seed: u64,
) -> Result<ProbeReport<DominatorWitness>, ProblemError> {
    if !f.has_dominator() {
        return Err(ProblemError::MissingDominator(f.id().to_string()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_value = f64::INFINITY;
    let mut witness = DominatorWitness {
        t: 0.0,
        v: 0.0,
        x: 0.0,
    };
    for _ in 0..trials {
        let t = sample(&mut rng, (0.0, 1.0));
        let v = sample(&mut rng, ranges.velocity);
        let x = sample(&mut rng, (-r, r));
        let value = f.dominator(r, t).expect("checked above") - f.eval(t, v, x).abs();
        if value < min_value {
            min_value = value;
            witness = DominatorWitness { t, v, x };
        }
    }
    Ok(ProbeReport {
        trials,
        min_value,
        witness,
        seed,
    })
}

/// Samples the strong-monotonicity ratio <Ku - Kw, u - w> / ||u - w||^2 of
/// the discrete operator at random mesh-function pairs and reports the
/// minimum. For v-independent f monotone in x the ratio is provably >= 1.
pub fn probe_operator_monotonicity(
    f: &Nonlinearity,
    grid: Grid,
    trials: usize,
    seed: u64,
) -> ProbeReport<OperatorWitness> {
    let problem = DiscreteProblem::new(f.clone(), RhsFunction::zero(), grid)
        .expect("zero forcing is always admissible");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_value = f64::INFINITY;
    let mut witness = OperatorWitness {
        trial: 0,
        pairing: 0.0,
        distance_sq: 0.0,
        first_interior: Vec::new(),
        second_interior: Vec::new(),
    };
    let interior_len = grid.n() - 1;
    for trial in 0..trials {
        // resample degenerate pairs; equality has probability ~0 but the
        // ratio would be undefined
        let (u, w, dist_sq) = loop {
            let a: Vec<f64> = (0..interior_len).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..interior_len).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let u = MeshFunction::from_interior(grid, &a).expect("interior length");
            let w = MeshFunction::from_interior(grid, &b).expect("interior length");
            let z = u.sub(&w);
            let dist_sq = z.inner_e(&z).expect("same grid");
            if dist_sq > 1e-24 {
                break (u, w, dist_sq);
            }
        };
        let z = u.sub(&w);
        // with h = 0 the weak pairing is exactly <Kx, y>
        let pairing = problem.weak_pairing(&u, &z).expect("same grid")
            - problem.weak_pairing(&w, &z).expect("same grid");
        let ratio = pairing / dist_sq;
        if ratio < min_value {
            min_value = ratio;
            witness = OperatorWitness {
                trial,
                pairing,
                distance_sq: dist_sq,
                first_interior: u.interior().to_vec(),
                second_interior: w.interior().to_vec(),
            };
        }
    }
    ProbeReport {
        trials,
        min_value,
        witness,
        seed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    fn params_g_one() -> FamilyParams {
        FamilyParams {
            g: CoefFn::one(),
            g1: default_g1(),
        }
    }

    #[test]
    fn linear_evaluates_to_state() {
        let f = builtin("linear").unwrap();
        assert_eq!(f.eval(0.3, 7.0, 2.5), 2.5);
        assert_eq!(f.partial_x(0.3, 7.0, 2.5), Some(1.0));
        assert_eq!(f.partial_v(0.3, 7.0, 2.5), Some(0.0));
    }

    #[test]
    fn every_registered_family_vanishes_at_rest() {
        for id in nonlinearity_ids() {
            let f = builtin(id).unwrap();
            for i in 0..=1000 {
                let t = i as f64 / 1000.0;
                assert!(
                    f.eval(t, 0.0, 0.0).abs() <= 1e-12,
                    "{id} at t = {t}: {}",
                    f.eval(t, 0.0, 0.0)
                );
            }
        }
    }

    #[test]
    fn unknown_id_is_rejected() {
        assert!(matches!(
            builtin("quadratic"),
            Err(ProblemError::UnknownNonlinearity(_))
        ));
    }

    #[test]
    fn negative_g_is_rejected() {
        let params = FamilyParams {
            g: CoefFn::Affine {
                intercept: 1.0,
                slope: -2.0,
            },
            g1: default_g1(),
        };
        assert!(matches!(
            builtin_with("exp-arctan", &params),
            Err(ProblemError::NegativeCoefficient(_))
        ));
    }

    #[test]
    fn exp_arctan_dominator_matches_closed_form() {
        // with g = 1: f_1(0) = e * pi/2
        let f = builtin_with("exp-arctan", &params_g_one()).unwrap();
        let want = E * FRAC_PI_2;
        let got = f.dominator(1.0, 0.0).unwrap();
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }

    #[test]
    fn arctan_arctan_evaluates_product_form() {
        // g = 1: f(0, 1, 1) = arctan(1) * |arctan(1)| = (pi/4)^2
        let f = builtin_with("arctan-arctan", &params_g_one()).unwrap();
        let want = (PI / 4.0) * (PI / 4.0);
        assert!((f.eval(0.0, 1.0, 1.0) - want).abs() < 1e-14);
    }

    #[test]
    fn affine_decompositions_reconstruct_eval() {
        for id in ["zero", "linear", "arctan-drift"] {
            let f = builtin(id).unwrap();
            let d = f.affine_decomposition().expect(id);
            for i in 0..200 {
                let t = (i % 11) as f64 / 10.0;
                let v = -3.0 + 0.03 * i as f64;
                let x = 2.0 - 0.02 * i as f64;
                let recomposed = d.state_term(t, x) + v * d.velocity_coef(t);
                assert!(
                    (f.eval(t, v, x) - recomposed).abs() <= 1e-12,
                    "{id} at ({t}, {v}, {x})"
                );
            }
        }
        for id in ["exp-arctan", "arctan-arctan", "cubic-exp-arctan"] {
            assert!(builtin(id).unwrap().affine_decomposition().is_none());
        }
    }

    #[test]
    fn partials_match_central_differences() {
        // only at points where the family is smooth; the product families
        // carry no velocity partial at all
        let delta = 1e-6;
        for id in ["linear", "arctan-drift"] {
            let f = builtin(id).unwrap();
            for i in 1..50 {
                let t = i as f64 / 50.0;
                let v = 0.5 + 0.1 * i as f64;
                let x = -1.0 + 0.04 * i as f64;
                let dv = (f.eval(t, v + delta, x) - f.eval(t, v - delta, x)) / (2.0 * delta);
                let dx = (f.eval(t, v, x + delta) - f.eval(t, v, x - delta)) / (2.0 * delta);
                let pv = f.partial_v(t, v, x).unwrap();
                let px = f.partial_x(t, v, x).unwrap();
                assert!((pv - dv).abs() <= 1e-6 * (1.0 + dv.abs()), "{id} dv");
                assert!((px - dx).abs() <= 1e-6 * (1.0 + dx.abs()), "{id} dx");
            }
        }
        for id in ["exp-arctan", "arctan-arctan", "cubic-exp-arctan"] {
            let f = builtin(id).unwrap();
            assert!(!f.has_partials(), "{id} should not offer Newton partials");
            assert!(f.partial_x(0.5, 1.0, 0.5).is_some());
        }
    }

    #[test]
    fn builtin_rhs_endpoints_vanish() {
        for id in rhs_ids() {
            let h = builtin_rhs(id).unwrap();
            assert!(h.eval(0.0).abs() <= 1e-12, "{id}");
            assert!(h.eval(1.0).abs() <= 1e-12, "{id}");
        }
    }

    #[test]
    fn rhs_constructor_rejects_nonzero_endpoints() {
        let r = RhsFunction::new("shifted", Arc::new(|t: f64| t + 0.5));
        assert!(matches!(r, Err(ProblemError::NonzeroEndpoints { .. })));
    }

    #[test]
    fn p2_probe_is_nonnegative_for_linear() {
        // f = x makes the product (x1 - x2)^2
        let f = builtin("linear").unwrap();
        let report = probe_p2(&f, &ProbeRanges::default(), 10_000, 42);
        assert!(report.min_value >= 0.0);
        assert_eq!(report.trials, 10_000);
    }

    #[test]
    fn p2_probe_is_identically_zero_for_zero() {
        let f = builtin("zero").unwrap();
        let report = probe_p2(&f, &ProbeRanges::default(), 1000, 42);
        assert_eq!(report.min_value, 0.0);
    }

    #[test]
    fn p2_fails_pointwise_for_the_product_family() {
        // hand witness with g = 1: arguments (t1,v1,x1) = (0,0,1),
        // (t2,v2,x2) = (0,1,0.5) give 0.5 * (0 - e^0.5 arctan 1) < 0
        let f = builtin_with("exp-arctan", &params_g_one()).unwrap();
        let hand = (1.0 - 0.5) * (f.eval(0.0, 0.0, 1.0) - f.eval(0.0, 1.0, 0.5));
        let closed_form = 0.5 * (0.0 - 0.5_f64.exp() * 1.0_f64.atan());
        assert!((hand - closed_form).abs() < 1e-14);
        assert!(hand < 0.0);

        // the sampler finds a violation on its own
        let report = probe_p2(&f, &ProbeRanges::default(), 10_000, 42);
        assert!(report.min_value < 0.0);
        let w = report.witness;
        let recheck = (w.x1 - w.x2) * (f.eval(w.t1, w.v1, w.x1) - f.eval(w.t2, w.v2, w.x2));
        assert_eq!(recheck, report.min_value);
    }

    #[test]
    fn p1_probe_nonnegative_for_dominated_families() {
        let ranges = ProbeRanges::default();
        for id in ["zero", "linear", "exp-arctan", "arctan-arctan", "cubic-exp-arctan"] {
            let f = builtin(id).unwrap();
            let report = probe_p1(&f, 1.0, &ranges, 10_000, 7).unwrap();
            assert!(
                report.min_value >= -1e-12,
                "{id}: min {}",
                report.min_value
            );
        }
        // zero's dominator is identically zero, so the gap is exactly zero
        let f = builtin("zero").unwrap();
        let report = probe_p1(&f, 1.0, &ranges, 100, 7).unwrap();
        assert_eq!(report.min_value, 0.0);
    }

    #[test]
    fn p1_requires_a_dominator() {
        let f = builtin("arctan-drift").unwrap();
        assert!(matches!(
            probe_p1(&f, 1.0, &ProbeRanges::default(), 10, 0),
            Err(ProblemError::MissingDominator(_))
        ));
    }

    #[test]
    fn operator_probe_is_identity_for_zero_f() {
        let f = builtin("zero").unwrap();
        let grid = Grid::new(16).unwrap();
        let report = probe_operator_monotonicity(&f, grid, 200, 5);
        assert!((report.min_value - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn operator_probe_at_least_one_for_linear() {
        let f = builtin("linear").unwrap();
        let grid = Grid::new(32).unwrap();
        let report = probe_operator_monotonicity(&f, grid, 1000, 5);
        assert!(report.min_value >= 1.0 - 1e-12, "min {}", report.min_value);
    }

    #[test]
    fn probes_reproduce_bit_for_bit() {
        let f = builtin("exp-arctan").unwrap();
        let a = probe_p2(&f, &ProbeRanges::default(), 2000, 99);
        let b = probe_p2(&f, &ProbeRanges::default(), 2000, 99);
        assert_eq!(a.min_value.to_bits(), b.min_value.to_bits());
        assert_eq!(a.witness.x1.to_bits(), b.witness.x1.to_bits());
        let g = Grid::new(8).unwrap();
        let c = probe_operator_monotonicity(&f, g, 100, 99);
        let d = probe_operator_monotonicity(&f, g, 100, 99);
        assert_eq!(c.min_value.to_bits(), d.min_value.to_bits());
        assert_eq!(c.witness.first_interior, d.witness.first_interior);
    }
}
