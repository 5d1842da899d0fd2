//! JSON experiment configuration: defaults, validation, and builders that
//! turn config sections into library objects.
//!
//! Every field is optional in the file; omitted fields take the defaults
//! printed in `monobvp --help`. Unknown fields are rejected so that typos
//! surface as configuration errors instead of silently reverting a setting
//! to its default.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::ValueEnum;
use serde::Deserialize;

use monobvp::mesh::MeshError;
use monobvp::problems::{
    builtin_rhs, builtin_with, FamilyParams, Nonlinearity, ProbeRanges, ProblemError, RhsFunction,
};
use monobvp::reference::{
    fine_grid, manufactured, shooting, ReferenceError, ReferenceSolution, SmoothFunction,
};
use monobvp::solver::{Method, SolverError, SolverOptions};

/// Command failure with the exit code it maps to: configuration and usage
/// problems exit 1, solver non-convergence exits 2, reference-oracle
/// failures exit 3.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    NonConvergence(String),
    Oracle(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::NonConvergence(_) => 2,
            CliError::Oracle(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "configuration error: {msg}"),
            CliError::NonConvergence(msg) => write!(f, "solver did not converge: {msg}"),
            CliError::Oracle(msg) => write!(f, "reference oracle failed: {msg}"),
            CliError::Io(msg) => write!(f, "i/o error: {msg}"),
        }
    }
}

impl From<ProblemError> for CliError {
    fn from(e: ProblemError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<MeshError> for CliError {
    fn from(e: MeshError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::InvalidOptions(_) | SolverError::GridMismatch(_, _) => {
                CliError::Config(e.to_string())
            }
            _ => CliError::NonConvergence(e.to_string()),
        }
    }
}

impl From<ReferenceError> for CliError {
    fn from(e: ReferenceError) -> Self {
        match e {
            ReferenceError::InvalidParameter(_) | ReferenceError::NegativeCoefficient(_) => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Oracle(e.to_string()),
        }
    }
}

/// Report serialization selected with `--format` or `output.format`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Csv,
    Json,
}

/// Exact-solution profile for manufactured forcing: the forcing is chosen
/// so that the profile solves the problem, giving an exact reference.
#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ManufacturedSpec {
    /// x*(t) = 0 (forcing is zero as well)
    Zero,
    /// x*(t) = sin(pi t)
    SinPi,
    /// x*(t) = sin(m pi t)
    SinMultiple { m: u32 },
}

impl ManufacturedSpec {
    pub fn profile(&self) -> Result<SmoothFunction, CliError> {
        match *self {
            ManufacturedSpec::Zero => Ok(SmoothFunction::new(
                Arc::new(|_| 0.0),
                Arc::new(|_| 0.0),
                Arc::new(|_| 0.0),
            )),
            ManufacturedSpec::SinPi => Ok(SmoothFunction::sin_pi()),
            ManufacturedSpec::SinMultiple { m } => {
                if m == 0 {
                    return Err(CliError::Config(
                        "manufactured sin-multiple needs m >= 1".into(),
                    ));
                }
                Ok(SmoothFunction::sin_multiple(m))
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default = "default_f_id")]
    pub f_id: String,
    #[serde(default)]
    pub g_params: FamilyParams,
    /// Forcing from the registry; mutually exclusive with `manufactured`.
    #[serde(default)]
    pub h_id: Option<String>,
    /// Forcing manufactured from an exact-solution profile.
    #[serde(default)]
    pub manufactured: Option<ManufacturedSpec>,
}

fn default_f_id() -> String {
    "linear".into()
}

impl Default for ProblemConfig {
    fn default() -> Self {
        ProblemConfig {
            f_id: default_f_id(),
            g_params: FamilyParams::default(),
            h_id: None,
            manufactured: Some(ManufacturedSpec::SinPi),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "default_n_list")]
    pub n_list: Vec<usize>,
}

fn default_n_list() -> Vec<usize> {
    vec![16, 32, 64, 128, 256, 512]
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            n_list: default_n_list(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub method: Method,
    pub tol_cert: f64,
    pub max_iterations: usize,
    pub initial_step: f64,
    pub monotonicity_constant: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let o = SolverOptions::default();
        SolverConfig {
            method: o.method,
            tol_cert: o.tol_cert,
            max_iterations: o.max_iterations,
            initial_step: o.initial_step,
            monotonicity_constant: o.monotonicity_constant,
        }
    }
}

impl SolverConfig {
    pub fn to_options(&self) -> SolverOptions {
        SolverOptions {
            method: self.method,
            tol_cert: self.tol_cert,
            max_iterations: self.max_iterations,
            initial_step: self.initial_step,
            monotonicity_constant: self.monotonicity_constant,
            initial_guess: None,
        }
    }
}

/// Which oracle `converge` measures errors against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceKind {
    /// Exact profile behind a manufactured forcing (requires
    /// `problem.manufactured`).
    Manufactured,
    /// Converged solve on a much finer grid.
    FineGrid,
    /// High-order initial-value integration with root-finding on the
    /// terminal boundary condition.
    Shooting,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReferenceConfig {
    pub kind: ReferenceKind,
    pub n_ref: usize,
    pub steps: usize,
    pub root_tol: f64,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        ReferenceConfig {
            kind: ReferenceKind::Manufactured,
            n_ref: 8192,
            steps: 100_000,
            root_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DependenceConfig {
    pub amplitude: f64,
    pub m_list: Vec<u32>,
    pub grid_n: usize,
}

impl Default for DependenceConfig {
    fn default() -> Self {
        DependenceConfig {
            amplitude: 1.0,
            m_list: vec![1, 2, 4, 8, 16, 32, 64],
            grid_n: 2048,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeConfig {
    pub trials: usize,
    pub grid_n: usize,
    #[serde(alias = "r")]
    pub radius: f64,
    pub ranges: ProbeRanges,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            trials: 10_000,
            grid_n: 32,
            radius: 1.0,
            ranges: ProbeRanges::default(),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub format: Option<OutputFormat>,
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub problem: ProblemConfig,
    pub sweep: SweepConfig,
    pub solver: SolverConfig,
    pub reference: ReferenceConfig,
    pub dependence: DependenceConfig,
    pub probe: ProbeConfig,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 42,
            problem: ProblemConfig::default(),
            sweep: SweepConfig::default(),
            solver: SolverConfig::default(),
            reference: ReferenceConfig::default(),
            dependence: DependenceConfig::default(),
            probe: ProbeConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let cfg = match path {
            None => ExperimentConfig::default(),
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| {
                    CliError::Config(format!("cannot read config {}: {e}", p.display()))
                })?;
                serde_json::from_str(&text)
                    .map_err(|e| CliError::Config(format!("config parse error: {e}")))?
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let ns = &self.sweep.n_list;
        if ns.is_empty() {
            return Err(CliError::Config("sweep.n_list must not be empty".into()));
        }
        if !ns.windows(2).all(|w| w[0] < w[1]) {
            return Err(CliError::Config(
                "sweep.n_list must be strictly increasing".into(),
            ));
        }
        if self.problem.h_id.is_some() && self.problem.manufactured.is_some() {
            return Err(CliError::Config(
                "problem specifies both h_id and manufactured; choose one".into(),
            ));
        }
        Ok(())
    }

    /// Largest grid size under study; `solve` runs at this size.
    pub fn finest_n(&self) -> usize {
        *self.sweep.n_list.last().expect("validated non-empty")
    }

    pub fn nonlinearity(&self) -> Result<Nonlinearity, CliError> {
        Ok(builtin_with(&self.problem.f_id, &self.problem.g_params)?)
    }

    /// Resolves the forcing term: registry lookup, or the forcing
    /// manufactured from the configured exact profile.
    pub fn forcing(&self, f: &Nonlinearity) -> Result<RhsFunction, CliError> {
        match (&self.problem.h_id, &self.problem.manufactured) {
            (Some(id), None) => Ok(builtin_rhs(id)?),
            (None, Some(spec)) => Ok(manufactured(f, &spec.profile()?)?.0),
            (None, None) => Err(CliError::Config(
                "problem needs h_id or a manufactured profile".into(),
            )),
            (Some(_), Some(_)) => unreachable!("rejected by validate()"),
        }
    }

    /// Builds the forcing together with the reference oracle the sweep is
    /// measured against.
    pub fn reference_oracle(
        &self,
        f: &Nonlinearity,
    ) -> Result<(RhsFunction, ReferenceSolution), CliError> {
        match self.reference.kind {
            ReferenceKind::Manufactured => {
                let spec = self.problem.manufactured.as_ref().ok_or_else(|| {
                    CliError::Config(
                        "reference kind 'manufactured' requires problem.manufactured".into(),
                    )
                })?;
                Ok(manufactured(f, &spec.profile()?)?)
            }
            ReferenceKind::FineGrid => {
                let h = self.forcing(f)?;
                let max_n = self.finest_n();
                if self.reference.n_ref < 8 * max_n {
                    return Err(CliError::Config(format!(
                        "reference.n_ref = {} is too coarse for the sweep; need at least 8 x {max_n}",
                        self.reference.n_ref
                    )));
                }
                let r = fine_grid(f, &h, self.reference.n_ref, &self.solver.to_options())?;
                Ok((h, r))
            }
            ReferenceKind::Shooting => {
                let h = self.forcing(f)?;
                let r = shooting(f, &h, self.reference.steps, self.reference.root_tol)?;
                Ok((h, r))
            }
        }
    }
}
