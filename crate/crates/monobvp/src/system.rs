//! The discrete nonlinear system: residual, weak pairing, Jacobian.
//!
//! A [`DiscreteProblem`] bundles a nonlinearity f, a forcing h, and a grid.
//! Its residual at the interior node k is
//!
//! ```text
//!     res(k) = -D2x(k-1) + (1/n^2) [ f(k/n, n Dx(k-1), x(k)) - h(k/n) ],
//! ```
//!
//! and the weak pairing of an iterate x against a test function y is
//!
//! ```text
//!     wp(x, y) = sum Dx Dy + (1/n^2) sum y(k) [ f(k/n, n Dx(k-1), x(k)) - h(k/n) ],
//! ```
//!
//! which by summation by parts equals sum_{k=1..n-1} y(k) res(k). The
//! residual entries are therefore exactly the node loads of the residual
//! functional, which is what the solver's certificate takes a Riesz
//! representative of.

use thiserror::Error;

use crate::mesh::{tridiagonal_solve, Grid, MeshError, MeshFunction};
use crate::problems::{Nonlinearity, RhsFunction};

#[derive(Debug, Error)]
pub enum SystemError {
    #[error("forcing {id:?} must vanish at the endpoints, got ({left:e}, {right:e})")]
    InadmissibleForcing { id: String, left: f64, right: f64 },
    #[error("operands live on different grids ({0} vs {1} subintervals)")]
    GridMismatch(usize, usize),
    #[error("nonlinearity {0:?} does not provide both partial derivatives")]
    MissingPartials(String),
}

/// One boundary-value problem instance on one grid.
#[derive(Clone)]
pub struct DiscreteProblem {
    f: Nonlinearity,
    h: RhsFunction,
    grid: Grid,
}

impl DiscreteProblem {
    pub fn new(f: Nonlinearity, h: RhsFunction, grid: Grid) -> Result<Self, SystemError> {
        // RhsFunction constructors enforce this too; re-checking keeps the
        // invariant local to the type that depends on it.
        let (left, right) = (h.eval(0.0), h.eval(1.0));
        if left.abs() > 1e-12 || right.abs() > 1e-12 {
            return Err(SystemError::InadmissibleForcing {
                id: h.id().to_string(),
                left,
                right,
            });
        }
        Ok(DiscreteProblem { f, h, grid })
    }

    pub fn f(&self) -> &Nonlinearity {
        &self.f
    }

    pub fn h(&self) -> &RhsFunction {
        &self.h
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// Residual entries at the interior nodes k = 1..n-1.
    pub fn residual(&self, x: &MeshFunction) -> Vec<f64> {
        assert_eq!(x.grid(), self.grid, "iterate lives on the problem grid");
        let n = self.grid.n();
        let nf = n as f64;
        let inv_n2 = 1.0 / (nf * nf);
        let vals = x.values();
        (1..n)
            .map(|k| {
                let t = self.grid.node(k);
                let v = nf * (vals[k] - vals[k - 1]);
                let d2 = vals[k + 1] - 2.0 * vals[k] + vals[k - 1];
                -d2 + inv_n2 * (self.f.eval(t, v, vals[k]) - self.h.eval(t))
            })
            .collect()
    }

    /// Weak pairing wp(x, y); equals sum_k y(k) * residual(x)(k).
    pub fn weak_pairing(&self, x: &MeshFunction, y: &MeshFunction) -> Result<f64, SystemError> {
        if x.grid() != self.grid || y.grid() != self.grid {
            return Err(SystemError::GridMismatch(x.grid().n(), y.grid().n()));
        }
        let n = self.grid.n();
        let nf = n as f64;
        let inv_n2 = 1.0 / (nf * nf);
        let xv = x.values();
        let yv = y.values();
        let mut acc = 0.0;
        for k in 1..=n {
            acc += (xv[k] - xv[k - 1]) * (yv[k] - yv[k - 1]);
        }
        // y(n) = 0, so the k = n term of the load sum vanishes
        for k in 1..n {
            let t = self.grid.node(k);
            let v = nf * (xv[k] - xv[k - 1]);
            acc += inv_n2 * yv[k] * (self.f.eval(t, v, xv[k]) - self.h.eval(t));
        }
        Ok(acc)
    }

    /// Jacobian of the residual with respect to the interior values,
    /// evaluated at x. Requires both partial derivatives of f. Row k:
    ///
    /// ```text
    ///     d res(k)/d x(k-1) = -1 - (1/n) f_v
    ///     d res(k)/d x(k)   =  2 + (1/n) f_v + (1/n^2) f_x
    ///     d res(k)/d x(k+1) = -1
    /// ```
    ///
    /// with the partials at (k/n, n Dx(k-1), x(k)). Asymmetric whenever f_v
    /// is not identically zero.
    pub fn jacobian(&self, x: &MeshFunction) -> Result<Tridiagonal, SystemError> {
        assert_eq!(x.grid(), self.grid, "iterate lives on the problem grid");
        if !self.f.has_partials() {
            return Err(SystemError::MissingPartials(self.f.id().to_string()));
        }
        let n = self.grid.n();
        let nf = n as f64;
        let inv_n = 1.0 / nf;
        let inv_n2 = inv_n * inv_n;
        let vals = x.values();
        let m = n - 1;
        let mut sub = vec![0.0; m - 1];
        let mut diag = vec![0.0; m];
        let mut sup = vec![0.0; m - 1];
        for k in 1..n {
            let t = self.grid.node(k);
            let v = nf * (vals[k] - vals[k - 1]);
            let fv = self.f.partial_v(t, v, vals[k]).expect("checked above");
            let fx = self.f.partial_x(t, v, vals[k]).expect("checked above");
            diag[k - 1] = 2.0 + inv_n * fv + inv_n2 * fx;
            if k >= 2 {
                sub[k - 2] = -1.0 - inv_n * fv;
            }
            if k <= m - 1 {
                sup[k - 1] = -1.0;
            }
        }
        Ok(Tridiagonal { sub, diag, sup })
    }
}

/// Tridiagonal matrix in banded storage; `sub` and `sup` are one shorter
/// than `diag`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    pub sup: Vec<f64>,
}

impl Tridiagonal {
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, MeshError> {
        tridiagonal_solve(&self.sub, &self.diag, &self.sup, rhs)
    }

    /// Matrix-vector product; used by tests to verify solves independently.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let m = self.diag.len();
        assert_eq!(x.len(), m);
        (0..m)
            .map(|i| {
                let mut acc = self.diag[i] * x[i];
                if i > 0 {
                    acc += self.sub[i - 1] * x[i - 1];
                }
                if i + 1 < m {
                    acc += self.sup[i] * x[i + 1];
                }
                acc
            })
            .collect()
    }
}
