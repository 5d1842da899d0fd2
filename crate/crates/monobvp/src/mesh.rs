//! Uniform grids, mesh functions, and the discrete calculus they carry.
//!
//! A mesh function lives on the nodes 0..n of a uniform grid over [0, 1] and
//! vanishes at both endpoints, so it has n-1 free values. The energy inner
//! product is built from forward differences,
//!
//! ```text
//!     <u, y> = sum_{k=1..n} Du(k-1) Dy(k-1),    Du(k) = u(k+1) - u(k),
//! ```
//!
//! which by summation by parts equals -sum_{k=1..n-1} y(k) D2u(k-1). Node
//! loads (coefficients of a linear functional against interior node values)
//! are converted to elements of the space by [`riesz_representative`]: the
//! unique rho with <rho, y> = sum y(k) w(k) for all y, obtained from one
//! tridiagonal solve with the stencil (-1, 2, -1).

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("grid needs at least 2 subintervals, got {0}")]
    InvalidGrid(usize),
    #[error("expected {expected} values, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("mesh function must vanish at both endpoints, got ({left}, {right})")]
    NonzeroBoundary { left: f64, right: f64 },
    #[error("operands live on different grids ({0} vs {1} subintervals)")]
    GridMismatch(usize, usize),
    #[error("tridiagonal pivot {value:e} at row {row} below 1e-14; system treated as singular")]
    SingularSystem { row: usize, value: f64 },
}

/// Uniform partition of [0, 1] into `n >= 2` subintervals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    n: usize,
}

impl Grid {
    pub fn new(n: usize) -> Result<Self, MeshError> {
        if n < 2 {
            return Err(MeshError::InvalidGrid(n));
        }
        Ok(Grid { n })
    }

    /// Number of subintervals.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Mesh width 1/n.
    pub fn h_step(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Coordinate of node k; exact 0.0 and 1.0 at the endpoints.
    pub fn node(&self, k: usize) -> f64 {
        debug_assert!(k <= self.n);
        k as f64 / self.n as f64
    }
}

/// Real values on the nodes 0..n with value 0 at both endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl MeshFunction {
    /// The zero element.
    pub fn zero(grid: Grid) -> Self {
        MeshFunction {
            grid,
            values: vec![0.0; grid.n() + 1],
        }
    }

    /// Wraps a full value vector (length n+1). The endpoint values must be
    /// exactly zero: membership in the space is not approximate.
    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self, MeshError> {
        if values.len() != grid.n() + 1 {
            return Err(MeshError::LengthMismatch {
                expected: grid.n() + 1,
                actual: values.len(),
            });
        }
        let (left, right) = (values[0], values[grid.n()]);
        if left != 0.0 || right != 0.0 {
            return Err(MeshError::NonzeroBoundary { left, right });
        }
        Ok(MeshFunction { grid, values })
    }

    /// Builds from the n-1 interior values, padding the boundary zeros.
    pub fn from_interior(grid: Grid, interior: &[f64]) -> Result<Self, MeshError> {
        if interior.len() != grid.n() - 1 {
            return Err(MeshError::LengthMismatch {
                expected: grid.n() - 1,
                actual: interior.len(),
            });
        }
        let mut values = Vec::with_capacity(grid.n() + 1);
        values.push(0.0);
        values.extend_from_slice(interior);
        values.push(0.0);
        Ok(MeshFunction { grid, values })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// All n+1 node values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at node k.
    pub fn value(&self, k: usize) -> f64 {
        self.values[k]
    }

    /// The n-1 interior values.
    pub fn interior(&self) -> &[f64] {
        &self.values[1..self.grid.n()]
    }

    /// Forward differences Du(k-1) = u(k) - u(k-1), k = 1..n.
    pub fn forward_difference(&self) -> Vec<f64> {
        self.values.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Second differences D2u(k-1) = u(k+1) - 2u(k) + u(k-1), k = 1..n-1.
    pub fn second_difference(&self) -> Vec<f64> {
        self.values
            .windows(3)
            .map(|w| w[2] - 2.0 * w[1] + w[0])
            .collect()
    }

    /// Energy inner product: sum of products of forward differences.
    pub fn inner_e(&self, other: &MeshFunction) -> Result<f64, MeshError> {
        if self.grid != other.grid {
            return Err(MeshError::GridMismatch(self.grid.n(), other.grid.n()));
        }
        let mut acc = 0.0;
        for k in 1..self.values.len() {
            acc += (self.values[k] - self.values[k - 1]) * (other.values[k] - other.values[k - 1]);
        }
        Ok(acc)
    }

    /// Energy norm sqrt(<u, u>).
    pub fn norm_e(&self) -> f64 {
        let mut acc = 0.0;
        for w in self.values.windows(2) {
            let d = w[1] - w[0];
            acc += d * d;
        }
        acc.sqrt()
    }

    /// Euclidean norm of the node values (k = 1..n; node 0 is zero anyway).
    pub fn norm_0(&self) -> f64 {
        self.values[1..]
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// self + alpha * other, entrywise. Panics on grid mismatch: callers
    /// combine functions they built on one grid.
    pub fn add_scaled(&self, alpha: f64, other: &MeshFunction) -> MeshFunction {
        assert_eq!(self.grid, other.grid, "grid mismatch in add_scaled");
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + alpha * b)
            .collect();
        MeshFunction {
            grid: self.grid,
            values,
        }
    }

    /// self - other, entrywise.
    pub fn sub(&self, other: &MeshFunction) -> MeshFunction {
        self.add_scaled(-1.0, other)
    }
}

/// Coefficients of a linear functional y -> sum_{k=1..n-1} y(k) * loads[k-1].
#[derive(Debug, Clone, PartialEq)]
pub struct NodeLoad {
    grid: Grid,
    loads: Vec<f64>,
}

impl NodeLoad {
    pub fn new(grid: Grid, loads: Vec<f64>) -> Result<Self, MeshError> {
        if loads.len() != grid.n() - 1 {
            return Err(MeshError::LengthMismatch {
                expected: grid.n() - 1,
                actual: loads.len(),
            });
        }
        Ok(NodeLoad { grid, loads })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn loads(&self) -> &[f64] {
        &self.loads
    }

    /// Pairing against a mesh function on the same grid.
    pub fn pair(&self, y: &MeshFunction) -> Result<f64, MeshError> {
        if self.grid != y.grid() {
            return Err(MeshError::GridMismatch(self.grid.n(), y.grid().n()));
        }
        Ok(self
            .loads
            .iter()
            .zip(y.interior())
            .map(|(w, yk)| w * yk)
            .sum())
    }
}

/// Thomas algorithm for a tridiagonal system. `sub` and `sup` have one entry
/// fewer than `diag`/`rhs`. Forward elimination pivots that fall below 1e-14
/// in magnitude are reported as singular rather than divided through.
pub fn tridiagonal_solve(
    sub: &[f64],
    diag: &[f64],
    sup: &[f64],
    rhs: &[f64],
) -> Result<Vec<f64>, MeshError> {
    let m = diag.len();
    assert!(m >= 1, "empty tridiagonal system");
    assert_eq!(sub.len(), m - 1, "subdiagonal length");
    assert_eq!(sup.len(), m - 1, "superdiagonal length");
    assert_eq!(rhs.len(), m, "right-hand side length");

    const PIVOT_FLOOR: f64 = 1e-14;

    // Forward sweep: c stores the modified superdiagonal, d the modified rhs.
    let mut c = vec![0.0; m];
    let mut d = vec![0.0; m];
    let mut pivot = diag[0];
    if pivot.abs() < PIVOT_FLOOR {
        return Err(MeshError::SingularSystem {
            row: 0,
            value: pivot,
        });
    }
    c[0] = if m > 1 { sup[0] / pivot } else { 0.0 };
    d[0] = rhs[0] / pivot;
    for i in 1..m {
        pivot = diag[i] - sub[i - 1] * c[i - 1];
        if pivot.abs() < PIVOT_FLOOR {
            return Err(MeshError::SingularSystem {
                row: i,
                value: pivot,
            });
        }
        if i < m - 1 {
            c[i] = sup[i] / pivot;
        }
        d[i] = (rhs[i] - sub[i - 1] * d[i - 1]) / pivot;
    }

    // Back substitution.
    let mut x = d;
    for i in (0..m - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Ok(x)
}

/// Riesz representative of a node load: the unique rho in the space with
/// <rho, y> = sum y(k) loads(k) for every y. Equivalent to solving
/// -D2 rho(k-1) = loads(k) with the (-1, 2, -1) stencil, which is positive
/// definite, so the solve cannot fail.
pub fn riesz_representative(load: &NodeLoad) -> MeshFunction {
    let m = load.loads().len();
    let sub = vec![-1.0; m - 1];
    let diag = vec![2.0; m];
    let sup = vec![-1.0; m - 1];
    let interior = tridiagonal_solve(&sub, &diag, &sup, load.loads())
        .expect("(-1, 2, -1) stencil is positive definite");
    MeshFunction::from_interior(load.grid(), &interior).expect("interior length matches grid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn mf(n: usize, values: &[f64]) -> MeshFunction {
        MeshFunction::from_values(Grid::new(n).unwrap(), values.to_vec()).unwrap()
    }

    fn random_mesh_fn(rng: &mut ChaCha8Rng, grid: Grid) -> MeshFunction {
        let interior: Vec<f64> = (0..grid.n() - 1).map(|_| rng.gen_range(-1.0..1.0)).collect();
        MeshFunction::from_interior(grid, &interior).unwrap()
    }

    #[test]
    fn grid_rejects_degenerate_partitions() {
        assert!(Grid::new(0).is_err());
        assert!(Grid::new(1).is_err());
        assert!(Grid::new(2).is_ok());
    }

    #[test]
    fn grid_nodes_hit_exact_endpoints() {
        let g = Grid::new(7).unwrap();
        assert_eq!(g.node(0), 0.0);
        assert_eq!(g.node(7), 1.0);
        assert_eq!(g.h_step(), 1.0 / 7.0);
    }

    #[test]
    fn boundary_values_must_vanish() {
        let g = Grid::new(2).unwrap();
        assert!(MeshFunction::from_values(g, vec![0.0, 1.0, 0.5]).is_err());
        assert!(MeshFunction::from_values(g, vec![0.1, 1.0, 0.0]).is_err());
        assert!(MeshFunction::from_values(g, vec![0.0, 1.0]).is_err());
    }

    #[test]
    fn forward_difference_matches_hand_values() {
        let u = mf(3, &[0.0, 1.0, 3.0, 0.0]);
        assert_eq!(u.forward_difference(), vec![1.0, 2.0, -3.0]);
        let z = MeshFunction::zero(Grid::new(5).unwrap());
        assert!(z.forward_difference().iter().all(|&d| d == 0.0));
    }

    #[test]
    fn second_difference_matches_hand_values() {
        let u = mf(3, &[0.0, 1.0, 3.0, 0.0]);
        assert_eq!(u.second_difference(), vec![1.0, -5.0]);
    }

    #[test]
    fn inner_product_and_norms_match_hand_values() {
        let u = mf(3, &[0.0, 1.0, 3.0, 0.0]);
        // differences (1, 2, -3): <u,u> = 1 + 4 + 9 = 14
        assert_eq!(u.inner_e(&u).unwrap(), 14.0);
        assert!((u.norm_e() - 14.0_f64.sqrt()).abs() < 1e-15);
        assert!((u.norm_0() - 10.0_f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn inner_product_rejects_grid_mismatch() {
        let u = mf(3, &[0.0, 1.0, 3.0, 0.0]);
        let v = MeshFunction::zero(Grid::new(4).unwrap());
        assert!(matches!(u.inner_e(&v), Err(MeshError::GridMismatch(3, 4))));
    }

    #[test]
    fn tridiagonal_solves_hand_system() {
        // 3x3 with diag 2, off-diagonals -1, rhs (0, 1, 0) -> (1/2, 1, 1/2)
        let x = tridiagonal_solve(&[-1.0, -1.0], &[2.0, 2.0, 2.0], &[-1.0, -1.0], &[0.0, 1.0, 0.0])
            .unwrap();
        for (xi, want) in x.iter().zip([0.5, 1.0, 0.5]) {
            assert!((xi - want).abs() < 1e-14);
        }
    }

    #[test]
    fn tridiagonal_identity_and_singular() {
        let x = tridiagonal_solve(&[0.0], &[1.0, 1.0], &[0.0], &[3.0, -4.0]).unwrap();
        assert_eq!(x, vec![3.0, -4.0]);
        // second pivot becomes 1 - 1 = 0
        let r = tridiagonal_solve(&[1.0], &[1.0, 1.0], &[1.0], &[1.0, 1.0]);
        assert!(matches!(r, Err(MeshError::SingularSystem { row: 1, .. })));
    }

    #[test]
    fn tridiagonal_solution_verifies_by_multiplication() {
        // independent check: multiply the solution back through the matrix
        let sub = [-1.0, 0.5, -2.0];
        let diag = [3.0, 2.5, 4.0, 5.0];
        let sup = [1.0, -0.5, 1.5];
        let rhs = [1.0, -2.0, 0.25, 3.0];
        let x = tridiagonal_solve(&sub, &diag, &sup, &rhs).unwrap();
        for i in 0..4 {
            let mut ax = diag[i] * x[i];
            if i > 0 {
                ax += sub[i - 1] * x[i - 1];
            }
            if i < 3 {
                ax += sup[i] * x[i + 1];
            }
            assert!((ax - rhs[i]).abs() < 1e-12, "row {i}: {ax} vs {}", rhs[i]);
        }
    }

    #[test]
    fn riesz_single_interior_node() {
        let g = Grid::new(2).unwrap();
        let rho = riesz_representative(&NodeLoad::new(g, vec![1.0]).unwrap());
        assert!((rho.value(1) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn riesz_hat_load_gives_hat_function() {
        let g = Grid::new(4).unwrap();
        let rho = riesz_representative(&NodeLoad::new(g, vec![0.0, 1.0, 0.0]).unwrap());
        let want = [0.0, 0.5, 1.0, 0.5, 0.0];
        for (k, w) in want.iter().enumerate() {
            assert!((rho.value(k) - w).abs() < 1e-14);
        }
        // oracle: -D2 rho must reproduce the load exactly
        let d2 = rho.second_difference();
        for (k, l) in [0.0, 1.0, 0.0].iter().enumerate() {
            assert!((-d2[k] - l).abs() < 1e-14);
        }
    }

    #[test]
    fn riesz_pairing_identity_against_full_basis() {
        let g = Grid::new(9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let loads: Vec<f64> = (0..8).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let load = NodeLoad::new(g, loads.clone()).unwrap();
        let rho = riesz_representative(&load);
        for k in 1..9 {
            let mut basis = vec![0.0; 10];
            basis[k] = 1.0;
            let e_k = MeshFunction::from_values(g, basis).unwrap();
            let lhs = rho.inner_e(&e_k).unwrap();
            assert!(
                (lhs - loads[k - 1]).abs() < 1e-12,
                "node {k}: <rho, e_k> = {lhs}, load = {}",
                loads[k - 1]
            );
        }
    }

    #[test]
    fn riesz_is_linear_in_the_load() {
        let g = Grid::new(6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let combo: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 2.0 * x - 3.0 * y).collect();
        let ra = riesz_representative(&NodeLoad::new(g, a).unwrap());
        let rb = riesz_representative(&NodeLoad::new(g, b).unwrap());
        let rc = riesz_representative(&NodeLoad::new(g, combo).unwrap());
        let direct = MeshFunction::zero(g).add_scaled(2.0, &ra).add_scaled(-3.0, &rb);
        for k in 0..7 {
            assert!((rc.value(k) - direct.value(k)).abs() < 1e-12);
        }
    }

    #[test]
    fn norm_comparison_on_seeded_random_functions() {
        // ||u||_E <= 2 ||u||_0 across sizes
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &n in &[2usize, 3, 8, 33, 100] {
            let grid = Grid::new(n).unwrap();
            for _ in 0..200 {
                let u = random_mesh_fn(&mut rng, grid);
                assert!(u.norm_e() <= 2.0 * u.norm_0() + 1e-12);
            }
        }
    }

    #[test]
    fn difference_chain_bounds_on_seeded_random_functions() {
        // |Du(k-1)| <= ||u||_E, partial sums <= sqrt(k) ||u||_E,
        // max |u(k)| <= sqrt(n) ||u||_E
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for &n in &[2usize, 5, 17, 64] {
            let grid = Grid::new(n).unwrap();
            for _ in 0..200 {
                let u = random_mesh_fn(&mut rng, grid);
                let e = u.norm_e();
                let diffs = u.forward_difference();
                let mut partial = 0.0;
                for (k, d) in diffs.iter().enumerate() {
                    assert!(d.abs() <= e + 1e-12);
                    partial += d.abs();
                    assert!(partial <= ((k + 1) as f64).sqrt() * e + 1e-12);
                }
                let sup = u.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
                assert!(sup <= (n as f64).sqrt() * e + 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn summation_by_parts(interior_u in prop::collection::vec(-10.0..10.0f64, 1..40),
                              seed in 0u64..1000) {
            let n = interior_u.len() + 1;
            let grid = Grid::new(n).unwrap();
            let u = MeshFunction::from_interior(grid, &interior_u).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let y = random_mesh_fn(&mut rng, grid);

            let lhs = u.inner_e(&y).unwrap();
            let d2 = u.second_difference();
            let rhs: f64 = d2.iter().zip(y.interior()).map(|(d, yk)| -d * yk).sum();
            let scale = 1.0 + lhs.abs().max(rhs.abs());
            prop_assert!((lhs - rhs).abs() <= 1e-12 * scale);
        }

        #[test]
        fn riesz_representative_solves_the_stencil(loads in prop::collection::vec(-5.0..5.0f64, 1..30)) {
            let n = loads.len() + 1;
            let grid = Grid::new(n).unwrap();
            let rho = riesz_representative(&NodeLoad::new(grid, loads.clone()).unwrap());
            let d2 = rho.second_difference();
            for (k, l) in loads.iter().enumerate() {
                prop_assert!((-d2[k] - l).abs() <= 1e-11 * (1.0 + l.abs()));
            }
        }
    }
}
