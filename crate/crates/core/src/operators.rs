//! Three-point spatial operators acting in `H_h` and the tridiagonal solves
//! behind each time level.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridFn, MeshSpec};

/// The spatial operators of the scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpatialOp {
    /// Numerov average `s_N w_i = (w_{i-1} + 10 w_i + w_{i+1}) / 12`.
    Numerov,
    /// Linear finite-element mass average `B w_i = (w_{i-1} + 4 w_i + w_{i+1}) / 6`.
    Mass,
    /// Second difference `Lambda_x w_i = (w_{i-1} - 2 w_i + w_{i+1}) / h^2`.
    Laplacian,
}

impl SpatialOp {
    /// `(lower/upper, diagonal)` stencil weights for step `h`.
    fn weights(self, h: f64) -> (f64, f64) {
        match self {
            SpatialOp::Numerov => (1.0 / 12.0, 10.0 / 12.0),
            SpatialOp::Mass => (1.0 / 6.0, 4.0 / 6.0),
            SpatialOp::Laplacian => (1.0 / (h * h), -2.0 / (h * h)),
        }
    }
}

/// Applies the stencil to the interior rows of `values`; boundary rows of `out`
/// are set to zero. Boundary entries of `values` are used as given.
pub(crate) fn stencil_into(op: SpatialOp, values: &[f64], h: f64, out: &mut [f64]) {
    let n = values.len() - 1;
    let (off, diag) = op.weights(h);
    out[0] = 0.0;
    out[n] = 0.0;
    for i in 1..n {
        out[i] = off * (values[i - 1] + values[i + 1]) + diag * values[i];
    }
}

pub(crate) fn stencil(op: SpatialOp, values: &[f64], h: f64) -> GridFn {
    let mut out = vec![0.0; values.len()];
    stencil_into(op, values, h, &mut out);
    GridFn::from_values(out).expect("stencil output has the input length")
}

/// Applies `s_N`, `B` or `Lambda_x` to `w` in `H_h`.
pub fn apply_spatial(op: SpatialOp, w: &GridFn, mesh: &MeshSpec) -> Result<GridFn> {
    w.require_cells(mesh, "operator argument")?;
    w.require_dirichlet("operator argument")?;
    Ok(stencil(op, w.values(), mesh.h()))
}

/// Symmetric tridiagonal Toeplitz matrix of size `N - 1` acting on the interior
/// nodes, with a precomputed elimination.
///
/// Elimination runs without pivoting; construction rejects matrices that are
/// not strictly diagonally dominant.
#[derive(Debug, Clone)]
pub struct SymTridiagonal {
    diag: f64,
    off: f64,
    // Forward-sweep multipliers c'_j and reciprocal pivots.
    upper: Vec<f64>,
    inv_pivot: Vec<f64>,
}

impl SymTridiagonal {
    pub fn new(diag: f64, off: f64, size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::contract("tridiagonal system of size 0"));
        }
        if !(diag.abs() > 2.0 * off.abs()) {
            return Err(Error::contract(format!(
                "tridiagonal matrix (diag {diag}, off {off}) is not strictly diagonally dominant"
            )));
        }
        let mut upper = vec![0.0; size];
        let mut inv_pivot = vec![0.0; size];
        let mut prev = 0.0;
        for j in 0..size {
            let pivot = diag - off * prev;
            inv_pivot[j] = 1.0 / pivot;
            prev = off / pivot;
            upper[j] = prev;
        }
        Ok(Self { diag, off, upper, inv_pivot })
    }

    pub fn size(&self) -> usize {
        self.upper.len()
    }

    pub fn diag(&self) -> f64 {
        self.diag
    }

    pub fn off(&self) -> f64 {
        self.off
    }

    /// Solves `A x = rhs` for interior vectors of length `N - 1`.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.size();
        debug_assert_eq!(x.len(), n);
        x[0] *= self.inv_pivot[0];
        for j in 1..n {
            x[j] = (x[j] - self.off * x[j - 1]) * self.inv_pivot[j];
        }
        for j in (0..n - 1).rev() {
            x[j] -= self.upper[j] * x[j + 1];
        }
    }

    /// `y = A x` for interior vectors.
    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let n = self.size();
        for j in 0..n {
            let left = if j > 0 { x[j - 1] } else { 0.0 };
            let right = if j + 1 < n { x[j + 1] } else { 0.0 };
            y[j] = self.diag * x[j] + self.off * (left + right);
        }
    }
}

/// The implicit operator `B - sigma_N tau^2 a^2 Lambda_x` of a mesh.
///
/// With `s = sigma_N tau^2 a^2 / h^2` its interior rows are
/// `(1/6 - s, 2/3 + 2 s, 1/6 - s)`; row dominance is at least `1/3`.
#[derive(Debug, Clone)]
pub struct ImplicitOperator {
    matrix: SymTridiagonal,
    n: usize,
}

impl ImplicitOperator {
    pub fn new(mesh: &MeshSpec) -> Result<Self> {
        mesh.require_stable()?;
        let s = Self::coupling(mesh);
        let matrix = SymTridiagonal::new(2.0 / 3.0 + 2.0 * s, 1.0 / 6.0 - s, mesh.n() - 1)?;
        Ok(Self { matrix, n: mesh.n() })
    }

    /// `s = sigma_N tau^2 a^2 / h^2 = (1 + (a tau / h)^2) / 12`.
    pub fn coupling(mesh: &MeshSpec) -> f64 {
        let r = mesh.courant();
        (1.0 + r * r) / 12.0
    }

    pub fn matrix(&self) -> &SymTridiagonal {
        &self.matrix
    }

    /// Solves for `w` in `H_h` given an `H_h` right-hand side.
    pub fn solve(&self, rhs: &GridFn) -> Result<GridFn> {
        if rhs.cells() != self.n {
            return Err(Error::contract(format!(
                "right-hand side has {} cells, operator has {}",
                rhs.cells(),
                self.n
            )));
        }
        rhs.require_dirichlet("implicit right-hand side")?;
        let mut out = rhs.clone();
        self.solve_interior(out.values_mut());
        Ok(out)
    }

    /// In-place solve on a full nodal vector; boundary entries are zeroed.
    pub(crate) fn solve_interior(&self, values: &mut [f64]) {
        let n = self.n;
        values[0] = 0.0;
        values[n] = 0.0;
        self.matrix.solve_in_place(&mut values[1..n]);
    }

    /// Forward application on a full nodal vector.
    pub fn apply(&self, w: &GridFn) -> GridFn {
        let n = self.n;
        let mut out = vec![0.0; n + 1];
        self.matrix.apply_into(&w.values()[1..n], &mut out[1..n]);
        GridFn::from_values(out).expect("length preserved")
    }
}

/// Solves `(B - sigma_N tau^2 a^2 Lambda_x) w = rhs` on the interior nodes.
pub fn solve_implicit(rhs: &GridFn, mesh: &MeshSpec) -> Result<GridFn> {
    rhs.require_cells(mesh, "right-hand side")?;
    ImplicitOperator::new(mesh)?.solve(rhs)
}

/// Inverse of the mass average `B`, used for `||B^{-1/2} w||_h`.
#[derive(Debug, Clone)]
pub struct MassInverse {
    matrix: SymTridiagonal,
    n: usize,
}

impl MassInverse {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::contract("mass matrix needs N >= 2"));
        }
        Ok(Self { matrix: SymTridiagonal::new(4.0 / 6.0, 1.0 / 6.0, n - 1)?, n })
    }

    /// `||B^{-1/2} w||_h = (B^{-1} w, w)_h^{1/2}` for `w` in `H_h`.
    pub fn inverse_norm(&self, w: &GridFn, h: f64) -> Result<f64> {
        if w.cells() != self.n {
            return Err(Error::contract("mass inverse size mismatch"));
        }
        w.require_dirichlet("argument of the B^{-1/2} norm")?;
        let mut z = w.values()[1..self.n].to_vec();
        self.matrix.solve_in_place(&mut z);
        let q: f64 = z.iter().zip(&w.values()[1..self.n]).map(|(a, b)| a * b).sum::<f64>() * h;
        crate::grid::checked_sqrt(q, w.inner(w, h) * 3.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SpaceNorm;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_dirichlet(n: usize, rng: &mut ChaCha8Rng) -> GridFn {
        let mut v: Vec<f64> = (0..=n).map(|_| rng.random_range(-1.0..1.0)).collect();
        v[0] = 0.0;
        v[n] = 0.0;
        GridFn::from_values(v).unwrap()
    }

    /// Dense Gaussian elimination with partial pivoting, test-only oracle.
    fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for col in 0..n {
            let p = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
            a.swap(col, p);
            b.swap(col, p);
            for row in col + 1..n {
                let f = a[row][col] / a[col][col];
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
        let mut x = vec![0.0; n];
        for row in (0..n).rev() {
            let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
            x[row] = (b[row] - s) / a[row][row];
        }
        x
    }

    #[test]
    fn laplacian_eigen_relation() {
        let mesh = MeshSpec::build(PI, PI, 8, 32, 1.0, 1.0).unwrap();
        let h = mesh.h();
        for k in 1..8 {
            let kf = k as f64;
            let w = GridFn::sample_interior(&mesh, |x| (kf * x).sin());
            let lw = apply_spatial(SpatialOp::Laplacian, &w, &mesh).unwrap();
            let lam = (2.0 / h * (kf * h / 2.0).sin()).powi(2);
            for i in 1..8 {
                assert!((lw.values()[i] + lam * w.values()[i]).abs() <= 1e-12 * lam);
            }
        }
    }

    #[test]
    fn numerov_identity_and_mass_stencil() {
        let mesh = MeshSpec::build(1.0, 1.0, 12, 24, 1.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let w = random_dirichlet(12, &mut rng);
        let s = apply_spatial(SpatialOp::Numerov, &w, &mesh).unwrap();
        let l = apply_spatial(SpatialOp::Laplacian, &w, &mesh).unwrap();
        let h2 = mesh.h() * mesh.h();
        for i in 0..=12 {
            assert!((s.values()[i] - w.values()[i] - h2 / 12.0 * l.values()[i]).abs() < 1e-14);
        }

        let mut ones = vec![1.0; 13];
        ones[0] = 0.0;
        ones[12] = 0.0;
        let bw = apply_spatial(SpatialOp::Mass, &GridFn::from_values(ones).unwrap(), &mesh).unwrap();
        assert_relative_eq!(bw.values()[1], 5.0 / 6.0, max_relative = 1e-15);
        assert_relative_eq!(bw.values()[11], 5.0 / 6.0, max_relative = 1e-15);
        for i in 2..11 {
            assert_relative_eq!(bw.values()[i], 1.0, max_relative = 1e-15);
        }
        assert_eq!(bw.values()[0], 0.0);
    }

    #[test]
    fn apply_rejects_non_dirichlet() {
        let mesh = MeshSpec::build(1.0, 1.0, 4, 8, 1.0, 1.0).unwrap();
        let w = GridFn::sample(&mesh, |x| x + 1.0);
        assert!(matches!(apply_spatial(SpatialOp::Mass, &w, &mesh), Err(Error::Contract(_))));
    }

    #[test]
    fn implicit_solve_examples() {
        let mesh = MeshSpec::build(PI, PI, 8, 32, 1.0, 1.0).unwrap();
        let zero = solve_implicit(&GridFn::zeros(8), &mesh).unwrap();
        assert_eq!(zero.max_abs(), 0.0);

        let (h, tau) = (mesh.h(), mesh.tau());
        let lam = (2.0 / h * (3.0 * h / 2.0).sin()).powi(2);
        let rhs = GridFn::sample_interior(&mesh, |x| (3.0 * x).sin());
        let w = solve_implicit(&rhs, &mesh).unwrap();
        let factor = 1.0 / (1.0 + (tau * tau - h * h) * lam / 12.0);
        for i in 1..8 {
            assert!((w.values()[i] - factor * rhs.values()[i]).abs() < 1e-13);
        }

        // Cross-check against a dense solve.
        let op = ImplicitOperator::new(&mesh).unwrap();
        let (d, o) = (op.matrix().diag(), op.matrix().off());
        let a: Vec<Vec<f64>> = (0..7usize)
            .map(|r| {
                (0..7)
                    .map(|c| if r == c { d } else if r.abs_diff(c) == 1 { o } else { 0.0 })
                    .collect()
            })
            .collect();
        let dense = dense_solve(a, rhs.values()[1..8].to_vec());
        for i in 0..7 {
            assert!((dense[i] - w.values()[i + 1]).abs() < 1e-13);
        }
    }

    #[test]
    fn implicit_matrix_coefficients() {
        let mesh = MeshSpec::build(1.0, 1.0, 10, 20, 2.0, 0.5).unwrap();
        let mesh = if mesh.is_stable() { mesh } else { mesh.with_cells(10, 40).unwrap() };
        let op = ImplicitOperator::new(&mesh).unwrap();
        let s = mesh.sigma_n() * mesh.tau().powi(2) * mesh.speed().powi(2) / mesh.h().powi(2);
        assert_relative_eq!(op.matrix().diag(), 2.0 / 3.0 + 2.0 * s, max_relative = 1e-14);
        assert_relative_eq!(op.matrix().off(), 1.0 / 6.0 - s, max_relative = 1e-13);
        assert!(op.matrix().diag().abs() - 2.0 * op.matrix().off().abs() >= 1.0 / 3.0 - 1e-14);
    }

    #[test]
    fn implicit_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &n in &[8usize, 64, 256] {
            let mesh = MeshSpec::build(1.0, 1.0, n, 2 * n, 1.0, 1.0).unwrap();
            let op = ImplicitOperator::new(&mesh).unwrap();
            let w = random_dirichlet(n, &mut rng);
            let back = op.solve(&op.apply(&w)).unwrap();
            let fwd = op.apply(&op.solve(&w).unwrap());
            for i in 0..=n {
                assert!((back.values()[i] - w.values()[i]).abs() < 1e-12);
                assert!((fwd.values()[i] - w.values()[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn unstable_mesh_is_refused() {
        let mesh = MeshSpec::build(1.0, 1.0, 10, 10, 1.0, 1.0).unwrap();
        assert!(matches!(solve_implicit(&GridFn::zeros(10), &mesh), Err(Error::Unstable { .. })));
    }

    #[test]
    fn mass_inverse_norm_of_eigenvector() {
        let mesh = MeshSpec::build(PI, 1.0, 16, 32, 1.0, 1.0).unwrap();
        let h = mesh.h();
        let w = GridFn::sample_interior(&mesh, |x| (2.0 * x).sin());
        let lam = (2.0 / h * (h).sin()).powi(2);
        let b_eig = 1.0 - h * h * lam / 6.0;
        let l2 = crate::grid::space_norm(&w, SpaceNorm::L2, &mesh).unwrap();
        let inv = MassInverse::new(16).unwrap().inverse_norm(&w, h).unwrap();
        assert_relative_eq!(inv, l2 / b_eig.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn non_dominant_matrix_rejected() {
        assert!(SymTridiagonal::new(1.0, 0.5, 4).is_err());
        assert!(SymTridiagonal::new(1.0, 0.1, 0).is_err());
    }
}
