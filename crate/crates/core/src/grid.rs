//! Uniform space-time meshes, grid functions and the discrete norms built on
//! them.
//!
//! Nodes are `x_i = i h`, `0 <= i <= N`, and `t_m = m tau`, `0 <= m <= M`, with
//! `h = X / N` and `tau = T / M`. Grid functions carry all `N + 1` nodal values;
//! members of the Dirichlet space `H_h` vanish at `i = 0` and `i = N`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::{self, SpatialOp};

/// Relative tolerance for invariant checks on computed quantities.
pub const REL_TOL: f64 = 1e-12;

/// Geometry and time discretization of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshSpec {
    x_len: f64,
    t_final: f64,
    n: usize,
    m: usize,
    speed: f64,
    eps0: f64,
}

impl MeshSpec {
    /// Builds a mesh on `[0, X] x [0, T]` with `N` space cells and `M` time
    /// cells for wave speed `a` and stability margin `eps0`.
    ///
    /// Stability is not required here; use [`MeshSpec::is_stable`] or
    /// [`MeshSpec::require_stable`] to gate solvers.
    pub fn build(x_len: f64, t_final: f64, n: usize, m: usize, speed: f64, eps0: f64) -> Result<Self> {
        if !(x_len.is_finite() && x_len > 0.0) {
            return Err(Error::config(format!("domain length X must be positive, got {x_len}")));
        }
        if !(t_final.is_finite() && t_final > 0.0) {
            return Err(Error::config(format!("final time T must be positive, got {t_final}")));
        }
        if n < 2 {
            return Err(Error::config(format!("N must be at least 2, got {n}")));
        }
        if m < 1 {
            return Err(Error::config(format!("M must be at least 1, got {m}")));
        }
        if !(speed.is_finite() && speed > 0.0) {
            return Err(Error::config(format!("wave speed a must be positive, got {speed}")));
        }
        if !(eps0 > 0.0 && eps0 <= 1.0) {
            return Err(Error::config(format!("eps0 must lie in (0, 1], got {eps0}")));
        }
        Ok(Self { x_len, t_final, n, m, speed, eps0 })
    }

    /// Same geometry and parameters with different cell counts.
    pub fn with_cells(&self, n: usize, m: usize) -> Result<Self> {
        Self::build(self.x_len, self.t_final, n, m, self.speed, self.eps0)
    }

    pub fn x_len(&self) -> f64 {
        self.x_len
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }

    pub fn eps0(&self) -> f64 {
        self.eps0
    }

    pub fn h(&self) -> f64 {
        self.x_len / self.n as f64
    }

    pub fn tau(&self) -> f64 {
        self.t_final / self.m as f64
    }

    /// `x_i = i h`.
    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.h()
    }

    /// `t_m = m tau`.
    pub fn t(&self, m: usize) -> f64 {
        m as f64 * self.tau()
    }

    /// Weight `sigma_N = (1 + h^2 / (a^2 tau^2)) / 12`.
    pub fn sigma_n(&self) -> f64 {
        let r = self.speed * self.tau() / self.h();
        (1.0 + 1.0 / (r * r)) / 12.0
    }

    /// Courant number `a tau / h`.
    pub fn courant(&self) -> f64 {
        self.speed * self.tau() / self.h()
    }

    /// Both sides of the stability inequality `a^2 tau^2 <= (1 - eps0^2/2) h^2`.
    pub fn stability_sides(&self) -> (f64, f64) {
        let at = self.speed * self.tau();
        let h = self.h();
        (at * at, (1.0 - 0.5 * self.eps0 * self.eps0) * h * h)
    }

    pub fn is_stable(&self) -> bool {
        let (lhs, rhs) = self.stability_sides();
        lhs <= rhs * (1.0 + REL_TOL)
    }

    pub fn require_stable(&self) -> Result<()> {
        if self.is_stable() {
            Ok(())
        } else {
            let (lhs, rhs) = self.stability_sides();
            Err(Error::Unstable { lhs, rhs, n: self.n, m: self.m })
        }
    }
}

/// Real values on the nodes `x_0 .. x_N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GridFn(Vec<f64>);

impl GridFn {
    pub fn zeros(n: usize) -> Self {
        GridFn(vec![0.0; n + 1])
    }

    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.len() < 3 {
            return Err(Error::contract(format!(
                "a grid function needs at least 3 nodes, got {}",
                values.len()
            )));
        }
        Ok(GridFn(values))
    }

    /// Samples `f` at every node, boundary nodes included.
    pub fn sample(mesh: &MeshSpec, f: impl Fn(f64) -> f64) -> Self {
        GridFn((0..=mesh.n()).map(|i| f(mesh.x(i))).collect())
    }

    /// Samples `f` at interior nodes and sets the boundary values to zero.
    pub fn sample_interior(mesh: &MeshSpec, f: impl Fn(f64) -> f64) -> Self {
        let n = mesh.n();
        GridFn((0..=n).map(|i| if i == 0 || i == n { 0.0 } else { f(mesh.x(i)) }).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    /// Number of cells `N`.
    pub fn cells(&self) -> usize {
        self.0.len() - 1
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// Boundary values vanish up to the relative invariant tolerance.
    pub fn is_dirichlet(&self) -> bool {
        let tol = REL_TOL * self.max_abs().max(1.0);
        self.0[0].abs() <= tol && self.0[self.0.len() - 1].abs() <= tol
    }

    pub fn require_dirichlet(&self, what: &str) -> Result<()> {
        if self.is_dirichlet() {
            Ok(())
        } else {
            Err(Error::contract(format!(
                "{what} must vanish at x = 0 and x = X (got {:e}, {:e})",
                self.0[0],
                self.0[self.0.len() - 1]
            )))
        }
    }

    pub(crate) fn require_cells(&self, mesh: &MeshSpec, what: &str) -> Result<()> {
        if self.cells() == mesh.n() {
            Ok(())
        } else {
            Err(Error::contract(format!(
                "{what} has {} cells but the mesh has N = {}",
                self.cells(),
                mesh.n()
            )))
        }
    }

    /// `self - other`, elementwise.
    pub fn sub(&self, other: &GridFn) -> GridFn {
        GridFn(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    /// `self + other`, elementwise.
    pub fn add(&self, other: &GridFn) -> GridFn {
        GridFn(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn scale(&self, c: f64) -> GridFn {
        GridFn(self.0.iter().map(|v| c * v).collect())
    }

    /// Mesh inner product `(v, w)_h = sum_{i=1}^{N-1} v_i w_i h`.
    pub fn inner(&self, other: &GridFn, h: f64) -> f64 {
        let n = self.cells();
        (1..n).map(|i| self.0[i] * other.0[i]).sum::<f64>() * h
    }
}

/// The space-time solution `v^0 .. v^M` of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub mesh: MeshSpec,
    pub slices: Vec<GridFn>,
}

impl Trajectory {
    pub fn slice(&self, m: usize) -> &GridFn {
        &self.slices[m]
    }

    /// `v_i^m`.
    pub fn value(&self, i: usize, m: usize) -> f64 {
        self.slices[m].values()[i]
    }
}

/// Discrete norms in space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceNorm {
    /// `(sum_{i=1}^{N-1} w_i^2 h)^{1/2}`.
    L2,
    /// `(sum_{i=1}^{N} (bar-delta_x w_i)^2 h)^{1/2}` with backward differences.
    DxL2,
    /// Trapezoid norm `sum_{i=1}^{N} (|w_{i-1}| + |w_i|) h / 2`.
    L1,
    /// `sum_{i=1}^{N} |bar-delta_x w_i| h`.
    DxL1,
    /// `(B w, w)_h^{1/2}`; requires `w` in `H_h`.
    B,
    /// `(-Lambda_x w, w)_h^{1/2}`; requires `w` in `H_h`.
    NegLambda,
}

pub fn space_norm(w: &GridFn, kind: SpaceNorm, mesh: &MeshSpec) -> Result<f64> {
    w.require_cells(mesh, "grid function")?;
    let h = mesh.h();
    let v = w.values();
    let n = mesh.n();
    let backward = |i: usize| (v[i] - v[i - 1]) / h;
    let value = match kind {
        SpaceNorm::L2 => w.inner(w, h).sqrt(),
        SpaceNorm::DxL2 => ((1..=n).map(|i| backward(i).powi(2)).sum::<f64>() * h).sqrt(),
        SpaceNorm::L1 => (1..=n).map(|i| 0.5 * (v[i - 1].abs() + v[i].abs())).sum::<f64>() * h,
        SpaceNorm::DxL1 => (1..=n).map(|i| backward(i).abs()).sum::<f64>() * h,
        SpaceNorm::B | SpaceNorm::NegLambda => {
            w.require_dirichlet("argument of an operator norm")?;
            let op = if kind == SpaceNorm::B { SpatialOp::Mass } else { SpatialOp::Laplacian };
            let aw = operators::apply_spatial(op, w, mesh)?;
            let sign = if kind == SpaceNorm::B { 1.0 } else { -1.0 };
            let quad = sign * aw.inner(w, h);
            checked_sqrt(quad, w.inner(w, h) * (1.0 + 4.0 / (h * h)))?
        }
    };
    Ok(value)
}

/// Midpoint norm `sum_{i=1}^{N} |w_{i-1/2}| h` of half-node samples
/// `w(x_{i-1/2})`, `1 <= i <= N`.
pub fn l1_midpoint_norm(half_node_samples: &[f64], mesh: &MeshSpec) -> Result<f64> {
    if half_node_samples.len() != mesh.n() {
        return Err(Error::contract(format!(
            "expected {} half-node samples, got {}",
            mesh.n(),
            half_node_samples.len()
        )));
    }
    Ok(half_node_samples.iter().map(|v| v.abs()).sum::<f64>() * mesh.h())
}

/// Aggregates of a time series `y^0 .. y^M` (or `y^0 .. y^{M-1}`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeAggregate {
    /// Trapezoid `sum_{j=1}^{M} (|y_{j-1}| + |y_j|) tau / 2`; needs `M + 1` values.
    L1Tau,
    /// Maximum over the supplied range.
    Max,
    /// `tau sum_{m=1}^{M-1} y_m`; needs `M` or `M + 1` values.
    TauSumInterior,
}

pub fn time_aggregate(series: &[f64], kind: TimeAggregate, mesh: &MeshSpec) -> Result<f64> {
    if series.is_empty() {
        return Err(Error::contract("time aggregate of an empty series"));
    }
    let m = mesh.m();
    let tau = mesh.tau();
    match kind {
        TimeAggregate::L1Tau => {
            if series.len() != m + 1 {
                return Err(Error::contract(format!(
                    "L1_tau needs M + 1 = {} values, got {}",
                    m + 1,
                    series.len()
                )));
            }
            Ok(series.windows(2).map(|w| 0.5 * (w[0].abs() + w[1].abs())).sum::<f64>() * tau)
        }
        TimeAggregate::Max => Ok(series.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
        TimeAggregate::TauSumInterior => {
            if series.len() != m && series.len() != m + 1 {
                return Err(Error::contract(format!(
                    "interior tau-sum needs M or M + 1 values, got {}",
                    series.len()
                )));
            }
            Ok(series[1..m].iter().sum::<f64>() * tau)
        }
    }
}

/// The three squared terms of the level energy norm of a pair `{v_prev, v_curr}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyTerms {
    /// `||bar-delta_t v||_B^2`.
    pub dt_mass: f64,
    /// `(sigma_N - 1/4) tau^2 a^2 ||bar-delta_t v||_{-Lambda}^2`; may be negative.
    pub dt_stiffness: f64,
    /// `a^2 ||bar-s_t v||_{-Lambda}^2`.
    pub mean_stiffness: f64,
}

impl EnergyTerms {
    pub fn total(&self) -> f64 {
        self.dt_mass + self.dt_stiffness + self.mean_stiffness
    }
}

/// Squared terms of `||{v_prev, v_curr}||_{E_h}`.
pub fn energy_terms(v_prev: &GridFn, v_curr: &GridFn, mesh: &MeshSpec) -> Result<EnergyTerms> {
    mesh.require_stable()?;
    v_prev.require_cells(mesh, "previous slice")?;
    v_curr.require_cells(mesh, "current slice")?;
    v_prev.require_dirichlet("previous slice")?;
    v_curr.require_dirichlet("current slice")?;

    let h = mesh.h();
    let tau = mesh.tau();
    let a2 = mesh.speed() * mesh.speed();
    let p = v_prev.values();
    let c = v_curr.values();
    let n = mesh.n();

    // Backward time difference d = (c - p)/tau and mean s = (c + p)/2.
    let d = |i: usize| (c[i] - p[i]) / tau;
    let s = |i: usize| 0.5 * (c[i] + p[i]);

    let mut mass = 0.0;
    for i in 1..n {
        mass += d(i) * (d(i - 1) + 4.0 * d(i) + d(i + 1)) / 6.0;
    }
    mass *= h;
    let mut dt_dx = 0.0;
    let mut s_dx = 0.0;
    for i in 1..=n {
        let dd = (d(i) - d(i - 1)) / h;
        let sd = (s(i) - s(i - 1)) / h;
        dt_dx += dd * dd;
        s_dx += sd * sd;
    }
    Ok(EnergyTerms {
        dt_mass: mass,
        dt_stiffness: (mesh.sigma_n() - 0.25) * tau * tau * a2 * dt_dx * h,
        mean_stiffness: a2 * s_dx * h,
    })
}

/// Level energy norm `||{v_prev, v_curr}||_{E_h}`; requires a stable mesh.
pub fn energy_norm_pair(v_prev: &GridFn, v_curr: &GridFn, mesh: &MeshSpec) -> Result<f64> {
    let t = energy_terms(v_prev, v_curr, mesh)?;
    let scale = t.dt_mass.abs() + t.dt_stiffness.abs() + t.mean_stiffness.abs();
    checked_sqrt(t.total(), scale)
}

/// Square root of a quantity that is nonnegative in exact arithmetic.
pub(crate) fn checked_sqrt(value: f64, scale: f64) -> Result<f64> {
    if value >= 0.0 {
        Ok(value.sqrt())
    } else if value >= -REL_TOL * scale {
        Ok(0.0)
    } else {
        Err(Error::Invariant(format!(
            "negative radicand {value:e} (scale {scale:e}) in a positive-definite form"
        )))
    }
}
