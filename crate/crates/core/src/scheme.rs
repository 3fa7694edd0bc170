//! The three-level compact scheme
//!
//! ```text
//! (B - sigma_N tau^2 a^2 Lambda_x) Lambda_t v^m = a^2 Lambda_x v^m + f^m,      1 <= m <= M-1
//! (B - sigma_N tau^2 a^2 Lambda_x) delta_t v^0  = (tau/2) a^2 Lambda_x v^0 + u_1h + (tau/2) f^0
//! ```
//!
//! and error measurement against a reference solution.

use serde::{Deserialize, Serialize};

use crate::data::{self, average_qh, average_qtau, build_u1h, DataSpec, Forcing, U1Variant};
use crate::error::{Error, Result};
use crate::grid::{self, GridFn, MeshSpec, SpaceNorm, TimeAggregate, Trajectory};
use crate::operators::{stencil_into, ImplicitOperator, SpatialOp};

/// Relative bound on defining-equation residuals of produced slices.
pub const RESIDUAL_TOL: f64 = 1e-11;

/// How `v^0` is obtained from `u0`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum V0Mode {
    /// `v^0 = u0` at the nodes.
    #[default]
    NodeSamples,
    /// `v^0 = q_h u0`.
    QhAverage,
}

/// Grid forcing `f_h^m` for `0 <= m <= M - 1`.
#[derive(Debug, Clone, PartialEq)]
pub enum GridForcing {
    Zero,
    /// `f_h^m = time[m] * space`.
    Separable { space: GridFn, time: Vec<f64> },
    Slices(Vec<GridFn>),
}

impl GridForcing {
    /// `(q_h q_tau f)^m` for separable `f`.
    pub fn from_data(f: Option<&Forcing>, mesh: &MeshSpec) -> Result<Self> {
        match f {
            None => Ok(GridForcing::Zero),
            Some(f) => {
                let space = average_qh(&f.space, mesh)?;
                let time = (0..mesh.m()).map(|m| average_qtau(&f.time, mesh, m)).collect::<Result<Vec<_>>>()?;
                Ok(GridForcing::Separable { space, time })
            }
        }
    }

    fn validate(&self, mesh: &MeshSpec) -> Result<()> {
        match self {
            GridForcing::Zero => Ok(()),
            GridForcing::Separable { space, time } => {
                space.require_cells(mesh, "forcing")?;
                space.require_dirichlet("forcing")?;
                if time.len() < mesh.m() {
                    return Err(Error::contract(format!("forcing has {} time levels, need {}", time.len(), mesh.m())));
                }
                Ok(())
            }
            GridForcing::Slices(slices) => {
                if slices.len() < mesh.m() {
                    return Err(Error::contract(format!("forcing has {} slices, need {}", slices.len(), mesh.m())));
                }
                for s in slices {
                    s.require_cells(mesh, "forcing slice")?;
                    s.require_dirichlet("forcing slice")?;
                }
                Ok(())
            }
        }
    }

    /// Writes `f_h^m` into `out`.
    pub fn slice_into(&self, m: usize, out: &mut [f64]) {
        match self {
            GridForcing::Zero => out.fill(0.0),
            GridForcing::Separable { space, time } => {
                for (o, s) in out.iter_mut().zip(space.values()) {
                    *o = time[m] * s;
                }
            }
            GridForcing::Slices(slices) => out.copy_from_slice(slices[m].values()),
        }
    }

    pub fn slice(&self, m: usize, n: usize) -> GridFn {
        let mut out = vec![0.0; n + 1];
        self.slice_into(m, &mut out);
        GridFn::from_values(out).expect("n >= 2")
    }
}

/// Per-step relative residuals of the defining equations.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Entry `m` belongs to the equation producing `v^{m+1}`.
    pub residuals: Vec<f64>,
}

impl Diagnostics {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0, |a, r| a.max(*r))
    }
}

/// A completed run with the full trajectory.
#[derive(Debug, Clone)]
pub struct SchemeRun {
    pub mesh: MeshSpec,
    pub variant: U1Variant,
    pub v0_mode: V0Mode,
    pub trajectory: Trajectory,
    pub diagnostics: Diagnostics,
}

/// Reusable factorization and scratch space for one mesh.
struct Stepper {
    mesh: MeshSpec,
    op: ImplicitOperator,
    rhs: Vec<f64>,
    lap: Vec<f64>,
    check: Vec<f64>,
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

impl Stepper {
    fn new(mesh: &MeshSpec) -> Result<Self> {
        let n = mesh.n();
        Ok(Self {
            mesh: *mesh,
            op: ImplicitOperator::new(mesh)?,
            rhs: vec![0.0; n + 1],
            lap: vec![0.0; n + 1],
            check: vec![0.0; n + 1],
        })
    }

    fn op_norm(&self) -> f64 {
        self.op.matrix().diag().abs() + 2.0 * self.op.matrix().off().abs()
    }

    /// `max |A z - rhs| / scale` over interior rows; `rhs` must hold the
    /// unsolved right-hand side.
    fn residual(&mut self, z: &[f64], rhs: &[f64], z_scale: f64) -> f64 {
        let n = self.mesh.n();
        self.op.matrix().apply_into(&z[1..n], &mut self.check[1..n]);
        let err = (1..n).fold(0.0f64, |a, i| a.max((self.check[i] - rhs[i]).abs()));
        let scale = max_abs(rhs) + self.op_norm() * z_scale;
        if scale == 0.0 {
            0.0
        } else {
            err / scale
        }
    }

    fn initial(&mut self, v0: &[f64], u1h: &[f64], f0: &[f64]) -> (Vec<f64>, f64) {
        let n = self.mesh.n();
        let tau = self.mesh.tau();
        let a2 = self.mesh.speed().powi(2);
        stencil_into(SpatialOp::Laplacian, v0, self.mesh.h(), &mut self.lap);
        for i in 1..n {
            self.rhs[i] = 0.5 * tau * a2 * self.lap[i] + u1h[i] + 0.5 * tau * f0[i];
        }
        let rhs = self.rhs.clone();
        self.op.solve_interior(&mut self.rhs);
        let mut v1 = vec![0.0; n + 1];
        for i in 1..n {
            v1[i] = v0[i] + tau * self.rhs[i];
        }
        let z: Vec<f64> = (0..=n).map(|i| (v1[i] - v0[i]) / tau).collect();
        let z_scale = (max_abs(&v1) + max_abs(v0)) / tau;
        let res = self.residual(&z, &rhs, z_scale);
        (v1, res)
    }

    fn step(&mut self, prev: &[f64], curr: &[f64], f: &[f64]) -> (Vec<f64>, f64) {
        let n = self.mesh.n();
        let tau2 = self.mesh.tau().powi(2);
        let a2 = self.mesh.speed().powi(2);
        stencil_into(SpatialOp::Laplacian, curr, self.mesh.h(), &mut self.lap);
        for i in 1..n {
            self.rhs[i] = a2 * self.lap[i] + f[i];
        }
        let rhs = self.rhs.clone();
        self.op.solve_interior(&mut self.rhs);
        let mut next = vec![0.0; n + 1];
        for i in 1..n {
            next[i] = 2.0 * curr[i] - prev[i] + tau2 * self.rhs[i];
        }
        let z: Vec<f64> = (0..=n).map(|i| (next[i] - 2.0 * curr[i] + prev[i]) / tau2).collect();
        let z_scale = (max_abs(&next) + 2.0 * max_abs(curr) + max_abs(prev)) / tau2;
        let res = self.residual(&z, &rhs, z_scale);
        (next, res)
    }
}

fn require_grid(w: &GridFn, mesh: &MeshSpec, what: &str) -> Result<()> {
    w.require_cells(mesh, what)?;
    w.require_dirichlet(what)
}

fn check_residual(res: f64, m: usize) -> Result<()> {
    if res <= RESIDUAL_TOL {
        Ok(())
    } else {
        Err(Error::Invariant(format!("residual {res:e} of the equation for level {} exceeds {RESIDUAL_TOL:e}", m + 1)))
    }
}

/// `v^1` from the first-level equation.
pub fn initial_step(mesh: &MeshSpec, v0: &GridFn, u1h: &GridFn, fh0: &GridFn) -> Result<GridFn> {
    mesh.require_stable()?;
    require_grid(v0, mesh, "v0")?;
    require_grid(u1h, mesh, "u1h")?;
    require_grid(fh0, mesh, "f_h^0")?;
    let (v1, res) = Stepper::new(mesh)?.initial(v0.values(), u1h.values(), fh0.values());
    check_residual(res, 0)?;
    GridFn::from_values(v1)
}

/// `v^{m+1}` from `v^{m-1}`, `v^m` and `f_h^m`.
pub fn time_step(mesh: &MeshSpec, v_prev: &GridFn, v_curr: &GridFn, fh_m: &GridFn) -> Result<GridFn> {
    mesh.require_stable()?;
    require_grid(v_prev, mesh, "v^{m-1}")?;
    require_grid(v_curr, mesh, "v^m")?;
    require_grid(fh_m, mesh, "f_h^m")?;
    let (next, res) = Stepper::new(mesh)?.step(v_prev.values(), v_curr.values(), fh_m.values());
    check_residual(res, 1)?;
    GridFn::from_values(next)
}

/// `v^0`, `u_1h` and `f_h` for a data descriptor.
pub fn grid_data(mesh: &MeshSpec, data: &DataSpec, variant: U1Variant, v0_mode: V0Mode) -> Result<(GridFn, GridFn, GridForcing)> {
    data.validate(mesh.x_len())?;
    let v0 = match v0_mode {
        V0Mode::NodeSamples => {
            let mut s = data.u0.samples(mesh)?;
            s.require_dirichlet("u0")?;
            let n = mesh.n();
            s.values_mut()[0] = 0.0;
            s.values_mut()[n] = 0.0;
            s
        }
        V0Mode::QhAverage => average_qh(&data.u0, mesh)?,
    };
    let u1h = build_u1h(variant, &data.u1, mesh)?;
    let fh = GridForcing::from_data(data.f.as_ref(), mesh)?;
    Ok((v0, u1h, fh))
}

/// Runs the scheme on grid data, calling `observer(m, v^{m-1}, v^m)` for
/// `m = 0 .. M` (`v^{-1}` is `None`). Only two slices are kept in memory.
pub fn evolve_grid(
    mesh: &MeshSpec,
    v0: &GridFn,
    u1h: &GridFn,
    forcing: &GridForcing,
    mut observer: impl FnMut(usize, Option<&GridFn>, &GridFn) -> Result<()>,
) -> Result<Diagnostics> {
    mesh.require_stable()?;
    require_grid(v0, mesh, "v0")?;
    require_grid(u1h, mesh, "u1h")?;
    forcing.validate(mesh)?;
    let n = mesh.n();
    let mut stepper = Stepper::new(mesh)?;
    let mut f = vec![0.0; n + 1];
    let mut residuals = Vec::with_capacity(mesh.m());

    observer(0, None, v0)?;
    forcing.slice_into(0, &mut f);
    let (v1, res) = stepper.initial(v0.values(), u1h.values(), &f);
    check_residual(res, 0)?;
    residuals.push(res);
    let mut prev = v0.clone();
    let mut curr = GridFn::from_values(v1)?;
    observer(1, Some(&prev), &curr)?;
    for m in 1..mesh.m() {
        forcing.slice_into(m, &mut f);
        let (next, res) = stepper.step(prev.values(), curr.values(), &f);
        check_residual(res, m)?;
        residuals.push(res);
        prev = std::mem::replace(&mut curr, GridFn::from_values(next)?);
        observer(m + 1, Some(&prev), &curr)?;
    }
    Ok(Diagnostics { residuals })
}

/// Streaming run from a data descriptor.
pub fn evolve_with(
    mesh: &MeshSpec,
    data: &DataSpec,
    variant: U1Variant,
    v0_mode: V0Mode,
    observer: impl FnMut(usize, Option<&GridFn>, &GridFn) -> Result<()>,
) -> Result<Diagnostics> {
    mesh.require_stable()?;
    let (v0, u1h, fh) = grid_data(mesh, data, variant, v0_mode)?;
    evolve_grid(mesh, &v0, &u1h, &fh, observer)
}

/// Full run from a data descriptor, keeping every slice.
pub fn evolve(mesh: &MeshSpec, data: &DataSpec, variant: U1Variant, v0_mode: V0Mode) -> Result<SchemeRun> {
    let mut slices = Vec::with_capacity(mesh.m() + 1);
    let diagnostics = evolve_with(mesh, data, variant, v0_mode, |_, _, v| {
        slices.push(v.clone());
        Ok(())
    })?;
    Ok(SchemeRun {
        mesh: *mesh,
        variant,
        v0_mode,
        trajectory: Trajectory { mesh: *mesh, slices },
        diagnostics,
    })
}

/// A reference solution `u(x, t)`.
pub trait ExactSolution: Sync {
    fn eval(&self, x: f64, t: f64) -> Result<f64>;

    /// `u(x_i, t_m)` with zero boundary entries.
    fn node_slice(&self, mesh: &MeshSpec, m: usize) -> Result<GridFn> {
        let n = mesh.n();
        let t = mesh.t(m);
        let mut out = vec![0.0; n + 1];
        for (i, o) in out.iter_mut().enumerate().take(n).skip(1) {
            *o = self.eval(mesh.x(i), t)?;
        }
        GridFn::from_values(out)
    }

    /// `(q_{2h} u)(., t_m)`.
    fn q2h_slice(&self, mesh: &MeshSpec, m: usize) -> Result<GridFn> {
        let t = mesh.t(m);
        let failure = std::cell::Cell::new(None);
        let qh = data::qh_of_fn(
            &|x| match self.eval(x, t) {
                Ok(v) => v,
                Err(e) => {
                    failure.set(Some(e.to_string()));
                    f64::NAN
                }
            },
            mesh,
            data::DEFAULT_QUADRATURE_NODES,
        );
        if let Some(reason) = failure.take() {
            return Err(Error::Quadrature { cell: 0, reason });
        }
        Ok(data::q2h_from_qh(&qh?))
    }
}

/// Wraps a closure `(x, t) -> u` as a reference solution.
pub struct FnSolution<F>(pub F);

impl<F: Fn(f64, f64) -> f64 + Sync> ExactSolution for FnSolution<F> {
    fn eval(&self, x: f64, t: f64) -> Result<f64> {
        Ok((self.0)(x, t))
    }
}

/// Which reference slice enters the time-difference part of the error.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorMode {
    #[default]
    NodeSampled,
    Q2hFiltered,
}

/// Error norms of a run, `r = u - v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    /// `max_{m >= 1} ||{r^{m-1}, r^m}||_{E_h}`; in q2h mode `r = q_{2h} u - v`.
    pub max_energy_error: f64,
    /// `max_m ||dbar_x r^m||_{h*}` with node-sampled `u`.
    pub max_dx_error: f64,
    /// `max_{m >= 1} (||dbar_t (P u - v)^m||_h + ||dbar_x (u - v)^m||_{h*})`
    /// with `P = q_{2h}` in q2h mode and the identity otherwise.
    pub max_h1_error: f64,
    /// Mesh `L^1(Q)` norm of node-sampled `r`.
    pub l1_spacetime_error: f64,
    /// Mesh `L^1(Q)` norm of `dbar_x r`.
    pub l1_spacetime_dx_error: f64,
    pub mode: ErrorMode,
}

/// Builds an [`ErrorReport`] one time level at a time.
#[derive(Debug, Clone)]
pub struct ErrorAccumulator {
    mesh: MeshSpec,
    mode: ErrorMode,
    next_m: usize,
    prev_filtered: Option<GridFn>,
    max_energy: f64,
    max_dx: f64,
    max_h1: f64,
    l1: Vec<f64>,
    l1_dx: Vec<f64>,
}

impl ErrorAccumulator {
    pub fn new(mesh: &MeshSpec, mode: ErrorMode) -> Result<Self> {
        mesh.require_stable()?;
        Ok(Self {
            mesh: *mesh,
            mode,
            next_m: 0,
            prev_filtered: None,
            max_energy: 0.0,
            max_dx: 0.0,
            max_h1: 0.0,
            l1: Vec::with_capacity(mesh.m() + 1),
            l1_dx: Vec::with_capacity(mesh.m() + 1),
        })
    }

    pub fn mode(&self) -> ErrorMode {
        self.mode
    }

    /// Adds level `m`; levels must arrive in order. `u_filtered` is required
    /// in q2h mode and ignored otherwise.
    pub fn push(&mut self, m: usize, v: &GridFn, u_node: &GridFn, u_filtered: Option<&GridFn>) -> Result<()> {
        if m != self.next_m {
            return Err(Error::contract(format!("error levels out of order: got {m}, expected {}", self.next_m)));
        }
        let mesh = &self.mesh;
        let r = u_node.sub(v);
        let dx = grid::space_norm(&r, SpaceNorm::DxL2, mesh)?;
        self.max_dx = self.max_dx.max(dx);
        self.l1.push(grid::space_norm(&r, SpaceNorm::L1, mesh)?);
        self.l1_dx.push(grid::space_norm(&r, SpaceNorm::DxL1, mesh)?);
        let filtered = match self.mode {
            ErrorMode::NodeSampled => r,
            ErrorMode::Q2hFiltered => {
                let uf = u_filtered.ok_or_else(|| Error::contract("q2h mode needs the filtered reference slice"))?;
                uf.sub(v)
            }
        };
        if let Some(prev) = &self.prev_filtered {
            let e = grid::energy_norm_pair(prev, &filtered, mesh)?;
            self.max_energy = self.max_energy.max(e);
            let dt = filtered.sub(prev).scale(1.0 / mesh.tau());
            let t = grid::space_norm(&dt, SpaceNorm::L2, mesh)? + dx;
            self.max_h1 = self.max_h1.max(t);
        }
        self.prev_filtered = Some(filtered);
        self.next_m += 1;
        Ok(())
    }

    pub fn finish(self) -> Result<ErrorReport> {
        if self.next_m != self.mesh.m() + 1 {
            return Err(Error::contract(format!(
                "error report needs levels 0..={}, got {}",
                self.mesh.m(),
                self.next_m
            )));
        }
        Ok(ErrorReport {
            max_energy_error: self.max_energy,
            max_dx_error: self.max_dx,
            max_h1_error: self.max_h1,
            l1_spacetime_error: grid::time_aggregate(&self.l1, TimeAggregate::L1Tau, &self.mesh)?,
            l1_spacetime_dx_error: grid::time_aggregate(&self.l1_dx, TimeAggregate::L1Tau, &self.mesh)?,
            mode: self.mode,
        })
    }
}

/// Error norms of a stored run against `reference`.
pub fn error_report(run: &SchemeRun, reference: &dyn ExactSolution, mode: ErrorMode) -> Result<ErrorReport> {
    let mesh = &run.trajectory.mesh;
    let mut acc = ErrorAccumulator::new(mesh, mode)?;
    for (m, v) in run.trajectory.slices.iter().enumerate() {
        let u = reference.node_slice(mesh, m)?;
        let uf = match mode {
            ErrorMode::NodeSampled => None,
            ErrorMode::Q2hFiltered => Some(reference.q2h_slice(mesh, m)?),
        };
        acc.push(m, v, &u, uf.as_ref())?;
    }
    acc.finish()
}
