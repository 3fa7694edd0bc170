//! Data descriptors for `(u0, u1, f)` and the averages that turn them into
//! grid data for the scheme.
//!
//! Averages use the hat basis: `(q_h w)_i = (1/h) int w e_i^h dx` on interior
//! nodes with zero boundary entries, and the time average `q_tau` with the
//! one-sided hat at `m = 0`. Harmonic profiles use the exact multiplier
//! `q_h sin(w x) = (sin(w h/2) / (w h/2))^2 sin(w x_i)`; piecewise polynomials
//! are integrated cell by cell, split at breakpoints, with Gauss-Legendre rules
//! that are exact for their degree.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridFn, MeshSpec};
use crate::operators::{stencil, SpatialOp};
use crate::quadrature::{integrate_adaptive, poly_eval, poly_trig_moments, GaussLegendre};

/// Default Gauss-Legendre node count per integration cell.
pub const DEFAULT_QUADRATURE_NODES: usize = 8;

const ADAPTIVE_TOL: f64 = 1e-13;
const ADAPTIVE_DEPTH: usize = 24;

/// A scalar function of one variable supplied by the caller.
#[derive(Clone)]
pub struct Callable(pub Arc<dyn Fn(f64) -> f64 + Send + Sync>);

impl Callable {
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Callable(Arc::new(f))
    }

    pub fn call(&self, x: f64) -> f64 {
        (self.0)(x)
    }
}

impl fmt::Debug for Callable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Callable(..)")
    }
}

/// Value taken at a breakpoint where a piecewise polynomial jumps.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeConvention {
    Left,
    Right,
    #[default]
    Mean,
    /// Refuse pointwise evaluation at a jump.
    Strict,
}

/// Piecewise polynomial on `0 = b_0 < b_1 < ... < b_P = X`.
///
/// Piece `j` is `sum_d c_{j,d} (x - b_j)^d` on `[b_j, b_{j+1}]`, i.e. each
/// polynomial is written in the local coordinate of its left breakpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewisePolynomial {
    pub breakpoints: Vec<f64>,
    pub pieces: Vec<Vec<f64>>,
    #[serde(default)]
    pub node_convention: NodeConvention,
}

impl PiecewisePolynomial {
    pub fn new(breakpoints: Vec<f64>, pieces: Vec<Vec<f64>>) -> Self {
        Self { breakpoints, pieces, node_convention: NodeConvention::default() }
    }

    pub fn with_convention(mut self, convention: NodeConvention) -> Self {
        self.node_convention = convention;
        self
    }

    fn validate(&self, x_len: f64) -> Result<()> {
        let b = &self.breakpoints;
        if b.len() < 2 {
            return Err(Error::config("piecewise polynomial needs at least two breakpoints"));
        }
        if self.pieces.len() != b.len() - 1 {
            return Err(Error::config(format!(
                "{} breakpoints require {} pieces, got {}",
                b.len(),
                b.len() - 1,
                self.pieces.len()
            )));
        }
        if b[0] != 0.0 || (b[b.len() - 1] - x_len).abs() > 1e-12 * x_len {
            return Err(Error::config(format!(
                "breakpoints must start at 0 and end at X = {x_len}, got [{}, {}]",
                b[0],
                b[b.len() - 1]
            )));
        }
        if b.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::config("breakpoints must be strictly increasing"));
        }
        if self.pieces.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::config("piece coefficients must be finite"));
        }
        Ok(())
    }

    fn degree(&self) -> usize {
        self.pieces.iter().map(|p| p.len().saturating_sub(1)).max().unwrap_or(0)
    }

    fn piece_value(&self, j: usize, x: f64) -> f64 {
        poly_eval(&self.pieces[j], x - self.breakpoints[j])
    }

    fn eval(&self, x: f64) -> Result<f64> {
        let b = &self.breakpoints;
        let x_len = b[b.len() - 1];
        let snap = 1e-12 * x_len;
        let last = self.pieces.len() - 1;
        // Interior breakpoint within snapping distance of x.
        if let Some(j) = (1..b.len() - 1).find(|&j| (x - b[j]).abs() <= snap) {
            let left = self.piece_value(j - 1, b[j]);
            let right = self.piece_value(j, b[j]);
            if (left - right).abs() <= 1e-12 * left.abs().max(right.abs()).max(1.0) {
                return Ok(right);
            }
            return match self.node_convention {
                NodeConvention::Left => Ok(left),
                NodeConvention::Right => Ok(right),
                NodeConvention::Mean => Ok(0.5 * (left + right)),
                NodeConvention::Strict => Err(Error::contract(format!(
                    "pointwise value requested at the jump x = {} of a profile with strict node convention",
                    b[j]
                ))),
            };
        }
        let j = b[1..].partition_point(|&bp| bp < x).min(last);
        Ok(self.piece_value(j, x))
    }

    /// Sub-intervals of `[lo, hi]` cut at breakpoints, each tagged with its piece.
    fn segments(&self, lo: f64, hi: f64) -> Vec<(usize, f64, f64)> {
        let b = &self.breakpoints;
        let snap = 1e-12 * b[b.len() - 1];
        let mut out = Vec::new();
        let first = b[1..].partition_point(|&bp| bp <= lo + snap).min(self.pieces.len() - 1);
        let mut start = lo;
        for j in first..self.pieces.len() {
            let end = b[j + 1].min(hi);
            if end - start > snap {
                out.push((j, start, end));
            }
            if b[j + 1] >= hi - snap {
                break;
            }
            start = end;
        }
        out
    }
}

/// Spatial profile of `u0`, `u1` or the space factor of `f`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Zero,
    /// `amplitude * sin(pi k x / X)`.
    Harmonic {
        k: usize,
        #[serde(default = "unit")]
        amplitude: f64,
    },
    /// `sum_k c_k sqrt(2/X) sin(pi k x / X)`, coefficients in the orthonormal
    /// sine basis, `k = 1, 2, ...`.
    SineSeries { coeffs: Vec<f64> },
    PiecewisePolynomial(PiecewisePolynomial),
    #[serde(skip)]
    Callable(Callable),
}

fn unit() -> f64 {
    1.0
}

impl Profile {
    pub fn harmonic(k: usize) -> Self {
        Profile::Harmonic { k, amplitude: 1.0 }
    }

    pub fn callable(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Profile::Callable(Callable::new(f))
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Profile::Zero => true,
            Profile::Harmonic { amplitude, .. } => *amplitude == 0.0,
            Profile::SineSeries { coeffs } => coeffs.iter().all(|c| *c == 0.0),
            _ => false,
        }
    }

    pub fn validate(&self, x_len: f64) -> Result<()> {
        match self {
            Profile::Harmonic { k, amplitude } => {
                if *k < 1 {
                    return Err(Error::config("harmonic profile needs k >= 1"));
                }
                if !amplitude.is_finite() {
                    return Err(Error::config("harmonic amplitude must be finite"));
                }
                Ok(())
            }
            Profile::SineSeries { coeffs } => {
                if coeffs.iter().any(|c| !c.is_finite()) {
                    return Err(Error::config("sine-series coefficients must be finite"));
                }
                Ok(())
            }
            Profile::PiecewisePolynomial(pp) => pp.validate(x_len),
            Profile::Zero | Profile::Callable(_) => Ok(()),
        }
    }

    /// Pointwise value at `x` in `[0, X]`.
    pub fn eval(&self, x: f64, x_len: f64) -> Result<f64> {
        Ok(match self {
            Profile::Zero => 0.0,
            Profile::Harmonic { k, amplitude } => amplitude * (PI * *k as f64 * x / x_len).sin(),
            Profile::SineSeries { coeffs } => {
                let norm = (2.0 / x_len).sqrt();
                coeffs
                    .iter()
                    .enumerate()
                    .map(|(j, c)| c * norm * (PI * (j + 1) as f64 * x / x_len).sin())
                    .sum()
            }
            Profile::PiecewisePolynomial(pp) => pp.eval(x)?,
            Profile::Callable(f) => f.call(x),
        })
    }

    /// Node samples at `x_0 .. x_N`, boundary nodes included.
    pub fn samples(&self, mesh: &MeshSpec) -> Result<GridFn> {
        self.validate(mesh.x_len())?;
        let values = (0..=mesh.n())
            .map(|i| self.eval(mesh.x(i), mesh.x_len()))
            .collect::<Result<Vec<_>>>()?;
        GridFn::from_values(values)
    }

    /// `||w||_{L^2(0, X)}`.
    pub fn l2_norm(&self, x_len: f64) -> Result<f64> {
        self.validate(x_len)?;
        Ok(match self {
            Profile::Zero => 0.0,
            Profile::Harmonic { amplitude, .. } => amplitude.abs() * (x_len / 2.0).sqrt(),
            Profile::SineSeries { coeffs } => coeffs.iter().map(|c| c * c).sum::<f64>().sqrt(),
            Profile::PiecewisePolynomial(pp) => {
                let rule = GaussLegendre::new(pp.degree() + 1);
                pp.segments(0.0, x_len)
                    .into_iter()
                    .map(|(j, a, b)| rule.integrate(a, b, |x| pp.piece_value(j, x).powi(2)))
                    .sum::<f64>()
                    .sqrt()
            }
            Profile::Callable(f) => composite(x_len, 256, |x| f.call(x).powi(2)).sqrt(),
        })
    }

    /// `||w'||_{L^2(0, X)}`; piecewise polynomials must be continuous.
    pub fn h1_seminorm(&self, x_len: f64) -> Result<f64> {
        self.validate(x_len)?;
        Ok(match self {
            Profile::Zero => 0.0,
            Profile::Harmonic { k, amplitude } => {
                amplitude.abs() * PI * *k as f64 / x_len * (x_len / 2.0).sqrt()
            }
            Profile::SineSeries { coeffs } => coeffs
                .iter()
                .enumerate()
                .map(|(j, c)| (PI * (j + 1) as f64 / x_len * c).powi(2))
                .sum::<f64>()
                .sqrt(),
            Profile::PiecewisePolynomial(pp) => {
                for j in 1..pp.pieces.len() {
                    let bj = pp.breakpoints[j];
                    let (l, r) = (pp.piece_value(j - 1, bj), pp.piece_value(j, bj));
                    if (l - r).abs() > 1e-12 * l.abs().max(r.abs()).max(1.0) {
                        return Err(Error::contract(format!(
                            "H^1 seminorm of a profile with a jump at x = {bj}"
                        )));
                    }
                }
                let rule = GaussLegendre::new(pp.degree().max(1));
                pp.segments(0.0, x_len)
                    .into_iter()
                    .map(|(j, a, b)| {
                        let d = crate::quadrature::poly_derivative(&pp.pieces[j]);
                        let b0 = pp.breakpoints[j];
                        rule.integrate(a, b, |x| poly_eval(&d, x - b0).powi(2))
                    })
                    .sum::<f64>()
                    .sqrt()
            }
            Profile::Callable(_) => {
                return Err(Error::contract("H^1 seminorm is not available for callable profiles"))
            }
        })
    }
}

fn composite(len: f64, panels: usize, f: impl Fn(f64) -> f64) -> f64 {
    let rule = GaussLegendre::new(DEFAULT_QUADRATURE_NODES);
    (0..panels)
        .map(|j| {
            let a = len * j as f64 / panels as f64;
            let b = len * (j + 1) as f64 / panels as f64;
            rule.integrate(a, b, &f)
        })
        .sum()
}

/// Time factor `g(t)` of a separable forcing.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeProfile {
    /// `sin(omega t)`.
    HarmonicSin { omega: f64 },
    /// `sum_d c_d t^d`.
    Polynomial { coeffs: Vec<f64> },
    #[serde(skip)]
    Callable(Callable),
}

impl TimeProfile {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            TimeProfile::HarmonicSin { omega } => (omega * t).sin(),
            TimeProfile::Polynomial { coeffs } => poly_eval(coeffs, t),
            TimeProfile::Callable(g) => g.call(t),
        }
    }

    /// `int_0^T |g(t)| dt`, split at sign changes.
    pub fn l1_norm(&self, t_final: f64) -> Result<f64> {
        let rule = GaussLegendre::new(16);
        let mut cuts = vec![0.0];
        match self {
            TimeProfile::HarmonicSin { omega } if *omega != 0.0 => {
                let period = PI / omega.abs();
                let mut t = period;
                while t < t_final {
                    cuts.push(t);
                    t += period;
                }
            }
            _ => {
                let samples = 4096;
                let mut prev = self.eval(0.0);
                for j in 1..=samples {
                    let t = t_final * j as f64 / samples as f64;
                    let cur = self.eval(t);
                    if prev * cur < 0.0 {
                        let (mut lo, mut hi) = (t - t_final / samples as f64, t);
                        for _ in 0..80 {
                            let mid = 0.5 * (lo + hi);
                            if self.eval(lo) * self.eval(mid) <= 0.0 {
                                hi = mid;
                            } else {
                                lo = mid;
                            }
                        }
                        cuts.push(0.5 * (lo + hi));
                    }
                    prev = cur;
                }
            }
        }
        cuts.push(t_final);
        let total: f64 = cuts
            .windows(2)
            .map(|w| {
                let sub = 8;
                (0..sub)
                    .map(|s| {
                        let a = w[0] + (w[1] - w[0]) * s as f64 / sub as f64;
                        let b = w[0] + (w[1] - w[0]) * (s + 1) as f64 / sub as f64;
                        rule.integrate(a, b, |t| self.eval(t)).abs()
                    })
                    .sum::<f64>()
            })
            .sum();
        if total.is_finite() {
            Ok(total)
        } else {
            Err(Error::Quadrature { cell: 0, reason: "non-finite time profile".into() })
        }
    }
}

/// Separable forcing `f(x, t) = space(x) * time(t)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Forcing {
    pub space: Profile,
    pub time: TimeProfile,
}

impl Forcing {
    /// `||f||_{L^{2,1}(Q)} = ||space||_{L^2} int_0^T |time| dt`.
    pub fn l21_norm(&self, x_len: f64, t_final: f64) -> Result<f64> {
        Ok(self.space.l2_norm(x_len)? * self.time.l1_norm(t_final)?)
    }
}

/// Initial displacement, initial velocity and optional forcing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DataSpec {
    pub u0: Profile,
    pub u1: Profile,
    #[serde(default)]
    pub f: Option<Forcing>,
}

impl DataSpec {
    pub fn zero() -> Self {
        Self { u0: Profile::Zero, u1: Profile::Zero, f: None }
    }

    pub fn validate(&self, x_len: f64) -> Result<()> {
        self.u0.validate(x_len)?;
        self.u1.validate(x_len)?;
        if let Some(f) = &self.f {
            f.space.validate(x_len)?;
        }
        Ok(())
    }
}

/// Discretization of the initial velocity entering the first-level equation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum U1Variant {
    /// `s_N u1 + (tau^2 a^2 / 12) Lambda_x u1` on node samples.
    V0,
    /// `q_h u1 + (tau^2 a^2 / 12) Lambda_x u1`, the second term on node samples.
    V1,
    /// `(I + (tau^2 a^2 / 12) Lambda_x) q_h u1`; needs only `u1` in `L^2`.
    #[default]
    V2,
}

impl U1Variant {
    pub const ALL: [U1Variant; 3] = [U1Variant::V0, U1Variant::V1, U1Variant::V2];

    pub fn name(self) -> &'static str {
        match self {
            U1Variant::V0 => "v0",
            U1Variant::V1 => "v1",
            U1Variant::V2 => "v2",
        }
    }
}

/// `(sin(z) / z)^2` with `z = omega * step / 2`: the symbol of hat averaging
/// on `sin(omega x)`, equal to `lambda(omega) / omega^2`.
pub fn hat_symbol(omega: f64, step: f64) -> f64 {
    let z = 0.5 * omega * step;
    if z.abs() < 1e-4 {
        let z2 = z * z;
        1.0 - z2 / 3.0 + 2.0 * z2 * z2 / 45.0
    } else {
        (z.sin() / z).powi(2)
    }
}

/// `(q_h w)_i` for `1 <= i <= N - 1`; boundary entries are zero.
pub fn average_qh(w: &Profile, mesh: &MeshSpec) -> Result<GridFn> {
    average_qh_with(w, mesh, DEFAULT_QUADRATURE_NODES)
}

/// [`average_qh`] with an explicit Gauss-Legendre node count per cell.
pub fn average_qh_with(w: &Profile, mesh: &MeshSpec, nodes: usize) -> Result<GridFn> {
    let x_len = mesh.x_len();
    w.validate(x_len)?;
    let n = mesh.n();
    let h = mesh.h();
    let mut out = vec![0.0; n + 1];
    match w {
        Profile::Zero => {}
        Profile::Harmonic { k, amplitude } => {
            let omega = PI * *k as f64 / x_len;
            let factor = amplitude * hat_symbol(omega, h);
            for (i, o) in out.iter_mut().enumerate().take(n).skip(1) {
                *o = factor * (omega * mesh.x(i)).sin();
            }
        }
        Profile::SineSeries { coeffs } => {
            let norm = (2.0 / x_len).sqrt();
            for (j, c) in coeffs.iter().enumerate() {
                let omega = PI * (j + 1) as f64 / x_len;
                let factor = c * norm * hat_symbol(omega, h);
                for (i, o) in out.iter_mut().enumerate().take(n).skip(1) {
                    *o += factor * (omega * mesh.x(i)).sin();
                }
            }
        }
        Profile::PiecewisePolynomial(pp) => {
            let rule = GaussLegendre::new(nodes.max(pp.degree() / 2 + 1));
            for cell in 1..=n {
                let (xl, xr) = (mesh.x(cell - 1), mesh.x(cell));
                let (mut rising, mut falling) = (0.0, 0.0);
                for (j, a, b) in pp.segments(xl, xr) {
                    rising += rule.integrate(a, b, |x| pp.piece_value(j, x) * (x - xl) / h);
                    falling += rule.integrate(a, b, |x| pp.piece_value(j, x) * (xr - x) / h);
                }
                out[cell] += rising / h;
                out[cell - 1] += falling / h;
            }
            out[0] = 0.0;
            out[n] = 0.0;
        }
        Profile::Callable(f) => return qh_of_fn(&|x| f.call(x), mesh, nodes),
    }
    GridFn::from_values(out)
}

/// `q_h` of an arbitrary function by adaptive Gauss-Legendre per cell.
pub(crate) fn qh_of_fn(f: &dyn Fn(f64) -> f64, mesh: &MeshSpec, nodes: usize) -> Result<GridFn> {
    let n = mesh.n();
    let h = mesh.h();
    let rule = GaussLegendre::new(nodes);
    let mut out = vec![0.0; n + 1];
    for cell in 1..=n {
        let (xl, xr) = (mesh.x(cell - 1), mesh.x(cell));
        let rising = integrate_adaptive(&rule, xl, xr, &|x| f(x) * (x - xl) / h, ADAPTIVE_TOL, ADAPTIVE_DEPTH)
            .map_err(|reason| Error::Quadrature { cell, reason })?;
        let falling = integrate_adaptive(&rule, xl, xr, &|x| f(x) * (xr - x) / h, ADAPTIVE_TOL, ADAPTIVE_DEPTH)
            .map_err(|reason| Error::Quadrature { cell, reason })?;
        out[cell] += rising / h;
        out[cell - 1] += falling / h;
    }
    out[0] = 0.0;
    out[n] = 0.0;
    GridFn::from_values(out)
}

/// `(q_tau g)^m` for `0 <= m <= M - 1`.
pub fn average_qtau(g: &TimeProfile, mesh: &MeshSpec, m: usize) -> Result<f64> {
    if m >= mesh.m() {
        return Err(Error::contract(format!("time average index {m} outside 0..{}", mesh.m())));
    }
    let tau = mesh.tau();
    let tm = mesh.t(m);
    match g {
        TimeProfile::HarmonicSin { omega } => {
            let z = omega * tau;
            if m == 0 {
                // (2/(w tau)) (1 - sin(w tau)/(w tau))
                if z.abs() < 1e-3 {
                    Ok(z / 3.0 - z * z * z / 60.0)
                } else {
                    Ok(2.0 / z * (1.0 - z.sin() / z))
                }
            } else {
                Ok(hat_symbol(*omega, tau) * (omega * tm).sin())
            }
        }
        TimeProfile::Polynomial { coeffs } => {
            let rule = GaussLegendre::new((coeffs.len() / 2 + 1).max(DEFAULT_QUADRATURE_NODES));
            let right = rule.integrate(tm, tm + tau, |t| poly_eval(coeffs, t) * (1.0 - (t - tm) / tau));
            if m == 0 {
                Ok(2.0 * right / tau)
            } else {
                let left = rule.integrate(tm - tau, tm, |t| poly_eval(coeffs, t) * (1.0 - (tm - t) / tau));
                Ok((left + right) / tau)
            }
        }
        TimeProfile::Callable(f) => {
            let rule = GaussLegendre::new(DEFAULT_QUADRATURE_NODES);
            let err = |reason| Error::Quadrature { cell: m, reason };
            let right = integrate_adaptive(&rule, tm, tm + tau, &|t| f.call(t) * (1.0 - (t - tm) / tau), ADAPTIVE_TOL, ADAPTIVE_DEPTH)
                .map_err(err)?;
            if m == 0 {
                Ok(2.0 * right / tau)
            } else {
                let left = integrate_adaptive(&rule, tm - tau, tm, &|t| f.call(t) * (1.0 - (tm - t) / tau), ADAPTIVE_TOL, ADAPTIVE_DEPTH)
                    .map_err(|reason| Error::Quadrature { cell: m, reason })?;
                Ok((left + right) / tau)
            }
        }
    }
}

/// `q_{2h} w = q_h w - (h^2/12) Lambda_x q_h w`, i.e.
/// `(-q_h w_{i-1} + 14 q_h w_i - q_h w_{i+1}) / 12`.
pub fn average_q2h(w: &Profile, mesh: &MeshSpec) -> Result<GridFn> {
    Ok(q2h_from_qh(&average_qh(w, mesh)?))
}

pub(crate) fn q2h_from_qh(qh: &GridFn) -> GridFn {
    let q = qh.values();
    let n = q.len() - 1;
    let mut out = vec![0.0; n + 1];
    for i in 1..n {
        out[i] = (-q[i - 1] + 14.0 * q[i] - q[i + 1]) / 12.0;
    }
    GridFn::from_values(out).expect("length preserved")
}

/// Grid initial velocity `u_{1h}` for the chosen variant.
pub fn build_u1h(variant: U1Variant, u1: &Profile, mesh: &MeshSpec) -> Result<GridFn> {
    let h = mesh.h();
    let c = (mesh.tau() * mesh.speed()).powi(2) / 12.0;
    let with_correction = |base: GridFn, lap_of: &GridFn| {
        let lap = stencil(SpatialOp::Laplacian, lap_of.values(), h);
        base.add(&lap.scale(c))
    };
    Ok(match variant {
        U1Variant::V0 => {
            let s = u1.samples(mesh)?;
            with_correction(stencil(SpatialOp::Numerov, s.values(), h), &s)
        }
        U1Variant::V1 => {
            let s = u1.samples(mesh)?;
            with_correction(average_qh(u1, mesh)?, &s)
        }
        U1Variant::V2 => {
            let q = average_qh(u1, mesh)?;
            with_correction(q.clone(), &q)
        }
    })
}

/// Forcing slices `(q_h q_tau f)^m`, `0 <= m <= M - 1`.
pub fn build_fh(f: Option<&Forcing>, mesh: &MeshSpec) -> Result<Vec<GridFn>> {
    let n = mesh.n();
    match f {
        None => Ok(vec![GridFn::zeros(n); mesh.m()]),
        Some(f) => {
            let space = average_qh(&f.space, mesh)?;
            (0..mesh.m()).map(|m| Ok(space.scale(average_qtau(&f.time, mesh, m)?))).collect()
        }
    }
}

/// First `count` coefficients `w_k = sqrt(2/X) int_0^X w(x) sin(pi k x / X) dx`.
pub fn sine_coefficients(w: &Profile, x_len: f64, count: usize) -> Result<Vec<f64>> {
    w.validate(x_len)?;
    let norm = (2.0 / x_len).sqrt();
    let mut out = vec![0.0; count];
    match w {
        Profile::Zero => {}
        Profile::Harmonic { k, amplitude } => {
            if *k <= count {
                out[k - 1] = amplitude * (x_len / 2.0).sqrt();
            }
        }
        Profile::SineSeries { coeffs } => {
            for (o, c) in out.iter_mut().zip(coeffs) {
                *o = *c;
            }
        }
        Profile::PiecewisePolynomial(pp) => {
            for (j, coeffs) in pp.pieces.iter().enumerate() {
                let a = pp.breakpoints[j];
                let len = pp.breakpoints[j + 1] - a;
                for (idx, o) in out.iter_mut().enumerate() {
                    let omega = PI * (idx + 1) as f64 / x_len;
                    let (c, s) = poly_trig_moments(coeffs, omega, len);
                    let (sa, ca) = (omega * a).sin_cos();
                    // sin(w (a + s)) = sin(w a) cos(w s) + cos(w a) sin(w s)
                    *o += norm * (sa * c + ca * s);
                }
            }
        }
        Profile::Callable(f) => {
            let panels = (4 * count).max(64);
            let rule = GaussLegendre::new(DEFAULT_QUADRATURE_NODES);
            let mut samples = Vec::with_capacity(panels * rule.len());
            for p in 0..panels {
                let a = x_len * p as f64 / panels as f64;
                let b = x_len * (p + 1) as f64 / panels as f64;
                let half = 0.5 * (b - a);
                for (xn, wn) in rule.nodes().iter().zip(rule.weights()) {
                    let x = 0.5 * (a + b) + half * xn;
                    let v = f.call(x);
                    if !v.is_finite() {
                        return Err(Error::Quadrature { cell: p, reason: format!("non-finite value at x = {x}") });
                    }
                    samples.push((x, v * wn * half));
                }
            }
            for (idx, o) in out.iter_mut().enumerate() {
                let omega = PI * (idx + 1) as f64 / x_len;
                *o = norm * samples.iter().map(|(x, wv)| wv * (omega * x).sin()).sum::<f64>();
            }
        }
    }
    Ok(out)
}

/// Truncated fractional norm with an optional tail estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FractionalNorm {
    /// `(sum_{k <= K} (pi k / X)^{2 alpha} w_k^2)^{1/2}`.
    pub partial: f64,
    /// Estimated contribution of `k > K` assuming `|w_k| <= C k^{-p}`;
    /// `None` without a decay exponent, infinite when the tail diverges.
    pub tail: Option<f64>,
}

/// `||w||_{H^alpha}` from sine coefficients `w_1 .. w_K`.
///
/// With `decay = Some(p)`, `C` is fitted as `max |w_k| k^p` over the upper half
/// of the coefficients and the tail is bounded by the integral of
/// `C^2 (pi/X)^{2 alpha} k^{2 alpha - 2 p}` over `(K + 1/2, inf)`.
pub fn fractional_norm(coeffs: &[f64], alpha: f64, x_len: f64, decay: Option<f64>) -> Result<FractionalNorm> {
    if !(alpha >= 0.0) {
        return Err(Error::contract(format!("fractional order must be >= 0, got {alpha}")));
    }
    let partial = coeffs
        .iter()
        .enumerate()
        .map(|(j, c)| (PI * (j + 1) as f64 / x_len).powf(2.0 * alpha) * c * c)
        .sum::<f64>()
        .sqrt();
    let tail = decay.map(|p| {
        let kmax = coeffs.len();
        let c = coeffs
            .iter()
            .enumerate()
            .skip(kmax / 2)
            .map(|(j, w)| w.abs() * ((j + 1) as f64).powf(p))
            .fold(0.0, f64::max);
        let expo = 2.0 * p - 2.0 * alpha - 1.0;
        if c == 0.0 {
            0.0
        } else if expo <= 0.0 {
            f64::INFINITY
        } else {
            (c * c * (PI / x_len).powf(2.0 * alpha) * (kmax as f64 + 0.5).powf(-expo) / expo).sqrt()
        }
    });
    Ok(FractionalNorm { partial, tail })
}
