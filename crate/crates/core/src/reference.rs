//! Reference solutions of the continuous problem used to measure errors.
//!
//! * [`HarmonicReference`]: closed form for single-mode data.
//! * [`SpectralReference`]: truncated sine-series superposition of mode
//!   solutions, evaluated on the mesh by folding aliased modes and one DST-I.
//! * [`DAlembertReference`]: exact solution for `f = 0` and piecewise
//!   polynomial `u0`, `u1`, built from odd/even periodic extensions.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::data::{self, fractional_norm, hat_symbol, sine_coefficients, DataSpec, PiecewisePolynomial, Profile, TimeProfile};
use crate::error::{Error, Result};
use crate::grid::{GridFn, MeshSpec};
use crate::oracle::{exact_harmonic_solution, HarmonicDataKind};
use crate::quadrature::{poly_antiderivative, poly_eval, poly_trig_moments};
use crate::scheme::ExactSolution;

/// Multiplier of `q_{2h}` on `sin(omega x)`.
pub fn q2h_symbol(omega: f64, h: f64) -> f64 {
    let lam = (2.0 / h * (omega * h / 2.0).sin()).powi(2);
    hat_symbol(omega, h) * (1.0 + h * h * lam / 12.0)
}

/// Exact solution for `d_k^{(j)}`.
#[derive(Debug, Clone)]
pub struct HarmonicReference {
    pub kind: HarmonicDataKind,
    mesh: MeshSpec,
}

impl HarmonicReference {
    pub fn new(kind: HarmonicDataKind, mesh: &MeshSpec) -> Result<Self> {
        kind.validate()?;
        Ok(Self { kind, mesh: *mesh })
    }

    fn time_factor(&self, t: f64) -> Result<f64> {
        // Value at the crest of the space factor.
        let x = self.mesh.x_len() / (2.0 * self.kind.k as f64);
        exact_harmonic_solution(self.kind, &self.mesh, x, t)
    }

    fn slice_with(&self, mesh: &MeshSpec, m: usize, factor: f64) -> Result<GridFn> {
        let n = mesh.n();
        let omega = PI * self.kind.k as f64 / mesh.x_len();
        let tf = self.time_factor(mesh.t(m))? * factor;
        let mut out = vec![0.0; n + 1];
        for (i, o) in out.iter_mut().enumerate().take(n).skip(1) {
            *o = tf * (omega * mesh.x(i)).sin();
        }
        GridFn::from_values(out)
    }
}

impl ExactSolution for HarmonicReference {
    fn eval(&self, x: f64, t: f64) -> Result<f64> {
        exact_harmonic_solution(self.kind, &self.mesh, x, t)
    }

    fn node_slice(&self, mesh: &MeshSpec, m: usize) -> Result<GridFn> {
        self.slice_with(mesh, m, 1.0)
    }

    fn q2h_slice(&self, mesh: &MeshSpec, m: usize) -> Result<GridFn> {
        let omega = PI * self.kind.k as f64 / mesh.x_len();
        self.slice_with(mesh, m, q2h_symbol(omega, mesh.h()))
    }
}

/// Estimated size of the omitted modes `k > K`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TailEstimate {
    /// Fitted `p` in `A_k ~ C k^{-p}` for the mode amplitude envelope.
    pub decay_exponent: f64,
    /// Bound on `(||u_x||^2 + ||u_t||^2)^{1/2}` of the omitted modes, uniform in `t`.
    pub energy_tail: f64,
}

/// Truncated sine-series solution with `K` modes.
pub struct SpectralReference {
    x_len: f64,
    speed: f64,
    u0: Vec<f64>,
    u1: Vec<f64>,
    f_space: Vec<f64>,
    f_time: Option<TimeProfile>,
    plans: Mutex<HashMap<usize, Arc<dyn Fft<f64>>>>,
}

impl std::fmt::Debug for SpectralReference {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralReference").field("x_len", &self.x_len).field("modes", &self.u0.len()).finish()
    }
}

impl SpectralReference {
    pub fn new(data: &DataSpec, x_len: f64, speed: f64, modes: usize) -> Result<Self> {
        if modes == 0 {
            return Err(Error::config("spectral reference needs at least one mode"));
        }
        let (f_space, f_time) = match &data.f {
            None => (vec![0.0; modes], None),
            Some(f) => {
                if let TimeProfile::Callable(_) = f.time {
                    return Err(Error::config("spectral reference needs a harmonic or polynomial time profile"));
                }
                (sine_coefficients(&f.space, x_len, modes)?, Some(f.time.clone()))
            }
        };
        Ok(Self {
            x_len,
            speed,
            u0: sine_coefficients(&data.u0, x_len, modes)?,
            u1: sine_coefficients(&data.u1, x_len, modes)?,
            f_space,
            f_time,
            plans: Mutex::new(HashMap::new()),
        })
    }

    pub fn modes(&self) -> usize {
        self.u0.len()
    }

    fn omega(&self, k: usize) -> f64 {
        self.speed * PI * k as f64 / self.x_len
    }

    /// `int_0^t g(s) sin(w (t - s)) ds`.
    fn duhamel(g: &TimeProfile, w: f64, t: f64) -> f64 {
        match g {
            TimeProfile::HarmonicSin { omega } => {
                let (p, q) = (*omega, w);
                let sum = ((p * t).sin() + (q * t).sin()) / (p + q);
                // (sin pt - sin qt)/(p - q) = t cos((p+q)t/2) sinc((p-q)t/2)
                let z = 0.5 * (p - q) * t;
                let sinc = if z.abs() < 1e-8 { 1.0 - z * z / 6.0 } else { z.sin() / z };
                let diff = t * (0.5 * (p + q) * t).cos() * sinc;
                if p + q == 0.0 {
                    0.0
                } else {
                    0.5 * (sum - diff)
                }
            }
            TimeProfile::Polynomial { coeffs } => {
                let (c, s) = poly_trig_moments(coeffs, w, t);
                (w * t).sin() * c - (w * t).cos() * s
            }
            TimeProfile::Callable(_) => unreachable!("rejected at construction"),
        }
    }

    /// Orthonormal sine coefficients of `u(., t)`.
    pub fn amplitudes(&self, t: f64) -> Vec<f64> {
        (0..self.modes())
            .map(|j| {
                let w = self.omega(j + 1);
                let (s, c) = (w * t).sin_cos();
                let mut a = self.u0[j] * c + self.u1[j] * s / w;
                if let Some(g) = &self.f_time {
                    if self.f_space[j] != 0.0 {
                        a += self.f_space[j] * Self::duhamel(g, w, t) / w;
                    }
                }
                a
            })
            .collect()
    }

    fn plan(&self, len: usize) -> Arc<dyn Fft<f64>> {
        let mut plans = self.plans.lock().expect("plan cache poisoned");
        plans.entry(len).or_insert_with(|| FftPlanner::new().plan_fft_forward(len)).clone()
    }

    /// `sum_k c_k sqrt(2/X) sin(pi k x_i / X)` at the nodes of an `n`-cell mesh.
    pub fn synthesize(&self, coeffs: &[f64], n: usize) -> GridFn {
        let norm = (2.0 / self.x_len).sqrt();
        let period = 2 * n;
        let mut folded = vec![0.0; n];
        for (j, c) in coeffs.iter().enumerate() {
            let r = (j + 1) % period;
            if r == 0 || r == n {
                continue;
            }
            if r < n {
                folded[r] += c;
            } else {
                folded[period - r] -= c;
            }
        }
        let mut buf = vec![Complex::new(0.0, 0.0); period];
        for r in 1..n {
            buf[r] = Complex::new(folded[r], 0.0);
            buf[period - r] = Complex::new(-folded[r], 0.0);
        }
        self.plan(period).process(&mut buf);
        let mut out = vec![0.0; n + 1];
        for i in 1..n {
            out[i] = -0.5 * buf[i].im * norm;
        }
        GridFn::from_values(out).expect("n >= 2")
    }

    /// Tail bound of the omitted modes from the fitted decay of the mode
    /// amplitude envelope `|a_k| + |b_k|/w_k + |c_k| ||g||_{L^1}/w_k`.
    pub fn tail_estimate(&self, t_final: f64) -> Result<TailEstimate> {
        let g_l1 = match &self.f_time {
            Some(g) => g.l1_norm(t_final)?,
            None => 0.0,
        };
        let env: Vec<f64> = (0..self.modes())
            .map(|j| {
                let w = self.omega(j + 1);
                self.u0[j].abs() + self.u1[j].abs() / w + self.f_space[j].abs() * g_l1 / w
            })
            .collect();
        let peak = env.iter().fold(0.0f64, |a, v| a.max(*v));
        let pts: Vec<(f64, f64)> = env
            .iter()
            .enumerate()
            .skip(self.modes() / 2)
            .filter(|(_, v)| **v > 1e-13 * peak)
            .map(|(j, v)| (((j + 1) as f64).ln(), v.ln()))
            .collect();
        if peak == 0.0 || pts.is_empty() {
            return Ok(TailEstimate { decay_exponent: f64::INFINITY, energy_tail: 0.0 });
        }
        let p = if pts.len() >= 2 {
            let n = pts.len() as f64;
            let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
            let (mx, my) = (sx / n, sy / n);
            let (sxy, sxx) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + (x - mx) * (y - my), b + (x - mx).powi(2)));
            -sxy / sxx
        } else {
            0.0
        };
        let tail = fractional_norm(&env, 1.0, self.x_len, Some(p))?.tail.unwrap_or(f64::INFINITY);
        Ok(TailEstimate { decay_exponent: p, energy_tail: tail * (1.0 + self.speed) })
    }
}

impl ExactSolution for SpectralReference {
    fn eval(&self, x: f64, t: f64) -> Result<f64> {
        let norm = (2.0 / self.x_len).sqrt();
        Ok(self
            .amplitudes(t)
            .iter()
            .enumerate()
            .map(|(j, a)| a * norm * (PI * (j + 1) as f64 * x / self.x_len).sin())
            .sum())
    }

    fn node_slice(&self, mesh: &MeshSpec, m: usize) -> Result<GridFn> {
        Ok(self.synthesize(&self.amplitudes(mesh.t(m)), mesh.n()))
    }

    fn q2h_slice(&self, mesh: &MeshSpec, m: usize) -> Result<GridFn> {
        let h = mesh.h();
        let amps: Vec<f64> = self
            .amplitudes(mesh.t(m))
            .iter()
            .enumerate()
            .map(|(j, a)| a * q2h_symbol(PI * (j + 1) as f64 / self.x_len, h))
            .collect();
        Ok(self.synthesize(&amps, mesh.n()))
    }
}

/// Coefficients of `p(delta + sign * xi)` in `xi`.
fn poly_shift(coeffs: &[f64], delta: f64, sign: f64) -> Vec<f64> {
    let mut c = coeffs.to_vec();
    let d = c.len();
    // Repeated synthetic division gives the Taylor coefficients at delta.
    for i in 0..d {
        for j in (i..d - 1).rev() {
            c[j] += delta * c[j + 1];
        }
    }
    let mut s = 1.0;
    for v in c.iter_mut() {
        *v *= s;
        s *= sign;
    }
    c
}

/// A piecewise polynomial on `[0, X]` extended to the line with period `2X`,
/// oddly (`w(-x) = -w(x)`) or evenly.
#[derive(Debug, Clone)]
struct Extension {
    base: PiecewisePolynomial,
    odd: bool,
    x_len: f64,
}

impl Extension {
    /// `x -> ext(x + s)` on `[0, X]` as a piecewise polynomial.
    fn shifted(&self, s: f64) -> PiecewisePolynomial {
        let x_len = self.x_len;
        let period = 2.0 * x_len;
        let snap = 1e-13 * x_len;
        let b = &self.base.breakpoints;
        let mut cuts = vec![s, s + x_len];
        let q0 = (s / period).floor() as i64 - 1;
        for q in q0..=q0 + 2 {
            let off = q as f64 * period;
            for &bp in b {
                for y in [off + bp, off + period - bp] {
                    if y > s + snap && y < s + x_len - snap {
                        cuts.push(y);
                    }
                }
            }
        }
        cuts.sort_by(|a, c| a.partial_cmp(c).expect("finite cuts"));
        cuts.dedup_by(|a, c| (*a - *c).abs() <= snap);
        let mut breakpoints = Vec::with_capacity(cuts.len());
        let mut pieces = Vec::with_capacity(cuts.len());
        for w in cuts.windows(2) {
            let (ya, yb) = (w[0], w[1]);
            let mid = 0.5 * (ya + yb);
            let r = mid.rem_euclid(period);
            let base_a = ya - (mid - r);
            let (piece, coeffs) = if r <= x_len {
                let j = self.locate(r);
                (j, poly_shift(&self.base.pieces[j], base_a - b[j], 1.0))
            } else {
                let z = period - r;
                let j = self.locate(z);
                let mut c = poly_shift(&self.base.pieces[j], period - base_a - b[j], -1.0);
                if self.odd {
                    c.iter_mut().for_each(|v| *v = -*v);
                }
                (j, c)
            };
            let _ = piece;
            breakpoints.push(ya - s);
            pieces.push(coeffs);
        }
        breakpoints[0] = 0.0;
        breakpoints.push(x_len);
        PiecewisePolynomial { breakpoints, pieces, node_convention: self.base.node_convention }
    }

    fn locate(&self, r: f64) -> usize {
        let b = &self.base.breakpoints;
        b[1..].partition_point(|&bp| bp < r).min(self.base.pieces.len() - 1)
    }
}

fn as_piecewise(p: &Profile, x_len: f64) -> Result<PiecewisePolynomial> {
    match p {
        Profile::Zero => Ok(PiecewisePolynomial::new(vec![0.0, x_len], vec![vec![0.0]])),
        Profile::PiecewisePolynomial(pp) => {
            p.validate(x_len)?;
            Ok(pp.clone())
        }
        _ => Err(Error::config("exact reference needs piecewise-polynomial or zero data")),
    }
}

/// Exact solution `u = (U0(x+at) + U0(x-at))/2 + (W(x+at) - W(x-at))/(2a)`
/// with `U0` the odd and `W` the even `2X`-periodic extensions of `u0` and
/// `int_0^x u1`.
#[derive(Debug, Clone)]
pub struct DAlembertReference {
    u0: Extension,
    w: Extension,
    speed: f64,
}

impl DAlembertReference {
    pub fn new(data: &DataSpec, x_len: f64, speed: f64) -> Result<Self> {
        if data.f.is_some() {
            return Err(Error::config("exact reference needs f = 0"));
        }
        let u0 = as_piecewise(&data.u0, x_len)?;
        let u1 = as_piecewise(&data.u1, x_len)?;
        let mut w_pieces = Vec::with_capacity(u1.pieces.len());
        let mut acc = 0.0;
        for (j, p) in u1.pieces.iter().enumerate() {
            let mut anti = poly_antiderivative(p);
            anti[0] = acc;
            acc = poly_eval(&anti, u1.breakpoints[j + 1] - u1.breakpoints[j]);
            w_pieces.push(anti);
        }
        let w = PiecewisePolynomial { breakpoints: u1.breakpoints.clone(), pieces: w_pieces, node_convention: Default::default() };
        Ok(Self { u0: Extension { base: u0, odd: true, x_len }, w: Extension { base: w, odd: false, x_len }, speed })
    }

    /// The four shifted parts and their weights at time `t`.
    fn parts(&self, t: f64) -> [(PiecewisePolynomial, f64); 4] {
        let s = self.speed * t;
        let c = 0.5 / self.speed;
        [
            (self.u0.shifted(s), 0.5),
            (self.u0.shifted(-s), 0.5),
            (self.w.shifted(s), c),
            (self.w.shifted(-s), -c),
        ]
    }

    /// `u(., t)` as one profile per part, for use with the data averages.
    fn combine(&self, t: f64, f: impl Fn(&Profile) -> Result<GridFn>) -> Result<GridFn> {
        let mut total: Option<GridFn> = None;
        for (pp, weight) in self.parts(t) {
            let g = f(&Profile::PiecewisePolynomial(pp))?.scale(weight);
            total = Some(match total {
                None => g,
                Some(acc) => acc.add(&g),
            });
        }
        Ok(total.expect("four parts"))
    }
}

impl ExactSolution for DAlembertReference {
    fn eval(&self, x: f64, t: f64) -> Result<f64> {
        let x_len = self.u0.x_len;
        self.parts(t)
            .iter()
            .map(|(pp, w)| Ok(w * Profile::PiecewisePolynomial(pp.clone()).eval(x, x_len)?))
            .sum()
    }

    fn node_slice(&self, mesh: &MeshSpec, m: usize) -> Result<GridFn> {
        let n = mesh.n();
        let mut g = self.combine(mesh.t(m), |p| p.samples(mesh))?;
        g.values_mut()[0] = 0.0;
        g.values_mut()[n] = 0.0;
        Ok(g)
    }

    fn q2h_slice(&self, mesh: &MeshSpec, m: usize) -> Result<GridFn> {
        self.combine(mesh.t(m), |p| data::average_q2h(p, mesh))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Forcing;
    use approx::assert_relative_eq;

    fn hat(x_len: f64) -> Profile {
        Profile::PiecewisePolynomial(PiecewisePolynomial::new(
            vec![0.0, x_len / 2.0, x_len],
            vec![vec![0.0, 1.0], vec![x_len / 2.0, -1.0]],
        ))
    }

    fn step(x_len: f64) -> Profile {
        Profile::PiecewisePolynomial(PiecewisePolynomial::new(vec![0.0, x_len / 2.0, x_len], vec![vec![1.0], vec![0.0]]))
    }

    #[test]
    fn poly_shift_matches_evaluation() {
        let p = [0.5, -1.0, 2.0, 0.25];
        for &(d, s) in &[(0.3, 1.0), (-1.2, -1.0), (2.0, 1.0)] {
            let q = poly_shift(&p, d, s);
            for &xi in &[0.0, 0.4, 1.7] {
                assert_relative_eq!(poly_eval(&q, xi), poly_eval(&p, d + s * xi), max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn synthesis_matches_direct_sum() {
        let x_len = 2.0;
        let coeffs: Vec<f64> = (1..=37).map(|k| (k as f64).recip() * if k % 3 == 0 { -1.0 } else { 1.0 }).collect();
        let data = DataSpec { u0: Profile::SineSeries { coeffs: coeffs.clone() }, u1: Profile::Zero, f: None };
        let r = SpectralReference::new(&data, x_len, 1.0, 37).unwrap();
        let g = r.synthesize(&coeffs, 8);
        for i in 1..8 {
            let x = x_len * i as f64 / 8.0;
            let direct: f64 = coeffs
                .iter()
                .enumerate()
                .map(|(j, c)| c * (2.0 / x_len).sqrt() * (PI * (j + 1) as f64 * x / x_len).sin())
                .sum();
            assert!((g.values()[i] - direct).abs() < 1e-13, "i={i}");
        }
    }

    #[test]
    fn spectral_single_mode_is_exact() {
        let mesh = MeshSpec::build(PI, PI, 16, 64, 1.0, 1.0).unwrap();
        for j in 0..3u8 {
            let kind = HarmonicDataKind::new(j, 3).unwrap();
            let data = kind.to_data_spec(&mesh).unwrap();
            let spec = SpectralReference::new(&data, PI, 1.0, 40).unwrap();
            let exact = HarmonicReference::new(kind, &mesh).unwrap();
            for m in [0usize, 7, 64] {
                let a = spec.node_slice(&mesh, m).unwrap();
                let b = exact.node_slice(&mesh, m).unwrap();
                assert!(a.sub(&b).max_abs() < 1e-13, "j={j} m={m}");
                let a = spec.q2h_slice(&mesh, m).unwrap();
                let b = exact.q2h_slice(&mesh, m).unwrap();
                assert!(a.sub(&b).max_abs() < 1e-13, "j={j} m={m}");
            }
        }
    }

    #[test]
    fn harmonic_q2h_matches_quadrature_default() {
        let mesh = MeshSpec::build(2.0, 1.0, 12, 24, 1.5, 1.0).unwrap();
        let kind = HarmonicDataKind::new(2, 3).unwrap();
        let r = HarmonicReference::new(kind, &mesh).unwrap();
        struct Plain<'a>(&'a HarmonicReference);
        impl ExactSolution for Plain<'_> {
            fn eval(&self, x: f64, t: f64) -> Result<f64> {
                self.0.eval(x, t)
            }
        }
        for m in [3usize, 24] {
            let a = r.q2h_slice(&mesh, m).unwrap();
            let b = Plain(&r).q2h_slice(&mesh, m).unwrap();
            assert!(a.sub(&b).max_abs() < 1e-13);
        }
    }

    #[test]
    fn dalembert_matches_spectral_for_smooth_modes() {
        // Piecewise-cubic data agree with their own converged sine series.
        let x_len = 3.0;
        let u0 = Profile::PiecewisePolynomial(PiecewisePolynomial::new(vec![0.0, x_len], vec![vec![0.0, x_len * x_len, 0.0, -1.0]]));
        let data = DataSpec { u0, u1: hat(x_len), f: None };
        let exact = DAlembertReference::new(&data, x_len, 1.3).unwrap();
        let spec = SpectralReference::new(&data, x_len, 1.3, 4000).unwrap();
        for &(x, t) in &[(0.4, 0.0), (1.1, 0.7), (2.9, 2.5), (1.5, 7.3)] {
            let e = exact.eval(x, t).unwrap();
            let s = spec.eval(x, t).unwrap();
            assert!((e - s).abs() < 1e-6, "({x}, {t}): {e} vs {s}");
        }
    }

    #[test]
    fn dalembert_solves_the_initial_value_problem() {
        let x_len = 2.0;
        let data = DataSpec { u0: hat(x_len), u1: step(x_len), f: None };
        let r = DAlembertReference::new(&data, x_len, 1.0).unwrap();
        for &x in &[0.3, 1.0, 1.7] {
            assert_relative_eq!(r.eval(x, 0.0).unwrap(), x.min(x_len - x), max_relative = 1e-14);
            let d = 1e-6;
            let v = (r.eval(x, d).unwrap() - r.eval(x, -d).unwrap()) / (2.0 * d);
            let expected = if x < 1.0 { 1.0 } else if x > 1.0 { 0.0 } else { 0.5 };
            assert!((v - expected).abs() < 1e-8, "x={x}: {v}");
        }
        // Dirichlet ends for all times; period 2X / a in time.
        for &t in &[0.37, 1.9, 5.2] {
            assert!(r.eval(0.0, t).unwrap().abs() < 1e-14);
            assert!(r.eval(x_len, t).unwrap().abs() < 1e-14);
            assert!((r.eval(0.77, t).unwrap() - r.eval(0.77, t + 4.0).unwrap()).abs() < 1e-13);
        }
    }

    #[test]
    fn spectral_tail_is_reported() {
        let data = DataSpec { u0: hat(PI), u1: step(PI), f: None };
        let small = SpectralReference::new(&data, PI, 1.0, 256).unwrap().tail_estimate(PI).unwrap();
        let large = SpectralReference::new(&data, PI, 1.0, 1024).unwrap().tail_estimate(PI).unwrap();
        assert!((small.decay_exponent - 2.0).abs() < 0.05, "{}", small.decay_exponent);
        assert!(large.energy_tail < small.energy_tail);
        assert!((small.energy_tail / large.energy_tail - 2.0).abs() < 0.2);
    }

    #[test]
    fn forced_spectral_modes() {
        // u = sin(x) t^2 / 2 solves u_tt - u_xx = sin(x) (1 + t^2/2).
        let data = DataSpec {
            u0: Profile::Zero,
            u1: Profile::Zero,
            f: Some(Forcing { space: Profile::harmonic(1), time: TimeProfile::Polynomial { coeffs: vec![1.0, 0.0, 0.5] } }),
        };
        let r = SpectralReference::new(&data, PI, 1.0, 4).unwrap();
        for &(x, t) in &[(0.5, 0.3), (2.0, 2.2)] {
            assert_relative_eq!(r.eval(x, t).unwrap(), x.sin() * t * t / 2.0, max_relative = 1e-12);
        }
        // Resonant harmonic forcing: u = (sin t - t cos t)/2 sin x.
        let res = DataSpec {
            u0: Profile::Zero,
            u1: Profile::Zero,
            f: Some(Forcing { space: Profile::harmonic(1), time: TimeProfile::HarmonicSin { omega: 1.0 } }),
        };
        let r = SpectralReference::new(&res, PI, 1.0, 2).unwrap();
        let t: f64 = 1.3;
        assert_relative_eq!(r.eval(PI / 2.0, t).unwrap(), 0.5 * (t.sin() - t * t.cos()), max_relative = 1e-12);
        let callable = DataSpec {
            u0: Profile::Zero,
            u1: Profile::Zero,
            f: Some(Forcing { space: Profile::harmonic(1), time: TimeProfile::Callable(crate::data::Callable::new(|t| t)) }),
        };
        assert!(matches!(SpectralReference::new(&callable, PI, 1.0, 2), Err(Error::Config(_))));
    }
}
