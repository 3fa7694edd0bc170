//! Closed-form exact and discrete solutions for single-mode data.
//!
//! All formulas are written for `X = pi`, `a = 1`. A general mesh is mapped to
//! these coordinates by `x' = pi x / X`, `t' = a pi t / X`; the scheme is
//! invariant under this map when the physical data are
//!
//! ```text
//! j = 0:  u0 = sin(pi k x / X)
//! j = 1:  u1 = (a pi / X) sin(pi k x / X)
//! j = 2:  f  = (a pi / X)^2 sin(pi k x / X) sin((k - 1) a pi t / X)
//! ```

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::data::{DataSpec, Forcing, Profile, TimeProfile, U1Variant};
use crate::error::{Error, Result};
use crate::grid::{GridFn, MeshSpec, Trajectory};
use crate::quadrature::poly_trig_moments;

/// Per-mode dispersion quantities in oracle coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersionRecord {
    pub k: usize,
    pub lambda_k: f64,
    pub phi_k: f64,
    pub mu_k: f64,
    pub nu_h: f64,
}

/// Amplitudes of the discrete single-mode solutions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarmonicCoefficients {
    pub a_1k: f64,
    pub gamma_hat_1k: f64,
    pub gamma_1k: f64,
}

/// Single-mode data `d_k^{(j)}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HarmonicDataKind {
    pub j: u8,
    pub k: usize,
}

impl HarmonicDataKind {
    pub fn new(j: u8, k: usize) -> Result<Self> {
        let kind = Self { j, k };
        kind.validate()?;
        Ok(kind)
    }

    pub fn validate(&self) -> Result<()> {
        if self.j > 2 {
            return Err(Error::contract(format!("harmonic data index j must be 0, 1 or 2, got {}", self.j)));
        }
        if self.k < 1 {
            return Err(Error::contract("harmonic mode k must be >= 1"));
        }
        if self.j == 2 && self.k < 2 {
            return Err(Error::contract("forcing data j = 2 needs k >= 2 (k = 1 is resonant)"));
        }
        Ok(())
    }

    /// The physical data descriptor on `mesh`.
    pub fn to_data_spec(&self, mesh: &MeshSpec) -> Result<DataSpec> {
        self.validate()?;
        let scale = time_scale(mesh);
        let k = self.k;
        Ok(match self.j {
            0 => DataSpec { u0: Profile::harmonic(k), u1: Profile::Zero, f: None },
            1 => DataSpec { u0: Profile::Zero, u1: Profile::Harmonic { k, amplitude: scale }, f: None },
            _ => DataSpec {
                u0: Profile::Zero,
                u1: Profile::Zero,
                f: Some(Forcing {
                    space: Profile::Harmonic { k, amplitude: scale * scale },
                    time: TimeProfile::HarmonicSin { omega: (k - 1) as f64 * scale },
                }),
            },
        })
    }
}

/// `a pi / X`: oracle time per physical time.
fn time_scale(mesh: &MeshSpec) -> f64 {
    mesh.speed() * PI / mesh.x_len()
}

/// `(h', tau')` in oracle coordinates.
pub fn oracle_steps(mesh: &MeshSpec) -> (f64, f64) {
    (PI * mesh.h() / mesh.x_len(), time_scale(mesh) * mesh.tau())
}

/// `nu_h = (h^4 - tau^4) / 480`.
pub fn nu(h: f64, tau: f64) -> f64 {
    (h.powi(4) - tau.powi(4)) / 480.0
}

fn check_mode(k: usize, mesh: &MeshSpec) -> Result<()> {
    if k < 1 || k >= mesh.n() {
        return Err(Error::contract(format!("mode k = {k} outside 1..={}", mesh.n() - 1)));
    }
    Ok(())
}

/// `lambda_k`, `phi_k`, `mu_k` and `nu_h`.
pub fn dispersion(k: usize, mesh: &MeshSpec) -> Result<DispersionRecord> {
    check_mode(k, mesh)?;
    mesh.require_stable()?;
    let (h, tau) = oracle_steps(mesh);
    let kf = k as f64;
    let lambda = (2.0 / h * (kf * h / 2.0).sin()).powi(2);
    let denom = 1.0 + (tau * tau - h * h) * lambda / 12.0;
    let sigma = (1.0 + h * h / (tau * tau)) / 12.0;
    let full = 1.0 - h * h * lambda / 6.0 + tau * tau * sigma * lambda;
    if (denom - full).abs() > 1e-12 * denom.abs().max(full.abs()) {
        return Err(Error::Invariant(format!("dispersion denominators disagree: {denom} vs {full}")));
    }
    let phi = (lambda / denom).sqrt();
    let arg = tau * phi / 2.0;
    if !(arg > 0.0 && arg < 1.0) {
        return Err(Error::Invariant(format!("arcsin argument {arg} outside (0, 1) for k = {k}")));
    }
    Ok(DispersionRecord { k, lambda_k: lambda, phi_k: phi, mu_k: 2.0 / tau * arg.asin(), nu_h: nu(h, tau) })
}

/// `a_1k` per variant and the two `tan` amplitudes.
pub fn harmonic_coefficients(k: usize, mesh: &MeshSpec, variant: U1Variant) -> Result<HarmonicCoefficients> {
    let d = dispersion(k, mesh)?;
    let (h, tau) = oracle_steps(mesh);
    let (kf, lam) = (k as f64, d.lambda_k);
    let a_1k = match variant {
        U1Variant::V0 => 1.0 - (h * h + tau * tau) * lam / 12.0,
        U1Variant::V1 => lam / (kf * kf) * (1.0 - tau * tau * kf * kf / 12.0),
        U1Variant::V2 => lam / (kf * kf) * (1.0 - tau * tau * lam / 12.0),
    };
    let half = d.mu_k * tau / 2.0;
    if !(half < PI / 2.0) {
        return Err(Error::Invariant(format!("mu_k tau / 2 = {half} reaches the tangent pole")));
    }
    let t = half.tan();
    Ok(HarmonicCoefficients {
        a_1k,
        gamma_hat_1k: a_1k * 2.0 * kf / (lam * tau) * t,
        gamma_1k: 2.0 / (kf * tau) * t,
    })
}

/// `y^{(kappa)}(t)` for the forcing `sin((k - 1) t)`, `kappa = k`.
fn forced_exact(k: usize, t: f64) -> f64 {
    let (w, kap) = ((k - 1) as f64, k as f64);
    let (sw, sk) = ((w * t).sin(), (kap * t).sin());
    -0.5 * (sw - sk) / (w - kap) + 0.5 * (sw + sk) / (w + kap)
}

/// `u(x, t)` for `d_k^{(j)}` on the physical mesh.
pub fn exact_harmonic_solution(kind: HarmonicDataKind, mesh: &MeshSpec, x: f64, t: f64) -> Result<f64> {
    kind.validate()?;
    let xs = PI * x / mesh.x_len();
    let ts = time_scale(mesh) * t;
    let k = kind.k as f64;
    let space = (k * xs).sin();
    Ok(match kind.j {
        0 => (k * ts).cos() * space,
        1 => (k * ts).sin() / k * space,
        _ => forced_exact(kind.k, ts) / k * space,
    })
}

/// Time factors `T(m)` of the discrete solution `v_i^m = T(m) sin(pi k x_i / X)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteHarmonic {
    pub kind: HarmonicDataKind,
    pub variant: U1Variant,
    pub mesh: MeshSpec,
    pub dispersion: DispersionRecord,
    pub coefficients: HarmonicCoefficients,
    time: Vec<f64>,
}

impl DiscreteHarmonic {
    pub fn new(kind: HarmonicDataKind, mesh: &MeshSpec, variant: U1Variant) -> Result<Self> {
        kind.validate()?;
        let d = dispersion(kind.k, mesh)?;
        let c = harmonic_coefficients(kind.k, mesh, variant)?;
        let (_, tau) = oracle_steps(mesh);
        let k = kind.k as f64;
        let mu = d.mu_k;
        let time = match kind.j {
            0 => (0..=mesh.m()).map(|m| (mu * tau * m as f64).cos()).collect(),
            1 => (0..=mesh.m()).map(|m| c.gamma_hat_1k / k * (mu * tau * m as f64).sin()).collect(),
            _ => {
                let y = interpolated_convolution((kind.k - 1) as f64, mu, tau, mesh.m());
                y.into_iter().map(|v| c.gamma_1k / k * v).collect()
            }
        };
        Ok(Self { kind, variant, mesh: *mesh, dispersion: d, coefficients: c, time })
    }

    pub fn time_factor(&self, m: usize) -> f64 {
        self.time[m]
    }

    pub fn value(&self, i: usize, m: usize) -> f64 {
        if i == 0 || i >= self.mesh.n() {
            return 0.0;
        }
        self.time[m] * (PI * self.kind.k as f64 * i as f64 / self.mesh.n() as f64).sin()
    }

    pub fn slice(&self, m: usize) -> GridFn {
        let n = self.mesh.n();
        GridFn::from_values((0..=n).map(|i| self.value(i, m)).collect()).expect("n >= 2")
    }

    pub fn trajectory(&self) -> Trajectory {
        Trajectory { mesh: self.mesh, slices: (0..=self.mesh.m()).map(|m| self.slice(m)).collect() }
    }
}

/// `y(t_m) = int_0^{t_m} sin(w theta) I_m(theta) d theta`, `m = 0..=M`, where
/// `I_m` interpolates `sin(mu (t_m - theta))` linearly between time nodes.
fn interpolated_convolution(w: f64, mu: f64, tau: f64, steps: usize) -> Vec<f64> {
    // Moments on [0, tau]: int cos(w s), int s cos(w s), int sin(w s), int s sin(w s).
    let (c0, s0) = poly_trig_moments(&[1.0], w, tau);
    let (c1, s1) = poly_trig_moments(&[0.0, 1.0], w, tau);
    let nodes: Vec<(f64, f64)> = (0..=steps).map(|j| (w * tau * j as f64).sin_cos()).collect();
    let kernel: Vec<f64> = (0..=steps).map(|d| (mu * tau * d as f64).sin()).collect();
    (0..=steps)
        .map(|m| {
            (0..m)
                .map(|j| {
                    let (sj, cj) = nodes[j];
                    let a0 = kernel[m - j];
                    let slope = (kernel[m - j - 1] - a0) / tau;
                    // sin(w (t_j + s)) = sin(w t_j) cos(w s) + cos(w t_j) sin(w s)
                    sj * (a0 * c0 + slope * c1) + cj * (a0 * s0 + slope * s1)
                })
                .sum()
        })
        .collect()
}

/// `v_i^m` of the scheme for `d_k^{(j)}`; builds the full time table, so
/// prefer [`DiscreteHarmonic`] for repeated queries.
pub fn discrete_harmonic_solution(kind: HarmonicDataKind, mesh: &MeshSpec, variant: U1Variant, i: usize, m: usize) -> Result<f64> {
    if m > mesh.m() || i > mesh.n() {
        return Err(Error::contract(format!("node ({i}, {m}) outside the mesh")));
    }
    Ok(DiscreteHarmonic::new(kind, mesh, variant)?.value(i, m))
}

/// Sharpness frequency for a given `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KhChoice {
    pub k_h: usize,
    pub rho_h: f64,
    pub nu_h: f64,
    /// `mu_{k_h} - (k_h - alpha)`.
    pub frequency_shift: f64,
}

/// `(k_h, rho_h, nu_h)` with `rho_h = (alpha / nu_h)^{1/5}` and
/// `k_h = floor(rho_h) + 1`, in oracle units.
pub fn k_h_for(alpha: f64, h: f64, tau: f64) -> Result<(usize, f64, f64)> {
    if !(alpha > 0.0) {
        return Err(Error::contract(format!("alpha must be positive, got {alpha}")));
    }
    let nu_h = nu(h, tau);
    if !(nu_h > 0.0) {
        return Err(Error::contract("nu_h must be positive (tau < h)"));
    }
    let rho = (alpha / nu_h).powf(0.2);
    Ok((rho.floor() as usize + 1, rho, nu_h))
}

/// Sharpness frequency on `mesh`; fails when `k_h > N - 1`.
pub fn choose_k_h(alpha: f64, mesh: &MeshSpec) -> Result<KhChoice> {
    mesh.require_stable()?;
    let (h, tau) = oracle_steps(mesh);
    let (k_h, rho_h, nu_h) = k_h_for(alpha, h, tau)?;
    let max_k = mesh.n() - 1;
    if k_h > max_k {
        let ratio = tau / h;
        let min_n = (mesh.n() + 1..)
            .find(|&n| {
                let hn = PI / n as f64;
                matches!(k_h_for(alpha, hn, ratio * hn), Ok((k, _, _)) if k < n)
            })
            .expect("k_h grows slower than N");
        return Err(Error::MeshTooCoarse { k_h, max_k, min_n });
    }
    let d = dispersion(k_h, mesh)?;
    Ok(KhChoice { k_h, rho_h, nu_h, frequency_shift: d.mu_k - (k_h as f64 - alpha) })
}

/// `c_0(T) = c_1(T) = 2 (2 K_T + 1 - cos(T - K_T pi))`, `c_2(T) = T - sin T`.
pub fn asymptotic_constant(j: u8, t_final: f64) -> Result<f64> {
    if !(t_final > 0.0) {
        return Err(Error::contract("T must be positive"));
    }
    match j {
        0 | 1 => {
            let kt = (t_final / PI).floor();
            Ok(2.0 * (2.0 * kt + 1.0 - (t_final - kt * PI).cos()))
        }
        2 => Ok(t_final - t_final.sin()),
        _ => Err(Error::contract(format!("j must be 0, 1 or 2, got {j}"))),
    }
}

/// Leading term `k^{-p_j + l} (4/pi) c_j(T)` of the mesh `L^1(Q)` error norm of
/// `dbar_x^l (u - v)`, with `p_0 = 0`, `p_1 = p_2 = 1`.
pub fn sharpness_prediction(j: u8, l: u8, k: usize, t_final: f64) -> Result<f64> {
    if l > 1 {
        return Err(Error::contract(format!("l must be 0 or 1, got {l}")));
    }
    if j == 2 && k < 2 {
        return Err(Error::contract("j = 2 needs k >= 2"));
    }
    let p: i32 = if j == 0 { 0 } else { 1 };
    Ok((k as f64).powi(l as i32 - p) * 4.0 / PI * asymptotic_constant(j, t_final)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn pi_mesh(n: usize, m: usize) -> MeshSpec {
        MeshSpec::build(PI, PI, n, m, 1.0, 1.0).unwrap()
    }

    #[test]
    fn lambda_on_two_cells() {
        let mesh = MeshSpec::build(PI, PI, 2, 4, 1.0, 1.0).unwrap();
        let d = dispersion(1, &mesh).unwrap();
        assert_relative_eq!(d.lambda_k, 8.0 / (PI * PI), max_relative = 1e-14);
        assert!((d.lambda_k - 0.81057).abs() < 1e-5);
        assert!(dispersion(2, &mesh).is_err());
        assert!(dispersion(0, &mesh).is_err());
    }

    #[test]
    fn small_kh_frequency() {
        let h = PI / 64.0;
        let mesh = pi_mesh(64, 128);
        let d = dispersion(1, &mesh).unwrap();
        assert_relative_eq!(d.nu_h, h.powi(4) * (1.0 - 1.0 / 16.0) / 480.0, max_relative = 1e-12);
        assert!((d.nu_h - 1.134e-8).abs() < 1e-11, "{}", d.nu_h);
        assert!((d.mu_k - (1.0 - d.nu_h)).abs() < 10.0 * h.powi(6));
        let mesh = pi_mesh(64, 256);
        let d = dispersion(1, &mesh).unwrap();
        assert_relative_eq!(d.nu_h, h.powi(4) * (1.0 - 1.0 / 256.0) / 480.0, max_relative = 1e-12);
        assert!((d.mu_k - (1.0 - d.nu_h)).abs() < 10.0 * h.powi(6));
    }

    #[test]
    fn mu_is_comparable_to_k() {
        for &(n, m) in &[(16usize, 32usize), (64, 128), (128, 512), (50, 71)] {
            let mesh = pi_mesh(n, m);
            for k in 1..n {
                let d = dispersion(k, &mesh).unwrap();
                let r = d.mu_k / k as f64;
                assert!((0.5..=1.5).contains(&r), "N={n} k={k} ratio {r}");
            }
        }
    }

    #[test]
    fn phi_bounds_hold_under_stability() {
        for &(n, m, eps0) in &[(16usize, 24usize, 1.0), (32, 40, 0.5), (64, 65, 0.1)] {
            let mesh = MeshSpec::build(PI, PI, n, m, 1.0, eps0).unwrap();
            let tau = mesh.tau();
            let e1 = eps0 * eps0 / (3.0 * (1.0 - eps0 * eps0 / 2.0));
            for k in 1..n {
                let d = dispersion(k, &mesh).unwrap();
                let x = tau * d.phi_k / 2.0;
                let lower = tau / 2.0 * d.lambda_k.sqrt();
                let upper = (1.0 / (1.0 + e1).sqrt()).min(1.5f64.sqrt() * lower);
                assert!(lower <= x * (1.0 + 1e-12) && x <= upper * (1.0 + 1e-12) && x < 1.0, "N={n} k={k} {lower} {x} {upper}");
            }
        }
    }

    #[test]
    fn coefficients_tend_to_one() {
        let mesh = pi_mesh(256, 1024);
        for v in U1Variant::ALL {
            let c = harmonic_coefficients(1, &mesh, v).unwrap();
            assert!((c.a_1k - 1.0).abs() < 1e-4);
            assert!((c.gamma_hat_1k - 1.0).abs() < 1e-4);
            assert!((c.gamma_1k - 1.0).abs() < 1e-4);
        }
        let coarse = pi_mesh(8, 32);
        let c0 = harmonic_coefficients(3, &coarse, U1Variant::V0).unwrap();
        let c1 = harmonic_coefficients(3, &coarse, U1Variant::V1).unwrap();
        assert!((c0.a_1k - c1.a_1k).abs() > 1e-6);
    }

    #[test]
    fn v2_coefficient_matches_operator_application() {
        let mesh = pi_mesh(8, 32);
        let c = harmonic_coefficients(3, &mesh, U1Variant::V2).unwrap();
        let u = crate::data::build_u1h(U1Variant::V2, &Profile::harmonic(3), &mesh).unwrap();
        let i = 1;
        assert_relative_eq!(u.values()[i] / (3.0 * mesh.x(i)).sin(), c.a_1k, max_relative = 1e-12);
    }

    #[test]
    fn exact_solution_examples() {
        let mesh = pi_mesh(8, 16);
        let x = 0.7;
        let k0 = HarmonicDataKind::new(0, 4).unwrap();
        assert_relative_eq!(exact_harmonic_solution(k0, &mesh, x, 0.0).unwrap(), (4.0 * x).sin());
        let k1 = HarmonicDataKind::new(1, 1).unwrap();
        assert_relative_eq!(exact_harmonic_solution(k1, &mesh, x, 1.1).unwrap(), 1.1f64.sin() * x.sin(), max_relative = 1e-15);
        let k2 = HarmonicDataKind::new(2, 2).unwrap();
        let v = exact_harmonic_solution(k2, &mesh, x, PI / 2.0).unwrap();
        assert_relative_eq!(v, 0.5 * (2.0 / 3.0) * (2.0 * x).sin(), max_relative = 1e-14);
        assert!(HarmonicDataKind::new(2, 1).is_err());
        assert!(HarmonicDataKind::new(3, 2).is_err());
    }

    #[test]
    fn forced_solution_solves_the_ode() {
        // y'' + k^2 y = k sin((k-1) t), y(0) = y'(0) = 0 for y = k * forced_exact / k.
        let k = 5;
        let y = |t: f64| forced_exact(k, t);
        let (t, d) = (0.9, 1e-4);
        let ypp = (y(t + d) - 2.0 * y(t) + y(t - d)) / (d * d);
        let kf = k as f64;
        assert!((ypp + kf * kf * y(t) - kf * ((kf - 1.0) * t).sin()).abs() < 1e-6);
        assert!(y(0.0).abs() < 1e-15);
    }

    #[test]
    fn discrete_first_level_matches_cosine() {
        let mesh = pi_mesh(16, 64);
        let kind = HarmonicDataKind::new(0, 3).unwrap();
        let d = dispersion(3, &mesh).unwrap();
        let v = discrete_harmonic_solution(kind, &mesh, U1Variant::V2, 2, 1).unwrap();
        assert_relative_eq!(v, (d.mu_k * mesh.tau()).cos() * (3.0 * mesh.x(2)).sin(), max_relative = 1e-14);
        assert_relative_eq!(discrete_harmonic_solution(kind, &mesh, U1Variant::V2, 2, 0).unwrap(), (3.0 * mesh.x(2)).sin());
    }

    #[test]
    fn k_h_examples() {
        // (1e-8 - 6.25e-10) / 480
        let (k, rho, nu_h) = k_h_for(2.0, 0.01, 0.005).unwrap();
        assert_relative_eq!(nu_h, 1.953125e-11, max_relative = 1e-12);
        assert!((rho - 159.243).abs() < 1e-3, "{rho}");
        assert_eq!(k, 160);
        assert_eq!(k_h_for(1e-30, 0.01, 0.005).unwrap().0, 1);
        let coarse = pi_mesh(8, 16);
        match choose_k_h(2.0, &coarse) {
            Err(Error::MeshTooCoarse { k_h, max_k, min_n }) => {
                assert!(k_h > max_k);
                let fine = pi_mesh(min_n, 2 * min_n);
                assert!(choose_k_h(2.0, &fine).is_ok());
                let prev = pi_mesh(min_n - 1, 2 * (min_n - 1));
                assert!(choose_k_h(2.0, &prev).is_err());
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn k_h_scaling_law() {
        let ks: Vec<usize> = [256usize, 512, 1024, 2048]
            .iter()
            .map(|&n| choose_k_h(2.0, &pi_mesh(n, 2 * n)).unwrap().k_h)
            .collect();
        for w in ks.windows(2) {
            let r = w[1] as f64 / w[0] as f64;
            assert!((r - 2f64.powf(0.8)).abs() < 0.02, "{ks:?}");
        }
    }

    #[test]
    fn constants_and_predictions() {
        assert_relative_eq!(asymptotic_constant(0, PI).unwrap(), 4.0, max_relative = 1e-15);
        assert_relative_eq!(asymptotic_constant(0, PI / 2.0).unwrap(), 2.0, max_relative = 1e-15);
        assert_relative_eq!(asymptotic_constant(2, PI).unwrap(), PI, max_relative = 1e-15);
        let p = sharpness_prediction(0, 0, 77, PI).unwrap();
        assert_relative_eq!(p, 16.0 / PI);
        assert!((p - 5.0930).abs() < 1e-4);
        assert_relative_eq!(sharpness_prediction(1, 1, 77, PI).unwrap(), p);
        assert_relative_eq!(sharpness_prediction(2, 0, 10, PI).unwrap(), 0.4, max_relative = 1e-14);
        assert!(sharpness_prediction(2, 0, 1, PI).is_err());
    }

    #[test]
    fn general_coordinates_map_onto_oracle() {
        // X = 2, a = 3: the physical run reproduces the oracle table.
        let mesh = MeshSpec::build(2.0, 1.5, 16, 96, 3.0, 1.0).unwrap();
        for j in 0..3u8 {
            let kind = HarmonicDataKind::new(j, 3).unwrap();
            let data = kind.to_data_spec(&mesh).unwrap();
            let run = crate::scheme::evolve(&mesh, &data, U1Variant::V1, crate::scheme::V0Mode::NodeSamples).unwrap();
            let oracle = DiscreteHarmonic::new(kind, &mesh, U1Variant::V1).unwrap();
            let scale = (0..=96).map(|m| oracle.slice(m).max_abs()).fold(0.0, f64::max);
            for m in 0..=96 {
                let d = run.trajectory.slice(m).sub(&oracle.slice(m)).max_abs();
                assert!(d <= 1e-10 * scale, "j={j} m={m} dev {d}");
            }
        }
    }
}
