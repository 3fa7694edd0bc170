//! Gauss-Legendre rules, polynomial helpers and closed-form integrals of
//! polynomials against sines and cosines.

use std::f64::consts::PI;

/// Gauss-Legendre rule on `[-1, 1]`; `n` nodes integrate degree `2n - 1` exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            // Tricomi's initial guess, refined by Newton on P_n.
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `int_a^b f(x) dx`.
    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Adaptive bisection with a fixed rule; fails when `max_depth` is reached
/// without meeting `tol` or when the integrand is not finite.
pub fn integrate_adaptive(
    rule: &GaussLegendre,
    a: f64,
    b: f64,
    f: &dyn Fn(f64) -> f64,
    tol: f64,
    max_depth: usize,
) -> Result<f64, String> {
    let whole = rule.integrate(a, b, f);
    adaptive_step(rule, a, b, f, whole, tol, max_depth)
}

fn adaptive_step(
    rule: &GaussLegendre,
    a: f64,
    b: f64,
    f: &dyn Fn(f64) -> f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> Result<f64, String> {
    let mid = 0.5 * (a + b);
    let left = rule.integrate(a, mid, f);
    let right = rule.integrate(mid, b, f);
    let refined = left + right;
    if !refined.is_finite() {
        return Err(format!("non-finite integrand on [{a}, {b}]"));
    }
    if (refined - whole).abs() <= tol * refined.abs().max(1.0) {
        return Ok(refined);
    }
    if depth == 0 {
        return Err(format!(
            "no convergence on [{a}, {b}] (last two estimates {whole:e}, {refined:e})"
        ));
    }
    Ok(adaptive_step(rule, a, mid, f, left, tol, depth - 1)?
        + adaptive_step(rule, mid, b, f, right, tol, depth - 1)?)
}

/// Horner evaluation of `c_0 + c_1 s + ... + c_d s^d`.
pub fn poly_eval(coeffs: &[f64], s: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * s + c)
}

/// Coefficients of the derivative.
pub fn poly_derivative(coeffs: &[f64]) -> Vec<f64> {
    coeffs.iter().enumerate().skip(1).map(|(j, c)| j as f64 * c).collect()
}

/// Coefficients of the antiderivative vanishing at 0.
pub fn poly_antiderivative(coeffs: &[f64]) -> Vec<f64> {
    std::iter::once(0.0)
        .chain(coeffs.iter().enumerate().map(|(j, c)| c / (j as f64 + 1.0)))
        .collect()
}

/// `(int_0^L p(s) cos(w s) ds, int_0^L p(s) sin(w s) ds)`.
///
/// Uses the repeated integration-by-parts antiderivative for `|w| L >= 1`
/// and a Gauss-Legendre rule (exact to rounding for these entire integrands)
/// below that.
pub fn poly_trig_moments(coeffs: &[f64], omega: f64, len: f64) -> (f64, f64) {
    if coeffs.is_empty() || len == 0.0 {
        return (0.0, 0.0);
    }
    if (omega * len).abs() < 1.0 {
        let rule = GaussLegendre::new(coeffs.len() / 2 + 12);
        let c = rule.integrate(0.0, len, |s| poly_eval(coeffs, s) * (omega * s).cos());
        let s = rule.integrate(0.0, len, |s| poly_eval(coeffs, s) * (omega * s).sin());
        return (c, s);
    }
    // Derivatives p^{(j)} evaluated at both ends.
    let mut derivs = Vec::with_capacity(coeffs.len());
    let mut d = coeffs.to_vec();
    while !d.is_empty() {
        derivs.push((poly_eval(&d, 0.0), poly_eval(&d, len)));
        d = poly_derivative(&d);
    }
    let antideriv = |x_end: bool| {
        let x = if x_end { len } else { 0.0 };
        let (sn, cs) = (omega * x).sin_cos();
        let mut even = 0.0;
        let mut odd = 0.0;
        let mut wpow = omega;
        for (j, &(p0, p1)) in derivs.iter().enumerate() {
            let pj = if x_end { p1 } else { p0 };
            let sign = if (j / 2) % 2 == 0 { 1.0 } else { -1.0 };
            if j % 2 == 0 {
                even += sign * pj / wpow;
            } else {
                odd += sign * pj / wpow;
            }
            wpow *= omega;
        }
        // int p cos = sin * even + cos * odd ; int p sin = -cos * even + sin * odd
        (sn * even + cs * odd, -cs * even + sn * odd)
    };
    let (c1, s1) = antideriv(true);
    let (c0, s0) = antideriv(false);
    (c1 - c0, s1 - s0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rule_integrates_polynomials_exactly() {
        for n in 1..=16 {
            let rule = GaussLegendre::new(n);
            let sum_w: f64 = rule.weights().iter().sum();
            assert_relative_eq!(sum_w, 2.0, max_relative = 1e-14);
            for deg in 0..(2 * n) {
                let exact = (2.0f64.powi(deg as i32 + 1) - 0.0) / (deg as f64 + 1.0);
                let got = rule.integrate(0.0, 2.0, |x| x.powi(deg as i32));
                assert_relative_eq!(got, exact, max_relative = 1e-13);
            }
        }
    }

    #[test]
    fn eight_point_rule_is_exact_to_degree_fifteen() {
        let rule = GaussLegendre::new(8);
        let p: Vec<f64> = (0..16).map(|j| ((j * 7 % 5) as f64 - 2.0) / (j as f64 + 1.0)).collect();
        let anti = poly_antiderivative(&p);
        let exact = poly_eval(&anti, 1.3) - poly_eval(&anti, -0.4);
        assert_relative_eq!(rule.integrate(-0.4, 1.3, |x| poly_eval(&p, x)), exact, max_relative = 1e-13);
    }

    #[test]
    fn trig_moments_match_quadrature() {
        let p = [0.3, -1.2, 0.7, 0.25, -0.05];
        let fine = GaussLegendre::new(40);
        for &omega in &[0.0, 0.3, 1.0, 2.5, 17.0, 101.0] {
            for &len in &[0.2, 1.0, 1.7] {
                let (c, s) = poly_trig_moments(&p, omega, len);
                // Composite high-order oracle.
                let pieces = 64;
                let mut c_ref = 0.0;
                let mut s_ref = 0.0;
                for j in 0..pieces {
                    let a = len * j as f64 / pieces as f64;
                    let b = len * (j + 1) as f64 / pieces as f64;
                    c_ref += fine.integrate(a, b, |x| poly_eval(&p, x) * (omega * x).cos());
                    s_ref += fine.integrate(a, b, |x| poly_eval(&p, x) * (omega * x).sin());
                }
                assert!((c - c_ref).abs() < 1e-12, "cos omega={omega} len={len}: {c} vs {c_ref}");
                assert!((s - s_ref).abs() < 1e-12, "sin omega={omega} len={len}: {s} vs {s_ref}");
            }
        }
    }

    #[test]
    fn adaptive_reports_failure() {
        let rule = GaussLegendre::new(4);
        let ok = integrate_adaptive(&rule, 0.0, 1.0, &|x| x.sqrt(), 1e-10, 30).unwrap();
        assert_relative_eq!(ok, 2.0 / 3.0, max_relative = 1e-9);
        assert!(integrate_adaptive(&rule, 0.0, 1.0, &|x| 1.0 / x, 1e-10, 5).is_err());
        assert!(integrate_adaptive(&rule, 0.0, 1.0, &|_| f64::NAN, 1e-10, 5).is_err());
    }

    #[test]
    fn polynomial_helpers() {
        let p = [1.0, 2.0, 3.0];
        assert_eq!(poly_eval(&p, 2.0), 17.0);
        assert_eq!(poly_derivative(&p), vec![2.0, 6.0]);
        assert_eq!(poly_antiderivative(&p), vec![0.0, 1.0, 1.0, 1.0]);
    }
}
