//! Composite Gauss-Legendre quadrature over real intervals and straight
//! hyperbolic segments.
//!
//! Rules are composite: `panels` panels of `nodes`-point Gauss-Legendre,
//! plus one halving refinement (2× panels) used both as the returned value
//! and as the convergence estimate. Node positions vary smoothly with the
//! endpoints, so integrals stay differentiable in the endpoint; downstream
//! finite differences of quadrature-built fields rely on that.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::duplex::Hyperbolic;
use crate::error::{Error, Result};

/// Settings shared by every quadrature in the crate.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureSettings {
    /// Gauss-Legendre nodes per panel.
    pub nodes: usize,
    /// Panels per segment (or per 1-D interval).
    pub panels: usize,
    /// Compare against a 2×-panel pass and fail on disagreement.
    pub refine: bool,
    /// Mixed absolute/relative tolerance for the refinement comparison.
    pub tol: f64,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self {
            nodes: 16,
            panels: 1,
            refine: true,
            tol: 1e-9,
        }
    }
}

impl QuadratureSettings {
    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }
}

type Rule = Arc<(Vec<f64>, Vec<f64>)>;

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1],
/// computed by Newton iteration on P_n and cached per n.
pub fn gauss_legendre(n: usize) -> Rule {
    static CACHE: OnceLock<Mutex<HashMap<usize, Rule>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap();
    guard
        .entry(n)
        .or_insert_with(|| Arc::new(compute_gauss_legendre(n)))
        .clone()
}

/// Legendre P_n(x) and P_n'(x) by the three-term recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

fn compute_gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2, "Gauss-Legendre rule needs at least 2 nodes");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Chebyshev-like initial guess, then Newton.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Composite pass of `panels` × `nodes`-point GL for a real integrand on [a, b].
fn composite_1d(f: &mut dyn FnMut(f64) -> f64, a: f64, b: f64, nodes: usize, panels: usize) -> f64 {
    let rule = gauss_legendre(nodes);
    let (xs, ws) = (&rule.0, &rule.1);
    let width = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + width * p as f64;
        let mid = lo + 0.5 * width;
        let half = 0.5 * width;
        for (x, w) in xs.iter().zip(ws) {
            total += w * half * f(mid + half * x);
        }
    }
    total
}

/// ∫_a^b g(x) dx with the refinement convergence check.
pub fn integrate_1d(
    mut g: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    q: &QuadratureSettings,
) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let coarse = composite_1d(&mut g, a, b, q.nodes, q.panels);
    if !q.refine {
        return Ok(coarse);
    }
    let fine = composite_1d(&mut g, a, b, q.nodes, 2 * q.panels);
    let err = (fine - coarse).abs();
    if err > q.tol * 1.0_f64.max(fine.abs()) {
        return Err(Error::QuadratureNonConvergence {
            error: err,
            tol: q.tol,
        });
    }
    Ok(fine)
}

fn composite_segment(
    f: &mut dyn FnMut(Hyperbolic) -> Hyperbolic,
    za: Hyperbolic,
    zb: Hyperbolic,
    nodes: usize,
    panels: usize,
) -> Hyperbolic {
    let rule = gauss_legendre(nodes);
    let (xs, ws) = (&rule.0, &rule.1);
    let d = zb - za;
    let width = 1.0 / panels as f64;
    let mut total = Hyperbolic::ZERO;
    for p in 0..panels {
        let mid = width * (p as f64 + 0.5);
        let half = 0.5 * width;
        for (x, w) in xs.iter().zip(ws) {
            let s = mid + half * x;
            total += f(za + d * s) * (w * half);
        }
    }
    d * total
}

/// ∫ w(ζ) dζ along the straight segment za → zb, with dζ the hyperbolic
/// line element (commutativity lets the constant direction factor out).
pub fn integrate_segment(
    mut w: impl FnMut(Hyperbolic) -> Hyperbolic,
    za: Hyperbolic,
    zb: Hyperbolic,
    q: &QuadratureSettings,
) -> Result<Hyperbolic> {
    if za == zb {
        return Ok(Hyperbolic::ZERO);
    }
    let coarse = composite_segment(&mut w, za, zb, q.nodes, q.panels);
    if !q.refine {
        return Ok(coarse);
    }
    let fine = composite_segment(&mut w, za, zb, q.nodes, 2 * q.panels);
    let err = (fine - coarse).max_abs();
    if err > q.tol * 1.0_f64.max(fine.max_abs()) {
        return Err(Error::QuadratureNonConvergence {
            error: err,
            tol: q.tol,
        });
    }
    Ok(fine)
}

/// Integrates two integrands that share a common (expensive) factor along a
/// segment: returns (∫ g·w dζ, ∫ h·w dζ) evaluating w once per node.
pub fn integrate_segment_pair(
    mut shared: impl FnMut(Hyperbolic) -> Hyperbolic,
    mut g: impl FnMut(Hyperbolic) -> Hyperbolic,
    mut h: impl FnMut(Hyperbolic) -> Hyperbolic,
    za: Hyperbolic,
    zb: Hyperbolic,
    q: &QuadratureSettings,
) -> Result<(Hyperbolic, Hyperbolic)> {
    if za == zb {
        return Ok((Hyperbolic::ZERO, Hyperbolic::ZERO));
    }
    let mut pass = |panels: usize| -> (Hyperbolic, Hyperbolic) {
        let rule = gauss_legendre(q.nodes);
        let (xs, ws) = (&rule.0, &rule.1);
        let d = zb - za;
        let width = 1.0 / panels as f64;
        let (mut tg, mut th) = (Hyperbolic::ZERO, Hyperbolic::ZERO);
        for p in 0..panels {
            let mid = width * (p as f64 + 0.5);
            let half = 0.5 * width;
            for (x, w) in xs.iter().zip(ws) {
                let zeta = za + d * (mid + half * x);
                let wv = shared(zeta);
                tg += g(zeta) * wv * (w * half);
                th += h(zeta) * wv * (w * half);
            }
        }
        (d * tg, d * th)
    };
    let (cg, ch) = pass(q.panels);
    if !q.refine {
        return Ok((cg, ch));
    }
    let (fg, fh) = pass(2 * q.panels);
    let err = (fg - cg).max_abs().max((fh - ch).max_abs());
    let scale = 1.0_f64.max(fg.max_abs()).max(fh.max_abs());
    if err > q.tol * scale {
        return Err(Error::QuadratureNonConvergence {
            error: err,
            tol: q.tol,
        });
    }
    Ok((fg, fh))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_integrate_polynomials_exactly() {
        // 16-point GL is exact through degree 31.
        let q = QuadratureSettings::default();
        let v = integrate_1d(|x| x.powi(10), 0.0, 1.0, &q).unwrap();
        assert!((v - 1.0 / 11.0).abs() < 1e-15);
        let v = integrate_1d(|x| (3.0 * x).exp(), 0.0, 2.0, &q).unwrap();
        assert!((v - (6.0f64.exp() - 1.0) / 3.0).abs() < 1e-10);
    }

    #[test]
    fn rule_weights_sum_to_two() {
        for n in [2, 8, 16, 32] {
            let rule = gauss_legendre(n);
            let sum: f64 = rule.1.iter().sum();
            assert!((sum - 2.0).abs() < 1e-13, "n={n}: {sum}");
        }
    }

    #[test]
    fn segment_integral_of_zeta() {
        // Re ∫_0^{1+2j} ζ dζ = (x²+t²)/2 = 2.5
        let q = QuadratureSettings::default();
        let z = Hyperbolic::new(1.0, 2.0);
        let v = integrate_segment(|zeta| zeta, Hyperbolic::ZERO, z, &q).unwrap();
        assert!((v.re - 2.5).abs() < 1e-13, "{v}");
        assert!((v.im - 2.0).abs() < 1e-13, "{v}");
    }

    #[test]
    fn segment_integral_example_exponential() {
        // Re ∫_0^z j e^{2x't'} ζ dζ = e^{xt} sinh(xt) at z = 1+2j.
        let q = QuadratureSettings::default();
        let z = Hyperbolic::new(1.0, 2.0);
        let v = integrate_segment(
            |zeta| Hyperbolic::J * (2.0 * zeta.re * zeta.im).exp() * zeta,
            Hyperbolic::ZERO,
            z,
            &q,
        )
        .unwrap();
        let expect = 2.0f64.exp() * 2.0f64.sinh();
        assert!(
            (v.re - expect).abs() < 1e-9 * expect,
            "{} vs {}",
            v.re,
            expect
        );
    }

    #[test]
    fn degenerate_segment_is_zero() {
        let q = QuadratureSettings::default();
        let z = Hyperbolic::new(0.3, 0.7);
        let v = integrate_segment(|zeta| zeta * zeta, z, z, &q).unwrap();
        assert_eq!(v, Hyperbolic::ZERO);
    }

    #[test]
    fn nonconvergence_is_reported() {
        // An oscillatory integrand far beyond what 2 nodes can resolve.
        let q = QuadratureSettings {
            nodes: 2,
            panels: 1,
            refine: true,
            tol: 1e-12,
        };
        let r = integrate_1d(|x| (50.0 * x).cos(), 0.0, 3.0, &q);
        assert!(matches!(r, Err(Error::QuadratureNonConvergence { .. })));
    }
}
