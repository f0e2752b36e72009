//! Generating pairs and the (F, G)-calculus: decomposition, characteristic
//! coefficients, the (F, G)-derivative, Vekua residuals, adjoint pairs,
//! successor checks, and the (F, G)-integral.
//!
//! A generating pair (F, G) plays the role of 1 and j: the condition
//! Im(F̄G) ≠ 0 makes every field w a unique real combination φF + ψG, and
//! w is (F, G)-pseudoanalytic when w_z̄ = a·w + b·w̄ for the pair's
//! characteristic coefficients.

use crate::duplex::Hyperbolic;
use crate::error::{Error, Result};
use crate::hfield::{HField, Path};
use crate::quadrature::{integrate_segment_pair, QuadratureSettings};

/// Default relative margin demanded of |Im(F̄G)| over the probe set.
pub const TAU_PAIR: f64 = 1e-10;

/// Two fields with Im(F̄G) bounded away from zero on the validated probes.
#[derive(Clone)]
pub struct GeneratingPair {
    pub f: HField,
    pub g: HField,
    /// min |Im(F̄G)| recorded over the validation probes.
    pub margin: f64,
}

/// The four field-valued quotients attached to a pair at a point.
#[derive(Clone, Copy, Debug)]
pub struct CharCoeffs {
    pub a: Hyperbolic,
    pub b: Hyperbolic,
    pub big_a: Hyperbolic,
    pub big_b: Hyperbolic,
}

/// w = φF + ψG at a point, along with the second-kind value ω = φ + jψ.
#[derive(Clone, Copy, Debug)]
pub struct Decomposition {
    pub phi: f64,
    pub psi: f64,
    pub omega: Hyperbolic,
}

/// Residual maxima from a successor comparison over a probe set.
#[derive(Clone, Copy, Debug)]
pub struct SuccessorReport {
    pub is_successor: bool,
    pub max_a_dev: f64,
    pub max_b_dev: f64,
}

/// Checks Im(F̄G) ≠ 0 with margin ≥ τ·scale over the probes and packages
/// the pair. `scale` is the largest |F||G| seen, so the margin test is
/// relative to the pair's size.
pub fn validate_pair_with(
    f: HField,
    g: HField,
    probes: &[Hyperbolic],
    tau: f64,
) -> Result<GeneratingPair> {
    assert!(!probes.is_empty(), "pair validation needs probes");
    let mut margin = f64::INFINITY;
    let mut scale = 0.0f64;
    for &p in probes {
        let (fv, gv) = (f.value(p), g.value(p));
        margin = margin.min((fv.conj() * gv).im.abs());
        scale = scale.max(fv.max_abs() * gv.max_abs());
    }
    let threshold = tau * scale.max(f64::MIN_POSITIVE);
    if margin < threshold {
        return Err(Error::DegeneratePair { margin, threshold });
    }
    Ok(GeneratingPair { f, g, margin })
}

pub fn validate_pair(f: HField, g: HField, probes: &[Hyperbolic]) -> Result<GeneratingPair> {
    validate_pair_with(f, g, probes, TAU_PAIR)
}

impl GeneratingPair {
    /// φ = Im(w̄G)/Im(F̄G), ψ = −Im(w̄F)/Im(F̄G) at p; the unique reals with
    /// w = φF(p) + ψG(p).
    pub fn decompose(&self, w: Hyperbolic, p: Hyperbolic) -> Result<Decomposition> {
        let (fv, gv) = (self.f.value(p), self.g.value(p));
        let den = (fv.conj() * gv).im;
        let threshold = TAU_PAIR * (fv.max_abs() * gv.max_abs()).max(f64::MIN_POSITIVE);
        if den.abs() < threshold {
            return Err(Error::DegeneratePair {
                margin: den.abs(),
                threshold,
            });
        }
        let phi = (w.conj() * gv).im / den;
        let psi = -(w.conj() * fv).im / den;
        Ok(Decomposition {
            phi,
            psi,
            omega: Hyperbolic::new(phi, psi),
        })
    }

    /// The characteristic coefficients at p:
    /// a = −(F̄G_z̄ − F_z̄Ḡ)/D, b = (FG_z̄ − F_z̄G)/D,
    /// A = −(F̄G_z − F_zḠ)/D, B = (FG_z − F_zG)/D, with D = FḠ − F̄G.
    pub fn char_coeffs(&self, p: Hyperbolic) -> Result<CharCoeffs> {
        let (fv, gv) = (self.f.value(p), self.g.value(p));
        let (fz, fzb) = (self.f.dz(p)?, self.f.dzbar(p)?);
        let (gz, gzb) = (self.g.dz(p)?, self.g.dzbar(p)?);
        let den = fv * gv.conj() - fv.conj() * gv;
        let inv = den.inverse().map_err(|_| Error::DegeneratePair {
            margin: (fv.conj() * gv).im.abs(),
            threshold: TAU_PAIR * (fv.max_abs() * gv.max_abs()).max(f64::MIN_POSITIVE),
        })?;
        Ok(CharCoeffs {
            a: -((fv.conj() * gzb - fzb * gv.conj()) * inv),
            b: (fv * gzb - fzb * gv) * inv,
            big_a: -((fv.conj() * gz - fz * gv.conj()) * inv),
            big_b: (fv * gz - fz * gv) * inv,
        })
    }

    /// Values of the adjoint generators F* = −2F̄/D, G* = 2Ḡ/D at p.
    /// No null check: Im(F̄G) ≠ 0 was established on the probes, and the
    /// theory keeps D = −2j·Im(F̄G) off the null cone wherever the pair is
    /// a pair.
    pub fn adjoint_values(&self, p: Hyperbolic) -> (Hyperbolic, Hyperbolic) {
        let (fv, gv) = (self.f.value(p), self.g.value(p));
        let inv = (fv * gv.conj() - fv.conj() * gv).inverse_unchecked();
        (fv.conj() * inv * -2.0, gv.conj() * inv * 2.0)
    }
}

/// The (F, G)-derivative ẇ = w_z − A·w − B·w̄ at p. The conjugation is of
/// the value, never of the argument.
pub fn fg_derivative(w: &HField, pair: &GeneratingPair, p: Hyperbolic) -> Result<Hyperbolic> {
    let c = pair.char_coeffs(p)?;
    let wv = w.value(p);
    Ok(w.dz(p)? - c.big_a * wv - c.big_b * wv.conj())
}

/// |w_z̄ − a·w − b·w̄| at p; ≈ 0 exactly when w is (F, G)-pseudoanalytic
/// there.
pub fn vekua_residual(w: &HField, pair: &GeneratingPair, p: Hyperbolic) -> Result<f64> {
    let c = pair.char_coeffs(p)?;
    let wv = w.value(p);
    Ok((w.dzbar(p)? - c.a * wv - c.b * wv.conj()).max_abs())
}

/// The adjoint generating pair (F*, G*) = (−2F̄/D, 2Ḡ/D), validated on the
/// same probe set.
pub fn adjoint_pair(pair: &GeneratingPair, probes: &[Hyperbolic]) -> Result<GeneratingPair> {
    let p1 = pair.clone();
    let p2 = pair.clone();
    let fstar = HField::from_fn(pair.f.domain.clone(), move |p| p1.adjoint_values(p).0);
    let gstar = HField::from_fn(pair.f.domain.clone(), move |p| p2.adjoint_values(p).1);
    validate_pair(fstar, gstar, probes)
}

/// ∫_Γ w d_(F,G)ζ = F(z₁)·Re∫_Γ G*w dζ + G(z₁)·Re∫_Γ F*w dζ, z₁ the path
/// end. w is evaluated once per quadrature node and shared between the two
/// integrals.
pub fn fg_integral(
    w: &HField,
    pair: &GeneratingPair,
    path: &Path,
    q: &QuadratureSettings,
) -> Result<Hyperbolic> {
    let z1 = path.end();
    let mut int_g = Hyperbolic::ZERO;
    let mut int_f = Hyperbolic::ZERO;
    for seg in path.vertices.windows(2) {
        let (ig, iff) = integrate_segment_pair(
            |zeta| w.value(zeta),
            |zeta| pair.adjoint_values(zeta).1,
            |zeta| pair.adjoint_values(zeta).0,
            seg[0],
            seg[1],
            q,
        )?;
        int_g += ig;
        int_f += iff;
    }
    Ok(pair.f.value(z1) * int_g.re + pair.g.value(z1) * int_f.re)
}

/// Definition-4 check: (F₁, G₁) succeeds (F₀, G₀) iff a₁ = a₀ and b₁ = −B₀
/// pointwise; residual maxima over the probes are reported.
pub fn is_successor(
    pair1: &GeneratingPair,
    pair0: &GeneratingPair,
    probes: &[Hyperbolic],
    tol: f64,
) -> Result<SuccessorReport> {
    let mut max_a_dev = 0.0f64;
    let mut max_b_dev = 0.0f64;
    for &p in probes {
        let c1 = pair1.char_coeffs(p)?;
        let c0 = pair0.char_coeffs(p)?;
        max_a_dev = max_a_dev.max((c1.a - c0.a).max_abs());
        max_b_dev = max_b_dev.max((c1.b + c0.big_b).max_abs());
    }
    Ok(SuccessorReport {
        is_successor: max_a_dev <= tol && max_b_dev <= tol,
        max_a_dev,
        max_b_dev,
    })
}
