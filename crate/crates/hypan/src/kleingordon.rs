//! The Klein-Gordon operator □ − ν with □ = ∂_xx − ∂_tt, its factorization
//! through two Vekua-type operators built from a positive particular
//! solution f, the main Vekua equation's generating pair (f, j/f), the
//! companion potential η, and the u ↔ v transfer maps between solutions of
//! the ν- and η-equations.

use crate::duplex::Hyperbolic;
use crate::error::{Error, Result};
use crate::hfield::{
    antiderivative, real_add, real_mul, real_partial_t, real_partial_x, real_recip, real_scale,
    AVariant, Domain, HField, RealField,
};
use crate::pseudoanalytic::{validate_pair, GeneratingPair};
use crate::quadrature::QuadratureSettings;

/// Default tolerance for the "f actually solves (□ − ν)f = 0" probe check.
pub const CONSISTENCY_TOL: f64 = 1e-8;
/// Default tolerance for the A/Ā compatibility residual checks.
pub const COMPAT_TOL: f64 = 1e-6;

/// The potential ν(x, t).
#[derive(Clone)]
pub struct Potential {
    nu: crate::hfield::REval,
    pub label: Option<String>,
}

impl Potential {
    pub fn new(nu: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            nu: std::sync::Arc::new(nu),
            label: None,
        }
    }

    pub fn labeled(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn value(&self, p: Hyperbolic) -> f64 {
        (self.nu)(p.re, p.im)
    }
}

/// A positive particular solution of (□ − ν)f = 0; positivity is checked on
/// a probe lattice, not certified.
#[derive(Clone)]
pub struct ParticularSolution {
    pub f: RealField,
}

/// A potential together with its particular solution and the domain they
/// live on.
#[derive(Clone)]
pub struct KGProblem {
    pub potential: Potential,
    pub f: ParticularSolution,
    pub domain: Domain,
}

impl KGProblem {
    /// Validates positivity of f and the residual (□ − ν)f on the probes.
    pub fn new(
        potential: Potential,
        f: RealField,
        domain: Domain,
        probes: &[Hyperbolic],
    ) -> Result<Self> {
        for &p in probes {
            let v = f.value(p);
            if v <= 0.0 || v.is_nan() {
                return Err(Error::NonPositiveSolution {
                    x: p.re,
                    t: p.im,
                    value: v,
                });
            }
        }
        let prob = Self {
            potential,
            f: ParticularSolution { f },
            domain,
        };
        for &p in probes {
            let r = kg_residual(&prob.f.f, &prob.potential, p)?;
            if r.abs() > CONSISTENCY_TOL {
                return Err(Error::CompatibilityViolated {
                    residual: r,
                    x: p.re,
                    t: p.im,
                    tol: CONSISTENCY_TOL,
                });
            }
        }
        Ok(prob)
    }

    /// f_z = ½(f_x + j f_t) at p.
    pub fn f_dz(&self, p: Hyperbolic) -> Result<Hyperbolic> {
        self.f.f.dz(p)
    }
}

/// (□ − ν)φ at p: the defect of φ as a Klein-Gordon solution.
pub fn kg_residual(phi: &RealField, nu: &Potential, p: Hyperbolic) -> Result<f64> {
    Ok(phi.box_op(p)? - nu.value(p) * phi.value(p))
}

/// `kg_residual` with an explicit second-derivative FD step, for measuring
/// empirical convergence order on quadrature-built fields.
pub fn kg_residual_with_step(
    phi: &RealField,
    nu: &Potential,
    p: Hyperbolic,
    h: f64,
) -> Result<f64> {
    Ok(phi.box_op_with(p, h)? - nu.value(p) * phi.value(p))
}

/// The operator P = ∂_z − (f_z/f)I = f ∂_z f⁻¹ applied to a real field:
/// components w₁ = ½(φ_x − (f_x/f)φ), w₂ = ½(φ_t − (f_t/f)φ).
///
/// When φ solves (□ − ν)φ = 0 the output solves the conjugate-side Vekua
/// equation (∂_z̄ + (f_z/f)C)w = 0, i.e. [`apply_q`] of it vanishes.
pub fn apply_p(phi: &RealField, prob: &KGProblem) -> HField {
    let f = &prob.f.f;
    if phi.has_analytic_grad() && f.has_analytic_grad() {
        let recip_f = real_recip(f);
        let ratio_x = real_mul(&real_partial_x(f).expect("f gradient"), &recip_f);
        let ratio_t = real_mul(&real_partial_t(f).expect("f gradient"), &recip_f);
        let w1 = real_scale(
            &real_add(
                &real_partial_x(phi).expect("phi gradient"),
                &real_scale(&real_mul(&ratio_x, phi), -1.0),
            ),
            0.5,
        );
        let w2 = real_scale(
            &real_add(
                &real_partial_t(phi).expect("phi gradient"),
                &real_scale(&real_mul(&ratio_t, phi), -1.0),
            ),
            0.5,
        );
        return HField::from_components(&w1, &w2);
    }
    let (phi2, f2) = (phi.clone(), f.clone());
    HField::from_fn(phi.domain.clone(), move |p| {
        let fz = f2.dz(p).expect("f derivative");
        let fv = f2.value(p);
        let pz = phi2.dz(p).expect("phi derivative");
        pz - fz * (phi2.value(p) / fv)
    })
}

/// The conjugate factor Q = ∂_z̄ + (f_z/f)C applied to w at p:
/// w_z̄ + (f_z/f)·w̄.
pub fn apply_q(w: &HField, prob: &KGProblem, p: Hyperbolic) -> Result<Hyperbolic> {
    let fz = prob.f_dz(p)?;
    let fv = prob.f.f.value(p);
    Ok(w.dzbar(p)? + fz * (1.0 / fv) * w.value(p).conj())
}

/// S = f A f⁻¹: reconstructs the real Klein-Gordon solution g with
/// P g = w, up to the additive term c·f (c = 0 at the domain base point).
pub fn apply_s(
    w: &HField,
    prob: &KGProblem,
    q: &QuadratureSettings,
    probes: &[Hyperbolic],
) -> Result<RealField> {
    let f = prob.f.f.clone();
    let w2 = w.clone();
    let f2 = f.clone();
    let mut quotient =
        HField::from_fn(w.domain.clone(), move |p| w2.value(p) * (1.0 / f2.value(p)));
    if w.has_analytic_derivatives() && f.has_analytic_grad() {
        let (wa, wb) = (w.clone(), w.clone());
        let (fa, fb) = (f.clone(), f.clone());
        quotient = quotient.with_derivatives(
            move |p| {
                let fv = fa.value(p);
                let fz = fa.dz(p).expect("f derivative");
                wa.dz(p).expect("w dz") * (1.0 / fv) - wa.value(p) * fz * (1.0 / (fv * fv))
            },
            move |p| {
                let fv = fb.value(p);
                let fzb = fb.dzbar(p).expect("f derivative");
                wb.dzbar(p).expect("w dzbar") * (1.0 / fv) - wb.value(p) * fzb * (1.0 / (fv * fv))
            },
        );
    }
    let anti = antiderivative(&quotient, AVariant::A, q, probes, COMPAT_TOL)?;
    Ok(real_mul(&prob.f.f, &anti.field))
}

/// The generating pair (F, G) = (f, j/f) of the main Vekua equation
/// W_z̄ = (f_z̄/f)W̄.
pub fn main_pair(prob: &KGProblem, probes: &[Hyperbolic]) -> Result<GeneratingPair> {
    for &p in probes {
        let v = prob.f.f.value(p);
        if v <= 0.0 || v.is_nan() {
            return Err(Error::NonPositiveSolution {
                x: p.re,
                t: p.im,
                value: v,
            });
        }
    }
    let f_field = prob.f.f.to_hfield();
    let zero = RealField::constant(prob.domain.clone(), 0.0);
    let g_field = HField::from_components(&zero, &real_recip(&prob.f.f));
    validate_pair(f_field, g_field, probes)
}

/// The main pair's coefficient b = f_z̄/f as a field with analytic
/// operator closures (components f_x/2f and −f_t/2f).
pub fn main_b_field(prob: &KGProblem) -> HField {
    let f = &prob.f.f;
    let recip_f = real_recip(f);
    let b1 = real_scale(
        &real_mul(&real_partial_x(f).expect("f gradient"), &recip_f),
        0.5,
    );
    let b2 = real_scale(
        &real_mul(&real_partial_t(f).expect("f gradient"), &recip_f),
        -0.5,
    );
    HField::from_components(&b1, &b2)
}

/// η = −ν + 8|f_z|²/f², the potential solved by imaginary parts of main
/// Vekua solutions. |f_z|² is the hyperbolic modulus ¼(f_x² − f_t²) and may
/// be negative.
pub fn eta_potential(prob: &KGProblem, p: Hyperbolic) -> Result<f64> {
    let fv = prob.f.f.value(p);
    let fz = prob.f_dz(p)?;
    Ok(-prob.potential.value(p) + 8.0 * fz.modulus_sq() / (fv * fv))
}

/// η as a [`Potential`] for residual checks of imaginary parts.
pub fn eta_as_potential(prob: &KGProblem) -> Potential {
    let prob = prob.clone();
    Potential::new(move |x, t| eta_potential(&prob, Hyperbolic::new(x, t)).expect("eta evaluation"))
        .labeled("eta")
}

/// Builds Φ = j·s²·∂_z̄(r) componentwise, where s and r are real fields:
/// Φ₁ = −½ s² r_t, Φ₂ = ½ s² r_x. Shared by both transfer maps.
fn transfer_phi(scale_sq: &RealField, r: &RealField) -> HField {
    if r.has_analytic_grad() {
        let phi1 = real_scale(&real_mul(scale_sq, &real_partial_t(r).expect("grad")), -0.5);
        let phi2 = real_scale(&real_mul(scale_sq, &real_partial_x(r).expect("grad")), 0.5);
        return HField::from_components(&phi1, &phi2);
    }
    let (s2, r2) = (scale_sq.clone(), r.clone());
    HField::from_fn(r.domain.clone(), move |p| {
        let (rx, rt) = r2.grad(p).expect("r gradient");
        let s = s2.value(p);
        Hyperbolic::new(-0.5 * s * rt, 0.5 * s * rx)
    })
}

/// Given a solution u of (□ − ν)u = 0, constructs v with (□ − η)v = 0 such
/// that W = u + jv solves the main Vekua equation:
/// v = −f⁻¹ Ā[j f² ∂_z̄(f⁻¹ u)], unique up to c·f⁻¹ (c = 0 at the base
/// point). Rejects inputs that are not Klein-Gordon solutions through the
/// Ā compatibility check.
pub fn v_from_u(
    u: &RealField,
    prob: &KGProblem,
    q: &QuadratureSettings,
    probes: &[Hyperbolic],
) -> Result<RealField> {
    let f = &prob.f.f;
    let f_sq = real_mul(f, f);
    let quotient = real_mul(u, &real_recip(f));
    let phi = transfer_phi(&f_sq, &quotient);
    let anti = antiderivative(&phi, AVariant::Abar, q, probes, COMPAT_TOL)?;
    Ok(real_scale(&real_mul(&anti.field, &real_recip(f)), -1.0))
}

/// Given a solution v of (□ − η)v = 0, constructs u with (□ − ν)u = 0 such
/// that W = u + jv solves the main Vekua equation:
/// u = −f Ā[j f⁻² ∂_z̄(f v)], unique up to c·f (c = 0 at the base point).
pub fn u_from_v(
    v: &RealField,
    prob: &KGProblem,
    q: &QuadratureSettings,
    probes: &[Hyperbolic],
) -> Result<RealField> {
    let f = &prob.f.f;
    let recip_f = real_recip(f);
    let recip_sq = real_mul(&recip_f, &recip_f);
    let product = real_mul(f, v);
    let phi = transfer_phi(&recip_sq, &product);
    let anti = antiderivative(&phi, AVariant::Abar, q, probes, COMPAT_TOL)?;
    Ok(real_scale(&real_mul(&anti.field, f), -1.0))
}
