//! Generating sequences under the separable ansatz f = f(ρ), and formal
//! powers Z_m⁽ⁿ⁾(a, z₀; ·) built by recursive (F_m, G_m)-integration.
//!
//! When □ρ/4|ρ_z|² is a function s(ρ) alone, the function
//! Φ = j e^{−S(ρ)} ρ_z (S an antiderivative of s) is holomorphic and the
//! main pair (f, j/f) embeds in the generating sequence
//! (F_m, G_m) = (Φᵐ f, Φᵐ j/f), m ∈ ℤ. Formal powers over that sequence
//! deliver one Klein-Gordon solution family per exponent and coefficient.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::duplex::Hyperbolic;
use crate::error::{Error, Result};
use crate::hfield::{Domain, HEval, HField, REval, RGrad, RSecond, RealField};
use crate::kleingordon::{main_pair, KGProblem};
use crate::pseudoanalytic::{validate_pair, GeneratingPair};
use crate::quadrature::{integrate_segment_pair, QuadratureSettings};

/// Tolerance below which |ρ_z|² counts as vanished.
pub const TAU_GRADIENT: f64 = 1e-12;
/// Default tolerance on the level-set spread diagnostics.
pub const LEVEL_SPREAD_TOL: f64 = 1e-8;

/// The ρ-profile of a separable problem: ρ itself, its derivatives, the
/// quotient data s(ρ) and S(ρ) = ∫_{ρ₀}^ρ s, and optionally a closed form
/// for Φ (used as the robust evaluator where the generic product
/// j e^{−S} ρ_z is an indeterminate 0·∞ at boundary centers).
#[derive(Clone)]
pub struct RhoProfile {
    pub rho: REval,
    pub rho_grad: RGrad,
    pub rho_second: Option<RSecond>,
    pub box_rho: REval,
    pub s: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub s_antideriv: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    /// Reference point of the antiderivative: S(ρ₀) = 0. Shifting it only
    /// rescales Φ by a constant.
    pub rho0: f64,
    /// Closed-form (Φ, Φ_z) override.
    pub phi_closed: Option<(HEval, HEval)>,
}

impl RhoProfile {
    pub fn new(
        rho: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        rho_grad: impl Fn(f64, f64) -> (f64, f64) + Send + Sync + 'static,
        box_rho: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        s: impl Fn(f64) -> f64 + Send + Sync + 'static,
        s_antideriv: impl Fn(f64) -> f64 + Send + Sync + 'static,
        rho0: f64,
    ) -> Self {
        Self {
            rho: Arc::new(rho),
            rho_grad: Arc::new(rho_grad),
            rho_second: None,
            box_rho: Arc::new(box_rho),
            s: Arc::new(s),
            s_antideriv: Arc::new(s_antideriv),
            rho0,
            phi_closed: None,
        }
    }

    pub fn with_second(
        mut self,
        second: impl Fn(f64, f64) -> (f64, f64, f64) + Send + Sync + 'static,
    ) -> Self {
        self.rho_second = Some(Arc::new(second));
        self
    }

    pub fn with_phi_closed(
        mut self,
        phi: impl Fn(Hyperbolic) -> Hyperbolic + Send + Sync + 'static,
        phi_dz: impl Fn(Hyperbolic) -> Hyperbolic + Send + Sync + 'static,
    ) -> Self {
        self.phi_closed = Some((Arc::new(phi), Arc::new(phi_dz)));
        self
    }

    /// ρ_z = ½(ρ_x + jρ_t) at p.
    pub fn rho_z(&self, p: Hyperbolic) -> Hyperbolic {
        let (gx, gt) = (self.rho_grad)(p.re, p.im);
        Hyperbolic::new(0.5 * gx, 0.5 * gt)
    }
}

/// `s_of_rho` output: the quotient value plus the spread of the quotient
/// over the sampled level set through the probe.
#[derive(Clone, Copy, Debug)]
pub struct SRhoReport {
    pub value: f64,
    pub level_spread: f64,
    pub samples: usize,
}

fn quotient_at(profile: &RhoProfile, p: Hyperbolic) -> Result<f64> {
    let rz = profile.rho_z(p);
    let m = rz.modulus_sq();
    let (gx, gt) = (profile.rho_grad)(p.re, p.im);
    let scale = 1.0_f64.max(gx * gx).max(gt * gt);
    if m.abs() <= TAU_GRADIENT * scale {
        return Err(Error::NullGradient {
            x: p.re,
            t: p.im,
            value: m,
        });
    }
    Ok((profile.box_rho)(p.re, p.im) / (4.0 * m))
}

/// Samples the level set {ρ = ρ(p)} by scanning vertical lines for sign
/// changes and bisecting. Stations whose line misses the level or exits the
/// membership region are skipped.
fn level_set_points(
    rho: &REval,
    domain: &Domain,
    target: f64,
    near_x: f64,
    stations: usize,
) -> Vec<Hyperbolic> {
    let rect = domain.rect;
    let pad = 1e-3 * domain.scale();
    // Stations cluster around the probe's abscissa: level curves are local
    // graphs, and far-away verticals often miss the membership region.
    let half_span = 0.35 * (rect.x_max - rect.x_min);
    let lo = (near_x - half_span).max(rect.x_min + pad);
    let hi = (near_x + half_span).min(rect.x_max - pad);
    let mut out = Vec::new();
    for i in 0..stations {
        let x = lo + (hi - lo) * i as f64 / (stations - 1) as f64;
        let samples = 48;
        let mut prev: Option<(f64, f64)> = None;
        for k in 0..=samples {
            let t = rect.t_min
                + pad
                + (rect.t_max - rect.t_min - 2.0 * pad) * k as f64 / samples as f64;
            if !domain.contains(Hyperbolic::new(x, t)) {
                prev = None;
                continue;
            }
            let g = rho(x, t) - target;
            if let Some((t0, g0)) = prev {
                if g0 == 0.0 {
                    out.push(Hyperbolic::new(x, t0));
                } else if g0 * g < 0.0 {
                    let (mut lo, mut hi, mut glo) = (t0, t, g0);
                    for _ in 0..80 {
                        let mid = 0.5 * (lo + hi);
                        let gm = rho(x, mid) - target;
                        if glo * gm <= 0.0 {
                            hi = mid;
                        } else {
                            lo = mid;
                            glo = gm;
                        }
                    }
                    let t_hit = 0.5 * (lo + hi);
                    if domain.contains(Hyperbolic::new(x, t_hit)) {
                        out.push(Hyperbolic::new(x, t_hit));
                    }
                    break;
                }
            }
            prev = Some((t, g));
        }
    }
    out
}

/// s(ρ) = □ρ / 4|ρ_z|² at p, with a level-set spread diagnostic: the
/// quotient must not vary along {ρ = ρ(p)} if it is to be a function of ρ.
pub fn s_of_rho(
    profile: &RhoProfile,
    domain: &Domain,
    p: Hyperbolic,
    spread_tol: f64,
) -> Result<SRhoReport> {
    let value = quotient_at(profile, p)?;
    let mut lo = value;
    let mut hi = value;
    let pts = level_set_points(&profile.rho, domain, (profile.rho)(p.re, p.im), p.re, 7);
    let mut used = 1;
    for q in &pts {
        if let Ok(v) = quotient_at(profile, *q) {
            lo = lo.min(v);
            hi = hi.max(v);
            used += 1;
        }
    }
    let spread = hi - lo;
    if spread > spread_tol * 1.0_f64.max(value.abs()) {
        return Err(Error::NotAFunctionOfRho {
            spread,
            tol: spread_tol,
        });
    }
    Ok(SRhoReport {
        value,
        level_spread: spread,
        samples: used,
    })
}

/// Composes Φ = j e^{−S(ρ)} ρ_z from the profile closures. Analytic
/// operator closures are attached when ρ's second partials are present:
///   Φ_z = j e^{−S} (∂_z ρ_z − s(ρ) ρ_z²),  ∂_z ρ_z = ¼(ρ_xx + ρ_tt) + ½jρ_xt,
///   Φ_z̄ = j e^{−S} (¼□ρ − s(ρ)|ρ_z|²),
/// the latter vanishing identically exactly when s is the true quotient.
pub fn build_phi(profile: &RhoProfile, domain: &Domain, probes: &[Hyperbolic]) -> Result<HField> {
    let pr = profile.clone();
    let mut phi = HField::from_fn(domain.clone(), move |p| {
        let damp = (-(pr.s_antideriv)((pr.rho)(p.re, p.im))).exp();
        Hyperbolic::J * pr.rho_z(p) * damp
    });
    if let Some(second) = profile.rho_second.clone() {
        let (pa, pb) = (profile.clone(), profile.clone());
        phi = phi.with_derivatives(
            move |p| {
                let rho = (pa.rho)(p.re, p.im);
                let damp = (-(pa.s_antideriv)(rho)).exp();
                let rz = pa.rho_z(p);
                let (xx, xt, tt) = second(p.re, p.im);
                let dz_rz = Hyperbolic::new(0.25 * (xx + tt), 0.5 * xt);
                Hyperbolic::J * (dz_rz - rz * rz * (pa.s)(rho)) * damp
            },
            move |p| {
                let rho = (pb.rho)(p.re, p.im);
                let damp = (-(pb.s_antideriv)(rho)).exp();
                let rz = pb.rho_z(p);
                let residue = 0.25 * (pb.box_rho)(p.re, p.im) - (pb.s)(rho) * rz.modulus_sq();
                Hyperbolic::J * damp * residue
            },
        );
    }
    for &p in probes {
        let v = phi.value(p);
        if !v.is_finite() || v.is_null() {
            return Err(Error::NullPhi { x: p.re, t: p.im });
        }
    }
    Ok(phi)
}

/// The sequence (F_m, G_m) = (Φᵐ F, Φᵐ G) with (F, G) the main pair of the
/// problem.
#[derive(Clone)]
pub struct GeneratingSequence {
    pub base: GeneratingPair,
    pub phi: HField,
    pub domain: Domain,
    probes: Arc<Vec<Hyperbolic>>,
}

/// Validates the profile against the problem and assembles the sequence:
/// the main pair must exist, Φ must be non-null and holomorphic on the
/// probes, and f must factor through ρ (checked by sampling f along a
/// ρ-level set).
pub fn generating_sequence(
    prob: &KGProblem,
    profile: &RhoProfile,
    probes: &[Hyperbolic],
) -> Result<GeneratingSequence> {
    let base = main_pair(prob, probes)?;
    let generic = build_phi(profile, &prob.domain, probes)?;

    // f = f(ρ): f must be constant along level sets of ρ.
    let anchor = probes[probes.len() / 2];
    let pts = level_set_points(
        &profile.rho,
        &prob.domain,
        (profile.rho)(anchor.re, anchor.im),
        anchor.re,
        7,
    );
    if pts.len() >= 2 {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut scale = 0.0f64;
        for q in pts.iter().chain(std::iter::once(&anchor)) {
            let v = prob.f.f.value(*q);
            lo = lo.min(v);
            hi = hi.max(v);
            scale = scale.max(v.abs());
        }
        let spread = hi - lo;
        if spread > LEVEL_SPREAD_TOL * scale.max(1.0) {
            return Err(Error::AnsatzMismatch {
                spread,
                tol: LEVEL_SPREAD_TOL,
            });
        }
    }

    // Holomorphy of Φ on the probes (the compatibility of s with ρ).
    for &p in probes {
        let r = generic.d_holomorphy_residual(p)?;
        if r > 1e-6 {
            return Err(Error::NotAFunctionOfRho {
                spread: r,
                tol: 1e-6,
            });
        }
    }

    // Prefer the closed-form evaluator when the profile carries one; the
    // generic product is 0·∞ wherever ρ_z blows up against e^{−S} → 0
    // (removable, but not in floating point).
    let phi = match &profile.phi_closed {
        Some((value, dz)) => {
            for &p in probes {
                let (v, g) = (value(p), generic.value(p));
                if (v - g).max_abs() > 1e-10 * v.max_abs().max(1.0) {
                    return Err(Error::NotAFunctionOfRho {
                        spread: (v - g).max_abs(),
                        tol: 1e-10,
                    });
                }
            }
            let (value, dz) = (value.clone(), dz.clone());
            HField::from_fn(prob.domain.clone(), move |p| value(p))
                .with_derivatives(move |p| dz(p), |_| Hyperbolic::ZERO)
        }
        None => generic,
    };

    Ok(GeneratingSequence {
        base,
        phi,
        domain: prob.domain.clone(),
        probes: Arc::new(probes.to_vec()),
    })
}

impl GeneratingSequence {
    /// The pair (F_m, G_m) = (Φᵐ F, Φᵐ G), validated on the stored probes.
    /// Negative m uses inverse powers of Φ (non-null on the probes by
    /// construction).
    pub fn pair(&self, m: i32) -> Result<GeneratingPair> {
        if m == 0 {
            return Ok(self.base.clone());
        }
        let make = |gen: &HField| -> HField {
            let phi = self.phi.clone();
            let g = gen.clone();
            let mut field = HField::from_fn(self.domain.clone(), move |p| {
                phi.value(p).powi(m) * g.value(p)
            });
            if self.phi.has_analytic_derivatives() && gen.has_analytic_derivatives() {
                let (phi_a, gen_a) = (self.phi.clone(), gen.clone());
                let (phi_b, gen_b) = (self.phi.clone(), gen.clone());
                field = field.with_derivatives(
                    move |p| {
                        let pv = phi_a.value(p);
                        let mut d = pv.powi(m) * gen_a.dz(p).expect("generator dz");
                        d += pv.powi(m - 1)
                            * phi_a.dz(p).expect("phi dz")
                            * gen_a.value(p)
                            * m as f64;
                        d
                    },
                    move |p| {
                        let pv = phi_b.value(p);
                        let mut d = pv.powi(m) * gen_b.dzbar(p).expect("generator dzbar");
                        d += pv.powi(m - 1)
                            * phi_b.dzbar(p).expect("phi dzbar")
                            * gen_b.value(p)
                            * m as f64;
                        d
                    },
                );
            }
            field
        };
        validate_pair(make(&self.base.f), make(&self.base.g), &self.probes)
    }
}

/// Options of the formal-power engine.
#[derive(Clone, Debug)]
pub struct FormalPowerOptions {
    pub settings: QuadratureSettings,
    /// Sign applied to F* in the (F, G)-integral: +1 follows the adjoint
    /// definition; −1 is the alternative convention that some printed
    /// closed forms use. Only imaginary parts are affected.
    pub fstar_sign: f64,
}

impl Default for FormalPowerOptions {
    fn default() -> Self {
        Self {
            settings: QuadratureSettings::default(),
            fstar_sign: 1.0,
        }
    }
}

struct PowerEngine {
    seq: GeneratingSequence,
    a: Hyperbolic,
    center: Hyperbolic,
    base: Hyperbolic,
    opts: FormalPowerOptions,
    pairs: Mutex<HashMap<i32, GeneratingPair>>,
    lam_mu: Mutex<HashMap<i32, (f64, f64)>>,
    memo: Mutex<HashMap<(i32, u32, u64, u64), Hyperbolic>>,
}

impl PowerEngine {
    fn pair(&self, m: i32) -> Result<GeneratingPair> {
        if let Some(p) = self.pairs.lock().unwrap().get(&m) {
            return Ok(p.clone());
        }
        let built = self.seq.pair(m)?;
        self.pairs.lock().unwrap().insert(m, built.clone());
        Ok(built)
    }

    /// λ, μ with λF_m(z₀) + μG_m(z₀) = a.
    fn lam_mu(&self, m: i32) -> Result<(f64, f64)> {
        if let Some(lm) = self.lam_mu.lock().unwrap().get(&m) {
            return Ok(*lm);
        }
        let pair = self.pair(m)?;
        let d = pair.decompose(self.a, self.center)?;
        self.lam_mu.lock().unwrap().insert(m, (d.phi, d.psi));
        Ok((d.phi, d.psi))
    }

    fn eval(&self, m: i32, n: u32, z: Hyperbolic) -> Result<Hyperbolic> {
        if n == 0 {
            let (lam, mu) = self.lam_mu(m)?;
            let pair = self.pair(m)?;
            return Ok(pair.f.value(z) * lam + pair.g.value(z) * mu);
        }
        let key = (m, n, z.re.to_bits(), z.im.to_bits());
        if let Some(v) = self.memo.lock().unwrap().get(&key) {
            return Ok(*v);
        }
        let pair = self.pair(m)?;
        let sign = self.opts.fstar_sign;
        let mut inner_err: Option<Error> = None;
        let (int_g, int_f) = integrate_segment_pair(
            |zeta| match self.eval(m + 1, n - 1, zeta) {
                Ok(v) => v,
                Err(e) => {
                    inner_err.get_or_insert(e);
                    Hyperbolic::ZERO
                }
            },
            |zeta| pair.adjoint_values(zeta).1,
            |zeta| pair.adjoint_values(zeta).0 * sign,
            self.base,
            z,
            &self.opts.settings,
        )?;
        if let Some(e) = inner_err {
            return Err(e);
        }
        let value = (pair.f.value(z) * int_g.re + pair.g.value(z) * int_f.re) * n as f64;
        self.memo.lock().unwrap().insert(key, value);
        Ok(value)
    }
}

/// The formal power Z_m⁽ⁿ⁾(a, z₀; ·) materialized as a field, together
/// with its construction metadata.
#[derive(Clone)]
pub struct FormalPower {
    pub m: i32,
    pub n: u32,
    pub a: Hyperbolic,
    pub center: Hyperbolic,
    pub base: Hyperbolic,
    pub settings: QuadratureSettings,
    engine: Arc<PowerEngine>,
    pub field: HField,
}

impl FormalPower {
    /// Checked evaluation (surfaces quadrature failures).
    pub fn eval(&self, z: Hyperbolic) -> Result<Hyperbolic> {
        self.engine.eval(self.m, self.n, z)
    }

    /// The real part as a field (finite differences for its derivatives).
    pub fn real_part(&self) -> RealField {
        let engine = self.engine.clone();
        let (m, n) = (self.m, self.n);
        RealField::from_fn(self.field.domain.clone(), move |x, t| {
            engine
                .eval(m, n, Hyperbolic::new(x, t))
                .expect("formal power evaluation")
                .re
        })
    }

    /// The imaginary part as a field.
    pub fn imag_part(&self) -> RealField {
        let engine = self.engine.clone();
        let (m, n) = (self.m, self.n);
        RealField::from_fn(self.field.domain.clone(), move |x, t| {
            engine
                .eval(m, n, Hyperbolic::new(x, t))
                .expect("formal power evaluation")
                .im
        })
    }
}

/// Builds Z_m⁽ⁿ⁾(a, z₀; ·) over the sequence, integrating along straight
/// segments from `base` (a separate parameter from the center z₀: the
/// worked closed forms integrate from the origin while centering
/// elsewhere). All levels m..m+n are validated eagerly.
pub fn formal_power(
    seq: &GeneratingSequence,
    m: i32,
    n: u32,
    a: Hyperbolic,
    center: Hyperbolic,
    base: Hyperbolic,
    opts: &FormalPowerOptions,
) -> Result<FormalPower> {
    let engine = Arc::new(PowerEngine {
        seq: seq.clone(),
        a,
        center,
        base,
        opts: opts.clone(),
        pairs: Mutex::new(HashMap::new()),
        lam_mu: Mutex::new(HashMap::new()),
        memo: Mutex::new(HashMap::new()),
    });
    for k in 0..=n {
        engine.pair(m + k as i32)?;
    }
    engine.lam_mu(m + n as i32)?;
    let eng = engine.clone();
    let field = HField::from_fn(seq.domain.clone(), move |z| {
        eng.eval(m, n, z).expect("formal power evaluation")
    });
    Ok(FormalPower {
        m,
        n,
        a,
        center,
        base,
        settings: opts.settings.clone(),
        engine,
        field,
    })
}

/// One member of a Klein-Gordon solution family.
pub struct FamilyMember {
    pub n: u32,
    pub a_label: &'static str,
    pub power: FormalPower,
    pub re: RealField,
}

/// The 2(n_max+1) real fields Re Z⁽ⁿ⁾(1, z₀; ·), Re Z⁽ⁿ⁾(j, z₀; ·) for
/// n = 0..n_max, each a Klein-Gordon solution of the problem behind the
/// sequence.
pub fn kg_solution_family(
    seq: &GeneratingSequence,
    n_max: u32,
    center: Hyperbolic,
    base: Hyperbolic,
    opts: &FormalPowerOptions,
) -> Result<Vec<FamilyMember>> {
    let mut out = Vec::new();
    for n in 0..=n_max {
        for (a, a_label) in [(Hyperbolic::ONE, "1"), (Hyperbolic::J, "j")] {
            let power = formal_power(seq, 0, n, a, center, base, opts)?;
            let re = power.real_part();
            out.push(FamilyMember {
                n,
                a_label,
                power,
                re,
            });
        }
    }
    Ok(out)
}

/// |d_{(F_m,G_m)} Z_m⁽ⁿ⁾/dz − n·Z_{m+1}⁽ⁿ⁻¹⁾| at p (property 3 of the
/// formal powers), with the derivative taken by finite differences on the
/// quadrature-built field.
#[allow(clippy::too_many_arguments)]
pub fn power_derivative_check(
    seq: &GeneratingSequence,
    m: i32,
    n: u32,
    a: Hyperbolic,
    center: Hyperbolic,
    base: Hyperbolic,
    p: Hyperbolic,
    opts: &FormalPowerOptions,
) -> Result<f64> {
    assert!(n >= 1, "property 3 needs n >= 1");
    let z = formal_power(seq, m, n, a, center, base, opts)?;
    let down = formal_power(seq, m + 1, n - 1, a, center, base, opts)?;
    let pair = seq.pair(m)?;
    let lhs = crate::pseudoanalytic::fg_derivative(&z.field, &pair, p)?;
    Ok((lhs - down.eval(p)? * n as f64).max_abs())
}

/// Ratios |Z_m⁽ⁿ⁾(a, z₀; z₀ + r·d) − a(z−z₀)ⁿ| / rⁿ at r = r₀, r₀/2, r₀/4
/// along a non-null direction d, for powers built with base = center
/// (property 4). The ratios must decrease toward 0.
pub struct AsymptoticReport {
    pub radii: [f64; 3],
    pub ratios: [f64; 3],
}

impl AsymptoticReport {
    pub fn decreasing(&self) -> bool {
        self.ratios[0] > self.ratios[1] && self.ratios[1] > self.ratios[2]
    }
}

#[allow(clippy::too_many_arguments)]
pub fn asymptotic_check(
    seq: &GeneratingSequence,
    m: i32,
    n: u32,
    a: Hyperbolic,
    center: Hyperbolic,
    r0: f64,
    direction: Hyperbolic,
    opts: &FormalPowerOptions,
) -> Result<AsymptoticReport> {
    let dir = direction * (1.0 / direction.max_abs());
    let power = formal_power(seq, m, n, a, center, center, opts)?;
    let mut radii = [0.0; 3];
    let mut ratios = [0.0; 3];
    for (k, r) in [r0, r0 / 2.0, r0 / 4.0].into_iter().enumerate() {
        let z = center + dir * r;
        let lead = a * (z - center).powi(n as i32);
        radii[k] = r;
        ratios[k] = (power.eval(z)? - lead).max_abs() / r.powi(n as i32);
    }
    Ok(AsymptoticReport { radii, ratios })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kleingordon::{kg_residual, Potential};
    use crate::pseudoanalytic::{is_successor, vekua_residual};

    fn wedge(base: Hyperbolic) -> Domain {
        Domain::wedge(0.0, 3.0, 0.0, 5.0, base)
    }

    fn probes() -> Vec<Hyperbolic> {
        let mut v = Vec::new();
        for i in 0..5 {
            for k in 0..5 {
                let x = 0.2 + 0.35 * i as f64;
                let t = 0.45 + 0.38 * k as f64;
                if x < t - 0.05 {
                    v.push(Hyperbolic::new(x, t));
                }
            }
        }
        v
    }

    fn saddle_profile() -> RhoProfile {
        RhoProfile::new(
            |x, t| (x * t).sqrt(),
            |x, t| {
                let r = (x * t).sqrt();
                (0.5 * t / r, 0.5 * x / r)
            },
            |x, t| 0.25 * (x * x - t * t) / (x * t).powf(1.5),
            |r| -1.0 / r,
            |r| -r.ln(),
            1.0,
        )
        .with_second(|x, t| {
            let p32 = (x * t).powf(1.5);
            (
                -0.25 * t * t / p32,
                0.25 / (x * t).sqrt(),
                -0.25 * x * x / p32,
            )
        })
        .with_phi_closed(|z| z * 0.25, |_| Hyperbolic::new(0.25, 0.0))
    }

    fn rational_profile() -> RhoProfile {
        RhoProfile::new(
            |x, t| (x + 1.0) * (t + 1.0),
            |x, t| (t + 1.0, x + 1.0),
            |_, _| 0.0,
            |_| 0.0,
            |_| 0.0,
            1.0,
        )
        .with_second(|_, _| (0.0, 1.0, 0.0))
        .with_phi_closed(|z| z * 0.5 + Hyperbolic::E1, |_| Hyperbolic::new(0.5, 0.0))
    }

    fn saddle_problem() -> KGProblem {
        let d = wedge(Hyperbolic::new(0.3, 1.0));
        KGProblem::new(
            Potential::new(|x, t| t * t - x * x),
            RealField::from_fn(d.clone(), |x, t| (x * t).exp())
                .with_grad(|x, t| {
                    let e = (x * t).exp();
                    (t * e, x * e)
                })
                .with_second(|x, t| {
                    let e = (x * t).exp();
                    (t * t * e, (1.0 + x * t) * e, x * x * e)
                }),
            d,
            &probes(),
        )
        .unwrap()
    }

    fn rational_problem() -> KGProblem {
        let d = wedge(Hyperbolic::new(0.3, 1.0));
        KGProblem::new(
            Potential::new(|x, t| {
                0.25 * (1.0 / ((t + 1.0) * (t + 1.0)) - 1.0 / ((x + 1.0) * (x + 1.0)))
            }),
            RealField::from_fn(d.clone(), |x, t| ((x + 1.0) * (t + 1.0)).sqrt())
                .with_grad(|x, t| {
                    let f = ((x + 1.0) * (t + 1.0)).sqrt();
                    (0.5 * f / (x + 1.0), 0.5 * f / (t + 1.0))
                })
                .with_second(|x, t| {
                    let f = ((x + 1.0) * (t + 1.0)).sqrt();
                    (
                        -0.25 * f / ((x + 1.0) * (x + 1.0)),
                        0.25 * f / ((x + 1.0) * (t + 1.0)),
                        -0.25 * f / ((t + 1.0) * (t + 1.0)),
                    )
                }),
            d,
            &probes(),
        )
        .unwrap()
    }

    #[test]
    fn s_of_rho_examples() {
        let d = wedge(Hyperbolic::new(0.3, 1.0));
        // saddle: s = −1/ρ
        let pr = saddle_profile();
        for &p in probes().iter().step_by(3) {
            let rep = s_of_rho(&pr, &d, p, LEVEL_SPREAD_TOL).unwrap();
            let rho = (p.re * p.im).sqrt();
            assert!((rep.value + 1.0 / rho).abs() < 1e-10, "at {p}");
            assert!(rep.samples >= 2, "level set sampled at {p}");
        }
        // rational: s = 0
        let pr = rational_profile();
        let rep = s_of_rho(&pr, &d, Hyperbolic::new(0.5, 1.2), LEVEL_SPREAD_TOL).unwrap();
        assert!(rep.value.abs() < 1e-12);
        // rho = x: box rho = 0, s = 0
        let pr = RhoProfile::new(
            |x, _| x,
            |_, _| (1.0, 0.0),
            |_, _| 0.0,
            |_| 0.0,
            |_| 0.0,
            1.0,
        );
        let rep = s_of_rho(&pr, &d, Hyperbolic::new(0.5, 1.2), LEVEL_SPREAD_TOL).unwrap();
        assert!(rep.value.abs() < 1e-12);
    }

    #[test]
    fn null_gradient_detected() {
        // rho = x + t has a null gradient everywhere.
        let d = wedge(Hyperbolic::new(0.3, 1.0));
        let pr = RhoProfile::new(
            |x, t| x + t,
            |_, _| (1.0, 1.0),
            |_, _| 0.0,
            |_| 0.0,
            |_| 0.0,
            1.0,
        );
        assert!(matches!(
            s_of_rho(&pr, &d, Hyperbolic::new(0.5, 1.2), LEVEL_SPREAD_TOL),
            Err(Error::NullGradient { .. })
        ));
    }

    #[test]
    fn non_function_of_rho_detected() {
        // rho = x + t²: the quotient −2/(1−4t²) varies along level sets.
        let d = wedge(Hyperbolic::new(0.3, 1.0));
        let pr = RhoProfile::new(
            |x, t| x + t * t,
            |_, t| (1.0, 2.0 * t),
            |_, _| -2.0,
            |_| 0.0,
            |_| 0.0,
            1.0,
        );
        assert!(matches!(
            s_of_rho(&pr, &d, Hyperbolic::new(0.5, 1.2), LEVEL_SPREAD_TOL),
            Err(Error::NotAFunctionOfRho { .. })
        ));
    }

    #[test]
    fn build_phi_closed_forms() {
        let d = wedge(Hyperbolic::new(0.3, 1.0));
        // saddle: Φ = z/4
        let phi = build_phi(&saddle_profile(), &d, &probes()).unwrap();
        for &p in &probes() {
            assert!((phi.value(p) - p * 0.25).max_abs() < 1e-12, "at {p}");
            assert!(phi.d_holomorphy_residual(p).unwrap() < 1e-9, "at {p}");
        }
        // rational: Φ = z/2 + e₁
        let phi = build_phi(&rational_profile(), &d, &probes()).unwrap();
        for &p in &probes() {
            let expect = p * 0.5 + Hyperbolic::E1;
            assert!((phi.value(p) - expect).max_abs() < 1e-12, "at {p}");
            assert!(phi.d_holomorphy_residual(p).unwrap() < 1e-9, "at {p}");
        }
        // rho = x (s = 0): Φ = j/2
        let pr = RhoProfile::new(
            |x, _| x,
            |_, _| (1.0, 0.0),
            |_, _| 0.0,
            |_| 0.0,
            |_| 0.0,
            1.0,
        )
        .with_second(|_, _| (0.0, 0.0, 0.0));
        let phi = build_phi(&pr, &d, &probes()).unwrap();
        assert!(
            (phi.value(Hyperbolic::new(0.5, 1.2)) - Hyperbolic::new(0.0, 0.5)).max_abs() < 1e-15
        );
    }

    #[test]
    fn null_phi_detected() {
        // rho = xt on a domain containing the diagonal: rho_z is null there.
        let d = Domain::rect(0.0, 3.0, 0.0, 3.0, Hyperbolic::new(1.0, 1.0));
        let pr = RhoProfile::new(
            |x, t| x * t,
            |x, t| (t, x),
            |_, _| 0.0,
            |_| 0.0,
            |_| 0.0,
            1.0,
        );
        let bad_probe = vec![Hyperbolic::new(1.3, 1.3)];
        assert!(matches!(
            build_phi(&pr, &d, &bad_probe),
            Err(Error::NullPhi { .. })
        ));
    }

    #[test]
    fn sequence_pairs_match_worked_example() {
        // F₁ = ¼z e^{xt}, G₁ = (j/4) z e^{−xt}; F₂ = (z/4)² e^{xt}.
        let prob = saddle_problem();
        let seq = generating_sequence(&prob, &saddle_profile(), &probes()).unwrap();
        let p1 = seq.pair(1).unwrap();
        let p2 = seq.pair(2).unwrap();
        let p0 = seq.pair(0).unwrap();
        for &p in &probes() {
            let e = (p.re * p.im).exp();
            let f1_expect = p * (0.25 * e);
            let g1_expect = Hyperbolic::J * p * (0.25 / e);
            assert!((p1.f.value(p) - f1_expect).max_abs() < 1e-12 * e.max(1.0));
            assert!((p1.g.value(p) - g1_expect).max_abs() < 1e-12);
            let f2_expect = p * p * (e / 16.0);
            assert!((p2.f.value(p) - f2_expect).max_abs() < 1e-12 * e.max(1.0));
            assert!((p0.f.value(p) - Hyperbolic::new(e, 0.0)).max_abs() < 1e-13 * e.max(1.0));
        }
        // negative levels invert Φ: F₋₁·Φ = F.
        let pm1 = seq.pair(-1).unwrap();
        for &p in probes().iter().step_by(4) {
            let back = pm1.f.value(p) * seq.phi.value(p);
            assert!((back - p0.f.value(p)).max_abs() < 1e-10, "at {p}");
        }
    }

    #[test]
    fn sequence_coefficient_identities() {
        // a_m = 0, b_m = (Φ/Φ̄)^m b₀, B_m = (Φ/Φ̄)^m B₀.
        let prob = saddle_problem();
        let seq = generating_sequence(&prob, &saddle_profile(), &probes()).unwrap();
        let base = seq.pair(0).unwrap();
        for m in [-1i32, 1, 2] {
            let pm = seq.pair(m).unwrap();
            for &p in probes().iter().step_by(3) {
                let cm = pm.char_coeffs(p).unwrap();
                let c0 = base.char_coeffs(p).unwrap();
                let phi = seq.phi.value(p);
                let ratio = (phi * phi.conj().inverse_unchecked()).powi(m);
                assert!(cm.a.max_abs() < 1e-9, "a_{m} at {p}");
                assert!((cm.b - ratio * c0.b).max_abs() < 1e-9, "b_{m} at {p}");
                assert!(
                    (cm.big_b - ratio * c0.big_b).max_abs() < 1e-9,
                    "B_{m} at {p}"
                );
            }
        }
    }

    #[test]
    fn successor_chain_both_examples() {
        for (prob, profile) in [
            (saddle_problem(), saddle_profile()),
            (rational_problem(), rational_profile()),
        ] {
            let seq = generating_sequence(&prob, &profile, &probes()).unwrap();
            for m in -2i32..=2 {
                let rep = is_successor(
                    &seq.pair(m + 1).unwrap(),
                    &seq.pair(m).unwrap(),
                    &probes(),
                    1e-8,
                )
                .unwrap();
                assert!(
                    rep.is_successor,
                    "m = {m}: devs {} {}",
                    rep.max_a_dev, rep.max_b_dev
                );
            }
        }
    }

    #[test]
    fn ansatz_mismatch_detected() {
        // e^{xt} is not a function of (x+1)(t+1).
        let prob = saddle_problem();
        assert!(matches!(
            generating_sequence(&prob, &rational_profile(), &probes()),
            Err(Error::AnsatzMismatch { .. })
        ));
    }

    // ---- formal powers -----------------------------------------------

    fn saddle_seq() -> GeneratingSequence {
        generating_sequence(&saddle_problem(), &saddle_profile(), &probes()).unwrap()
    }

    const CENTER: Hyperbolic = Hyperbolic::new(0.0, 4.0);
    const ORIGIN: Hyperbolic = Hyperbolic::ZERO;

    /// Printed closed forms of the saddle example.
    fn z0_closed(a_is_one: bool, z: Hyperbolic) -> Hyperbolic {
        let e = (z.re * z.im).exp();
        if a_is_one {
            Hyperbolic::new(e, 0.0)
        } else {
            Hyperbolic::new(0.0, 1.0 / e)
        }
    }

    fn z1_closed(a_is_one: bool, z: Hyperbolic) -> Hyperbolic {
        let c = z.re * z.im;
        let s = z.re * z.re + z.im * z.im;
        if a_is_one {
            Hyperbolic::new(c.sinh(), 0.5 * s * (-c).exp()) * 0.25
        } else {
            Hyperbolic::new(0.5 * s * c.exp(), c.sinh()) * 0.25
        }
    }

    #[test]
    fn z0_matches_closed_forms() {
        let seq = saddle_seq();
        let opts = FormalPowerOptions::default();
        for (a, one) in [(Hyperbolic::ONE, true), (Hyperbolic::J, false)] {
            let zp = formal_power(&seq, 0, 0, a, CENTER, ORIGIN, &opts).unwrap();
            for &p in &probes() {
                let expect = z0_closed(one, p);
                assert!(
                    (zp.eval(p).unwrap() - expect).max_abs() < 1e-12 * expect.max_abs().max(1.0),
                    "a one={one} at {p}"
                );
            }
        }
    }

    #[test]
    fn z1_matches_closed_forms() {
        let seq = saddle_seq();
        let opts = FormalPowerOptions::default();
        for (a, one) in [(Hyperbolic::ONE, true), (Hyperbolic::J, false)] {
            let zp = formal_power(&seq, 0, 1, a, CENTER, ORIGIN, &opts).unwrap();
            for &p in &probes() {
                let expect = z1_closed(one, p);
                let got = zp.eval(p).unwrap();
                assert!(
                    (got - expect).max_abs() <= 1e-9 * expect.max_abs().max(1.0),
                    "a one={one} at {p}: {got} vs {expect}"
                );
            }
        }
    }

    #[test]
    fn center_matching_condition() {
        // Z_m⁽⁰⁾(a, z₀; z₀) = a for spread-out a and centers.
        let seq = saddle_seq();
        let opts = FormalPowerOptions::default();
        for (a, z0, m) in [
            (Hyperbolic::new(0.7, -0.3), Hyperbolic::new(0.5, 1.5), 0),
            (Hyperbolic::new(-1.2, 2.0), Hyperbolic::new(1.0, 2.0), 1),
            (Hyperbolic::new(0.1, 0.9), Hyperbolic::new(0.8, 1.4), -1),
        ] {
            let zp = formal_power(&seq, m, 0, a, z0, ORIGIN, &opts).unwrap();
            assert!((zp.eval(z0).unwrap() - a).max_abs() < 1e-12, "m={m}");
        }
    }

    #[test]
    fn linearity_in_the_coefficient() {
        let seq = saddle_seq();
        let opts = FormalPowerOptions::default();
        let a = Hyperbolic::new(1.7, -2.3);
        let z = Hyperbolic::new(1.0, 1.6);
        for n in [0u32, 1, 2] {
            let mixed = formal_power(&seq, 0, n, a, CENTER, ORIGIN, &opts).unwrap();
            let unit = formal_power(&seq, 0, n, Hyperbolic::ONE, CENTER, ORIGIN, &opts).unwrap();
            let jay = formal_power(&seq, 0, n, Hyperbolic::J, CENTER, ORIGIN, &opts).unwrap();
            let combo = unit.eval(z).unwrap() * a.re + jay.eval(z).unwrap() * a.im;
            let got = mixed.eval(z).unwrap();
            assert!(
                (got - combo).max_abs() <= 1e-10 * got.max_abs().max(1.0),
                "n={n}: {got} vs {combo}"
            );
        }
    }

    #[test]
    fn powers_satisfy_their_vekua_equation() {
        let seq = saddle_seq();
        let opts = FormalPowerOptions::default();
        let pair0 = seq.pair(0).unwrap();
        let pair1 = seq.pair(1).unwrap();
        let z1 = formal_power(&seq, 0, 1, Hyperbolic::ONE, CENTER, ORIGIN, &opts).unwrap();
        let z10 = formal_power(&seq, 1, 0, Hyperbolic::J, CENTER, ORIGIN, &opts).unwrap();
        for &p in probes().iter().step_by(4) {
            assert!(
                vekua_residual(&z1.field, &pair0, p).unwrap() < 1e-6,
                "Z1 at {p}"
            );
            assert!(
                vekua_residual(&z10.field, &pair1, p).unwrap() < 1e-6,
                "Z10 at {p}"
            );
        }
    }

    #[test]
    fn derivative_relation_steps_down() {
        let seq = saddle_seq();
        let opts = FormalPowerOptions::default();
        let p = Hyperbolic::new(1.0, 2.0);
        let r =
            power_derivative_check(&seq, 0, 1, Hyperbolic::ONE, CENTER, ORIGIN, p, &opts).unwrap();
        assert!(r <= 1e-6, "residual {r}");
        // and against the printed Z₁⁽⁰⁾ = (j/4) z e^{−xt}
        let z1 = formal_power(&seq, 0, 1, Hyperbolic::ONE, CENTER, ORIGIN, &opts).unwrap();
        let pair0 = seq.pair(0).unwrap();
        let lhs = crate::pseudoanalytic::fg_derivative(&z1.field, &pair0, p).unwrap();
        let expect = Hyperbolic::J * p * (0.25 * (-(p.re * p.im)).exp());
        assert!((lhs - expect).max_abs() <= 1e-6);
        // linearity: a = 0 collapses both sides to zero
        let z_zero = formal_power(&seq, 0, 1, Hyperbolic::ZERO, CENTER, ORIGIN, &opts).unwrap();
        assert!(z_zero.eval(p).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn asymptotic_ratios_decrease() {
        let seq = saddle_seq();
        let opts = FormalPowerOptions::default();
        let z0 = Hyperbolic::new(0.5, 1.5);
        let dir = Hyperbolic::new(1.0, 2.0);
        for n in [1u32, 2] {
            let rep = asymptotic_check(&seq, 0, n, Hyperbolic::ONE, z0, 0.2, dir, &opts).unwrap();
            assert!(
                rep.decreasing(),
                "n={n}: ratios {:?} at radii {:?}",
                rep.ratios,
                rep.radii
            );
            // contact at the center itself: Z(z0) = a·0ⁿ = 0 for n ≥ 1
            let zp = formal_power(&seq, 0, n, Hyperbolic::ONE, z0, z0, &opts).unwrap();
            assert!(zp.eval(z0).unwrap().max_abs() < 1e-12);
        }
        // n = 0: Z(z₀) = a exactly, so the ratio |Z − a| tends to 0
        let rep = asymptotic_check(&seq, 0, 0, Hyperbolic::ONE, z0, 0.2, dir, &opts).unwrap();
        assert!(rep.decreasing(), "ratios {:?}", rep.ratios);
        let zp = formal_power(&seq, 0, 0, Hyperbolic::ONE, z0, z0, &opts).unwrap();
        assert!((zp.eval(z0).unwrap() - Hyperbolic::ONE).max_abs() < 1e-13);
    }

    #[test]
    fn formal_power_evaluates_concurrently() {
        let seq = saddle_seq();
        let opts = FormalPowerOptions::default();
        let power = std::sync::Arc::new(
            formal_power(&seq, 0, 1, Hyperbolic::ONE, CENTER, ORIGIN, &opts).unwrap(),
        );
        let pts: Vec<Hyperbolic> = probes();
        let serial: Vec<Hyperbolic> = pts.iter().map(|&p| power.eval(p).unwrap()).collect();
        let mut handles = Vec::new();
        for _ in 0..4 {
            let power = power.clone();
            let pts = pts.clone();
            handles.push(std::thread::spawn(move || {
                pts.iter()
                    .map(|&p| power.eval(p).unwrap())
                    .collect::<Vec<_>>()
            }));
        }
        for h in handles {
            let got = h.join().unwrap();
            assert_eq!(got.len(), serial.len());
            for (a, b) in got.iter().zip(&serial) {
                assert_eq!(a, b, "concurrent evaluation must agree bit-for-bit");
            }
        }
    }

    #[test]
    fn solution_family_solves_klein_gordon() {
        let prob = saddle_problem();
        let seq = generating_sequence(&prob, &saddle_profile(), &probes()).unwrap();
        let opts = FormalPowerOptions::default();
        let family = kg_solution_family(&seq, 1, CENTER, ORIGIN, &opts).unwrap();
        assert_eq!(family.len(), 4);
        for member in &family {
            for &p in probes().iter().step_by(5) {
                let r = kg_residual(&member.re, &prob.potential, p).unwrap();
                assert!(
                    r.abs() <= 1e-6,
                    "n={} a={} at {p}: {r}",
                    member.n,
                    member.a_label
                );
            }
        }
        // the n = 1, a = 1 member is ¼ sinh(xt)
        let m = family
            .iter()
            .find(|m| m.n == 1 && m.a_label == "1")
            .unwrap();
        let p = Hyperbolic::new(1.0, 2.0);
        assert!((m.re.value(p) - 0.25 * 2.0f64.sinh()).abs() < 1e-9);
    }

    /// Example-3 printed closed forms (t₀ = 4), matching the F* = −jf
    /// convention of that worked example.
    fn rational_z1_printed(a_is_one: bool, z: Hyperbolic) -> Hyperbolic {
        let t0 = 4.0;
        let al = (t0 + 1.0f64).sqrt();
        let (x, t) = (z.re, z.im);
        let r = ((x + 1.0) * (t + 1.0)).sqrt();
        let q = 0.5 * (x * x + t * t) + x + t;
        let l = ((x + 1.0) * (t + 1.0)).ln();
        let big = 2.0 * (x + t) * (x * t + 1.0) + (x * x * t * t + 4.0 * x * t + x * x + t * t);
        let den = t0 * (t0 + 2.0);
        if a_is_one {
            Hyperbolic::new(
                r * (-q / (al * den) + al * (t0 + 1.0) * l / den),
                (0.5 * big / (al * den) - al * (t0 + 1.0) * q / den) / r,
            )
        } else {
            Hyperbolic::new(
                r * ((t0 + 1.0) * q / (al * den) - al * l / den),
                (-0.5 * (t0 + 1.0) * big / (al * den) + al * q / den) / r,
            )
        }
    }

    #[test]
    fn rational_powers_match_printed_forms_under_sign_flip() {
        let prob = rational_problem();
        let seq = generating_sequence(&prob, &rational_profile(), &probes()).unwrap();
        let center = Hyperbolic::new(0.0, 4.0);
        let al = 5.0f64.sqrt();

        // Z⁽⁰⁾ is sign-free.
        let opts = FormalPowerOptions::default();
        let z0 = formal_power(&seq, 0, 0, Hyperbolic::ONE, center, ORIGIN, &opts).unwrap();
        for &p in probes().iter().step_by(3) {
            let expect = ((p.re + 1.0) * (p.im + 1.0)).sqrt() / al;
            assert!((z0.eval(p).unwrap() - Hyperbolic::new(expect, 0.0)).max_abs() < 1e-12);
        }

        // Z⁽¹⁾: the printed forms need F* = −jf; the defining formula's
        // +jf flips their imaginary parts.
        for (sign, im_factor) in [(-1.0, 1.0), (1.0, -1.0)] {
            let opts = FormalPowerOptions {
                fstar_sign: sign,
                ..Default::default()
            };
            for one in [true, false] {
                let a = if one { Hyperbolic::ONE } else { Hyperbolic::J };
                let zp = formal_power(&seq, 0, 1, a, center, ORIGIN, &opts).unwrap();
                for &p in probes().iter().step_by(4) {
                    let printed = rational_z1_printed(one, p);
                    let expect = Hyperbolic::new(printed.re, im_factor * printed.im);
                    let got = zp.eval(p).unwrap();
                    assert!(
                        (got - expect).max_abs() <= 1e-9 * expect.max_abs().max(1.0),
                        "sign={sign} one={one} at {p}: {got} vs {expect}"
                    );
                }
            }
        }
    }
}
