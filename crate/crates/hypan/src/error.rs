//! Error type shared by all modules.

use crate::duplex::Hyperbolic;

/// Errors surfaced by the duplex algebra, field operators, quadrature and
/// the pseudoanalytic machinery built on top of them.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    /// Operand lies on the null-cone |re| = |im| and has no inverse.
    #[error("NullCone: {z} is a zero divisor (|re| = |im| within tolerance)")]
    NullCone { z: Hyperbolic },

    /// A finite-difference stencil would leave the declared domain.
    #[error("BoundaryProximity: stencil of half-width {step} around ({x}, {t}) exits the domain")]
    BoundaryProximity { x: f64, t: f64, step: f64 },

    /// Two successive quadrature refinements disagree beyond the tolerance.
    #[error("QuadratureNonConvergence: refinement difference {error:e} exceeds tolerance {tol:e}")]
    QuadratureNonConvergence { error: f64, tol: f64 },

    /// The integrand handed to A or Ā is not a gradient of the claimed kind.
    #[error(
        "CompatibilityViolated: condition residual {residual:e} at ({x}, {t}) exceeds {tol:e}"
    )]
    CompatibilityViolated {
        residual: f64,
        x: f64,
        t: f64,
        tol: f64,
    },

    /// Im(conj(F) G) lost its margin somewhere on the probe set.
    #[error("DegeneratePair: margin {margin:e} below threshold {threshold:e}")]
    DegeneratePair { margin: f64, threshold: f64 },

    /// The particular solution must stay positive on the domain.
    #[error("NonPositiveSolution: f({x}, {t}) = {value}")]
    NonPositiveSolution { x: f64, t: f64, value: f64 },

    /// |rho_z|^2 vanishes where the profile machinery needs to divide by it.
    #[error("NullGradient: |rho_z|^2 = {value:e} at ({x}, {t})")]
    NullGradient { x: f64, t: f64, value: f64 },

    /// box(rho)/4|rho_z|^2 varies along a level set of rho.
    #[error("NotAFunctionOfRho: level-set spread {spread:e} exceeds {tol:e}")]
    NotAFunctionOfRho { spread: f64, tol: f64 },

    /// Phi = j e^{-S} rho_z touches the null-cone on a probe.
    #[error("NullPhi: Phi is null at ({x}, {t})")]
    NullPhi { x: f64, t: f64 },

    /// f does not factor through rho on the probe set.
    #[error("AnsatzMismatch: f level-set spread {spread:e} exceeds {tol:e}")]
    AnsatzMismatch { spread: f64, tol: f64 },

    /// The catalog has no closed form for the requested power.
    #[error("MissingOracle: no closed form for n = {n}, a = {a_label}")]
    MissingOracle { n: u32, a_label: String },

    /// Malformed textual input ("x+tj", "x,t", grid specs, problem files).
    #[error("Parse: {0}")]
    Parse(String),
}

impl Error {
    /// Stable machine-readable name of the variant, used by the CLI on stderr.
    pub fn name(&self) -> &'static str {
        match self {
            Error::NullCone { .. } => "NullCone",
            Error::BoundaryProximity { .. } => "BoundaryProximity",
            Error::QuadratureNonConvergence { .. } => "QuadratureNonConvergence",
            Error::CompatibilityViolated { .. } => "CompatibilityViolated",
            Error::DegeneratePair { .. } => "DegeneratePair",
            Error::NonPositiveSolution { .. } => "NonPositiveSolution",
            Error::NullGradient { .. } => "NullGradient",
            Error::NotAFunctionOfRho { .. } => "NotAFunctionOfRho",
            Error::NullPhi { .. } => "NullPhi",
            Error::AnsatzMismatch { .. } => "AnsatzMismatch",
            Error::MissingOracle { .. } => "MissingOracle",
            Error::Parse(_) => "Parse",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
