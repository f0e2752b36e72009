//! Hyperbolic (split-complex) pseudoanalytic function theory, and its use in
//! constructing explicit families of solutions of the (1+1)-dimensional
//! Klein-Gordon equation with potential.
//!
//! The crate is organized around the calculus it implements:
//!
//! - [`duplex`]: exact arithmetic of the hyperbolic number plane x + tj,
//!   j² = +1, with its null-cone of zero divisors and idempotent basis.
//! - [`hfield`]: hyperbolic-valued fields over (x, t) domains, the formal
//!   operators ∂_z and ∂_z̄, path integration, and the antiderivative
//!   operators A and Ā.
//! - [`pseudoanalytic`]: generating pairs (F, G), characteristic
//!   coefficients, the (F, G)-derivative and -integral, Vekua residuals,
//!   adjoint pairs, and successor checks.
//! - [`kleingordon`]: the operator □ − ν, its factorization through two
//!   Vekua-type operators built from a positive particular solution f, the
//!   companion potential η, and the u ↔ v transfer maps.
//! - [`genseq`]: generating sequences (Φᵐ F, Φᵐ G) under the separable
//!   ansatz f = f(ρ), and formal powers Z_m⁽ⁿ⁾ whose real parts solve the
//!   Klein-Gordon equation.
//! - [`catalog`]: ready-made example problems with closed-form oracles,
//!   shared by the CLI and the verification suites.

pub mod catalog;
pub mod duplex;
pub mod error;
pub mod genseq;
pub mod hfield;
pub mod kleingordon;
pub mod pseudoanalytic;
pub mod quadrature;

pub use duplex::{Hyperbolic, IdempotentPair};
pub use error::{Error, Result};
pub use hfield::{Domain, HField, Path, RealField};
pub use quadrature::QuadratureSettings;
