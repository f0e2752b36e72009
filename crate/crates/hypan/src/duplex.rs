//! The hyperbolic (duplex) number plane: x + tj with j² = +1.
//!
//! A two-dimensional commutative real algebra with zero divisors on the
//! null-cone |x| = |t|. The idempotent basis e₁ = (1+j)/2, e₂ = (1−j)/2
//! diagonalizes multiplication, which is what makes the whole calculus
//! downstream tractable.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

use crate::error::{Error, Result};

/// Relative half-width of the numerical null-cone band.
///
/// The null-cone is exact in the algebra; floating point needs a band.
/// `is_null` treats z as a zero divisor when ||re| − |im|| ≤ τ·max(1, |re|, |im|).
pub const TAU_NULL: f64 = 1e-12;

/// A hyperbolic number x + tj, j² = +1. `re` is the x-part, `im` the
/// coefficient of j (the t-part).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Hyperbolic {
    pub re: f64,
    pub im: f64,
}

/// Coordinates of a hyperbolic number in the idempotent basis:
/// z = p1·e₁ + p2·e₂ with e₁ = (1+j)/2, e₂ = (1−j)/2.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct IdempotentPair {
    pub p1: f64,
    pub p2: f64,
}

impl Hyperbolic {
    pub const ZERO: Self = Self { re: 0.0, im: 0.0 };
    pub const ONE: Self = Self { re: 1.0, im: 0.0 };
    pub const J: Self = Self { re: 0.0, im: 1.0 };
    /// e₁ = (1+j)/2.
    pub const E1: Self = Self { re: 0.5, im: 0.5 };
    /// e₂ = (1−j)/2.
    pub const E2: Self = Self { re: 0.5, im: -0.5 };

    pub const fn new(re: f64, im: f64) -> Self {
        Self { re, im }
    }

    /// Conjugate z̄ = x − tj.
    #[inline]
    pub fn conj(self) -> Self {
        Self::new(self.re, -self.im)
    }

    /// Hyperbolic modulus squared z·z̄ = x² − t². Real, and may be negative.
    #[inline]
    pub fn modulus_sq(self) -> f64 {
        self.re * self.re - self.im * self.im
    }

    /// Largest component magnitude, the norm used for residual reporting.
    #[inline]
    pub fn max_abs(self) -> f64 {
        self.re.abs().max(self.im.abs())
    }

    /// Whether z lies in the numerical null-cone band of relative width `tau`.
    #[inline]
    pub fn is_null_with(self, tau: f64) -> bool {
        let gap = (self.re.abs() - self.im.abs()).abs();
        gap <= tau * 1.0_f64.max(self.re.abs()).max(self.im.abs())
    }

    /// `is_null_with` at the default tolerance [`TAU_NULL`].
    #[inline]
    pub fn is_null(self) -> bool {
        self.is_null_with(TAU_NULL)
    }

    /// Multiplicative inverse z̄/|z|². Fails on the null-cone, where no
    /// inverse exists; there is deliberately no `Div` operator on the type,
    /// so every division goes through this check (or through
    /// [`inverse_unchecked`](Self::inverse_unchecked) where non-nullness has
    /// already been established).
    pub fn inverse(self) -> Result<Self> {
        if self.is_null() {
            return Err(Error::NullCone { z: self });
        }
        Ok(self.inverse_unchecked())
    }

    /// z̄/|z|² with no null-cone check. On the null-cone this produces
    /// non-finite components, which propagate visibly.
    #[inline]
    pub fn inverse_unchecked(self) -> Self {
        let m = self.modulus_sq();
        Self::new(self.re / m, -self.im / m)
    }

    /// Integer power; negative exponents use the unchecked inverse, so the
    /// caller is responsible for non-nullness (the generating-sequence
    /// machinery validates Φ on probes before taking negative powers).
    pub fn powi(self, k: i32) -> Self {
        let base = if k >= 0 {
            self
        } else {
            self.inverse_unchecked()
        };
        let mut acc = Self::ONE;
        for _ in 0..k.unsigned_abs() {
            acc = acc * base;
        }
        acc
    }

    #[inline]
    pub fn to_idempotent(self) -> IdempotentPair {
        IdempotentPair {
            p1: self.re + self.im,
            p2: self.re - self.im,
        }
    }

    #[inline]
    pub fn from_idempotent(p: IdempotentPair) -> Self {
        Self::new((p.p1 + p.p2) / 2.0, (p.p1 - p.p2) / 2.0)
    }

    pub fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

impl IdempotentPair {
    pub const fn new(p1: f64, p2: f64) -> Self {
        Self { p1, p2 }
    }
}

/// Multiplication is component-wise in this basis.
impl Mul for IdempotentPair {
    type Output = Self;
    #[inline]
    fn mul(self, o: Self) -> Self {
        Self::new(self.p1 * o.p1, self.p2 * o.p2)
    }
}

impl Add for IdempotentPair {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.p1 + o.p1, self.p2 + o.p2)
    }
}

impl From<Hyperbolic> for IdempotentPair {
    fn from(z: Hyperbolic) -> Self {
        z.to_idempotent()
    }
}

impl From<IdempotentPair> for Hyperbolic {
    fn from(p: IdempotentPair) -> Self {
        Hyperbolic::from_idempotent(p)
    }
}

impl Add for Hyperbolic {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.re + o.re, self.im + o.im)
    }
}

impl Sub for Hyperbolic {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.re - o.re, self.im - o.im)
    }
}

impl Mul for Hyperbolic {
    type Output = Self;
    /// (a+bj)(c+dj) = (ac+bd) + (ad+bc)j.
    #[inline]
    fn mul(self, o: Self) -> Self {
        Self::new(
            self.re * o.re + self.im * o.im,
            self.re * o.im + self.im * o.re,
        )
    }
}

impl Mul<f64> for Hyperbolic {
    type Output = Self;
    #[inline]
    fn mul(self, s: f64) -> Self {
        Self::new(self.re * s, self.im * s)
    }
}

impl Mul<Hyperbolic> for f64 {
    type Output = Hyperbolic;
    #[inline]
    fn mul(self, z: Hyperbolic) -> Hyperbolic {
        z * self
    }
}

impl Neg for Hyperbolic {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.re, -self.im)
    }
}

impl AddAssign for Hyperbolic {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl SubAssign for Hyperbolic {
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl fmt::Display for Hyperbolic {
    /// Renders "x+tj" / "x-tj" with shortest round-trip precision.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.im.is_sign_negative() {
            write!(f, "{}-{}j", self.re, -self.im)
        } else {
            write!(f, "{}+{}j", self.re, self.im)
        }
    }
}

impl FromStr for Hyperbolic {
    type Err = Error;

    /// Parses the "x+tj" / "x-tj" rendering (e.g. "0+4j", "2.5-0.125j").
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Parse(format!("expected \"x+tj\", got {s:?}"));
        let inner = s.strip_suffix('j').ok_or_else(bad)?;
        // Split at the last top-level sign, skipping exponent signs like 1e-3.
        let bytes = inner.as_bytes();
        let mut split = None;
        for i in (1..bytes.len()).rev() {
            let c = bytes[i];
            if (c == b'+' || c == b'-') && !matches!(bytes[i - 1], b'e' | b'E') {
                split = Some(i);
                break;
            }
        }
        let i = split.ok_or_else(bad)?;
        let re: f64 = inner[..i].parse().map_err(|_| bad())?;
        let sign = if bytes[i] == b'-' { -1.0 } else { 1.0 };
        let mag: f64 = inner[i + 1..].parse().map_err(|_| bad())?;
        Ok(Self::new(re, sign * mag))
    }
}
