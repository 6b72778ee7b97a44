//! Element algebras.
//!
//! Every kernel in the crate is generic over [`Semiring`]. Three instances are
//! provided, all 64 bits wide:
//!
//! * `i64`: the integer ring with wrapping arithmetic (exact, associative, so
//!   every schedule must agree bit-for-bit with the serial oracle),
//! * `f64`: the floating-point ring (results agree up to rounding),
//! * [`MinPlus`]: the tropical semiring `(min, +, +inf, 0)`, which has no
//!   additive inverse.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::MmError;

/// Identifies one of the provided algebras on the command line and in fixture files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SemiringId {
    Int,
    Float,
    Tropical,
}

impl SemiringId {
    pub fn as_str(self) -> &'static str {
        match self {
            SemiringId::Int => "int",
            SemiringId::Float => "float",
            SemiringId::Tropical => "tropical",
        }
    }
}

impl fmt::Display for SemiringId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SemiringId {
    type Err = MmError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "int" => Ok(SemiringId::Int),
            "float" => Ok(SemiringId::Float),
            "tropical" => Ok(SemiringId::Tropical),
            other => Err(MmError::Parse(format!("unknown semiring `{other}`"))),
        }
    }
}

/// `(S, ⊕, ⊗, 0, 1)` with an optional inverse `⊖`.
pub trait Semiring: Copy + Send + Sync + PartialEq + fmt::Debug + 'static {
    const ID: SemiringId;

    fn zero() -> Self;
    fn one() -> Self;
    fn add(self, rhs: Self) -> Self;
    fn mul(self, rhs: Self) -> Self;

    /// `self ⊖ rhs`, or `None` when the algebra has no additive inverse.
    fn sub(self, rhs: Self) -> Option<Self> {
        let _ = rhs;
        None
    }

    fn has_inverse() -> bool {
        Self::zero().sub(Self::zero()).is_some()
    }

    /// `0 ⊖ 1`, used to fold a subtraction into an accumulation.
    fn neg_one() -> Option<Self> {
        Self::zero().sub(Self::one())
    }

    /// Oracle comparison. Exact unless the algebra rounds.
    fn close_to(self, other: Self, rel_tol: f64) -> bool {
        let _ = rel_tol;
        self == other
    }

    /// Draw a test element. Values are kept small so that integer products
    /// never rely on wrap-around and float sums stay well conditioned.
    fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self;

    fn parse_element(s: &str) -> Option<Self>;
    fn format_element(self) -> String;
}

impl Semiring for i64 {
    const ID: SemiringId = SemiringId::Int;

    fn zero() -> Self {
        0
    }
    fn one() -> Self {
        1
    }
    #[inline(always)]
    fn add(self, rhs: Self) -> Self {
        self.wrapping_add(rhs)
    }
    #[inline(always)]
    fn mul(self, rhs: Self) -> Self {
        self.wrapping_mul(rhs)
    }
    #[inline(always)]
    fn sub(self, rhs: Self) -> Option<Self> {
        Some(self.wrapping_sub(rhs))
    }
    fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.gen_range(-50..=50)
    }
    fn parse_element(s: &str) -> Option<Self> {
        s.parse().ok()
    }
    fn format_element(self) -> String {
        self.to_string()
    }
}

impl Semiring for f64 {
    const ID: SemiringId = SemiringId::Float;

    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    #[inline(always)]
    fn add(self, rhs: Self) -> Self {
        self + rhs
    }
    #[inline(always)]
    fn mul(self, rhs: Self) -> Self {
        self * rhs
    }
    #[inline(always)]
    fn sub(self, rhs: Self) -> Option<Self> {
        Some(self - rhs)
    }
    fn close_to(self, other: Self, rel_tol: f64) -> bool {
        let scale = 1f64.max(self.abs()).max(other.abs());
        (self - other).abs() <= rel_tol * scale
    }
    fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.gen_range(-1.0..1.0)
    }
    fn parse_element(s: &str) -> Option<Self> {
        s.parse().ok()
    }
    fn format_element(self) -> String {
        // `Display` for f64 is the shortest string that round-trips.
        self.to_string()
    }
}

/// The tropical semiring: `⊕ = min`, `⊗ = +`, `0 = +inf`, `1 = 0`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct MinPlus(pub f64);

impl MinPlus {
    pub const INFINITY: MinPlus = MinPlus(f64::INFINITY);
}

impl Semiring for MinPlus {
    const ID: SemiringId = SemiringId::Tropical;

    fn zero() -> Self {
        MinPlus::INFINITY
    }
    fn one() -> Self {
        MinPlus(0.0)
    }
    #[inline(always)]
    fn add(self, rhs: Self) -> Self {
        MinPlus(self.0.min(rhs.0))
    }
    #[inline(always)]
    fn mul(self, rhs: Self) -> Self {
        MinPlus(self.0 + rhs.0)
    }
    fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        // Integer-valued weights keep `+` exact; an occasional missing edge
        // exercises the additive identity.
        if rng.gen_ratio(1, 16) {
            MinPlus::INFINITY
        } else {
            MinPlus(rng.gen_range(0..100) as f64)
        }
    }
    fn parse_element(s: &str) -> Option<Self> {
        match s {
            "inf" => Some(MinPlus::INFINITY),
            _ => s.parse().ok().map(MinPlus),
        }
    }
    fn format_element(self) -> String {
        if self.0 == f64::INFINITY {
            "inf".to_string()
        } else {
            self.0.to_string()
        }
    }
}
