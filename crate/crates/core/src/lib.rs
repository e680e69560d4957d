//! Numerics for bifurcating minimal 2-spheres in the ellipsoids E(a,b,b,d).
//!
//! The rotationally symmetric problem reduces to geodesics of the conformal
//! metric V²ǧ on the orbit space Ω_a. The crate provides the singular
//! Sturm–Liouville spectra of the linearized problem, the bifurcation
//! instants (computed twice, via Frobenius shooting and via a Heun continued
//! fraction), a boundary-orthogonal geodesic shooter, a branch tracer and
//! the flat-strip limit a → ∞.

pub mod branch_tracer;
pub mod error;
pub mod geometry;
pub mod heun;
pub mod limit_strip;
pub mod numerics;
pub mod shooter;
pub mod sturm_liouville;

pub use error::{Error, Result};
pub use geometry::{ChartPoint, OrbitPoint, Semiaxes};

/// Reflection class of a solution: `Even` geodesics meet the vertical axis
/// orthogonally, `Odd` ones pass through the center point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    /// Parity of the instant a_m in the merged sequence.
    pub fn of_m(m: usize) -> Parity {
        if m % 2 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    /// Index n with a_m = a_n^parity.
    pub fn n_of_m(m: usize) -> usize {
        m / 2
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Parity::Even => "even",
            Parity::Odd => "odd",
        }
    }
}

impl std::fmt::Display for Parity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Parity {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "even" => Ok(Parity::Even),
            "odd" => Ok(Parity::Odd),
            _ => Err(Error::Domain(format!("unknown parity '{s}'"))),
        }
    }
}
