//! Dirac evolution on globally hyperbolic model spacetimes with timelike boundary.

pub mod banded;
pub mod boundary;
pub mod data;
pub mod diagnostics;
pub mod dirac;
pub mod error;
pub mod evolution;
pub mod field;
pub mod fourier;
pub mod geometry;
pub mod io;
pub mod mesh;
pub mod profile;
pub mod spin;

pub type C64 = nalgebra::Complex<f64>;

pub use error::{Error, Result};
pub use field::SpinorField;
pub use geometry::{BoundaryCondition, CauchySurface, FoliatedSpacetime, Side, SpinStructure};
pub use mesh::Mesh;
pub use profile::Profile;
pub use spin::{CliffordRep, PairingKind, SpinMatrix, Spinor};

/// Largest modulus over the entries of a complex matrix or vector.
pub trait MaxNorm {
    fn max_norm(&self) -> f64;
}

impl<R, Cc, S> MaxNorm for nalgebra::Matrix<C64, R, Cc, S>
where
    R: nalgebra::Dim,
    Cc: nalgebra::Dim,
    S: nalgebra::RawStorage<C64, R, Cc>,
{
    fn max_norm(&self) -> f64 {
        self.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}
