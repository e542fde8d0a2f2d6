//! Squeezing of collective qutrit systems carried by the symmetric `(λ,0)`
//! irreducible representation of SU(3).
//!
//! The crate covers four layers:
//!
//! * [`irrep`]: basis, generator matrices and state/operator arithmetic;
//! * [`group`]: SU(2)-subgroup rotations, displacements and coherent states;
//! * [`squeezing`] and [`evolution`]: the isotropic observable family, its
//!   variance minimization and exact evolution under `h1² − ((2λ+3)/5) h1`;
//! * [`kernel`] and [`semiclassical`]: the Stratonovich–Weyl kernel on
//!   `SU(3)/U(2)`, phase-space quadrature and Liouville transport of the
//!   Wigner function.

pub mod error;
pub mod evolution;
pub mod group;
pub mod irrep;
pub mod kernel;
pub mod optimize;
pub mod semiclassical;
pub mod special;
pub mod squeezing;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

/// Polar angle `arccos(-1/5)` of the initial coherent state, sitting above
/// the minimum of the Hamiltonian symbol.
pub fn initial_polar_angle() -> f64 {
    (-0.2f64).acos()
}
