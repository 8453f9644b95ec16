//! Quadratic Poisson structures on GL(n, ℂ): triangular factorizations,
//! Darboux charts, Hamiltonian flows, action-angle variables on SU(3) and
//! scattering data of first-order n×n systems.

pub mod darboux;
pub mod elliptic;
pub mod error;
pub mod factor;
pub mod matrix;
pub mod ode;
pub mod poisson;
pub mod quad;
pub mod sample;
pub mod scattering;
pub mod su3;
pub mod table;

pub use error::{Error, Result, Side};
pub use matrix::{ComplexMatrix, IndexSet, C64};
