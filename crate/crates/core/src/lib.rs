//! Transfer-matrix certificates for one-dimensional Schrödinger operators
//! `−d²/dx² + V` on the half-line with sparse bump potentials.
//!
//! * [`logspace`]: signed log-magnitude arithmetic;
//! * [`mat2`]: 2×2 algebra and smallest-singular-value bounds;
//! * [`potential`]: bump potentials and the `exp(n^n)` example;
//! * [`transfer`]: propagators and the coefficient recursion;
//! * [`bounds`]: closed-form lower bounds and the zero-energy certificate;
//! * [`spectral`]: boundary quadratic forms, test functions and shooting.

pub mod bounds;
pub mod logspace;
pub mod mat2;
pub mod potential;
pub mod spectral;
pub mod transfer;

pub use logspace::{Checked, LogMat2, LogReal, LogVec2};
pub use mat2::{Mat2, Vec2};
pub use potential::{example_potential, Bump, Profile, SparsePotential};
