//! Exact diagonalization and exact-state verification for dissipative U(1)
//! quantum link models.
//!
//! The crate is organized bottom-up:
//!
//! * [`lattice`] and [`sparse`]: lattice geometries, the spin register, and the
//!   sparse complex operator algebra.
//! * [`symmetry`]: Gauss-law generators, global charges and symmetry sectors in
//!   the Hilbert space and in the double (vectorized) space.
//! * [`models`]: Hamiltonians and jump-operator families.
//! * [`liouvillian`]: the vectorization convention, superoperator assembly,
//!   twisted boundaries and matrix-free application.
//! * [`exact`]: closed-form steady states and eigenoperators, similarity
//!   transformations, and dynamic-programming marginals.
//! * [`numerics`]: dense eigensolvers, kernel extraction, spectral comparison
//!   and time integration.
//!
//! Data-parallel loops go through [`exec`]; with the `parallel` feature
//! disabled everything runs sequentially.

pub mod error;
pub mod exact;
pub mod exec;
pub mod io;
pub mod lattice;
pub mod liouvillian;
pub mod models;
pub mod numerics;
pub mod sparse;
pub mod spin;
pub mod symmetry;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
