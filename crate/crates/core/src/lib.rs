//! Relativistic electron-spin laboratory.
//!
//! Builds the Dirac (Σ/2), Foldy–Wouthuysen and Pryce spin operators, checks
//! that the latter two are proper spin operators, verifies spin equations of
//! motion as operator identities on grid states, and propagates Dirac
//! spinor wavepackets in electromagnetic fields. Units have ħ = 1.

pub mod algebra;
pub mod app;
pub mod dynamics;
pub mod error;
pub mod fields;
pub mod grid;
pub mod hamiltonian;
pub mod operators;
pub mod propagate;
pub mod scenario;
pub mod symbols;
pub mod vec3;

pub use error::{Error, Result};
