//! Toric Fano analysis: exact polytope combinatorics, Futaki and Tian–Zhu
//! invariants, the Kähler–Ricci soliton vector field, and multiplier ideal
//! subvariety exclusion on toric del Pezzo surfaces.

pub mod cone;
pub mod error;
pub mod exact;
pub mod fixture;
pub mod flow;
pub mod invariants;
pub mod mis;
pub mod polytope;
pub mod potentials;
pub mod quadrature;
pub mod selftest;
pub mod summary;

pub use error::{Error, Result};
