//! Exact q-series engine for tautological integrals on Hilbert schemes of
//! points on a surface.
//!
//! The crate computes generating series two independent ways: by brute-force
//! traces over a truncated Heisenberg Fock space, and by closed-form
//! bracket-sum formulas. The `verify` module compares the two exactly.

pub mod closedforms;
pub mod cli;
pub mod combinatorics;
pub mod error;
pub mod fock;
pub mod linalg;
pub mod operators;
pub mod rational;
pub mod series;
pub mod surface;
pub mod verify;

pub use error::{Error, Result};
pub use rational::Rational;
pub use series::ZQSeries;
