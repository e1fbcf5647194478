//! Expectation-value estimation by computational-basis sampling.
//!
//! A concentrated state `|psi>` is truncated to its `R` heaviest basis states;
//! the expectation value of a Pauli-sum observable is then rebuilt from basis
//! weights, classically computed transition elements `<m|O|n>` and `2(R-1)`
//! interference probabilities. The crate also carries the conventional
//! Pauli-grouping estimators, the closed-form variance and shot-allocation
//! machinery for both, and a seeded Monte Carlo harness that emulates the full
//! measurement pipeline with finite shots.
//!
//! Basis labels are integers with qubit `s` stored in bit `s` (qubit 0 is the
//! least significant bit).

pub mod cbs;
pub mod error;
pub mod grouping;
pub mod pauli;
pub mod sampling;
pub mod state;
pub mod variance;

/// Computational basis label; bit `s` is the state of qubit `s`.
pub type BasisLabel = u64;

pub use error::{Error, Result};
pub use pauli::{Observable, PauliString, PauliTerm};
pub use state::{Distribution, GroundStateResult, StateVector};
