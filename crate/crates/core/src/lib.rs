//! Equilibrium computation and incentive design for decentralized
//! slot and sector coordination games.
//!
//! The crate is organized around a plain normal-form game representation
//! ([`game`]), a self-contained dense LP solver with concave-cut outer
//! approximation ([`lp`]), correlated-equilibrium solvers in exact,
//! reduced-rank, and chance-constrained variants ([`equilibria`]),
//! best-response dynamics for a partially cooperative sector congestion
//! game ([`congestion`]), minimum-budget incentive planning over
//! best-response dynamics ([`steering`]), and seeded scenario generators
//! with comparison metrics ([`scenario`]).
//!
//! Everything is deterministic: identical inputs (including seeds)
//! produce identical outputs, bit for bit.

pub mod congestion;
pub mod equilibria;
mod error;
pub mod game;
pub mod lp;
pub mod scenario;
pub mod steering;

pub use error::{Error, Result};
