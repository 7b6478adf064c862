//! Ground states of coupled cubic Schrödinger (Gross–Pitaevskii) systems
//! with nonnegative, possibly vanishing potentials, at desk scale.
//!
//! The crate discretizes
//!
//! ```text
//!   -Δu + a(εx) u = μ₁ u³ + β v² u
//!   -Δv + b(εx) v = μ₂ v³ + β u² v      on [-L, L]^N, N ∈ {1,2,3},
//! ```
//!
//! with Dirichlet truncation and second-order stencils, and computes
//! positive ground states by gradient flow re-projected onto the Nehari
//! manifold after every step. On top of the solver sit the coupling
//! thresholds β₀, β₁, β₂, the segregation criterion for the quotient
//! functional, and ε-sweep experiments that measure concentration and
//! energy-scaling behaviour against independently solved limit problems.
//!
//! The crate is `no_std` (with `alloc`); float math goes through `libm`
//! so results do not depend on the platform's libm. All operations are
//! pure functions of their inputs. IO, configuration and file formats
//! live in the companion `gpelab` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod energy;
pub mod experiments;
pub mod grid;
pub mod potential;
pub mod solver;

mod error;

pub use error::{Error, Result};
