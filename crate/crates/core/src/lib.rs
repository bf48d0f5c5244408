//! Discretization and spectral toolkit for the mixed local-nonlocal operator
//!
//! ```text
//!     L u = -Δu + (-Δ)^s u + q·∇u        in Ω,
//!       u = 0                            on R^N \ Ω,
//! ```
//!
//! on intervals (1D) and axis-aligned square boxes (2D). The exterior
//! condition is structural: grid functions are defined on interior lattice
//! nodes and every reference outside the interior index set reads zero.
//!
//! The crate computes the principal eigenpair of the assembled operator by
//! inverse power iteration on the solution operator `f ↦ u`, a few
//! subdominant eigenvalues by Arnoldi on the same solution operator, and
//! turns the qualitative theory of such operators (strong maximum principle,
//! Hopf boundary lemma, min-max characterization of the principal
//! eigenvalue) into quantitative pass/fail checks. An independent Monte
//! Carlo estimate of the principal eigenvalue from the survival decay of
//! the killed drift-diffusion-jump process closes the loop.

pub mod barrier;
pub mod eigen;
pub mod error;
pub mod frac;
pub mod grid;
pub mod montecarlo;
pub mod operator;
pub mod properties;
pub mod quad;
pub mod solver;
pub mod study;
pub mod sum;
pub mod verdict;

pub use error::{Error, Result};
pub use grid::{DomainSpec, Grid};
pub use operator::{DiscreteOperator, DriftField, DriftScheme};
