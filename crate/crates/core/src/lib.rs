//! Verification toolkit for the special Lagrangian equation
//! `F(D²u) = Σ arctan λᵢ(D²u) = Θ`.
//!
//! The crate is organized bottom-up:
//!
//! * [`matrix`], [`eigen`], [`operator`], [`phase`]: symmetric-matrix algebra,
//!   the operator itself and phase bookkeeping.
//! * [`gridfn`]: sampled functions on box grids with finite-difference
//!   calculus and convexity certificates.
//! * [`legendre`]: discrete convex conjugation and duality checks.
//! * [`rotation`]: rotation of gradient graphs, at the Hessian level and on
//!   sampled functions.
//! * [`families`]: closed-form solution families behind a common trait and a
//!   name-keyed registry.
//! * [`harnack`]: ball chains along curves and the effective-estimate sweep.

pub mod eigen;
pub mod error;
pub mod families;
pub mod gridfn;
pub mod harnack;
pub mod legendre;
pub mod matrix;
pub mod numfmt;
pub mod operator;
pub mod phase;
pub mod rotation;
pub mod sampling;

pub use error::{Error, Result};
pub use matrix::SymmetricMatrix;
pub use operator::{sl_operator, Criticality, Spectrum, DEFAULT_TOLERANCE};
pub use phase::PhaseParams;
