//! Numerics for quantum work-measurement schemes.
//!
//! A driven process is the triple `(H, H', U)` at inverse temperature `beta`.
//! A measurement scheme is a POVM `{M_a}` with a work value `W_a` attached to
//! each element. This crate builds the standard schemes (two-point
//! measurement, projective measurement of the work operator
//! `Omega = U' H' U - H`, and the epsilon-modified variants), evaluates the
//! exponential work average against the Jarzynski value, realizes the
//! modified schemes as two-stage Kraus circuits and samples them.
//!
//! The crate is `no_std` with `alloc`. The `std` feature is needed only for
//! `parallel`, which spreads trajectory sampling and optimizer restarts over
//! a rayon pool.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod circuits;
pub mod dissipation;
pub mod error;
pub mod linalg;
pub mod modified;
pub mod optimize;
pub mod process;
pub mod quadrature;
pub mod qubit;
pub mod random;
pub mod scheme;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, DensityMatrix, HermitianOperator, Spectrum, UnitaryOperator};
pub use process::Process;
pub use scheme::{MeasurementScheme, WorkDistribution};
