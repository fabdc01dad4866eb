//! Exact, decomposed, simulated and Brownian-limit laws of the duration of a
//! symmetric Gambler's Ruin, with the checks that tie them together.
//!
//! The probability engine is generic over [`Scalar`]: run it with
//! [`Rational`] for exact identities or with `f64` for long horizons.

pub mod brownian;
pub mod closed_form;
pub mod decomposition;
pub mod dist;
pub mod error;
pub mod linalg;
pub mod markov_exact;
pub mod quadrature;
pub mod scalar;
pub mod simulation;

pub use dist::{DurationDist, Parity};
pub use error::{Error, Result};
pub use markov_exact::{JointDurationWinner, WalkParams, Winner};
pub use scalar::{Rational, Scalar};

pub type ExactParams = WalkParams<Rational>;
pub type FloatParams = WalkParams<f64>;
pub type ExactDist = DurationDist<Rational>;
pub type FloatDist = DurationDist<f64>;
