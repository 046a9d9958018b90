//! Restless multi-armed bandits with many homogeneous arms: the per-arm
//! occupation-measure relaxation, fluid-balance and Whittle index policies,
//! a seeded simulator, and exact dynamic programming for small instances.
//!
//! Numeric code is generic over [`Scalar`]; the aliases below fix the common
//! choices.

#![allow(clippy::needless_range_loop)]

pub mod error;
pub mod experiments;
pub mod instance_file;
pub mod lp;
pub mod model;
pub mod oracle;
pub mod policies;
pub mod scalar;
pub mod sim;

pub use error::{Error, Result};
pub use model::{ArmModel, CountState, DiffusionStats, InitialOccupancy, InstanceSpec, OccupationMeasure, IDLE, PULL};
pub use scalar::{Rational, Real, Scalar};

pub type ExactRational = num_rational::BigRational;

pub type ArmModelF64 = ArmModel<f64>;
pub type ArmModelF32 = ArmModel<f32>;
pub type ExactArmModel = ArmModel<ExactRational>;

pub type InstanceF64 = InstanceSpec<f64>;
pub type InstanceF32 = InstanceSpec<f32>;
pub type ExactInstance = InstanceSpec<ExactRational>;

pub type LpSolutionF64 = lp::LpSolution<f64>;
pub type ExactLpSolution = lp::LpSolution<ExactRational>;
