//! Numerics for open intermittent dynamical systems: concrete maps,
//! first-return towers, invariant-measure estimation, escape-time Monte
//! Carlo and the statistics used to read exponents off the results.
//!
//! Maps and towers are generic over [`Real`] (`f32` or `f64`). Grid
//! operators and statistics work in `f64`; the aliases below fix the
//! double-precision instantiations used by the command-line runner.

// Negated comparisons are used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod maps;
pub mod measure;
pub mod open_systems;
pub mod real;
pub mod rng;
pub mod stats;
pub mod text;
pub mod tower;

pub use error::{Error, Result};
pub use real::Real;

pub type LsvMap = maps::Lsv<f64>;
pub type FareyMap = maps::Farey<f64>;
pub type SolenoidMap = maps::Solenoid<f64>;
pub type RotationMap = maps::Rotation<f64>;
pub type Point2 = maps::Point2<f64>;
pub type Hole1D = open_systems::Hole1D<f64>;
pub type HoleCylinder = open_systems::HoleCylinder<f64>;
pub type ASequence = tower::ASequence<f64>;
pub type Tower<M> = tower::TowerModel<f64, M>;
pub type MarkovCylinder = tower::MarkovCylinder<f64>;
pub type TowerSampler<M> = measure::TowerSampler<f64, M>;

pub type LsvMap32 = maps::Lsv<f32>;
pub type FareyMap32 = maps::Farey<f32>;
