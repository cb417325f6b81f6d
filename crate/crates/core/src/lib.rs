//! Displacement and axial strain estimation between two RF frames.
//!
//! A dynamic-programming search gives an integer axial seed; ADMM then
//! refines it under an L1 total-variation prior on the displacement
//! derivatives. Everything numeric is generic over [`Scalar`] (`f32`/`f64`);
//! the `*64` aliases below fix the common double-precision case.

pub mod admm;
pub mod error;
pub mod field;
pub mod io;
pub mod metrics;
pub mod operators;
pub mod params;
pub mod phantom;
pub mod pipeline;
pub mod scalar;
pub mod seed;
pub mod sparse;

pub use admm::{run, ConvergenceTrace, Estimate, LinearSolverKind, SolverConfig, SolverMode};
pub use error::{Error, Result};
pub use field::{strain_from_displacement, DisplacementField, FrameMeta, RfFrame, StrainImage};
pub use operators::OperatorSet;
pub use params::{BiasMode, RegParams};
pub use pipeline::{estimate, EstimateOptions, EstimateOutput};
pub use scalar::Scalar;
pub use seed::{dp_seed, SeedParams};
pub use sparse::SparseMatrix;

pub type RfFrame64 = RfFrame<f64>;
pub type DisplacementField64 = DisplacementField<f64>;
pub type StrainImage64 = StrainImage<f64>;
pub type RegParams64 = RegParams<f64>;
pub type SolverConfig64 = SolverConfig<f64>;
pub type SparseMatrix64 = SparseMatrix<f64>;

pub type RfFrame32 = RfFrame<f32>;
pub type DisplacementField32 = DisplacementField<f32>;
pub type StrainImage32 = StrainImage<f32>;
