//! Ratio consensus over products of random nonnegative matrices.
//!
//! The crate covers the numerical side of push-sum style averaging: matrix
//! primitives and the Hilbert projective metric, random matrix processes,
//! Lyapunov spectrum and spectral-gap estimators, consensus trajectories,
//! and boolean primitivity analysis.

pub mod birkhoff;
pub mod consensus;
pub mod error;
pub mod exterior;
pub mod generators;
pub mod logscale;
pub mod matrix;
pub mod primitivity;
pub mod spectrum;
pub mod stats;
pub mod vector;

pub use birkhoff::{birkhoff_phi, birkhoff_tau, BirkhoffProduct};
pub use consensus::{run, CheckpointSchedule, ConsensusState, Trajectory, TrajectoryRow};
pub use error::{Error, Result};
pub use generators::{CompiledProcess, Digraph, MatrixProcess, ProcessSpec, PushSumConfig};
pub use matrix::NonNegMatrix;
pub use primitivity::{BoolPattern, PrimitivityReport};
pub use spectrum::{GapEstimate, QrOptions, SpectrumEstimate};
pub use vector::NonNegVector;
