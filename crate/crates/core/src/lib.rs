//! Incompatibility of triplets of qubit observables.
//!
//! Given three two-outcome qubit observables, this crate computes how well
//! they can be approximated by a jointly measurable triplet: the worst-case
//! combined statistical error of the best approximation, the lower bound
//! attained by the Fermat–Torricelli geometry of their diagonal vectors, an
//! explicit parent measurement, closed forms for symmetric families, and a
//! shot-level simulation of the optimal joint measurement.

pub mod analytic;
pub mod cli;
pub mod error;
pub mod experiment;
pub mod format;
pub mod geometry;
pub mod mur;
pub mod parent;
pub mod qubit;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
pub use geometry::{fermat_torricelli, FtResult, Vec3};
pub use mur::{analyze, MurReport};
pub use qubit::{BinaryMeasurement, Effect, ParentPovm, QubitState, Triplet};
pub use solver::{solve_bloch_form, solve_povm_form, SolveResult, SolveStatus};
