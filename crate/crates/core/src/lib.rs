//! Physics-aware correction of multi-person kinematic motion.
//!
//! Kinematic pose estimates for several interacting people are replayed inside
//! one shared rigid-body world. A PD tracking controller drives one capsule
//! humanoid per person toward the reference poses, contacts are resolved as
//! hard constraints, and the simulated poses are read back out as the
//! corrected motion. The [`metrics`] module scores motion for plausibility
//! (penetration, ground penetration, skating) and accuracy (acceleration
//! error, W-MPJPE, joint PA-MPJPE).

pub mod collision;
pub mod control;
pub mod correction;
pub mod dynamics;
mod error;
pub mod kinematics;
pub mod metrics;
pub mod motion_file;
pub mod synth;

pub use error::{Error, Result};

pub use nalgebra::{Matrix3, Rotation3, Vector3};

/// Number of articulated body joints (excluding the root).
pub const J_BODY: usize = 22;
/// Number of joints including the root.
pub const NUM_JOINTS: usize = J_BODY + 1;
/// Length of a shape vector.
pub const SHAPE_DIM: usize = 16;
