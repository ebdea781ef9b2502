//! Stochastic Poisson surface maps from visual and contact sensing.
//!
//! The library builds an implicit-surface occupancy map from an oriented
//! point cloud, refines it with contact hypotheses derived from wrench
//! measurements, and scores the result with ICP registration and the ADD
//! pose-error metric.

pub mod contact;
pub mod fusion;
pub mod geometry;
pub mod registration;
pub mod sim;
pub mod spsr;

pub use geometry::{OrientedPointSet, Pose, TriangleMesh};
pub use spsr::{KernelConfig, SpsMapState, VoxelGrid};
