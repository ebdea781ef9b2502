//! Synthetic stand-in for the physical setup: mesh builders for the hole
//! fixture and peg, a noisy depth camera, and quasi-static wrench synthesis
//! from scripted probe contacts.

mod meshes;
mod raycast;
mod scene;
mod wrench;

pub use meshes::{box_mesh, cylinder_mesh, plate_with_pocket_mesh};
pub use raycast::{ray_mesh_intersect, ray_triangle_intersect};
pub use scene::{render_cloud, render_depth, CameraIntrinsics, DepthImage, DepthNoiseModel, Scene, SceneConfig};
pub use wrench::{scripted_probe_run, synthesize_wrench, GroundTruthContact, ProbeParams};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("no camera ray hits the fixture")]
    NoHit,
    #[error("probe configuration never makes contact")]
    NoContactConfiguration,
    #[error("peg does not fit the hole: peg width {peg:.4} m vs pocket width {pocket:.4} m")]
    PegDoesNotFit { peg: f64, pocket: f64 },
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
}
