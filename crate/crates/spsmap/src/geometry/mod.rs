//! Rigid transforms, triangle meshes, point sets, and the spatial queries
//! shared by every other module.

mod io;
mod kdtree;
mod mesh;
mod normals;
mod points;
mod pose;
mod sampling;

pub use io::{
    read_mesh, read_point_cloud, write_mesh, write_point_cloud, write_point_cloud_with_scalar,
};
pub use kdtree::KdTree;
pub use mesh::TriangleMesh;
pub use normals::{estimate_normals, DEFAULT_NORMAL_K};
pub use points::OrientedPointSet;
pub use pose::Pose;
pub use sampling::{nearest_neighbors, sample_surface};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("degenerate neighborhood around point {index}: neighbors are collinear")]
    DegenerateNeighborhood { index: usize },
    #[error("mesh has no faces")]
    EmptyMesh,
    #[error("k = {k} exceeds point count {n}")]
    KTooLarge { k: usize, n: usize },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}: point cloud has no normal properties (nx ny nz)")]
    MissingNormals { path: String },
    #[error("invalid rotation matrix: {0}")]
    InvalidRotation(String),
    #[error("face {face} references vertex {index} out of range {len}")]
    FaceIndexOutOfRange {
        face: usize,
        index: usize,
        len: usize,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
