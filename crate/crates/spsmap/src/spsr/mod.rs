//! Stochastic Poisson surface reconstruction: a Gaussian posterior over an
//! implicit function fitted to an oriented point set on a voxel grid, with
//! occupancy and on-surface probability queries.

mod export;
mod field;
mod grid;
mod isosurface;
mod kernel;
mod poisson;
mod state;

pub use export::{read_field_grid, write_field_grid};
pub use field::{NormalFieldPosterior, StaggeredField};
pub use grid::VoxelGrid;
pub use kernel::KernelConfig;
pub use poisson::{
    divergence, divergence_transpose, gradient, laplacian_apply, project_mean, solve_poisson,
    LaplacianSolver,
};
pub use state::SpsMapState;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpsrError {
    #[error("point {point:?} is outside the grid bounding box")]
    OutOfGrid { point: [f64; 3] },
    #[error("training set is empty")]
    EmptySet,
    #[error("training set has {got} points, need at least {needed}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("sample {index} has lumped weight {weight:.3e} <= 1e-12; kernel support does not reach it")]
    ZeroLumpedWeight { index: usize, weight: f64 },
    #[error("solver stalled: relative residual {residual:.3e} after {iterations} iterations")]
    SolverFailure { residual: f64, iterations: usize },
    #[error("zero level set does not intersect the grid interior")]
    EmptyLevelSet,
    #[error("grid does not contain all training points with a 2h margin")]
    GridTooTight,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
}

/// Fit an SPSR posterior to an oriented point set: normal-field fit followed
/// by the Poisson solve.
pub fn fit(
    samples: &crate::geometry::OrientedPointSet,
    grid: &VoxelGrid,
    cfg: &KernelConfig,
) -> Result<SpsMapState, SpsrError> {
    let field = NormalFieldPosterior::fit(samples, grid, cfg)?;
    solve_poisson(field)
}
