use nalgebra::Vector3;

use super::{SpsrError, VoxelGrid};

/// Kernel parameters: prior variance scale and the B-spline support
/// multiplier (1 = the classic 1.5-cell quadratic bump).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelConfig {
    pub sigma_g: f64,
    pub support_radius: usize,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            sigma_g: 1.0,
            support_radius: 1,
        }
    }
}

impl KernelConfig {
    pub fn new(sigma_g: f64, support_radius: usize) -> Self {
        assert!(sigma_g > 0.0, "sigma_g must be positive");
        assert!(support_radius >= 1, "support radius must be at least 1");
        Self {
            sigma_g,
            support_radius,
        }
    }

    /// Half-width of the bump in cells: 1.5 * support_radius.
    pub fn support_cells(&self) -> f64 {
        1.5 * self.support_radius as f64
    }

    /// Cells beyond which a sample cannot influence a node through the
    /// trilinear step: 1 + support_cells.
    pub fn reach_cells(&self) -> f64 {
        1.0 + self.support_cells()
    }
}

/// Quadratic B-spline, support |t| < 1.5, peak 0.75 at t = 0.
fn bspline2(t: f64) -> f64 {
    let a = t.abs();
    if a <= 0.5 {
        0.75 - a * a
    } else if a < 1.5 {
        0.5 * (1.5 - a) * (1.5 - a)
    } else {
        0.0
    }
}

/// Compactly-supported Gaussian-like bump centered at a grid node,
/// normalized to 1 at its center.
pub fn bump(offset: &Vector3<f64>, h: f64, cfg: &KernelConfig) -> f64 {
    let r = cfg.support_radius as f64;
    let scale = h * r;
    let norm = 0.75 * 0.75 * 0.75;
    bspline2(offset.x / scale) * bspline2(offset.y / scale) * bspline2(offset.z / scale) / norm
}

/// One-sided PSR kernel: trilinear weights of `x` against bumps at `y`.
pub fn k_psr(
    x: &Vector3<f64>,
    y: &Vector3<f64>,
    grid: &VoxelGrid,
    cfg: &KernelConfig,
) -> Result<f64, SpsrError> {
    let (idx, w) = grid.trilinear_weights(x)?;
    let mut sum = 0.0;
    for (&i, &wi) in idx.iter().zip(w.iter()) {
        if wi == 0.0 {
            continue;
        }
        let (a, b, c) = grid.node_coords(i);
        let node = grid.node_position(a, b, c);
        sum += wi * bump(&(y - node), grid.h(), cfg);
    }
    Ok(cfg.sigma_g * sum)
}

/// Symmetrized SPSR kernel.
pub fn k_spsr(
    x: &Vector3<f64>,
    y: &Vector3<f64>,
    grid: &VoxelGrid,
    cfg: &KernelConfig,
) -> Result<f64, SpsrError> {
    Ok(0.5 * (k_psr(x, y, grid, cfg)? + k_psr(y, x, grid, cfg)?))
}
