use nalgebra::Vector3;

use super::SpsrError;
use crate::geometry::OrientedPointSet;

/// Regular K x K x K cell lattice with (K+1)^3 nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    k: usize,
    origin: Vector3<f64>,
    h: f64,
}

impl VoxelGrid {
    pub fn new(k: usize, origin: Vector3<f64>, h: f64) -> Self {
        assert!(k >= 4, "resolution must be at least 4 cells");
        assert!(h > 0.0, "spacing must be positive");
        Self { k, origin, h }
    }

    /// Cubic grid around the cloud's bounding box, inflated per side by
    /// `inflate` (0.25 = 25%). Guarantees the >= 2h containment margin.
    pub fn containing(
        cloud: &OrientedPointSet,
        k: usize,
        inflate: f64,
    ) -> Result<Self, SpsrError> {
        let (lo, hi) = cloud.aabb().ok_or(SpsrError::EmptySet)?;
        let center = (lo + hi) / 2.0;
        let extent = (hi - lo).max().max(1e-9);
        let side = extent * (1.0 + 2.0 * inflate);
        let grid = Self::new(
            k,
            center - Vector3::repeat(side / 2.0),
            side / k as f64,
        );
        if inflate * extent < 2.0 * grid.h {
            return Err(SpsrError::GridTooTight);
        }
        Ok(grid)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn origin(&self) -> &Vector3<f64> {
        &self.origin
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.k + 1
    }

    pub fn node_count(&self) -> usize {
        let n = self.k + 1;
        n * n * n
    }

    pub fn node_index(&self, i: usize, j: usize, l: usize) -> usize {
        let n = self.k + 1;
        (i * n + j) * n + l
    }

    pub fn node_coords(&self, index: usize) -> (usize, usize, usize) {
        let n = self.k + 1;
        (index / (n * n), (index / n) % n, index % n)
    }

    pub fn node_position(&self, i: usize, j: usize, l: usize) -> Vector3<f64> {
        self.origin + Vector3::new(i as f64, j as f64, l as f64) * self.h
    }

    pub fn max_corner(&self) -> Vector3<f64> {
        self.origin + Vector3::repeat(self.k as f64 * self.h)
    }

    pub fn contains(&self, x: &Vector3<f64>) -> bool {
        let hi = self.max_corner();
        (0..3).all(|a| x[a] >= self.origin[a] && x[a] <= hi[a])
    }

    fn check_inside(&self, x: &Vector3<f64>) -> Result<(), SpsrError> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(SpsrError::OutOfGrid {
                point: [x.x, x.y, x.z],
            })
        }
    }

    /// The eight enclosing node indices with trilinear weights; the weights
    /// are non-negative and sum to 1.
    pub fn trilinear_weights(
        &self,
        x: &Vector3<f64>,
    ) -> Result<([usize; 8], [f64; 8]), SpsrError> {
        self.check_inside(x)?;
        let mut cell = [0usize; 3];
        let mut frac = [0f64; 3];
        for a in 0..3 {
            let t = (x[a] - self.origin[a]) / self.h;
            // clamp keeps the upper boundary inside the last cell
            let c = (t.floor() as usize).min(self.k - 1);
            cell[a] = c;
            frac[a] = t - c as f64;
        }
        let mut indices = [0usize; 8];
        let mut weights = [0f64; 8];
        for corner in 0..8 {
            let di = corner >> 2 & 1;
            let dj = corner >> 1 & 1;
            let dl = corner & 1;
            indices[corner] = self.node_index(cell[0] + di, cell[1] + dj, cell[2] + dl);
            let wx = if di == 1 { frac[0] } else { 1.0 - frac[0] };
            let wy = if dj == 1 { frac[1] } else { 1.0 - frac[1] };
            let wz = if dl == 1 { frac[2] } else { 1.0 - frac[2] };
            weights[corner] = wx * wy * wz;
        }
        Ok((indices, weights))
    }

    /// Trilinear interpolation of a node-major scalar field at `x`.
    pub fn interpolate(&self, values: &[f64], x: &Vector3<f64>) -> Result<f64, SpsrError> {
        let (idx, w) = self.trilinear_weights(x)?;
        Ok(idx.iter().zip(w.iter()).map(|(&i, &wi)| values[i] * wi).sum())
    }
}
