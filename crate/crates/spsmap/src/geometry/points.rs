use nalgebra::Vector3;

use super::Pose;

/// Sample positions paired with unit normals.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OrientedPointSet {
    positions: Vec<Vector3<f64>>,
    normals: Vec<Vector3<f64>>,
}

impl OrientedPointSet {
    /// Panics if lengths differ or a normal is not unit length.
    pub fn new(positions: Vec<Vector3<f64>>, normals: Vec<Vector3<f64>>) -> Self {
        assert_eq!(positions.len(), normals.len());
        for n in &normals {
            debug_assert!((n.norm() - 1.0).abs() < 1e-6, "normal not unit: {n:?}");
        }
        Self { positions, normals }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Vector3<f64>] {
        &self.positions
    }

    pub fn normals(&self) -> &[Vector3<f64>] {
        &self.normals
    }

    pub fn push(&mut self, position: Vector3<f64>, normal: Vector3<f64>) {
        debug_assert!((normal.norm() - 1.0).abs() < 1e-6);
        self.positions.push(position);
        self.normals.push(normal);
    }

    pub fn extend(&mut self, other: &OrientedPointSet) {
        self.positions.extend_from_slice(&other.positions);
        self.normals.extend_from_slice(&other.normals);
    }

    pub fn transformed(&self, pose: &Pose) -> Self {
        Self {
            positions: self.positions.iter().map(|p| pose.apply(p)).collect(),
            normals: self.normals.iter().map(|n| pose.rotate(n)).collect(),
        }
    }

    /// Axis-aligned bounding box, or `None` when empty.
    pub fn aabb(&self) -> Option<(Vector3<f64>, Vector3<f64>)> {
        let first = *self.positions.first()?;
        let mut lo = first;
        let mut hi = first;
        for p in &self.positions {
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        Some((lo, hi))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vector3<f64>, &Vector3<f64>)> {
        self.positions.iter().zip(self.normals.iter())
    }
}
