use nalgebra::{Matrix3, Vector3};

use super::{GeometryError, KdTree, OrientedPointSet};

/// Default neighbor count for dense synthetic clouds.
pub const DEFAULT_NORMAL_K: usize = 30;

/// Per-point normals from the smallest eigenvector of the k-nearest-neighbor
/// covariance, sign-flipped to face `viewpoint`.
pub fn estimate_normals(
    points: &[Vector3<f64>],
    k: usize,
    viewpoint: &Vector3<f64>,
) -> Result<OrientedPointSet, GeometryError> {
    assert!(k >= 3, "neighbor count must be at least 3");
    if points.len() <= k {
        return Err(GeometryError::TooFewPoints {
            needed: k + 1,
            got: points.len(),
        });
    }
    let tree = KdTree::build(points);
    let mut normals = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        let neighbors = tree.knn(points, p, k);
        let mut centroid = Vector3::zeros();
        for &j in &neighbors {
            centroid += points[j];
        }
        centroid /= neighbors.len() as f64;
        let mut cov = Matrix3::zeros();
        for &j in &neighbors {
            let d = points[j] - centroid;
            cov += d * d.transpose();
        }
        let eig = cov.symmetric_eigen();
        let mut min_idx = 0;
        for a in 1..3 {
            if eig.eigenvalues[a] < eig.eigenvalues[min_idx] {
                min_idx = a;
            }
        }
        // rank < 2 means all neighbors are collinear: two near-zero eigenvalues
        let mut sorted = [eig.eigenvalues[0], eig.eigenvalues[1], eig.eigenvalues[2]];
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if sorted[1] <= 1e-12 * sorted[2].max(1e-300) {
            return Err(GeometryError::DegenerateNeighborhood { index: i });
        }
        let mut n = eig.eigenvectors.column(min_idx).into_owned();
        n.normalize_mut();
        if n.dot(&(viewpoint - p)) < 0.0 {
            n = -n;
        }
        normals.push(n);
    }
    Ok(OrientedPointSet::new(points.to_vec(), normals))
}
