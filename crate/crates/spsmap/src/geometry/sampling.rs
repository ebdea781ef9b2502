use nalgebra::Vector3;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use super::{GeometryError, OrientedPointSet, TriangleMesh};

/// Area-uniform surface sampling; each point carries its face normal.
/// Deterministic for a fixed seed.
pub fn sample_surface(
    mesh: &TriangleMesh,
    n: usize,
    seed: u64,
) -> Result<OrientedPointSet, GeometryError> {
    if mesh.faces().is_empty() {
        return Err(GeometryError::EmptyMesh);
    }
    assert!(n >= 1, "sample count must be positive");
    let mut cumulative = Vec::with_capacity(mesh.faces().len());
    let mut total = 0.0;
    for f in 0..mesh.faces().len() {
        total += mesh.face_area(f);
        cumulative.push(total);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = OrientedPointSet::default();
    for _ in 0..n {
        let u = rng.gen::<f64>() * total;
        let face = cumulative.partition_point(|&c| c <= u).min(cumulative.len() - 1);
        let [a, b, c] = mesh.face_vertices(face);
        // uniform barycentric via square-root trick
        let r1: f64 = rng.gen();
        let r2: f64 = rng.gen();
        let s = r1.sqrt();
        let w0 = 1.0 - s;
        let w1 = s * (1.0 - r2);
        let w2 = s * r2;
        out.push(a * w0 + b * w1 + c * w2, mesh.face_normals()[face]);
    }
    Ok(out)
}

/// Indices of the k closest points by Euclidean distance, ties broken by
/// lower index.
pub fn nearest_neighbors(
    query: &Vector3<f64>,
    points: &[Vector3<f64>],
    k: usize,
) -> Result<Vec<usize>, GeometryError> {
    if k > points.len() {
        return Err(GeometryError::KTooLarge {
            k,
            n: points.len(),
        });
    }
    let tree = super::KdTree::build(points);
    Ok(tree.knn(points, query, k))
}
