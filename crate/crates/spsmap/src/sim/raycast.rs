use nalgebra::Vector3;

use crate::geometry::TriangleMesh;

const EPS: f64 = 1e-12;

/// Moller-Trumbore ray/triangle intersection. Returns the ray parameter t
/// of the hit, for t >= 0.
pub fn ray_triangle_intersect(
    origin: &Vector3<f64>,
    dir: &Vector3<f64>,
    v0: &Vector3<f64>,
    v1: &Vector3<f64>,
    v2: &Vector3<f64>,
) -> Option<f64> {
    let e1 = v1 - v0;
    let e2 = v2 - v0;
    let p = dir.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < EPS {
        return None;
    }
    let inv_det = 1.0 / det;
    let s = origin - v0;
    let u = s.dot(&p) * inv_det;
    if !(-EPS..=1.0 + EPS).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = dir.dot(&q) * inv_det;
    if v < -EPS || u + v > 1.0 + EPS {
        return None;
    }
    let t = e2.dot(&q) * inv_det;
    (t >= 0.0).then_some(t)
}

/// Nearest mesh hit along the ray: `(t, face index)`.
pub fn ray_mesh_intersect(
    origin: &Vector3<f64>,
    dir: &Vector3<f64>,
    mesh: &TriangleMesh,
) -> Option<(f64, usize)> {
    let mut best: Option<(f64, usize)> = None;
    for f in 0..mesh.faces().len() {
        let [a, b, c] = mesh.face_vertices(f);
        if let Some(t) = ray_triangle_intersect(origin, dir, &a, &b, &c) {
            if best.map_or(true, |(bt, _)| t < bt) {
                best = Some((t, f));
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::box_mesh;

    #[test]
    fn hits_unit_triangle_head_on() {
        let v0 = Vector3::new(0.0, 0.0, 1.0);
        let v1 = Vector3::new(1.0, 0.0, 1.0);
        let v2 = Vector3::new(0.0, 1.0, 1.0);
        let t = ray_triangle_intersect(
            &Vector3::new(0.2, 0.2, 0.0),
            &Vector3::z(),
            &v0,
            &v1,
            &v2,
        )
        .unwrap();
        assert!((t - 1.0).abs() < 1e-12);
        assert!(ray_triangle_intersect(
            &Vector3::new(0.9, 0.9, 0.0),
            &Vector3::z(),
            &v0,
            &v1,
            &v2
        )
        .is_none());
    }

    #[test]
    fn box_entry_distance() {
        let mesh = box_mesh(&Vector3::new(1.0, 1.0, 1.0), &Vector3::zeros());
        let (t, _) = ray_mesh_intersect(
            &Vector3::new(0.0, 0.0, 3.0),
            &Vector3::new(0.0, 0.0, -1.0),
            &mesh,
        )
        .unwrap();
        assert!((t - 2.5).abs() < 1e-12);
        assert!(ray_mesh_intersect(
            &Vector3::new(0.0, 3.0, 3.0),
            &Vector3::new(0.0, 0.0, -1.0),
            &mesh
        )
        .is_none());
    }
}
