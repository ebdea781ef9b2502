use nalgebra::Vector3;

use super::GeometryError;

/// Triangle mesh with per-face outward unit normals.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Vector3<f64>>,
    faces: Vec<[usize; 3]>,
    face_normals: Vec<Vector3<f64>>,
}

impl TriangleMesh {
    /// Face normals are derived from counter-clockwise winding.
    pub fn new(vertices: Vec<Vector3<f64>>, faces: Vec<[usize; 3]>) -> Result<Self, GeometryError> {
        for (fi, f) in faces.iter().enumerate() {
            for &i in f {
                if i >= vertices.len() {
                    return Err(GeometryError::FaceIndexOutOfRange {
                        face: fi,
                        index: i,
                        len: vertices.len(),
                    });
                }
            }
        }
        let face_normals = faces
            .iter()
            .map(|f| {
                let e1 = vertices[f[1]] - vertices[f[0]];
                let e2 = vertices[f[2]] - vertices[f[0]];
                let n = e1.cross(&e2);
                let len = n.norm();
                if len < 1e-14 {
                    // degenerate face keeps a placeholder normal
                    Vector3::z()
                } else {
                    n / len
                }
            })
            .collect();
        Ok(Self {
            vertices,
            faces,
            face_normals,
        })
    }

    pub fn vertices(&self) -> &[Vector3<f64>] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn face_normals(&self) -> &[Vector3<f64>] {
        &self.face_normals
    }

    pub fn face_vertices(&self, face: usize) -> [Vector3<f64>; 3] {
        let f = self.faces[face];
        [self.vertices[f[0]], self.vertices[f[1]], self.vertices[f[2]]]
    }

    pub fn face_area(&self, face: usize) -> f64 {
        let [a, b, c] = self.face_vertices(face);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    pub fn total_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    pub fn transformed(&self, pose: &super::Pose) -> Self {
        let vertices = self.vertices.iter().map(|v| pose.apply(v)).collect();
        let faces = self.faces.clone();
        // winding is preserved by a proper rotation
        Self::new(vertices, faces).expect("indices unchanged")
    }
}
