use nalgebra::Vector3;

use crate::geometry::TriangleMesh;

struct MeshBuilder {
    vertices: Vec<Vector3<f64>>,
    faces: Vec<[usize; 3]>,
}

impl MeshBuilder {
    fn new() -> Self {
        Self {
            vertices: Vec::new(),
            faces: Vec::new(),
        }
    }

    fn vertex(&mut self, p: Vector3<f64>) -> usize {
        self.vertices.push(p);
        self.vertices.len() - 1
    }

    /// Quad a-b-c-d, counter-clockwise as seen from the outside.
    fn quad(&mut self, a: usize, b: usize, c: usize, d: usize) {
        self.faces.push([a, b, c]);
        self.faces.push([a, c, d]);
    }

    fn build(self) -> TriangleMesh {
        TriangleMesh::new(self.vertices, self.faces).expect("builder indices are valid")
    }
}

/// Axis-aligned box given full side lengths and center.
pub fn box_mesh(size: &Vector3<f64>, center: &Vector3<f64>) -> TriangleMesh {
    let h = size / 2.0;
    let mut b = MeshBuilder::new();
    let mut corner = [0usize; 8];
    for (i, c) in corner.iter_mut().enumerate() {
        let dx = if i & 1 != 0 { h.x } else { -h.x };
        let dy = if i & 2 != 0 { h.y } else { -h.y };
        let dz = if i & 4 != 0 { h.z } else { -h.z };
        *c = b.vertex(center + Vector3::new(dx, dy, dz));
    }
    // -z, +z, -y, +y, -x, +x
    b.quad(corner[0], corner[2], corner[3], corner[1]);
    b.quad(corner[4], corner[5], corner[7], corner[6]);
    b.quad(corner[0], corner[1], corner[5], corner[4]);
    b.quad(corner[2], corner[6], corner[7], corner[3]);
    b.quad(corner[0], corner[4], corner[6], corner[2]);
    b.quad(corner[1], corner[3], corner[7], corner[5]);
    b.build()
}

/// Closed cylinder along +z from z = -length to z = 0 (tip at the bottom,
/// mount flange at the origin), the peg convention used by the probes.
pub fn cylinder_mesh(radius: f64, length: f64, segments: usize) -> TriangleMesh {
    assert!(segments >= 3);
    let mut b = MeshBuilder::new();
    let mut top_ring = Vec::with_capacity(segments);
    let mut bot_ring = Vec::with_capacity(segments);
    for s in 0..segments {
        let a = 2.0 * std::f64::consts::PI * s as f64 / segments as f64;
        let (x, y) = (radius * a.cos(), radius * a.sin());
        top_ring.push(b.vertex(Vector3::new(x, y, 0.0)));
        bot_ring.push(b.vertex(Vector3::new(x, y, -length)));
    }
    let top_center = b.vertex(Vector3::new(0.0, 0.0, 0.0));
    let bot_center = b.vertex(Vector3::new(0.0, 0.0, -length));
    for s in 0..segments {
        let n = (s + 1) % segments;
        // side wall, outward normal
        b.quad(bot_ring[s], bot_ring[n], top_ring[n], top_ring[s]);
        // caps
        b.faces.push([top_center, top_ring[s], top_ring[n]]);
        b.faces.push([bot_center, bot_ring[n], bot_ring[s]]);
    }
    b.build()
}

/// Plate with a centered rectangular pocket. The plate top face lies in
/// the z = 0 plane and spans [-plate_w/2, plate_w/2]^2 x [-plate_t, 0];
/// the pocket opening spans [-pocket_w/2, pocket_w/2]^2 down to
/// z = -pocket_d.
pub fn plate_with_pocket_mesh(
    plate_w: f64,
    plate_t: f64,
    pocket_w: f64,
    pocket_d: f64,
) -> TriangleMesh {
    assert!(pocket_w < plate_w && pocket_d < plate_t);
    let po = plate_w / 2.0;
    let pi = pocket_w / 2.0;
    let zb = -plate_t;
    let zp = -pocket_d;
    let mut b = MeshBuilder::new();

    // rings are counter-clockwise seen from +z, starting at (-,-)
    let ring = |b: &mut MeshBuilder, half: f64, z: f64| -> [usize; 4] {
        [
            b.vertex(Vector3::new(-half, -half, z)),
            b.vertex(Vector3::new(half, -half, z)),
            b.vertex(Vector3::new(half, half, z)),
            b.vertex(Vector3::new(-half, half, z)),
        ]
    };
    let outer_top = ring(&mut b, po, 0.0);
    let inner_top = ring(&mut b, pi, 0.0);
    let pocket_bottom = ring(&mut b, pi, zp);
    let outer_bottom = ring(&mut b, po, zb);

    for s in 0..4 {
        let n = (s + 1) % 4;
        // top frame between the outer rim and the pocket opening (+z out)
        b.quad(outer_top[s], outer_top[n], inner_top[n], inner_top[s]);
        // pocket wall: outward from solid means facing into the pocket
        b.quad(inner_top[s], inner_top[n], pocket_bottom[n], pocket_bottom[s]);
        // outer side wall
        b.quad(outer_top[n], outer_top[s], outer_bottom[s], outer_bottom[n]);
    }
    // pocket floor faces up
    b.quad(pocket_bottom[0], pocket_bottom[1], pocket_bottom[2], pocket_bottom[3]);
    // plate underside faces down
    b.quad(outer_bottom[3], outer_bottom[2], outer_bottom[1], outer_bottom[0]);
    b.build()
}
