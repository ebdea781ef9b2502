use nalgebra::Vector3;

use super::VoxelGrid;

/// Zero level set of a node-major scalar field as a triangle soup, by
/// marching a six-tetrahedron decomposition of every cell. Points lie
/// exactly on sign-change edge crossings of the trilinear field.
pub fn extract_triangles(grid: &VoxelGrid, values: &[f64]) -> Vec<[Vector3<f64>; 3]> {
    // cube corners indexed by (dx<<2 | dy<<1 | dz), tets share the 0-7 diagonal
    const TETS: [[usize; 4]; 6] = [
        [0, 5, 1, 7],
        [0, 1, 3, 7],
        [0, 3, 2, 7],
        [0, 2, 6, 7],
        [0, 6, 4, 7],
        [0, 4, 5, 7],
    ];
    let k = grid.k();
    let mut triangles = Vec::new();
    for ci in 0..k {
        for cj in 0..k {
            for cl in 0..k {
                let mut pos = [Vector3::zeros(); 8];
                let mut val = [0.0f64; 8];
                for corner in 0..8 {
                    let i = ci + (corner >> 2 & 1);
                    let j = cj + (corner >> 1 & 1);
                    let l = cl + (corner & 1);
                    pos[corner] = grid.node_position(i, j, l);
                    val[corner] = values[grid.node_index(i, j, l)];
                }
                for tet in &TETS {
                    march_tet(
                        [pos[tet[0]], pos[tet[1]], pos[tet[2]], pos[tet[3]]],
                        [val[tet[0]], val[tet[1]], val[tet[2]], val[tet[3]]],
                        &mut triangles,
                    );
                }
            }
        }
    }
    triangles
}

fn crossing(pa: Vector3<f64>, fa: f64, pb: Vector3<f64>, fb: f64) -> Vector3<f64> {
    let t = fa / (fa - fb);
    pa + (pb - pa) * t
}

fn march_tet(p: [Vector3<f64>; 4], f: [f64; 4], out: &mut Vec<[Vector3<f64>; 3]>) {
    let inside: Vec<usize> = (0..4).filter(|&i| f[i] < 0.0).collect();
    let outside: Vec<usize> = (0..4).filter(|&i| f[i] >= 0.0).collect();
    match inside.len() {
        0 | 4 => {}
        1 => {
            let a = inside[0];
            let v: Vec<Vector3<f64>> = outside
                .iter()
                .map(|&b| crossing(p[a], f[a], p[b], f[b]))
                .collect();
            out.push([v[0], v[1], v[2]]);
        }
        3 => {
            let b = outside[0];
            let v: Vec<Vector3<f64>> = inside
                .iter()
                .map(|&a| crossing(p[a], f[a], p[b], f[b]))
                .collect();
            out.push([v[0], v[1], v[2]]);
        }
        2 => {
            let (a0, a1) = (inside[0], inside[1]);
            let (b0, b1) = (outside[0], outside[1]);
            let v00 = crossing(p[a0], f[a0], p[b0], f[b0]);
            let v01 = crossing(p[a0], f[a0], p[b1], f[b1]);
            let v10 = crossing(p[a1], f[a1], p[b0], f[b0]);
            let v11 = crossing(p[a1], f[a1], p[b1], f[b1]);
            out.push([v00, v01, v11]);
            out.push([v00, v11, v10]);
        }
        _ => unreachable!(),
    }
}
