use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::Vector3;

use super::{GeometryError, OrientedPointSet, TriangleMesh};

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> GeometryError {
    GeometryError::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

/// ASCII PLY point cloud with positions and normals.
pub fn write_point_cloud(set: &OrientedPointSet, path: &Path) -> Result<(), GeometryError> {
    write_cloud_impl(set, None, path)
}

/// Same as [`write_point_cloud`] with an extra per-vertex scalar property.
pub fn write_point_cloud_with_scalar(
    set: &OrientedPointSet,
    scalar_name: &str,
    scalars: &[f64],
    path: &Path,
) -> Result<(), GeometryError> {
    assert_eq!(scalars.len(), set.len());
    write_cloud_impl(set, Some((scalar_name, scalars)), path)
}

fn write_cloud_impl(
    set: &OrientedPointSet,
    scalar: Option<(&str, &[f64])>,
    path: &Path,
) -> Result<(), GeometryError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "ply")?;
    writeln!(w, "format ascii 1.0")?;
    writeln!(w, "element vertex {}", set.len())?;
    for p in ["x", "y", "z", "nx", "ny", "nz"] {
        writeln!(w, "property double {p}")?;
    }
    if let Some((name, _)) = scalar {
        writeln!(w, "property double {name}")?;
    }
    writeln!(w, "end_header")?;
    for (i, (p, n)) in set.iter().enumerate() {
        write!(
            w,
            "{:.17e} {:.17e} {:.17e} {:.17e} {:.17e} {:.17e}",
            p.x, p.y, p.z, n.x, n.y, n.z
        )?;
        if let Some((_, values)) = scalar {
            write!(w, " {:.17e}", values[i])?;
        }
        writeln!(w)?;
    }
    Ok(())
}

struct PlyHeader {
    vertex_count: usize,
    face_count: usize,
    vertex_props: Vec<String>,
    header_lines: usize,
}

fn read_ply_header(path: &Path, lines: &[String]) -> Result<PlyHeader, GeometryError> {
    if lines.first().map(|l| l.trim()) != Some("ply") {
        return Err(parse_err(path, 1, "missing 'ply' magic"));
    }
    let mut vertex_count = 0;
    let mut face_count = 0;
    let mut vertex_props = Vec::new();
    let mut current = None;
    for (i, line) in lines.iter().enumerate() {
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.as_slice() {
            ["end_header"] => {
                return Ok(PlyHeader {
                    vertex_count,
                    face_count,
                    vertex_props,
                    header_lines: i + 1,
                });
            }
            ["format", kind, _] => {
                if *kind != "ascii" {
                    return Err(parse_err(path, i + 1, "only ascii PLY is supported"));
                }
            }
            ["element", name, count] => {
                let count: usize = count
                    .parse()
                    .map_err(|_| parse_err(path, i + 1, "bad element count"))?;
                match *name {
                    "vertex" => vertex_count = count,
                    "face" => face_count = count,
                    _ => {}
                }
                current = Some(name.to_string());
            }
            ["property", "list", ..] => {}
            ["property", _, name] => {
                if current.as_deref() == Some("vertex") {
                    vertex_props.push(name.to_string());
                }
            }
            _ => {}
        }
    }
    Err(parse_err(path, lines.len(), "unterminated PLY header"))
}

/// ASCII PLY point cloud; normals (`nx ny nz`) are required.
pub fn read_point_cloud(path: &Path) -> Result<OrientedPointSet, GeometryError> {
    let lines: Vec<String> = BufReader::new(File::open(path)?)
        .lines()
        .collect::<Result<_, _>>()?;
    let header = read_ply_header(path, &lines)?;
    let props = &header.vertex_props;
    let find = |n: &str| props.iter().position(|p| p == n);
    let (px, py, pz) = match (find("x"), find("y"), find("z")) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => return Err(parse_err(path, header.header_lines, "missing x y z properties")),
    };
    let (nx, ny, nz) = match (find("nx"), find("ny"), find("nz")) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => {
            return Err(GeometryError::MissingNormals {
                path: path.display().to_string(),
            })
        }
    };
    let mut out = OrientedPointSet::default();
    for row in 0..header.vertex_count {
        let lineno = header.header_lines + row + 1;
        let line = lines
            .get(header.header_lines + row)
            .ok_or_else(|| parse_err(path, lineno, "unexpected end of file"))?;
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| parse_err(path, lineno, format!("bad number: {e}")))?;
        if vals.len() < props.len() {
            return Err(parse_err(path, lineno, "too few vertex values"));
        }
        let n = Vector3::new(vals[nx], vals[ny], vals[nz]);
        let len = n.norm();
        if len < 1e-12 {
            return Err(parse_err(path, lineno, "zero-length normal"));
        }
        out.push(Vector3::new(vals[px], vals[py], vals[pz]), n / len);
    }
    Ok(out)
}

/// Triangle mesh from ASCII PLY or OBJ, chosen by file extension.
pub fn read_mesh(path: &Path) -> Result<TriangleMesh, GeometryError> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("obj") => read_obj(path),
        _ => read_ply_mesh(path),
    }
}

fn read_ply_mesh(path: &Path) -> Result<TriangleMesh, GeometryError> {
    let lines: Vec<String> = BufReader::new(File::open(path)?)
        .lines()
        .collect::<Result<_, _>>()?;
    let header = read_ply_header(path, &lines)?;
    let props = &header.vertex_props;
    let find = |n: &str| props.iter().position(|p| p == n);
    let (px, py, pz) = match (find("x"), find("y"), find("z")) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => return Err(parse_err(path, header.header_lines, "missing x y z properties")),
    };
    let mut vertices = Vec::with_capacity(header.vertex_count);
    for row in 0..header.vertex_count {
        let lineno = header.header_lines + row + 1;
        let line = lines
            .get(header.header_lines + row)
            .ok_or_else(|| parse_err(path, lineno, "unexpected end of file"))?;
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| parse_err(path, lineno, format!("bad number: {e}")))?;
        if vals.len() < props.len() {
            return Err(parse_err(path, lineno, "too few vertex values"));
        }
        vertices.push(Vector3::new(vals[px], vals[py], vals[pz]));
    }
    let mut faces = Vec::with_capacity(header.face_count);
    for row in 0..header.face_count {
        let lineno = header.header_lines + header.vertex_count + row + 1;
        let line = lines
            .get(header.header_lines + header.vertex_count + row)
            .ok_or_else(|| parse_err(path, lineno, "unexpected end of file"))?;
        let vals: Vec<usize> = line
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|e| parse_err(path, lineno, format!("bad index: {e}")))?;
        match vals.as_slice() {
            [3, a, b, c] => faces.push([*a, *b, *c]),
            [n, ..] => {
                return Err(parse_err(
                    path,
                    lineno,
                    format!("only triangles supported, face has {n} vertices"),
                ))
            }
            [] => return Err(parse_err(path, lineno, "empty face record")),
        }
    }
    TriangleMesh::new(vertices, faces)
}

fn read_obj(path: &Path) -> Result<TriangleMesh, GeometryError> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.as_slice() {
            ["v", x, y, z, ..] => {
                let parse = |t: &str| {
                    t.parse::<f64>()
                        .map_err(|e| parse_err(path, lineno, format!("bad coordinate: {e}")))
                };
                vertices.push(Vector3::new(parse(x)?, parse(y)?, parse(z)?));
            }
            ["f", rest @ ..] => {
                if rest.len() != 3 {
                    return Err(parse_err(
                        path,
                        lineno,
                        format!("only triangles supported, face has {} vertices", rest.len()),
                    ));
                }
                let mut f = [0usize; 3];
                for (slot, t) in f.iter_mut().zip(rest) {
                    // v, v/vt, v/vt/vn, v//vn all start with the vertex index
                    let idx: isize = t
                        .split('/')
                        .next()
                        .unwrap()
                        .parse()
                        .map_err(|e| parse_err(path, lineno, format!("bad face index: {e}")))?;
                    if idx == 0 {
                        return Err(parse_err(path, lineno, "OBJ indices are 1-based"));
                    }
                    *slot = if idx > 0 {
                        (idx - 1) as usize
                    } else {
                        let back = (-idx) as usize;
                        if back > vertices.len() {
                            return Err(parse_err(path, lineno, "negative index out of range"));
                        }
                        vertices.len() - back
                    };
                }
                faces.push(f);
            }
            _ => {}
        }
    }
    TriangleMesh::new(vertices, faces)
}

/// ASCII PLY triangle mesh with faces.
pub fn write_mesh(mesh: &TriangleMesh, path: &Path) -> Result<(), GeometryError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "ply")?;
    writeln!(w, "format ascii 1.0")?;
    writeln!(w, "element vertex {}", mesh.vertices().len())?;
    for p in ["x", "y", "z"] {
        writeln!(w, "property double {p}")?;
    }
    writeln!(w, "element face {}", mesh.faces().len())?;
    writeln!(w, "property list uchar int vertex_indices")?;
    writeln!(w, "end_header")?;
    for v in mesh.vertices() {
        writeln!(w, "{:.17e} {:.17e} {:.17e}", v.x, v.y, v.z)?;
    }
    for f in mesh.faces() {
        writeln!(w, "3 {} {} {}", f[0], f[1], f[2])?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn point_cloud_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut set = OrientedPointSet::default();
        for _ in 0..100 {
            let n = Vector3::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5, rng.gen::<f64>())
                .normalize();
            set.push(Vector3::new(rng.gen(), rng.gen(), rng.gen()), n);
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cloud.ply");
        write_point_cloud(&set, &path).unwrap();
        let back = read_point_cloud(&path).unwrap();
        assert_eq!(back.len(), 100);
        for ((p, n), (q, m)) in set.iter().zip(back.iter()) {
            assert!((p - q).norm() < 1e-6);
            assert!((n - m).norm() < 1e-6);
        }
    }

    #[test]
    fn missing_normals_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bare.ply");
        std::fs::write(
            &path,
            "ply\nformat ascii 1.0\nelement vertex 1\nproperty double x\nproperty double y\nproperty double z\nend_header\n0 0 0\n",
        )
        .unwrap();
        assert!(matches!(
            read_point_cloud(&path),
            Err(GeometryError::MissingNormals { .. })
        ));
    }

    #[test]
    fn obj_cube_has_eight_vertices_twelve_faces() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cube.obj");
        std::fs::write(
            &path,
            "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nv 0 0 1\nv 1 0 1\nv 1 1 1\nv 0 1 1\n\
             f 1 3 2\nf 1 4 3\nf 5 6 7\nf 5 7 8\nf 1 2 6\nf 1 6 5\n\
             f 2 3 7\nf 2 7 6\nf 3 4 8\nf 3 8 7\nf 4 1 5\nf 4 5 8\n",
        )
        .unwrap();
        let mesh = read_mesh(&path).unwrap();
        assert_eq!(mesh.vertices().len(), 8);
        assert_eq!(mesh.faces().len(), 12);
    }

    #[test]
    fn parse_error_carries_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ply");
        std::fs::write(
            &path,
            "ply\nformat ascii 1.0\nelement vertex 1\nproperty double x\nproperty double y\nproperty double z\nproperty double nx\nproperty double ny\nproperty double nz\nend_header\n0 0 oops 0 0 1\n",
        )
        .unwrap();
        match read_point_cloud(&path) {
            Err(GeometryError::Parse { line, .. }) => assert_eq!(line, 11),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn mesh_ply_round_trip() {
        let mesh = crate::sim::box_mesh(&Vector3::new(1.0, 2.0, 3.0), &Vector3::zeros());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("box.ply");
        write_mesh(&mesh, &path).unwrap();
        let back = read_mesh(&path).unwrap();
        assert_eq!(back.vertices().len(), mesh.vertices().len());
        assert_eq!(back.faces(), mesh.faces());
    }
}
