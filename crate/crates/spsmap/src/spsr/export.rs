use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::Vector3;

use super::{SpsrError, VoxelGrid};

/// Write a node-major scalar field as a structured ASCII grid.
///
/// Format: `spsmap-grid 1` magic, `k <K>`, `origin <x> <y> <z>`,
/// `h <spacing>`, then one node value per line in node-major order
/// (x-major, z fastest).
pub fn write_field_grid(grid: &VoxelGrid, values: &[f64], path: &Path) -> Result<(), SpsrError> {
    assert_eq!(values.len(), grid.node_count());
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "spsmap-grid 1")?;
    writeln!(w, "k {}", grid.k())?;
    let o = grid.origin();
    writeln!(w, "origin {:.17e} {:.17e} {:.17e}", o.x, o.y, o.z)?;
    writeln!(w, "h {:.17e}", grid.h())?;
    for v in values {
        writeln!(w, "{v:.17e}")?;
    }
    Ok(())
}

/// Read a field written by [`write_field_grid`].
pub fn read_field_grid(path: &Path) -> Result<(VoxelGrid, Vec<f64>), SpsrError> {
    let perr = |line: usize, message: &str| SpsrError::Parse {
        path: path.display().to_string(),
        line,
        message: message.to_string(),
    };
    let mut lines = BufReader::new(File::open(path)?).lines();
    let mut next = |lineno: &mut usize| -> Result<String, SpsrError> {
        *lineno += 1;
        lines
            .next()
            .transpose()?
            .ok_or_else(|| SpsrError::Parse {
                path: path.display().to_string(),
                line: *lineno,
                message: "unexpected end of file".into(),
            })
    };
    let mut lineno = 0;
    if next(&mut lineno)?.trim() != "spsmap-grid 1" {
        return Err(perr(1, "bad magic"));
    }
    let kline = next(&mut lineno)?;
    let k: usize = kline
        .strip_prefix("k ")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| perr(2, "bad k line"))?;
    let oline = next(&mut lineno)?;
    let parts: Vec<f64> = oline
        .strip_prefix("origin ")
        .map(|s| s.split_whitespace().filter_map(|t| t.parse().ok()).collect())
        .unwrap_or_default();
    if parts.len() != 3 {
        return Err(perr(3, "bad origin line"));
    }
    let hline = next(&mut lineno)?;
    let h: f64 = hline
        .strip_prefix("h ")
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| perr(4, "bad h line"))?;
    let grid = VoxelGrid::new(k, Vector3::new(parts[0], parts[1], parts[2]), h);
    let mut values = Vec::with_capacity(grid.node_count());
    for _ in 0..grid.node_count() {
        let l = next(&mut lineno)?;
        values.push(
            l.trim()
                .parse()
                .map_err(|_| perr(lineno, "bad node value"))?,
        );
    }
    Ok((grid, values))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_grid_round_trip_is_exact() {
        let grid = VoxelGrid::new(4, Vector3::new(-0.5, 0.25, 1.0), 0.125);
        let values: Vec<f64> = (0..grid.node_count())
            .map(|i| (i as f64 * 0.731).sin())
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("field.grid");
        write_field_grid(&grid, &values, &path).unwrap();
        let (g2, v2) = read_field_grid(&path).unwrap();
        assert_eq!(g2, grid);
        assert_eq!(v2, values);
    }
}
