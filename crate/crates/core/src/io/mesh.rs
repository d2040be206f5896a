//! OBJ and binary PLY export of a compacted mesh.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::store::CompactMesh;

/// Per-vertex coloring for PLY output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ColorMode {
    #[default]
    None,
    /// Hue from blue (newest) to red (oldest).
    Age,
}

fn check(mesh: &CompactMesh) -> Result<()> {
    let n = mesh.vertex_count();
    if mesh.normals.len() != n || mesh.ages.len() != n || !mesh.indices.len().is_multiple_of(3) {
        return Err(Error::Internal(
            "compacted mesh arrays disagree in length".into(),
        ));
    }
    if let Some(&bad) = mesh.indices.iter().find(|&&i| i as usize >= n) {
        return Err(Error::Internal(format!(
            "index {bad} out of range for {n} vertices"
        )));
    }
    Ok(())
}

pub fn write_obj(path: &Path, mesh: &CompactMesh) -> Result<()> {
    check(mesh)?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    encode_obj(BufWriter::new(file), mesh).map_err(|e| Error::io(path, e))
}

pub fn encode_obj<W: Write>(mut w: W, mesh: &CompactMesh) -> std::io::Result<()> {
    for p in &mesh.positions {
        writeln!(w, "v {} {} {}", p[0], p[1], p[2])?;
    }
    for n in &mesh.normals {
        writeln!(w, "vn {} {} {}", n[0], n[1], n[2])?;
    }
    for t in mesh.triangles() {
        let [a, b, c] = t.map(|i| i + 1);
        writeln!(w, "f {a}//{a} {b}//{b} {c}//{c}")?;
    }
    w.flush()
}

/// RGB for an age in `[0, max_age]`: linear hue from 240 degrees down to 0.
pub fn age_color(age: u32, max_age: u32) -> [u8; 3] {
    let f = if max_age == 0 {
        0.0
    } else {
        age as f64 / max_age as f64
    };
    let hue = 240.0 * (1.0 - f);
    let sector = hue / 60.0;
    let x = 1.0 - (sector % 2.0 - 1.0).abs();
    let (r, g, b) = match sector as u32 {
        0 => (1.0, x, 0.0),
        1 => (x, 1.0, 0.0),
        2 => (0.0, 1.0, x),
        3 => (0.0, x, 1.0),
        _ => (x, 0.0, 1.0),
    };
    [r, g, b].map(|c: f64| (c * 255.0).round() as u8)
}

pub fn write_ply(path: &Path, mesh: &CompactMesh, color: ColorMode) -> Result<()> {
    check(mesh)?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    encode_ply(BufWriter::new(file), mesh, color).map_err(|e| Error::io(path, e))
}

pub fn ply_header(mesh: &CompactMesh, color: ColorMode) -> String {
    let mut h = format!(
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\n\
         property float x\nproperty float y\nproperty float z\n\
         property float nx\nproperty float ny\nproperty float nz\n",
        mesh.vertex_count()
    );
    if color == ColorMode::Age {
        h.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
    }
    h.push_str(&format!(
        "element face {}\nproperty list uchar int vertex_indices\nend_header\n",
        mesh.triangle_count()
    ));
    h
}

pub fn encode_ply<W: Write>(mut w: W, mesh: &CompactMesh, color: ColorMode) -> std::io::Result<()> {
    w.write_all(ply_header(mesh, color).as_bytes())?;
    let max_age = mesh.ages.iter().copied().max().unwrap_or(0);
    for i in 0..mesh.vertex_count() {
        for x in mesh.positions[i].iter().chain(&mesh.normals[i]) {
            w.write_all(&x.to_le_bytes())?;
        }
        if color == ColorMode::Age {
            w.write_all(&age_color(mesh.ages[i], max_age))?;
        }
    }
    for t in mesh.triangles() {
        w.write_all(&[3])?;
        for i in t {
            w.write_all(&(i as i32).to_le_bytes())?;
        }
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad() -> CompactMesh {
        CompactMesh {
            positions: vec![
                [0.0, 0.0, 0.0],
                [1.0, 0.0, 0.0],
                [1.0, 1.0, 0.0],
                [0.0, 1.0, 0.0],
            ],
            normals: vec![[0.0, 0.0, 1.0]; 4],
            ages: vec![0, 3, 1, 2],
            indices: vec![0, 1, 2, 0, 2, 3],
        }
    }

    fn obj_text(m: &CompactMesh) -> String {
        let mut buf = Vec::new();
        encode_obj(&mut buf, m).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn single_triangle_obj() {
        let m = CompactMesh {
            positions: vec![[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            normals: vec![[0.0, 0.0, 1.0]; 3],
            ages: vec![0; 3],
            indices: vec![0, 1, 2],
        };
        let text = obj_text(&m);
        assert_eq!(text.lines().filter(|l| l.starts_with("v ")).count(), 3);
        assert_eq!(text.lines().filter(|l| l.starts_with("vn ")).count(), 3);
        assert!(text.lines().any(|l| l == "f 1//1 2//2 3//3"));
    }

    #[test]
    fn shared_pair_obj() {
        let text = obj_text(&quad());
        assert_eq!(text.lines().filter(|l| l.starts_with("v ")).count(), 4);
        assert_eq!(text.lines().filter(|l| l.starts_with("f ")).count(), 2);
    }

    #[test]
    fn ply_size_matches_header() {
        for color in [ColorMode::None, ColorMode::Age] {
            let m = quad();
            let mut buf = Vec::new();
            encode_ply(&mut buf, &m, color).unwrap();
            let header = ply_header(&m, color);
            assert!(header.contains("element vertex 4\n"));
            let stride = 24 + if color == ColorMode::Age { 3 } else { 0 };
            assert_eq!(buf.len(), header.len() + 4 * stride + 2 * 13);
        }
    }

    #[test]
    fn colormap_endpoints() {
        assert_eq!(age_color(0, 10), [0, 0, 255]);
        assert_eq!(age_color(10, 10), [255, 0, 0]);
        assert_eq!(age_color(5, 10), [0, 255, 0]);
        assert_eq!(age_color(0, 0), [0, 0, 255]);
    }

    #[test]
    fn oldest_vertex_is_reddest() {
        let m = quad();
        let mut buf = Vec::new();
        encode_ply(&mut buf, &m, ColorMode::Age).unwrap();
        let body = &buf[ply_header(&m, ColorMode::Age).len()..];
        let red: Vec<u8> = (0..4).map(|i| body[i * 27 + 24]).collect();
        let oldest = m.ages.iter().enumerate().max_by_key(|(_, &a)| a).unwrap().0;
        assert_eq!(
            red.iter().enumerate().max_by_key(|(_, &r)| r).unwrap().0,
            oldest
        );
    }

    #[test]
    fn empty_mesh_writes_valid_files() {
        let m = CompactMesh::default();
        assert_eq!(obj_text(&m), "");
        let mut buf = Vec::new();
        encode_ply(&mut buf, &m, ColorMode::Age).unwrap();
        assert_eq!(buf.len(), ply_header(&m, ColorMode::Age).len());
    }

    #[test]
    fn out_of_range_index_is_rejected() {
        let mut m = quad();
        m.indices[5] = 9;
        let dir = tempfile::tempdir().unwrap();
        assert!(write_obj(&dir.path().join("m.obj"), &m).is_err());
    }
}
