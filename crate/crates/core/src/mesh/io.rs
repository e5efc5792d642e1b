//! Mesh files: Wavefront OBJ (`v`/`f` records) and binary little-endian PLY.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::TriangleMesh;
use crate::error::{Error, Result};
use crate::geometry::Point3;

pub fn to_obj_string(mesh: &TriangleMesh) -> String {
    let mut s = String::with_capacity(mesh.vertices.len() * 40 + mesh.triangles.len() * 24);
    for v in &mesh.vertices {
        let _ = writeln!(s, "v {} {} {}", v.x, v.y, v.z);
    }
    for t in &mesh.triangles {
        let _ = writeln!(s, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    s
}

/// Polygons with more than three corners are fan-triangulated from their
/// first corner. Texture/normal references (`a/b/c`) and negative indices are
/// accepted; other record types are ignored.
pub fn parse_obj(text: &str, path: &Path) -> Result<TriangleMesh> {
    let mut mesh = TriangleMesh::default();
    let mut faces: Vec<(usize, Vec<i64>)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let mut c = [0.0; 3];
                for x in &mut c {
                    *x = it
                        .next()
                        .and_then(|t| t.parse::<f64>().ok())
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| Error::parse(path, lineno, "bad vertex record"))?;
                }
                mesh.vertices.push(Point3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let idx = it
                    .map(|t| t.split('/').next().unwrap_or("").parse::<i64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| Error::parse(path, lineno, "bad face index"))?;
                if idx.len() < 3 {
                    return Err(Error::parse(path, lineno, "face needs at least 3 vertices"));
                }
                faces.push((lineno, idx));
            }
            _ => {}
        }
    }
    let n = mesh.vertices.len() as i64;
    for (lineno, idx) in faces {
        let resolved = idx
            .iter()
            .map(|&k| {
                let r = if k > 0 { k - 1 } else { n + k };
                if k == 0 || r < 0 || r >= n {
                    Err(Error::parse(path, lineno, format!("face index {k} out of range")))
                } else {
                    Ok(r as u32)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        for w in 1..resolved.len() - 1 {
            mesh.triangles.push([resolved[0], resolved[w], resolved[w + 1]]);
        }
    }
    Ok(mesh)
}

pub fn to_ply_bytes(mesh: &TriangleMesh) -> Vec<u8> {
    let header = format!(
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nelement face {}\nproperty list uchar int vertex_indices\nend_header\n",
        mesh.vertices.len(),
        mesh.triangles.len()
    );
    let mut out = header.into_bytes();
    for v in &mesh.vertices {
        for c in [v.x, v.y, v.z] {
            out.extend_from_slice(&c.to_le_bytes());
        }
    }
    for t in &mesh.triangles {
        out.push(3);
        for &i in t {
            out.extend_from_slice(&(i as i32).to_le_bytes());
        }
    }
    out
}

#[derive(Debug, Clone, Copy)]
enum Ty {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Ty {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "char" | "int8" => Ty::I8,
            "uchar" | "uint8" => Ty::U8,
            "short" | "int16" => Ty::I16,
            "ushort" | "uint16" => Ty::U16,
            "int" | "int32" => Ty::I32,
            "uint" | "uint32" => Ty::U32,
            "float" | "float32" => Ty::F32,
            "double" | "float64" => Ty::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Ty::I8 | Ty::U8 => 1,
            Ty::I16 | Ty::U16 => 2,
            Ty::I32 | Ty::U32 | Ty::F32 => 4,
            Ty::F64 => 8,
        }
    }

    fn read(self, b: &[u8]) -> f64 {
        match self {
            Ty::I8 => b[0] as i8 as f64,
            Ty::U8 => b[0] as f64,
            Ty::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Ty::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Ty::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Ty::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Ty::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Ty::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

enum Prop {
    Scalar(String, Ty),
    List(String, Ty, Ty),
}

struct Element {
    name: String,
    count: usize,
    props: Vec<Prop>,
}

/// Reads binary little-endian PLY with a `vertex` element (x, y, z) and an
/// optional `face` element holding a `vertex_indices` list.
pub fn parse_ply(bytes: &[u8], path: &Path) -> Result<TriangleMesh> {
    let mut pos = 0usize;
    let mut lineno = 0usize;
    let mut next_line = |pos: &mut usize| -> Option<(usize, String)> {
        let rest = &bytes[*pos..];
        let end = rest.iter().position(|&b| b == b'\n')?;
        let line = String::from_utf8_lossy(&rest[..end]).trim_end_matches('\r').to_string();
        *pos += end + 1;
        lineno += 1;
        Some((lineno, line))
    };
    match next_line(&mut pos) {
        Some((_, l)) if l == "ply" => {}
        _ => return Err(Error::parse(path, 1, "missing `ply` magic")),
    }
    let mut elements: Vec<Element> = Vec::new();
    let mut header_lines;
    loop {
        let Some((ln, line)) = next_line(&mut pos) else {
            return Err(Error::parse(path, lineno + 1, "missing end_header"));
        };
        header_lines = ln;
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.first().copied() {
            Some("format") => {
                if tok.get(1) != Some(&"binary_little_endian") {
                    return Err(Error::parse(path, ln, "only binary_little_endian meshes are supported"));
                }
            }
            Some("element") => {
                let (Some(name), Some(count)) = (tok.get(1), tok.get(2).and_then(|c| c.parse().ok())) else {
                    return Err(Error::parse(path, ln, "bad element line"));
                };
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    props: Vec::new(),
                });
            }
            Some("property") => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| Error::parse(path, ln, "property before element"))?;
                let prop = if tok.get(1) == Some(&"list") {
                    match (tok.get(2).and_then(|t| Ty::parse(t)), tok.get(3).and_then(|t| Ty::parse(t)), tok.get(4)) {
                        (Some(c), Some(i), Some(n)) => Prop::List(n.to_string(), c, i),
                        _ => return Err(Error::parse(path, ln, "bad list property")),
                    }
                } else {
                    match (tok.get(1).and_then(|t| Ty::parse(t)), tok.get(2)) {
                        (Some(t), Some(n)) => Prop::Scalar(n.to_string(), t),
                        _ => return Err(Error::parse(path, ln, "bad property")),
                    }
                };
                el.props.push(prop);
            }
            Some("end_header") => break,
            Some("comment") | Some("obj_info") | None => {}
            Some(other) => return Err(Error::parse(path, ln, format!("unknown header keyword `{other}`"))),
        }
    }
    // Payload errors are reported against the first line after the header.
    let body_line = header_lines + 1;
    let truncated = || Error::parse(path, body_line, "truncated binary payload");
    let take = |pos: &mut usize, n: usize| -> Result<&[u8]> {
        let s = bytes.get(*pos..*pos + n).ok_or_else(truncated)?;
        *pos += n;
        Ok(s)
    };
    let mut mesh = TriangleMesh::default();
    for el in &elements {
        for _ in 0..el.count {
            let mut xyz = [f64::NAN; 3];
            for prop in &el.props {
                match prop {
                    Prop::Scalar(name, ty) => {
                        let v = ty.read(take(&mut pos, ty.size())?);
                        if el.name == "vertex" {
                            match name.as_str() {
                                "x" => xyz[0] = v,
                                "y" => xyz[1] = v,
                                "z" => xyz[2] = v,
                                _ => {}
                            }
                        }
                    }
                    Prop::List(name, cty, ity) => {
                        let n = cty.read(take(&mut pos, cty.size())?) as usize;
                        let mut idx = Vec::with_capacity(n);
                        for _ in 0..n {
                            idx.push(ity.read(take(&mut pos, ity.size())?));
                        }
                        if el.name == "face" && (name == "vertex_indices" || name == "vertex_index") {
                            if n < 3 {
                                return Err(Error::parse(path, body_line, "face needs at least 3 vertices"));
                            }
                            for w in 1..n - 1 {
                                mesh.triangles.push([idx[0] as u32, idx[w] as u32, idx[w + 1] as u32]);
                            }
                        }
                    }
                }
            }
            if el.name == "vertex" {
                if xyz.iter().any(|v| !v.is_finite()) {
                    return Err(Error::parse(path, body_line, "vertex without finite x, y, z"));
                }
                mesh.vertices.push(Point3::new(xyz[0], xyz[1], xyz[2]));
            }
        }
    }
    if !mesh.is_valid() {
        return Err(Error::parse(path, body_line, "face index out of range"));
    }
    Ok(mesh)
}

fn is_obj(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("obj"))
}

/// Writes OBJ for `.obj` paths and binary PLY otherwise.
pub fn save_mesh(mesh: &TriangleMesh, path: &Path) -> Result<()> {
    if is_obj(path) {
        fs::write(path, to_obj_string(mesh))?;
    } else {
        fs::write(path, to_ply_bytes(mesh))?;
    }
    Ok(())
}

pub fn load_mesh(path: &Path) -> Result<TriangleMesh> {
    let bytes = fs::read(path)?;
    if is_obj(path) {
        let text = String::from_utf8(bytes).map_err(|_| Error::parse(path, 1, "not UTF-8 text"))?;
        parse_obj(&text, path)
    } else {
        parse_ply(&bytes, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube() -> TriangleMesh {
        TriangleMesh::cuboid(Point3::new(-1.0, -0.5, -0.25), Point3::new(1.0, 0.5, 0.25))
    }

    fn assert_close(a: &TriangleMesh, b: &TriangleMesh) {
        assert_eq!(a.triangles, b.triangles);
        assert_eq!(a.vertices.len(), b.vertices.len());
        for (p, q) in a.vertices.iter().zip(&b.vertices) {
            assert!((p - q).norm() < 1e-6);
        }
    }

    #[test]
    fn round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let m = TriangleMesh::icosphere(0.7, 1);
        for name in ["m.obj", "m.ply"] {
            let p = dir.path().join(name);
            save_mesh(&m, &p).unwrap();
            assert_close(&m, &load_mesh(&p).unwrap());
        }
        let p = dir.path().join("c.ply");
        save_mesh(&cube(), &p).unwrap();
        assert_close(&cube(), &load_mesh(&p).unwrap());
        let p = dir.path().join("exact.ply");
        save_mesh(&m, &p).unwrap();
        assert_eq!(load_mesh(&p).unwrap().vertices, m.vertices);
    }

    #[test]
    fn obj_quads_are_fanned() {
        let text = "# quad\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1/1 2/2 3/3 4/4\nf -4 -3 -2\n";
        let m = parse_obj(text, Path::new("q.obj")).unwrap();
        assert_eq!(m.triangles, vec![[0, 1, 2], [0, 2, 3], [0, 1, 2]]);
    }

    #[test]
    fn obj_errors_carry_line_numbers() {
        let e = parse_obj("v 0 0 0\nv 1 0\n", Path::new("a.obj")).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }), "{e}");
        let e = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\n\nf 1 2 9\n", Path::new("a.obj")).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 5, .. }), "{e}");
    }

    #[test]
    fn truncated_ply_is_rejected() {
        let b = to_ply_bytes(&cube());
        let e = parse_ply(&b[..b.len() - 5], Path::new("t.ply")).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 10, .. }), "{e}");
        let e = parse_ply(&b[..40], Path::new("t.ply")).unwrap_err();
        assert!(matches!(e, Error::Parse { .. }), "{e}");
        assert!(parse_ply(b"plx\n", Path::new("t.ply")).is_err());
    }
}
