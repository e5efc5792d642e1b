//! Point-cloud files: ASCII PLY (with an optional `comment sensor_origin x y z`
//! line) and whitespace-separated XYZ text.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Point3, PointCloud};
use crate::error::{Error, Result};

pub fn to_ply_string(cloud: &PointCloud) -> String {
    let mut s = String::with_capacity(64 + cloud.len() * 32);
    s.push_str("ply\nformat ascii 1.0\n");
    if let Some(o) = cloud.sensor_origin {
        let _ = writeln!(s, "comment sensor_origin {} {} {}", o.x, o.y, o.z);
    }
    let _ = writeln!(s, "element vertex {}", cloud.len());
    s.push_str("property float x\nproperty float y\nproperty float z\nend_header\n");
    for p in &cloud.points {
        let _ = writeln!(s, "{} {} {}", p.x as f32, p.y as f32, p.z as f32);
    }
    s
}

pub fn parse_ply(text: &str, path: &Path) -> Result<PointCloud> {
    let mut lines = text.lines().enumerate();
    let mut origin = None;
    let mut count = None;
    let mut props = Vec::new();
    match lines.next() {
        Some((_, "ply")) => {}
        _ => return Err(Error::parse(path, 1, "missing `ply` magic")),
    }
    loop {
        let Some((i, line)) = lines.next() else {
            return Err(Error::parse(path, text.lines().count(), "missing end_header"));
        };
        let mut it = line.split_whitespace();
        match it.next() {
            Some("format") => {
                if it.next() != Some("ascii") {
                    return Err(Error::parse(path, i + 1, "only ascii point clouds are supported"));
                }
            }
            Some("comment") => {
                if it.next() == Some("sensor_origin") {
                    let v = parse_floats::<3>(&mut it).ok_or_else(|| {
                        Error::parse(path, i + 1, "bad sensor_origin comment")
                    })?;
                    origin = Some(Point3::new(v[0], v[1], v[2]));
                }
            }
            Some("element") => {
                if it.next() == Some("vertex") {
                    count = it.next().and_then(|c| c.parse::<usize>().ok());
                    if count.is_none() {
                        return Err(Error::parse(path, i + 1, "bad vertex count"));
                    }
                }
            }
            Some("property") => {
                if let Some(name) = it.nth(1) {
                    props.push(name.to_string());
                }
            }
            Some("end_header") => break,
            _ => {}
        }
    }
    let count = count.ok_or_else(|| Error::parse(path, 1, "no vertex element"))?;
    let axis = |n: &str| props.iter().position(|p| p == n);
    let (Some(ix), Some(iy), Some(iz)) = (axis("x"), axis("y"), axis("z")) else {
        return Err(Error::parse(path, 1, "vertex element lacks x/y/z"));
    };
    let mut points = Vec::with_capacity(count);
    for _ in 0..count {
        let Some((i, line)) = lines.next() else {
            return Err(Error::parse(path, text.lines().count(), "truncated vertex list"));
        };
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::parse(path, i + 1, "bad number"))?;
        if vals.len() < props.len() {
            return Err(Error::parse(path, i + 1, "too few values"));
        }
        points.push(Point3::new(vals[ix], vals[iy], vals[iz]));
    }
    Ok(PointCloud {
        points,
        sensor_origin: origin,
    })
}

pub fn to_xyz_string(cloud: &PointCloud) -> String {
    let mut s = String::with_capacity(cloud.len() * 32);
    for p in &cloud.points {
        let _ = writeln!(s, "{} {} {}", p.x as f32, p.y as f32, p.z as f32);
    }
    s
}

pub fn parse_xyz(text: &str, path: &Path) -> Result<PointCloud> {
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let v = parse_floats::<3>(&mut it).ok_or_else(|| Error::parse(path, i + 1, "expected x y z"))?;
        points.push(Point3::new(v[0], v[1], v[2]));
    }
    Ok(PointCloud::new(points))
}

fn parse_floats<'a, const N: usize>(it: &mut impl Iterator<Item = &'a str>) -> Option<[f64; N]> {
    let mut out = [0.0; N];
    for v in &mut out {
        *v = it.next()?.parse().ok()?;
    }
    Some(out)
}

/// Writes `.ply` or `.xyz` depending on the extension.
pub fn save_cloud(cloud: &PointCloud, path: &Path) -> Result<()> {
    let text = match path.extension().and_then(|e| e.to_str()) {
        Some("xyz") => to_xyz_string(cloud),
        _ => to_ply_string(cloud),
    };
    fs::write(path, text)?;
    Ok(())
}

pub fn load_cloud(path: &Path) -> Result<PointCloud> {
    let text = fs::read_to_string(path)?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("xyz") => parse_xyz(&text, path),
        _ => parse_ply(&text, path),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> PointCloud {
        PointCloud::with_origin(
            vec![Point3::new(0.5, -0.25, 1.0), Point3::new(0.1, 0.2, 0.3)],
            Point3::new(3.0, 4.0, 1.0),
        )
    }

    #[test]
    fn ply_round_trip_keeps_origin() {
        let c = sample();
        let back = parse_ply(&to_ply_string(&c), Path::new("t.ply")).unwrap();
        assert_eq!(back.sensor_origin, c.sensor_origin);
        for (a, b) in back.points.iter().zip(&c.points) {
            assert!((a - b).norm() < 1e-6);
        }
    }

    #[test]
    fn xyz_round_trip_and_errors() {
        let c = sample();
        let back = parse_xyz(&to_xyz_string(&c), Path::new("t.xyz")).unwrap();
        assert_eq!(back.len(), 2);
        assert!(back.sensor_origin.is_none());
        let err = parse_xyz("1 2 3\n4 five 6\n", Path::new("t.xyz")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let text = to_ply_string(&c);
        let cut: String = text.lines().take(text.lines().count() - 1).collect::<Vec<_>>().join("\n");
        assert!(parse_ply(&cut, Path::new("t.ply")).is_err());
    }
}
