use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::TriangleMesh;
use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud};

/// Area-weighted uniform surface samples.
pub fn sample_surface(mesh: &TriangleMesh, n: usize, seed: u64) -> Result<PointCloud> {
    Ok(PointCloud::new(sample_surface_with_faces(mesh, n, seed)?.0))
}

/// Like [`sample_surface`] but also returns the source triangle of each point.
pub fn sample_surface_with_faces(
    mesh: &TriangleMesh,
    n: usize,
    seed: u64,
) -> Result<(Vec<Point3>, Vec<usize>)> {
    if mesh.triangles.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut cdf = Vec::with_capacity(mesh.triangles.len());
    let mut total = 0.0;
    for t in 0..mesh.triangles.len() {
        total += mesh.area(t);
        cdf.push(total);
    }
    if !(total > 0.0) {
        return Err(Error::Degenerate("mesh has zero surface area".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n);
    let mut faces = Vec::with_capacity(n);
    for _ in 0..n {
        let r = rng.random::<f64>() * total;
        let t = cdf.partition_point(|&c| c <= r).min(cdf.len() - 1);
        let [a, b, c] = mesh.corners(t);
        let s = rng.random::<f64>().sqrt();
        let u = rng.random::<f64>();
        let p = a.coords * (1.0 - s) + b.coords * (s * (1.0 - u)) + c.coords * (s * u);
        points.push(Point3::from(p));
        faces.push(t);
    }
    Ok((points, faces))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_lie_on_single_triangle() {
        let m = TriangleMesh::new(
            vec![
                Point3::new(0.3, -0.2, 0.1),
                Point3::new(1.0, 0.5, -0.4),
                Point3::new(-0.6, 0.9, 0.7),
            ],
            vec![[0, 1, 2]],
        );
        let n = m.face_cross(0).normalize();
        let d = n.dot(&m.vertices[0].coords);
        let pts = sample_surface(&m, 50, 3).unwrap();
        assert_eq!(pts.len(), 50);
        for p in &pts.points {
            assert!((n.dot(&p.coords) - d).abs() < 1e-9);
        }
    }

    #[test]
    fn cube_faces_are_hit_in_proportion_to_area() {
        let m = TriangleMesh::cuboid(Point3::new(-1.0, -1.0, -1.0), Point3::new(1.0, 1.0, 1.0));
        let n = 12000;
        let (_, faces) = sample_surface_with_faces(&m, n, 17).unwrap();
        let mut per_face = [0usize; 6];
        for f in faces {
            per_face[f / 2] += 1;
        }
        let p = 1.0 / 6.0;
        let sd = (n as f64 * p * (1.0 - p)).sqrt();
        for c in per_face {
            assert!((c as f64 - 2000.0).abs() < 5.0 * sd, "{per_face:?}");
        }
    }

    #[test]
    fn deterministic_and_empty_error() {
        let m = TriangleMesh::icosphere(1.0, 1);
        assert_eq!(sample_surface(&m, 100, 5).unwrap(), sample_surface(&m, 100, 5).unwrap());
        assert_ne!(sample_surface(&m, 100, 5).unwrap(), sample_surface(&m, 100, 6).unwrap());
        assert!(matches!(
            sample_surface(&TriangleMesh::default(), 10, 0),
            Err(Error::EmptyInput)
        ));
    }
}
