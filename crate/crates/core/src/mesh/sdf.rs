use super::bvh::Bvh;
use super::{is_watertight, TriangleMesh};
use crate::error::{Error, Result};
use crate::geometry::{Point3, Vector3};

/// Signed distance to a closed mesh. Magnitude is the distance to the nearest
/// triangle; the sign comes from ray-crossing parity, voted over three fixed
/// oblique directions so rays grazing an edge or vertex are outvoted.
#[derive(Debug, Clone)]
pub struct MeshSdf {
    bvh: Bvh,
}

const DIRECTIONS: [[f64; 3]; 3] = [
    [0.5773, 0.5774, 0.5775],
    [-0.6312, 0.2713, 0.7266],
    [0.1934, -0.8817, 0.4303],
];

impl MeshSdf {
    pub fn new(mesh: &TriangleMesh) -> Result<Self> {
        if !is_watertight(mesh) {
            return Err(Error::NotWatertight);
        }
        Ok(Self { bvh: Bvh::new(mesh) })
    }

    pub fn unsigned(&self, q: &Point3) -> f64 {
        self.bvh.nearest(q).map_or(f64::INFINITY, |(d, _)| d)
    }

    pub fn is_inside(&self, q: &Point3) -> bool {
        let votes = DIRECTIONS
            .iter()
            .filter(|d| {
                let dir = Vector3::new(d[0], d[1], d[2]).normalize();
                let mut hits = self.bvh.all_hits(q, &dir, 0.0);
                hits.sort_by(f64::total_cmp);
                hits.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
                hits.len() % 2 == 1
            })
            .count();
        votes >= 2
    }

    pub fn query(&self, q: &Point3) -> f64 {
        let d = self.unsigned(q);
        if self.is_inside(q) {
            -d
        } else {
            d
        }
    }

    pub fn bvh(&self) -> &Bvh {
        &self.bvh
    }
}

/// One-off signed distance query; build a [`MeshSdf`] for many queries.
pub fn mesh_sdf(mesh: &TriangleMesh, query: &Point3) -> Result<f64> {
    Ok(MeshSdf::new(mesh)?.query(query))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn cube() -> TriangleMesh {
        TriangleMesh::cuboid(Point3::new(-1.0, -1.0, -1.0), Point3::new(1.0, 1.0, 1.0))
    }

    #[test]
    fn cube_examples() {
        assert!((mesh_sdf(&cube(), &Point3::origin()).unwrap() + 1.0).abs() < 1e-12);
        assert!((mesh_sdf(&cube(), &Point3::new(2.0, 0.0, 0.0)).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn icosphere_inside_point() {
        let m = TriangleMesh::icosphere(1.0, 3);
        let s = mesh_sdf(&m, &Point3::new(0.5, 0.0, 0.0)).unwrap();
        assert!((s + 0.5).abs() < 5e-3, "{s}");
    }

    #[test]
    fn open_mesh_is_rejected() {
        let mut m = cube();
        m.triangles.pop();
        m.triangles.pop();
        assert!(matches!(mesh_sdf(&m, &Point3::origin()), Err(Error::NotWatertight)));
    }

    #[test]
    fn sign_flips_once_along_random_rays() {
        let m = TriangleMesh::icosphere(1.0, 2);
        let sdf = MeshSdf::new(&m).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let dir = Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            )
            .normalize();
            let mut flips = 0;
            let mut prev = sdf.query(&Point3::origin()) < 0.0;
            assert!(prev);
            for s in 1..=60 {
                let p = Point3::from(dir * (s as f64 * 0.05));
                let inside = sdf.query(&p) < 0.0;
                flips += (inside != prev) as usize;
                prev = inside;
            }
            assert_eq!(flips, 1);
        }
    }

    #[test]
    fn grid_points_on_box_faces_planes_vote_correctly() {
        // Queries aligned with vertices and edges of the box.
        let sdf = MeshSdf::new(&cube()).unwrap();
        for q in [[0.0, 0.0, 0.5], [0.5, 0.5, 0.0], [0.0, 0.0, 3.0], [3.0, 3.0, 3.0]] {
            let p = Point3::new(q[0], q[1], q[2]);
            let inside = q.iter().all(|v| v.abs() < 1.0);
            assert_eq!(sdf.is_inside(&p), inside, "{q:?}");
        }
    }
}
