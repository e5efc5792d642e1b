//! Brute-force oracles shared by the integration tests.
#![allow(dead_code)]

pub mod gradchecks;

use mvsdf::geometry::{Point3, Vector3};
use mvsdf::mesh::TriangleMesh;
use mvsdf::sdf_model::SdfSampleSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Möller–Trumbore against one triangle.
pub fn ray_triangle(o: &Point3, d: &Vector3, tri: [Point3; 3]) -> Option<f64> {
    let [a, b, c] = tri;
    let e1 = b - a;
    let e2 = c - a;
    let p = d.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-300 {
        return None;
    }
    let s = o - a;
    let u = s.dot(&p) / det;
    let q = s.cross(&e1);
    let v = d.dot(&q) / det;
    if u < 0.0 || v < 0.0 || u + v > 1.0 {
        return None;
    }
    Some(e2.dot(&q) / det)
}

/// Nearest hit over every triangle, with `t > t_min`.
pub fn brute_first_hit(mesh: &TriangleMesh, o: &Point3, d: &Vector3, t_min: f64) -> Option<(f64, usize)> {
    (0..mesh.triangles.len())
        .filter_map(|t| ray_triangle(o, d, mesh.corners(t)).filter(|&s| s > t_min).map(|s| (s, t)))
        .min_by(|a, b| a.0.total_cmp(&b.0))
}

/// True when nothing on the mesh lies strictly between `o` and `p`.
pub fn visible(mesh: &TriangleMesh, o: &Point3, p: &Point3) -> bool {
    let d = p - o;
    let len = d.norm();
    let dir = d / len;
    match brute_first_hit(mesh, o, &dir, 1e-9) {
        None => true,
        Some((t, _)) => t >= len * (1.0 - 1e-9) - 1e-9,
    }
}

/// Exhaustive nearest squared distance.
pub fn brute_nearest2(p: &Point3, ys: &[Point3]) -> f64 {
    ys.iter().map(|y| (p - y).norm_squared()).fold(f64::INFINITY, f64::min)
}

/// Greedy maximin farthest-point sampling, lowest index on ties.
pub fn brute_fps(points: &[Point3], k: usize, start: usize) -> Vec<usize> {
    let k = k.min(points.len());
    let mut chosen = vec![start];
    while chosen.len() < k {
        let mut best = (f64::NEG_INFINITY, usize::MAX);
        for (i, p) in points.iter().enumerate() {
            let d = chosen
                .iter()
                .map(|&c| (p - points[c]).norm_squared())
                .fold(f64::INFINITY, f64::min);
            if d > best.0 {
                best = (d, i);
            }
        }
        chosen.push(best.1);
    }
    chosen
}

pub fn unit(rng: &mut ChaCha8Rng) -> Vector3 {
    loop {
        let v = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Analytic samples of a radius-0.5 sphere: a band around the surface, the
/// interior and the whole extent.
pub fn sphere_samples(n: usize, seed: u64) -> SdfSampleSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let near = n * 3 / 5;
    let interior = n / 5;
    let mut points = Vec::with_capacity(n);
    for i in 0..n {
        let p = if i < near {
            Point3::from(unit(&mut rng) * (0.5 + rng.random_range(-0.08..0.08)))
        } else if i >= n - interior {
            Point3::from(unit(&mut rng) * rng.random_range(0.0..0.5))
        } else {
            Point3::new(
                rng.random_range(-1.1..1.1),
                rng.random_range(-1.1..1.1),
                rng.random_range(-1.1..1.1),
            )
        };
        points.push(p);
    }
    let sdf = points.iter().map(|p| p.coords.norm() - 0.5).collect();
    SdfSampleSet {
        shape_id: "sphere".into(),
        points,
        sdf,
        n_surface: near,
        n_uniform: n - near,
    }
}
