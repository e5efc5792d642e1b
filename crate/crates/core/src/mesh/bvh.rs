use super::TriangleMesh;
use crate::geometry::{Point3, Vector3};

/// Bounding volume hierarchy over the triangles of a mesh, used for first-hit
/// ray queries and nearest-triangle distance queries.
#[derive(Debug, Clone)]
pub struct Bvh {
    tris: Vec<[Point3; 3]>,
    order: Vec<usize>,
    nodes: Vec<BvhNode>,
}

#[derive(Debug, Clone)]
struct BvhNode {
    lo: Point3,
    hi: Point3,
    /// Leaf: `start..start+count` in `order`; inner: children at `left` and `left + 1`.
    start: usize,
    count: usize,
    left: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub t: f64,
    pub triangle: usize,
}

const LEAF_SIZE: usize = 4;

impl Bvh {
    pub fn new(mesh: &TriangleMesh) -> Self {
        let tris: Vec<[Point3; 3]> = (0..mesh.triangles.len()).map(|t| mesh.corners(t)).collect();
        let centroids: Vec<Point3> = tris
            .iter()
            .map(|[a, b, c]| Point3::from((a.coords + b.coords + c.coords) / 3.0))
            .collect();
        let mut bvh = Self {
            order: (0..tris.len()).collect(),
            tris,
            nodes: Vec::new(),
        };
        if !bvh.tris.is_empty() {
            bvh.nodes.push(BvhNode {
                lo: Point3::origin(),
                hi: Point3::origin(),
                start: 0,
                count: 0,
                left: 0,
            });
            bvh.build(0, 0, bvh.tris.len(), &centroids);
        }
        bvh
    }

    fn build(&mut self, node: usize, start: usize, end: usize, centroids: &[Point3]) {
        let mut lo = Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut hi = -lo;
        let mut clo = lo;
        let mut chi = hi;
        for &i in &self.order[start..end] {
            for p in &self.tris[i] {
                lo = lo.inf(p);
                hi = hi.sup(p);
            }
            clo = clo.inf(&centroids[i]);
            chi = chi.sup(&centroids[i]);
        }
        self.nodes[node].lo = lo;
        self.nodes[node].hi = hi;
        let count = end - start;
        if count <= LEAF_SIZE {
            self.nodes[node].start = start;
            self.nodes[node].count = count;
            return;
        }
        let axis = (chi - clo).imax();
        let mid = start + count / 2;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            centroids[a][axis].total_cmp(&centroids[b][axis]).then(a.cmp(&b))
        });
        let left = self.nodes.len();
        let blank = BvhNode {
            lo,
            hi,
            start: 0,
            count: 0,
            left: 0,
        };
        self.nodes.push(blank.clone());
        self.nodes.push(blank);
        self.nodes[node].left = left;
        self.build(left, start, mid, centroids);
        self.build(left + 1, mid, end, centroids);
    }

    pub fn triangle_count(&self) -> usize {
        self.tris.len()
    }

    pub fn triangle(&self, i: usize) -> &[Point3; 3] {
        &self.tris[i]
    }

    /// Nearest hit with `t` in `(t_min, t_max)`; ties resolve to the lower triangle index.
    pub fn first_hit(&self, origin: &Point3, dir: &Vector3, t_min: f64, t_max: f64) -> Option<RayHit> {
        if self.nodes.is_empty() {
            return None;
        }
        let inv = Vector3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut best: Option<RayHit> = None;
        let mut limit = t_max;
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            let Some(entry) = slab(origin, &inv, &node.lo, &node.hi, limit) else {
                continue;
            };
            if entry > limit {
                continue;
            }
            if node.count > 0 || node.left == 0 {
                for &i in &self.order[node.start..node.start + node.count] {
                    if let Some(t) = ray_triangle(origin, dir, &self.tris[i]) {
                        let better = match best {
                            None => true,
                            Some(b) => t < b.t || (t == b.t && i < b.triangle),
                        };
                        if t > t_min && t <= limit && better {
                            best = Some(RayHit { t, triangle: i });
                            limit = t;
                        }
                    }
                }
            } else {
                stack.push(node.left + 1);
                stack.push(node.left);
            }
        }
        best
    }

    /// Every intersection parameter `t > t_min` along the ray.
    pub fn all_hits(&self, origin: &Point3, dir: &Vector3, t_min: f64) -> Vec<f64> {
        let mut hits = Vec::new();
        if self.nodes.is_empty() {
            return hits;
        }
        let inv = Vector3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            if slab(origin, &inv, &node.lo, &node.hi, f64::INFINITY).is_none() {
                continue;
            }
            if node.count > 0 || node.left == 0 {
                for &i in &self.order[node.start..node.start + node.count] {
                    if let Some(t) = ray_triangle(origin, dir, &self.tris[i]) {
                        if t > t_min {
                            hits.push(t);
                        }
                    }
                }
            } else {
                stack.push(node.left + 1);
                stack.push(node.left);
            }
        }
        hits
    }

    /// Closest point on the surface as `(distance, triangle)`.
    pub fn nearest(&self, q: &Point3) -> Option<(f64, usize)> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best_d2 = f64::INFINITY;
        let mut best_i = usize::MAX;
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            if box_distance2(q, &node.lo, &node.hi) > best_d2 {
                continue;
            }
            if node.count > 0 || node.left == 0 {
                for &i in &self.order[node.start..node.start + node.count] {
                    let d2 = (closest_point_on_triangle(q, &self.tris[i]) - q).norm_squared();
                    if d2 < best_d2 || (d2 == best_d2 && i < best_i) {
                        best_d2 = d2;
                        best_i = i;
                    }
                }
            } else {
                let (a, b) = (node.left, node.left + 1);
                let da = box_distance2(q, &self.nodes[a].lo, &self.nodes[a].hi);
                let db = box_distance2(q, &self.nodes[b].lo, &self.nodes[b].hi);
                if da <= db {
                    stack.push(b);
                    stack.push(a);
                } else {
                    stack.push(a);
                    stack.push(b);
                }
            }
        }
        Some((best_d2.sqrt(), best_i))
    }
}

fn slab(o: &Point3, inv: &Vector3, lo: &Point3, hi: &Point3, t_max: f64) -> Option<f64> {
    let mut t0: f64 = 0.0;
    let mut t1 = t_max;
    for a in 0..3 {
        let mut ta = (lo[a] - o[a]) * inv[a];
        let mut tb = (hi[a] - o[a]) * inv[a];
        if ta > tb {
            std::mem::swap(&mut ta, &mut tb);
        }
        // NaN from 0 * inf means the ray lies in the slab plane; keep it.
        if !ta.is_nan() {
            t0 = t0.max(ta);
        }
        if !tb.is_nan() {
            t1 = t1.min(tb * (1.0 + 1e-12) + 1e-12);
        }
        if t0 > t1 {
            return None;
        }
    }
    Some(t0)
}

fn box_distance2(q: &Point3, lo: &Point3, hi: &Point3) -> f64 {
    let mut d = 0.0;
    for a in 0..3 {
        let v = if q[a] < lo[a] {
            lo[a] - q[a]
        } else if q[a] > hi[a] {
            q[a] - hi[a]
        } else {
            0.0
        };
        d += v * v;
    }
    d
}

/// Möller–Trumbore; returns the ray parameter of a proper hit.
pub(crate) fn ray_triangle(o: &Point3, d: &Vector3, [a, b, c]: &[Point3; 3]) -> Option<f64> {
    let e1 = b - a;
    let e2 = c - a;
    let p = d.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-300 {
        return None;
    }
    let inv = 1.0 / det;
    let s = o - a;
    let u = s.dot(&p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = d.dot(&q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    Some(e2.dot(&q) * inv)
}

/// Closest point on a triangle (Ericson, Real-Time Collision Detection 5.1.5).
pub(crate) fn closest_point_on_triangle(p: &Point3, [a, b, c]: &[Point3; 3]) -> Point3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn first_hit_matches_brute_force() {
        let mesh = TriangleMesh::icosphere(1.0, 2);
        let bvh = Bvh::new(&mesh);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let o = Point3::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), 3.0);
            let d = (Point3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 0.0) - o).normalize();
            let brute = (0..mesh.triangles.len())
                .filter_map(|t| ray_triangle(&o, &d, &mesh.corners(t)).filter(|&t| t > 1e-9))
                .fold(f64::INFINITY, f64::min);
            match bvh.first_hit(&o, &d, 1e-9, 100.0) {
                Some(h) => assert!((h.t - brute).abs() < 1e-12),
                None => assert!(brute.is_infinite()),
            }
        }
    }

    #[test]
    fn nearest_matches_brute_force() {
        let mesh = TriangleMesh::icosphere(1.0, 2);
        let bvh = Bvh::new(&mesh);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(10);
        for _ in 0..200 {
            let q = Point3::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let brute = (0..mesh.triangles.len())
                .map(|t| (closest_point_on_triangle(&q, &mesh.corners(t)) - q).norm())
                .fold(f64::INFINITY, f64::min);
            assert!((bvh.nearest(&q).unwrap().0 - brute).abs() < 1e-12);
        }
    }
}
