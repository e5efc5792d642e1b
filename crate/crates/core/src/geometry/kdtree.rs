use super::Point3;

/// Exact nearest-neighbour index over a fixed point set.
///
/// Distances are squared Euclidean. Ties are broken by the lower point index so
/// queries are reproducible regardless of tree layout.
#[derive(Debug, Clone)]
pub struct KdTree {
    points: Vec<Point3>,
    nodes: Vec<KdNode>,
    root: Option<usize>,
}

#[derive(Debug, Clone)]
struct KdNode {
    index: usize,
    axis: usize,
    left: Option<usize>,
    right: Option<usize>,
}

impl KdTree {
    pub fn new(points: &[Point3]) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        let mut tree = Self {
            points: points.to_vec(),
            nodes: Vec::with_capacity(points.len()),
            root: None,
        };
        tree.root = tree.build(&mut order, 0);
        tree
    }

    fn build(&mut self, items: &mut [usize], depth: usize) -> Option<usize> {
        if items.is_empty() {
            return None;
        }
        let axis = depth % 3;
        let mid = items.len() / 2;
        let pts = &self.points;
        items.select_nth_unstable_by(mid, |&a, &b| {
            pts[a][axis].total_cmp(&pts[b][axis]).then(a.cmp(&b))
        });
        let index = items[mid];
        let (lo, rest) = items.split_at_mut(mid);
        let hi = &mut rest[1..];
        let node = self.nodes.len();
        self.nodes.push(KdNode {
            index,
            axis,
            left: None,
            right: None,
        });
        let left = self.build(lo, depth + 1);
        let right = self.build(hi, depth + 1);
        self.nodes[node].left = left;
        self.nodes[node].right = right;
        Some(node)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Closest point as `(index, squared distance)`.
    pub fn nearest(&self, q: &Point3) -> Option<(usize, f64)> {
        let mut best = (usize::MAX, f64::INFINITY);
        self.nearest_rec(self.root, q, &mut best);
        (best.0 != usize::MAX).then_some(best)
    }

    fn nearest_rec(&self, node: Option<usize>, q: &Point3, best: &mut (usize, f64)) {
        let Some(n) = node else { return };
        let node = &self.nodes[n];
        let p = &self.points[node.index];
        let d = (p - q).norm_squared();
        if d < best.1 || (d == best.1 && node.index < best.0) {
            *best = (node.index, d);
        }
        let diff = q[node.axis] - p[node.axis];
        let (near, far) = if diff < 0.0 {
            (node.left, node.right)
        } else {
            (node.right, node.left)
        };
        self.nearest_rec(near, q, best);
        if diff * diff <= best.1 {
            self.nearest_rec(far, q, best);
        }
    }

    /// The `k` closest points sorted by `(squared distance, index)`.
    pub fn knn(&self, q: &Point3, k: usize) -> Vec<(usize, f64)> {
        if k == 0 {
            return Vec::new();
        }
        let mut heap: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        self.knn_rec(self.root, q, k, &mut heap);
        heap.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        heap.into_iter().map(|(d, i)| (i, d)).collect()
    }

    fn worst(heap: &[(f64, usize)]) -> Option<usize> {
        (0..heap.len()).max_by(|&a, &b| {
            heap[a].0.total_cmp(&heap[b].0).then(heap[a].1.cmp(&heap[b].1))
        })
    }

    fn knn_rec(&self, node: Option<usize>, q: &Point3, k: usize, heap: &mut Vec<(f64, usize)>) {
        let Some(n) = node else { return };
        let node = &self.nodes[n];
        let p = &self.points[node.index];
        let d = (p - q).norm_squared();
        if heap.len() < k {
            heap.push((d, node.index));
        } else if let Some(w) = Self::worst(heap) {
            if d < heap[w].0 || (d == heap[w].0 && node.index < heap[w].1) {
                heap[w] = (d, node.index);
            }
        }
        let diff = q[node.axis] - p[node.axis];
        let (near, far) = if diff < 0.0 {
            (node.left, node.right)
        } else {
            (node.right, node.left)
        };
        self.knn_rec(near, q, k, heap);
        let bound = if heap.len() < k {
            f64::INFINITY
        } else {
            Self::worst(heap).map_or(f64::INFINITY, |w| heap[w].0)
        };
        if diff * diff <= bound {
            self.knn_rec(far, q, k, heap);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random_points(n: usize, seed: u64) -> Vec<Point3> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Point3::new(rng.random(), rng.random(), rng.random()))
            .collect()
    }

    #[test]
    fn matches_brute_force() {
        let pts = random_points(300, 3);
        let tree = KdTree::new(&pts);
        for q in random_points(50, 4) {
            let mut all: Vec<(usize, f64)> = pts
                .iter()
                .enumerate()
                .map(|(i, p)| (i, (p - q).norm_squared()))
                .collect();
            all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            assert_eq!(tree.nearest(&q).unwrap(), all[0]);
            assert_eq!(tree.knn(&q, 7), all[..7].to_vec());
        }
    }

    #[test]
    fn identical_points_tie_break_by_index() {
        let pts = vec![Point3::new(1.0, 1.0, 1.0); 40];
        let tree = KdTree::new(&pts);
        let got = tree.knn(&Point3::new(1.0, 1.0, 1.0), 5);
        assert_eq!(got.iter().map(|x| x.0).collect::<Vec<_>>(), vec![0, 1, 2, 3, 4]);
        assert_eq!(tree.nearest(&Point3::origin()).unwrap().0, 0);
    }
}
