use std::collections::{HashMap, HashSet};

use super::TriangleMesh;

/// Every undirected edge is used by exactly two triangles that traverse it in
/// opposite directions. An empty mesh encloses nothing and is not watertight.
pub fn is_watertight(mesh: &TriangleMesh) -> bool {
    if mesh.triangles.is_empty() || !mesh.is_valid() {
        return false;
    }
    let mut directed: HashMap<(u32, u32), u32> = HashMap::with_capacity(mesh.triangles.len() * 3);
    for &[a, b, c] in &mesh.triangles {
        if a == b || b == c || a == c {
            return false;
        }
        for e in [(a, b), (b, c), (c, a)] {
            *directed.entry(e).or_insert(0) += 1;
        }
    }
    directed
        .iter()
        .all(|(&(a, b), &n)| n == 1 && directed.get(&(b, a)) == Some(&1))
}

/// V − E + F over the vertices referenced by triangles.
pub fn euler_characteristic(mesh: &TriangleMesh) -> i64 {
    let mut verts = HashSet::new();
    let mut edges = HashSet::new();
    for &[a, b, c] in &mesh.triangles {
        verts.extend([a, b, c]);
        for (u, v) in [(a, b), (b, c), (c, a)] {
            edges.insert((u.min(v), u.max(v)));
        }
    }
    verts.len() as i64 - edges.len() as i64 + mesh.triangles.len() as i64
}
