//! Marching cubes with a case table derived at startup by tracing the
//! isocontour around the cube faces.
//!
//! On every face the sign pattern fixes the contour segments; a face whose
//! inside corners sit on a diagonal gets one segment per inside corner, so
//! inside corners are never joined across the face. Both cells sharing a face
//! see the same segments, which is what makes the output closed. The segments
//! of a cell chain into loops that are fan-triangulated from an apex chosen so
//! no diagonal lies on a cube face; when no such apex exists an extra vertex at
//! the loop centroid is used instead.

use std::collections::HashMap;
use std::sync::OnceLock;

use super::{SdfGrid, TriangleMesh};
use crate::geometry::{Point3, Vector3};

/// Corner `c` sits at `(c & 1, (c >> 1) & 1, (c >> 2) & 1)`.
fn corner(c: usize) -> Vector3 {
    Vector3::new((c & 1) as f64, ((c >> 1) & 1) as f64, ((c >> 2) & 1) as f64)
}

/// Edges as `(lower corner, axis)`.
const EDGES: [(usize, usize); 12] = [
    (0, 0), (2, 0), (4, 0), (6, 0),
    (0, 1), (1, 1), (4, 1), (5, 1),
    (0, 2), (1, 2), (2, 2), (3, 2),
];

fn edge_corners(e: usize) -> (usize, usize) {
    let (c, a) = EDGES[e];
    (c, c | (1 << a))
}

fn edge_between(c0: usize, c1: usize) -> usize {
    let lo = c0.min(c1);
    let axis = (c0 ^ c1).trailing_zeros() as usize;
    EDGES.iter().position(|&e| e == (lo, axis)).expect("corners are adjacent")
}

/// The two faces `(axis, side)` containing an edge, as face ids `2 * axis + side`.
fn edge_faces(e: usize) -> [usize; 2] {
    let (c, a) = EDGES[e];
    let mut out = [0; 2];
    let mut n = 0;
    for b in 0..3 {
        if b != a {
            out[n] = 2 * b + ((c >> b) & 1);
            n += 1;
        }
    }
    out
}

fn share_face(e0: usize, e1: usize) -> bool {
    let f0 = edge_faces(e0);
    edge_faces(e1).iter().any(|f| f0.contains(f))
}

/// Face corners in cyclic order.
fn face_corners(face: usize) -> [usize; 4] {
    let a = face / 2;
    let side = face % 2;
    let b = (a + 1) % 3;
    let c = (a + 2) % 3;
    let base = side << a;
    [base, base | (1 << b), base | (1 << b) | (1 << c), base | (1 << c)]
}

fn face_normal(face: usize) -> Vector3 {
    let mut n = Vector3::zeros();
    n[face / 2] = if face % 2 == 1 { 1.0 } else { -1.0 };
    n
}

/// Triangle corner: an edge vertex (`0..12`) or the centroid of loop `k` (`12 + k`).
type Slot = u8;

#[derive(Debug, Clone, Default)]
struct Case {
    triangles: Vec<[Slot; 3]>,
    centroid_loops: Vec<Vec<u8>>,
}

fn table() -> &'static [Case; 256] {
    static TABLE: OnceLock<Box<[Case; 256]>> = OnceLock::new();
    TABLE.get_or_init(|| Box::new(std::array::from_fn(build_case)))
}

/// Directed contour segments (edge → edge) for one sign pattern, oriented so the
/// inside region is on the right when the face is viewed from outside the cube.
fn segments(mask: usize) -> Vec<(usize, usize)> {
    let inside = |c: usize| mask >> c & 1 == 1;
    let mid = |e: usize| {
        let (a, b) = edge_corners(e);
        (corner(a) + corner(b)) * 0.5
    };
    let mut out = Vec::new();
    for face in 0..6 {
        let q = face_corners(face);
        let n = face_normal(face);
        let crossing: Vec<usize> = (0..4).filter(|&k| inside(q[k]) != inside(q[(k + 1) % 4])).collect();
        let mut push = |a: usize, b: usize, c_in: usize| {
            let (pa, pb) = (mid(a), mid(b));
            if (pb - pa).cross(&(corner(c_in) - pa)).dot(&n) < 0.0 {
                out.push((a, b));
            } else {
                out.push((b, a));
            }
        };
        match crossing.len() {
            0 => {}
            2 => {
                let ea = edge_between(q[crossing[0]], q[(crossing[0] + 1) % 4]);
                let eb = edge_between(q[crossing[1]], q[(crossing[1] + 1) % 4]);
                let c_in = *q.iter().find(|&&c| inside(c)).expect("face has an inside corner");
                push(ea, eb, c_in);
            }
            4 => {
                for k in 0..4 {
                    if inside(q[k]) {
                        let before = edge_between(q[(k + 3) % 4], q[k]);
                        let after = edge_between(q[k], q[(k + 1) % 4]);
                        push(before, after, q[k]);
                    }
                }
            }
            _ => unreachable!("a closed face cycle crosses an even number of times"),
        }
    }
    out
}

fn loops(mask: usize) -> Vec<Vec<usize>> {
    let mut next = [usize::MAX; 12];
    for (a, b) in segments(mask) {
        debug_assert_eq!(next[a], usize::MAX);
        next[a] = b;
    }
    let mut seen = [false; 12];
    let mut out = Vec::new();
    for start in 0..12 {
        if next[start] == usize::MAX || seen[start] {
            continue;
        }
        let mut lp = Vec::new();
        let mut e = start;
        while !seen[e] {
            seen[e] = true;
            lp.push(e);
            e = next[e];
        }
        debug_assert_eq!(e, start);
        out.push(lp);
    }
    out
}

fn build_case(mask: usize) -> Case {
    let mut case = Case::default();
    for lp in loops(mask) {
        let m = lp.len();
        let apex = (0..m).find(|&k| {
            (0..m)
                .filter(|&j| j != k && j != (k + 1) % m && j != (k + m - 1) % m)
                .all(|j| !share_face(lp[k], lp[j]))
        });
        match apex {
            Some(k) => {
                for i in 1..m - 1 {
                    case.triangles.push([
                        lp[k] as Slot,
                        lp[(k + i) % m] as Slot,
                        lp[(k + i + 1) % m] as Slot,
                    ]);
                }
            }
            None => {
                let c = (12 + case.centroid_loops.len()) as Slot;
                for i in 0..m {
                    case.triangles.push([c, lp[i] as Slot, lp[(i + 1) % m] as Slot]);
                }
                case.centroid_loops.push(lp.iter().map(|&e| e as u8).collect());
            }
        }
    }
    case
}

/// Extracts the `iso` level set. Nodes with value `< iso` are inside; triangles
/// wind counter-clockwise seen from the outside. Vertices on grid edges are
/// shared between neighbouring cells.
pub fn marching_cubes(grid: &SdfGrid, iso: f64) -> TriangleMesh {
    let table = table();
    let [nx, ny, nz] = grid.resolution.map(|r| r as usize);
    let mut mesh = TriangleMesh::default();
    let mut edge_vertex: HashMap<usize, u32> = HashMap::new();
    let node_id = |i: usize, j: usize, k: usize| (k * ny + j) * nx + i;

    for k in 0..nz - 1 {
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let vals: [f64; 8] =
                    std::array::from_fn(|c| grid.value(i + (c & 1), j + (c >> 1 & 1), k + (c >> 2 & 1)));
                let mask = (0..8).fold(0, |m, c| m | (((vals[c] < iso) as usize) << c));
                let case = &table[mask];
                if case.triangles.is_empty() {
                    continue;
                }
                let mut slots = [u32::MAX; 12];
                let mut vertex = |e: usize, mesh: &mut TriangleMesh| -> u32 {
                    if slots[e] != u32::MAX {
                        return slots[e];
                    }
                    let (c0, c1) = edge_corners(e);
                    let (ci, cj, ck) = (i + (c0 & 1), j + (c0 >> 1 & 1), k + (c0 >> 2 & 1));
                    let key = node_id(ci, cj, ck) * 3 + EDGES[e].1;
                    let id = *edge_vertex.entry(key).or_insert_with(|| {
                        let t = (iso - vals[c0]) / (vals[c1] - vals[c0]);
                        let p0 = grid.node(ci, cj, ck);
                        let d = c0 ^ c1;
                        let p1 = grid.node(ci + (d & 1), cj + (d >> 1 & 1), ck + (d >> 2 & 1));
                        mesh.vertices.push(p0 + (p1 - p0) * t);
                        (mesh.vertices.len() - 1) as u32
                    });
                    slots[e] = id;
                    id
                };
                let mut centroid_ids = Vec::with_capacity(case.centroid_loops.len());
                for lp in &case.centroid_loops {
                    let ids: Vec<u32> = lp.iter().map(|&e| vertex(e as usize, &mut mesh)).collect();
                    let sum = ids
                        .iter()
                        .fold(Vector3::zeros(), |s, &v| s + mesh.vertices[v as usize].coords);
                    mesh.vertices.push(Point3::from(sum / ids.len() as f64));
                    centroid_ids.push((mesh.vertices.len() - 1) as u32);
                }
                for tri in &case.triangles {
                    let t = tri.map(|s| {
                        if s < 12 {
                            vertex(s as usize, &mut mesh)
                        } else {
                            centroid_ids[s as usize - 12]
                        }
                    });
                    mesh.triangles.push(t);
                }
            }
        }
    }
    mesh
}
