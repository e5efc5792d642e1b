use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point3;
use crate::mesh::{sample_surface_with_faces, MeshSdf, TriangleMesh, DEFAULT_EXTENT};

/// Query points with signed-distance targets for one shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdfSampleSet {
    pub shape_id: String,
    pub points: Vec<Point3>,
    pub sdf: Vec<f64>,
    /// Leading samples derived from surface points; the rest are free-space.
    pub n_surface: usize,
    pub n_uniform: usize,
}

impl SdfSampleSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.len() != self.sdf.len() || self.n_surface + self.n_uniform != self.points.len() {
            return Err(Error::shape(format!("inconsistent sample set {}", self.shape_id)));
        }
        if self.is_empty() {
            return Err(Error::EmptyInput);
        }
        if self.sdf.iter().any(|s| !s.is_finite()) {
            return Err(Error::Degenerate(format!("non-finite sdf in {}", self.shape_id)));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        Ok(fs::write(path, serde_json::to_vec(self)?)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s: Self = serde_json::from_slice(&fs::read(path)?)?;
        s.validate()?;
        Ok(s)
    }
}

/// Samples `n_surface` surface points and moves each one by `±offset` along
/// its face normal for every offset (the bare surface points are used when
/// `offsets` is empty), then adds `n_uniform` points drawn uniformly from the
/// default grid extent. All targets come from the mesh distance oracle.
pub fn generate_sdf_samples(
    shape_id: &str,
    mesh: &TriangleMesh,
    n_surface: usize,
    n_uniform: usize,
    offsets: &[f64],
    seed: u64,
) -> Result<SdfSampleSet> {
    let oracle = MeshSdf::new(mesh)?;
    let mut points = Vec::new();
    if n_surface > 0 {
        let (surface, faces) = sample_surface_with_faces(mesh, n_surface, seed)?;
        for (p, &f) in surface.iter().zip(&faces) {
            let n = mesh.face_cross(f).normalize();
            if offsets.is_empty() {
                points.push(*p);
            }
            for &o in offsets {
                points.push(p + n * o);
                points.push(p - n * o);
            }
        }
    }
    let n_near = points.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5ee_d0ff_5ace);
    let e = DEFAULT_EXTENT;
    for _ in 0..n_uniform {
        points.push(Point3::new(
            rng.random_range(e[0]..e[3]),
            rng.random_range(e[1]..e[4]),
            rng.random_range(e[2]..e[5]),
        ));
    }
    let sdf = points.iter().map(|p| oracle.query(p)).collect();
    let set = SdfSampleSet {
        shape_id: shape_id.to_string(),
        points,
        sdf,
        n_surface: n_near,
        n_uniform,
    };
    set.validate()?;
    Ok(set)
}
