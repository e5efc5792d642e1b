use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::decoder::points_to_array;
use super::train::init_latent;
use super::{Decoder, LatentCode};
use crate::error::{Error, Result};
use crate::geometry::{estimate_normals, Point3, PointCloud, Vector3, DEFAULT_NORMAL_K};
use crate::mesh::{marching_cubes, SdfGrid, TriangleMesh, DEFAULT_EXTENT};
use crate::nn::{AdamConfig, AdamState, Graph, ParameterSet, Scalar};

/// Settings for fitting a latent code to an observation with the decoder frozen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InferConfig {
    pub iters: usize,
    pub lr: f64,
    /// Halve the learning rate every this many iterations (0 disables).
    pub lr_halve_every: usize,
    /// Each observed point also yields queries at `±offset` along its normal.
    pub offsets: Vec<f64>,
    pub init_std: f64,
    pub normal_k: usize,
}

impl Default for InferConfig {
    fn default() -> Self {
        Self {
            iters: 400,
            lr: 5e-3,
            lr_halve_every: 100,
            offsets: vec![0.025, 0.05],
            init_std: 0.01,
            normal_k: DEFAULT_NORMAL_K,
        }
    }
}

/// Fits a code to one sweep: normals are estimated and oriented toward the
/// sensor, then the surface points (target 0) and their normal displacements
/// (target ±offset) supervise the code.
pub fn infer_latent<T: Scalar>(decoder: &Decoder<T>, sweep: &PointCloud, cfg: &InferConfig, seed: u64) -> Result<LatentCode> {
    if sweep.is_empty() {
        return Err(Error::EmptySweep);
    }
    if sweep.sensor_origin.is_none() {
        return Err(Error::MissingSensorOrigin);
    }
    if sweep.len() < 3 {
        return Err(Error::TooFewPoints { needed: 2, got: sweep.len() });
    }
    let k = cfg.normal_k.min(sweep.len() - 1);
    let normals = estimate_normals(sweep, k)?;
    infer_latent_oriented(decoder, &sweep.points, &normals.0, cfg, seed)
}

/// [`infer_latent`] with normals supplied by the caller (outward-facing).
pub fn infer_latent_oriented<T: Scalar>(
    decoder: &Decoder<T>,
    points: &[Point3],
    normals: &[Vector3],
    cfg: &InferConfig,
    seed: u64,
) -> Result<LatentCode> {
    if points.is_empty() {
        return Err(Error::EmptySweep);
    }
    if points.len() != normals.len() {
        return Err(Error::shape("one normal per point required"));
    }
    let mut queries = Vec::with_capacity(points.len() * (1 + 2 * cfg.offsets.len()));
    let mut targets = Vec::with_capacity(queries.capacity());
    for (p, n) in points.iter().zip(normals) {
        queries.push(*p);
        targets.push(0.0);
        for &o in &cfg.offsets {
            queries.push(p + n * o);
            targets.push(o);
            queries.push(p - n * o);
            targets.push(-o);
        }
    }
    infer_latent_from_samples(decoder, &queries, &targets, cfg, seed)
}

/// Minimizes `mean clamped L1 + latent_reg · ‖z‖²` over `z` only.
pub fn infer_latent_from_samples<T: Scalar>(
    decoder: &Decoder<T>,
    queries: &[Point3],
    targets: &[f64],
    cfg: &InferConfig,
    seed: u64,
) -> Result<LatentCode> {
    if queries.is_empty() {
        return Err(Error::EmptyInput);
    }
    if queries.len() != targets.len() {
        return Err(Error::shape("one target per query required"));
    }
    let dc = decoder.config();
    let x = points_to_array::<T>(queries);
    let t = Array2::from_shape_fn((targets.len(), 1), |(r, _)| T::of(targets[r]));
    let mut zset = ParameterSet::<T>::new();
    let id = zset.add("z", LatentCode(init_latent(dc.latent_dim, cfg.init_std, seed)?).to_row());
    let mut adam = AdamState::new(&zset, AdamConfig::with_lr(cfg.lr));
    let delta = T::of(dc.delta);
    let reg = T::of(dc.latent_reg);
    for it in 0..cfg.iters {
        adam.config.lr = match cfg.lr_halve_every {
            0 => cfg.lr,
            k => cfg.lr * 0.5f64.powi((it / k) as i32),
        };
        let mut g = Graph::frozen();
        let z = g.variable(zset.value(id).clone());
        let xv = g.constant(x.clone());
        let pred = decoder.forward(&mut g, z, xv)?;
        let l1 = g.clamped_l1_mean(pred, t.clone(), delta)?;
        let zn = g.squared_norm(z);
        let r = g.scale(zn, reg);
        let loss = g.add(l1, r)?;
        let grads = g.backward(loss)?;
        *zset.grad_mut(id) = grads.get_or_zeros(&g, z);
        adam.step(&mut zset);
    }
    let code = LatentCode::from_row(zset.value(id));
    if !code.is_finite() {
        return Err(Error::Degenerate("latent inference diverged".into()));
    }
    Ok(code)
}

/// Samples the decoder on a lattice over the default extent.
pub fn sdf_grid<T: Scalar>(decoder: &Decoder<T>, z: &LatentCode, resolution: u32) -> Result<SdfGrid> {
    if resolution < 2 {
        return Err(Error::shape("grid resolution must be at least 2"));
    }
    if z.len() != decoder.config().latent_dim {
        return Err(Error::shape("latent length does not match decoder"));
    }
    let nodes = SdfGrid::nodes_for(resolution, DEFAULT_EXTENT);
    let mut values = decoder.eval_points(z, &nodes)?;
    // Saturate non-finite outputs of far out-of-distribution codes so the
    // grid stays valid.
    for v in &mut values {
        if !v.is_finite() {
            *v = if v.is_nan() { 1.0 } else { v.signum() * f64::MAX };
        }
    }
    let mut grid = SdfGrid::new([resolution; 3], DEFAULT_EXTENT, values)?;
    close_boundary(&mut grid);
    Ok(grid)
}

/// Marks every node on the lattice boundary as outside, so the extracted
/// level set is closed even when a shape reaches the sampled extent.
fn close_boundary(grid: &mut SdfGrid) {
    let [nx, ny, nz] = grid.resolution.map(|r| r as usize);
    let outside = grid.cell_width();
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                if i == 0 || j == 0 || k == 0 || i == nx - 1 || j == ny - 1 || k == nz - 1 {
                    let idx = grid.index(i, j, k);
                    grid.values[idx] = grid.values[idx].max(outside);
                }
            }
        }
    }
}

/// Zero level set of `f(z, ·)`.
pub fn reconstruct<T: Scalar>(decoder: &Decoder<T>, z: &LatentCode, resolution: u32) -> Result<TriangleMesh> {
    Ok(marching_cubes(&sdf_grid(decoder, z, resolution)?, 0.0))
}
