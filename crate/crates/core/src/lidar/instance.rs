use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{sample_pose, Lidar, LidarConfig, SensorPose, Side};
use crate::error::{Error, Result};
use crate::geometry::{io as cloud_io, PointCloud};
use crate::mesh::{io as mesh_io, TriangleMesh};
use crate::sdf_model::LatentCode;

pub const MAX_POSE_ATTEMPTS: usize = 20;

/// B sweeps of one vehicle, all in its canonical frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepInstance {
    pub shape_id: String,
    pub side: Side,
    pub ground_z: f64,
    pub poses: Vec<SensorPose>,
    pub sweeps: Vec<PointCloud>,
    pub config: LidarConfig,
    pub seed: u64,
    pub gt_mesh: Option<TriangleMesh>,
    pub gt_latent: Option<LatentCode>,
}

#[derive(Serialize, Deserialize)]
struct Meta {
    shape_id: String,
    side: Side,
    b: usize,
    ground_z: f64,
    poses: Vec<SensorPose>,
    config: LidarConfig,
    seed: u64,
}

impl SweepInstance {
    pub fn b(&self) -> usize {
        self.sweeps.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.sweeps.is_empty() || self.sweeps.len() != self.poses.len() {
            return Err(Error::shape(format!(
                "instance {} has {} sweeps and {} poses",
                self.shape_id,
                self.sweeps.len(),
                self.poses.len()
            )));
        }
        for (s, p) in self.sweeps.iter().zip(&self.poses) {
            if !self.side.contains(p.theta) || !p.is_valid() {
                return Err(Error::Degenerate(format!("pose {p:?} violates the constraints")));
            }
            let o = s.sensor_origin.ok_or(Error::MissingSensorOrigin)?;
            if (o - p.position(self.ground_z)).norm() > 1e-5 {
                return Err(Error::Degenerate("sensor origin does not match its pose".into()));
            }
            if s.is_empty() {
                return Err(Error::EmptySweep);
            }
        }
        Ok(())
    }

    /// The first `b` sweeps (instances are generated so that these are the
    /// sweeps a smaller `B` would have produced).
    pub fn prefix(&self, b: usize) -> Result<Self> {
        if b == 0 || b > self.b() {
            return Err(Error::Config(format!("cannot take {b} of {} sweeps", self.b())));
        }
        Ok(Self {
            poses: self.poses[..b].to_vec(),
            sweeps: self.sweeps[..b].to_vec(),
            ..self.clone()
        })
    }

    /// Sweeps (and poses) reordered by `order`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.b()];
        for &i in order {
            if i >= self.b() || std::mem::replace(&mut seen[i], true) {
                return Err(Error::Config("not a permutation".into()));
            }
        }
        if order.len() != self.b() {
            return Err(Error::Config("not a permutation".into()));
        }
        Ok(Self {
            poses: order.iter().map(|&i| self.poses[i]).collect(),
            sweeps: order.iter().map(|&i| self.sweeps[i].clone()).collect(),
            ..self.clone()
        })
    }

    /// `meta.json`, `sweep_<i>.ply`, and optionally `gt.obj` / `gt_latent.bin`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let meta = Meta {
            shape_id: self.shape_id.clone(),
            side: self.side,
            b: self.b(),
            ground_z: self.ground_z,
            poses: self.poses.clone(),
            config: self.config.clone(),
            seed: self.seed,
        };
        fs::write(dir.join("meta.json"), serde_json::to_vec_pretty(&meta)?)?;
        for (i, s) in self.sweeps.iter().enumerate() {
            cloud_io::save_cloud(s, &dir.join(format!("sweep_{i}.ply")))?;
        }
        if let Some(m) = &self.gt_mesh {
            mesh_io::save_mesh(m, &dir.join("gt.obj"))?;
        }
        if let Some(z) = &self.gt_latent {
            z.save(&dir.join("gt_latent.bin"))?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let meta: Meta = serde_json::from_slice(&fs::read(dir.join("meta.json"))?)?;
        let sweeps = (0..meta.b)
            .map(|i| cloud_io::load_cloud(&dir.join(format!("sweep_{i}.ply"))))
            .collect::<Result<Vec<_>>>()?;
        let gt = dir.join("gt.obj");
        let zl = dir.join("gt_latent.bin");
        let inst = Self {
            shape_id: meta.shape_id,
            side: meta.side,
            ground_z: meta.ground_z,
            poses: meta.poses,
            sweeps,
            config: meta.config,
            seed: meta.seed,
            gt_mesh: gt.exists().then(|| mesh_io::load_mesh(&gt)).transpose()?,
            gt_latent: zl.exists().then(|| LatentCode::load(&zl)).transpose()?,
        };
        inst.validate()?;
        Ok(inst)
    }
}

/// Picks a side, then samples poses until `b` non-empty sweeps exist, trying
/// at most [`MAX_POSE_ATTEMPTS`] poses per sweep. Sweeps are drawn in
/// sequence from one stream, so the instance for a smaller `b` is a prefix of
/// the one for a larger `b`.
pub fn generate_instance(
    shape_id: &str,
    mesh: &TriangleMesh,
    b: usize,
    config: &LidarConfig,
    seed: u64,
) -> Result<SweepInstance> {
    if b == 0 {
        return Err(Error::Config("B must be at least 1".into()));
    }
    config.validate()?;
    let lidar = Lidar::new(mesh)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = if rng.random_bool(0.5) { Side::Positive } else { Side::Negative };
    let mut poses = Vec::with_capacity(b);
    let mut sweeps = Vec::with_capacity(b);
    for i in 0..b {
        let mut attempt = 0;
        loop {
            if attempt == MAX_POSE_ATTEMPTS {
                return Err(Error::RetriesExhausted {
                    attempts: attempt,
                    what: format!("sweep {i} of {shape_id} stayed empty"),
                });
            }
            let pose = sample_pose(&mut rng, side);
            let noise_seed = seed ^ ((i as u64) << 32 | attempt as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
            match lidar.scan(&pose, config, noise_seed) {
                Ok(cloud) => {
                    poses.push(pose);
                    sweeps.push(cloud);
                    break;
                }
                Err(Error::EmptySweep) => attempt += 1,
                Err(e) => return Err(e),
            }
        }
    }
    Ok(SweepInstance {
        shape_id: shape_id.to_string(),
        side,
        ground_z: lidar.ground_z(),
        poses,
        sweeps,
        config: config.clone(),
        seed,
        gt_mesh: Some(mesh.clone()),
        gt_latent: None,
    })
}
