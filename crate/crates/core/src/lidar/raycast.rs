use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{LidarConfig, SensorPose};
use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud, Vector3};
use crate::mesh::{Bvh, TriangleMesh};

/// A mesh prepared for repeated scans.
#[derive(Debug, Clone)]
pub struct Lidar {
    bvh: Bvh,
    center: Point3,
    radius: f64,
    ground_z: f64,
}

impl Lidar {
    pub fn new(mesh: &TriangleMesh) -> Result<Self> {
        let (lo, hi) = mesh.bounds().ok_or(Error::EmptyInput)?;
        if mesh.is_empty() {
            return Err(Error::EmptyInput);
        }
        let center = nalgebra::center(&lo, &hi);
        let radius = mesh
            .vertices
            .iter()
            .map(|v| (v - center).norm())
            .fold(0.0, f64::max);
        Ok(Self {
            bvh: Bvh::new(mesh),
            center,
            radius,
            ground_z: lo.z,
        })
    }

    /// The vehicle rests on the plane `z = ground_z` (its lowest point).
    pub fn ground_z(&self) -> f64 {
        self.ground_z
    }

    pub fn bvh(&self) -> &Bvh {
        &self.bvh
    }

    pub fn sensor_position(&self, pose: &SensorPose) -> Point3 {
        pose.position(self.ground_z)
    }

    /// Ray directions in scan order (channel-major, then azimuth).
    pub fn ray_directions(&self, pose: &SensorPose, config: &LidarConfig) -> Vec<Vector3> {
        let o = self.sensor_position(pose);
        let to_origin = -o.coords;
        let yaw = to_origin.y.atan2(to_origin.x).to_degrees() + config.boresight_yaw_offset_deg;
        let az = config.azimuth_offsets();
        let mut dirs = Vec::with_capacity(az.len() * config.channels);
        for e in config.elevations() {
            let (se, ce) = e.to_radians().sin_cos();
            for a in &az {
                let (sa, ca) = (yaw + a).to_radians().sin_cos();
                dirs.push(Vector3::new(ce * ca, ce * sa, se));
            }
        }
        dirs
    }

    /// First hits of every ray; `seed` only matters when range noise is on.
    pub fn scan(&self, pose: &SensorPose, config: &LidarConfig, seed: u64) -> Result<PointCloud> {
        config.validate()?;
        let o = self.sensor_position(pose);
        let to_c = self.center - o;
        let dist = to_c.norm();
        // Rays outside the cone around the bounding sphere cannot hit.
        let cos_cone = if dist > self.radius {
            (1.0 - (self.radius / dist).powi(2)).sqrt() - 1e-9
        } else {
            -1.0
        };
        let axis = to_c / dist.max(1e-300);
        let noise = if config.range_noise_std > 0.0 {
            Some(Normal::new(0.0, config.range_noise_std).map_err(|e| Error::Config(e.to_string()))?)
        } else {
            None
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut points = Vec::new();
        for d in self.ray_directions(pose, config) {
            if d.dot(&axis) < cos_cone {
                continue;
            }
            if let Some(hit) = self.bvh.first_hit(&o, &d, 1e-9, config.max_range) {
                let t = match &noise {
                    Some(n) => hit.t + n.sample(&mut rng),
                    None => hit.t,
                };
                points.push(o + d * t);
            }
        }
        if points.is_empty() {
            return Err(Error::EmptySweep);
        }
        Ok(PointCloud::with_origin(points, o))
    }
}

/// One sweep of `mesh` from `pose` without range noise.
pub fn raycast_sweep(mesh: &TriangleMesh, pose: &SensorPose, config: &LidarConfig) -> Result<PointCloud> {
    Lidar::new(mesh)?.scan(pose, config, 0)
}
