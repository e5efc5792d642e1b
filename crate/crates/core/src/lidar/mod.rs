//! Virtual LiDAR: constrained sensor poses, first-hit raycasting against a
//! mesh and multi-sweep instance generation.

mod instance;
mod raycast;

pub use instance::{generate_instance, SweepInstance, MAX_POSE_ATTEMPTS};
pub use raycast::{raycast_sweep, Lidar};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point3;

pub const THETA_RANGE: (f64, f64) = (-180.0, 180.0);
pub const R_RANGE: (f64, f64) = (3.0, 15.0);
pub const H_RANGE: (f64, f64) = (0.8, 1.2);

/// Which azimuth half-plane the sensor stays in for one instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// θ ∈ [0°, 180°]
    Positive,
    /// θ ∈ [−180°, 0°]
    Negative,
}

impl Side {
    pub fn contains(self, theta: f64) -> bool {
        match self {
            Side::Positive => (0.0..=180.0).contains(&theta),
            Side::Negative => (-180.0..=0.0).contains(&theta),
        }
    }
}

/// Sensor placement relative to the vehicle. `theta` is in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorPose {
    pub theta: f64,
    pub r: f64,
    pub h: f64,
}

impl SensorPose {
    pub fn is_valid(&self) -> bool {
        (THETA_RANGE.0..=THETA_RANGE.1).contains(&self.theta)
            && (R_RANGE.0..=R_RANGE.1).contains(&self.r)
            && (H_RANGE.0..=H_RANGE.1).contains(&self.h)
    }

    /// `(r cos θ, r sin θ, ground_z + h)`.
    pub fn position(&self, ground_z: f64) -> Point3 {
        let t = self.theta.to_radians();
        Point3::new(self.r * t.cos(), self.r * t.sin(), ground_z + self.h)
    }
}

/// Uniform pose within the constraint box, restricted to one half-plane.
pub fn sample_pose<R: Rng + ?Sized>(rng: &mut R, side: Side) -> SensorPose {
    let theta = rng.random_range(0.0..=180.0);
    SensorPose {
        theta: match side {
            Side::Positive => theta,
            Side::Negative => -theta,
        },
        r: rng.random_range(R_RANGE.0..=R_RANGE.1),
        h: rng.random_range(H_RANGE.0..=H_RANGE.1),
    }
}

/// Scan pattern. Elevations are measured from the horizon; azimuth columns
/// are centred on the boresight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LidarConfig {
    pub channels: usize,
    pub elevation_min_deg: f64,
    pub elevation_max_deg: f64,
    pub azimuth_step_deg: f64,
    pub max_range: f64,
    pub horizontal_fov_deg: f64,
    /// Yaw of the scan centre relative to the direction toward the object.
    pub boresight_yaw_offset_deg: f64,
    /// Gaussian noise on hit ranges (0 disables).
    pub range_noise_std: f64,
}

impl Default for LidarConfig {
    fn default() -> Self {
        Self {
            channels: 64,
            elevation_min_deg: -25.0,
            elevation_max_deg: 15.0,
            azimuth_step_deg: 0.2,
            max_range: 30.0,
            horizontal_fov_deg: 360.0,
            boresight_yaw_offset_deg: 0.0,
            range_noise_std: 0.0,
        }
    }
}

impl LidarConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("lidar: {m}")));
        if self.channels == 0 {
            return bad("channels must be at least 1");
        }
        if !(self.elevation_min_deg < self.elevation_max_deg) {
            return bad("elevation min must be below max");
        }
        if !(self.azimuth_step_deg > 0.0) {
            return bad("azimuth step must be positive");
        }
        if !(self.max_range > 0.0) || !(self.horizontal_fov_deg > 0.0 && self.horizontal_fov_deg <= 360.0) {
            return bad("range and field of view must be positive");
        }
        if !(self.range_noise_std >= 0.0) {
            return bad("noise std must be non-negative");
        }
        Ok(())
    }

    pub fn elevations(&self) -> Vec<f64> {
        if self.channels == 1 {
            return vec![0.5 * (self.elevation_min_deg + self.elevation_max_deg)];
        }
        let step = (self.elevation_max_deg - self.elevation_min_deg) / (self.channels - 1) as f64;
        (0..self.channels)
            .map(|c| self.elevation_min_deg + c as f64 * step)
            .collect()
    }

    /// Azimuth offsets from the boresight, in degrees.
    pub fn azimuth_offsets(&self) -> Vec<f64> {
        let n = ((self.horizontal_fov_deg / self.azimuth_step_deg).round() as usize).max(1);
        (0..n)
            .map(|j| (j as f64 - (n - 1) as f64 / 2.0) * self.azimuth_step_deg)
            .collect()
    }
}
