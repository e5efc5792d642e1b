//! Multi-sweep implicit vehicle reconstruction.
//!
//! A DeepSDF-style auto-decoder is trained on watertight shapes, a virtual
//! LiDAR produces partial sweeps, per-sweep latent codes are recovered by MAP
//! optimization and a set network fuses sweeps and codes into one latent code
//! that is decoded and meshed with marching cubes.

pub mod aggregator;
pub mod error;
pub mod geometry;
pub mod lidar;
pub mod metrics;
pub mod mesh;
pub mod nn;
pub mod pipeline;
pub mod sdf_model;

pub use error::{Error, Result};
