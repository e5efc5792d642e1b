//! Multi-sweep latent aggregation: a shared PointNet-style encoder turns each
//! sweep into a global feature, which is merged with that sweep's latent
//! code, pooled over the set and mapped to one predicted code.

mod model;
mod predict;
mod train;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sdf_model::LatentCode;

pub use model::{
    aggregate, build_element_reprs, encoder_input, shared_pcn_forward, Aggregator, ElementRepr,
};
pub use predict::{downsample, infer_sweep_latents, predict, sweep_seed, Prediction};
pub use train::{dataset_mse, train_stage_two, StageTwoConfig, StageTwoExample, StageTwoResult};

/// Widths of the shared per-point stages and the per-cloud point count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub widths: Vec<usize>,
    pub points: usize,
}

impl EncoderConfig {
    pub fn desk() -> Self {
        Self {
            widths: vec![32, 64, 128, 256],
            points: 256,
        }
    }

    pub fn full() -> Self {
        Self {
            widths: vec![128, 256, 512, 1024],
            points: 256,
        }
    }

    /// Width of the global feature.
    pub fn feature_dim(&self) -> usize {
        self.widths.last().copied().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.is_empty() || self.widths.contains(&0) {
            return Err(Error::Config("encoder needs at least one stage of positive width".into()));
        }
        if self.points == 0 {
            return Err(Error::Config("encoder point count must be positive".into()));
        }
        Ok(())
    }
}

/// How a sweep's global feature and latent code form its element vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MergeMode {
    /// `[feature, latent]`
    Concat,
    /// `feature ⊙ latent`; the feature width must equal the latent width.
    Multiply,
    /// The feature alone; latent codes are ignored.
    EncoderOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolMode {
    Avg,
    Max,
}

impl std::fmt::Display for MergeMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MergeMode::Concat => "concat",
            MergeMode::Multiply => "multiply",
            MergeMode::EncoderOnly => "encoder_only",
        })
    }
}

impl std::fmt::Display for PoolMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PoolMode::Avg => "avg",
            PoolMode::Max => "max",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatorConfig {
    pub encoder: EncoderConfig,
    pub merge: MergeMode,
    pub pool: PoolMode,
    pub latent_dim: usize,
}

impl AggregatorConfig {
    /// Concat merge with average pooling over the given encoder.
    pub fn new(encoder: EncoderConfig, latent_dim: usize) -> Self {
        Self {
            encoder,
            merge: MergeMode::Concat,
            pool: PoolMode::Avg,
            latent_dim,
        }
    }

    /// Same settings with another merge mode. Multiply mode narrows the last
    /// encoder stage to the latent width; the other stages are kept.
    pub fn with_merge(&self, merge: MergeMode) -> Self {
        let mut out = self.clone();
        out.merge = merge;
        if merge == MergeMode::Multiply {
            if let Some(last) = out.encoder.widths.last_mut() {
                *last = self.latent_dim;
            }
        }
        out
    }

    pub fn with_pool(&self, pool: PoolMode) -> Self {
        Self {
            pool,
            ..self.clone()
        }
    }

    pub fn with_points(&self, points: usize) -> Self {
        let mut out = self.clone();
        out.encoder.points = points;
        out
    }

    /// Length of one element vector.
    pub fn repr_dim(&self) -> usize {
        let f = self.encoder.feature_dim();
        match self.merge {
            MergeMode::Concat => f + self.latent_dim,
            MergeMode::Multiply | MergeMode::EncoderOnly => f,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        if self.latent_dim == 0 {
            return Err(Error::Config("latent dimension must be positive".into()));
        }
        if self.merge == MergeMode::Multiply && self.encoder.feature_dim() != self.latent_dim {
            return Err(Error::Config(format!(
                "multiply merge needs feature width {} to equal latent width {}",
                self.encoder.feature_dim(),
                self.latent_dim
            )));
        }
        Ok(())
    }
}

/// Element-wise mean of the codes.
pub fn mean_latent_baseline(latents: &[LatentCode]) -> Result<LatentCode> {
    let first = latents.first().ok_or(Error::EmptyInput)?;
    if latents.iter().any(|z| z.len() != first.len()) {
        return Err(Error::shape("latent codes differ in length"));
    }
    let n = latents.len() as f64;
    Ok(LatentCode(
        (0..first.len())
            .map(|i| latents.iter().map(|z| z.0[i]).sum::<f64>() / n)
            .collect(),
    ))
}
