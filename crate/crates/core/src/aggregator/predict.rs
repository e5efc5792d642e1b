use sha2::{Digest, Sha256};

use super::Aggregator;
use crate::error::{Error, Result};
use crate::geometry::{fps, PointCloud};
use crate::lidar::SweepInstance;
use crate::mesh::TriangleMesh;
use crate::nn::Scalar;
use crate::sdf_model::{infer_latent, reconstruct, Decoder, InferConfig, LatentCode};

/// At most `points` points of a sweep, chosen by farthest point sampling from
/// the first point. The sensor origin is kept.
pub fn downsample(sweep: &PointCloud, points: usize) -> Result<PointCloud> {
    if sweep.is_empty() {
        return Err(Error::EmptySweep);
    }
    if sweep.len() <= points {
        return Ok(sweep.clone());
    }
    fps(sweep, points, 0)
}

/// Seed derived from the sweep contents, so a sweep gets the same latent code
/// wherever it appears in an instance.
pub fn sweep_seed(seed: u64, sweep: &PointCloud) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for p in &sweep.points {
        for c in p.iter() {
            h.update(c.to_bits().to_le_bytes());
        }
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// Per-sweep codes fitted on the downsampled sweeps.
pub fn infer_sweep_latents<T: Scalar>(
    decoder: &Decoder<T>,
    sweeps: &[PointCloud],
    points: usize,
    cfg: &InferConfig,
    seed: u64,
) -> Result<Vec<LatentCode>> {
    sweeps
        .iter()
        .map(|s| infer_latent(decoder, &downsample(s, points)?, cfg, sweep_seed(seed, s)))
        .collect()
}

#[derive(Debug, Clone)]
pub struct Prediction {
    pub latent: LatentCode,
    pub sweep_latents: Vec<LatentCode>,
    pub mesh: TriangleMesh,
}

/// Aggregated reconstruction of one instance. Per-sweep codes are inferred
/// when `latents` is `None`.
pub fn predict<T: Scalar, U: Scalar>(
    instance: &SweepInstance,
    decoder: &Decoder<T>,
    aggregator: &Aggregator<U>,
    latents: Option<&[LatentCode]>,
    infer: &InferConfig,
    resolution: u32,
    seed: u64,
) -> Result<Prediction> {
    let config = aggregator.config();
    if decoder.config().latent_dim != config.latent_dim {
        return Err(Error::Checkpoint(format!(
            "decoder latent width {} does not match aggregator width {}",
            decoder.config().latent_dim,
            config.latent_dim
        )));
    }
    let sweep_latents = match latents {
        Some(l) => l.to_vec(),
        None => infer_sweep_latents(decoder, &instance.sweeps, config.encoder.points, infer, seed)?,
    };
    let latent = aggregator.predict_latent(&instance.sweeps, &sweep_latents)?;
    let mesh = reconstruct(decoder, &latent, resolution)?;
    Ok(Prediction {
        latent,
        sweep_latents,
        mesh,
    })
}
