use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::decoder::points_to_array;
use super::{Decoder, DecoderConfig, LatentCode, SdfSampleSet, ShapeCodebook};
use crate::error::{Error, Result};
use crate::nn::{AdamConfig, AdamState, Graph, ParameterSet, Scalar};

/// Optimizer settings for joint decoder/code training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageOneConfig {
    pub epochs: usize,
    pub lr: f64,
    pub latent_lr: f64,
    /// Samples per optimizer step; every step uses a single shape.
    pub batch_size: usize,
    /// Halve both learning rates every this many epochs (0 disables).
    pub lr_halve_every: usize,
    pub latent_init_std: f64,
    pub seed: u64,
}

impl Default for StageOneConfig {
    fn default() -> Self {
        Self {
            epochs: 300,
            lr: 1e-3,
            latent_lr: 1e-3,
            batch_size: 1024,
            lr_halve_every: 0,
            latent_init_std: 0.01,
            seed: 0,
        }
    }
}

#[derive(Debug)]
pub struct StageOneResult<T> {
    pub decoder: Decoder<T>,
    pub codebook: ShapeCodebook,
    /// Sample-weighted mean objective per epoch.
    pub epoch_losses: Vec<f64>,
}

pub(crate) fn init_latent(dim: usize, std: f64, seed: u64) -> Result<Vec<f64>> {
    let normal = Normal::new(0.0, std).map_err(|e| Error::Config(format!("latent init: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..dim).map(|_| normal.sample(&mut rng)).collect())
}

/// Jointly fits the decoder and one latent code per shape by minimizing the
/// mean clamped L1 error plus `latent_reg · ‖z‖²` with Adam.
pub fn train_stage_one<T: Scalar>(
    shapes: &[SdfSampleSet],
    config: &DecoderConfig,
    train: &StageOneConfig,
) -> Result<StageOneResult<T>> {
    if shapes.is_empty() {
        return Err(Error::EmptyInput);
    }
    for s in shapes {
        s.validate()?;
    }
    let mut ids: Vec<&str> = shapes.iter().map(|s| s.shape_id.as_str()).collect();
    ids.sort_unstable();
    if ids.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Config("duplicate shape ids".into()));
    }
    if train.batch_size == 0 {
        return Err(Error::Config("batch_size must be positive".into()));
    }

    let mut decoder = Decoder::<T>::new(config.clone(), train.seed)?;
    let mut dec_adam = AdamState::new(decoder.params(), AdamConfig::with_lr(train.lr));
    let mut codes = Vec::with_capacity(shapes.len());
    let mut code_adams = Vec::with_capacity(shapes.len());
    for j in 0..shapes.len() {
        let init = init_latent(config.latent_dim, train.latent_init_std, train.seed.wrapping_add(1 + j as u64))?;
        let mut set = ParameterSet::<T>::new();
        set.add("z", LatentCode(init).to_row());
        code_adams.push(AdamState::new(&set, AdamConfig::with_lr(train.latent_lr)));
        codes.push(set);
    }
    let z_id = codes[0].ids().next().expect("one tensor");

    let xs: Vec<Array2<T>> = shapes.iter().map(|s| points_to_array(&s.points)).collect();
    let delta = T::of(config.delta);
    let reg = T::of(config.latent_reg);
    let mut rng = ChaCha8Rng::seed_from_u64(train.seed ^ 0x7a11_5eed);
    let mut epoch_losses = Vec::with_capacity(train.epochs);

    for epoch in 0..train.epochs {
        let factor = match train.lr_halve_every {
            0 => 1.0,
            k => 0.5f64.powi((epoch / k) as i32),
        };
        dec_adam.config.lr = train.lr * factor;
        for a in &mut code_adams {
            a.config.lr = train.latent_lr * factor;
        }
        let mut order: Vec<usize> = (0..shapes.len()).collect();
        order.shuffle(&mut rng);
        let (mut total, mut count) = (0.0, 0usize);
        for j in order {
            let mut idx: Vec<usize> = (0..shapes[j].len()).collect();
            idx.shuffle(&mut rng);
            for chunk in idx.chunks(train.batch_size) {
                let x = Array2::from_shape_fn((chunk.len(), 3), |(r, c)| xs[j][[chunk[r], c]]);
                let target = Array2::from_shape_fn((chunk.len(), 1), |(r, _)| T::of(shapes[j].sdf[chunk[r]]));
                let mut g = Graph::new();
                let z = g.param(&codes[j], z_id);
                let xv = g.constant(x);
                let pred = decoder.forward(&mut g, z, xv)?;
                let l1 = g.clamped_l1_mean(pred, target, delta)?;
                let zn = g.squared_norm(z);
                let r = g.scale(zn, reg);
                let loss = g.add(l1, r)?;
                let grads = g.backward(loss)?;
                decoder.params_mut().zero_grad();
                codes[j].zero_grad();
                grads.accumulate(decoder.params_mut());
                grads.accumulate(&mut codes[j]);
                dec_adam.step(decoder.params_mut());
                code_adams[j].step(&mut codes[j]);
                total += g.scalar(loss).as_f64() * chunk.len() as f64;
                count += chunk.len();
            }
        }
        let mean = total / count as f64;
        if !mean.is_finite() {
            return Err(Error::Degenerate(format!("stage-one loss diverged at epoch {epoch}")));
        }
        log::debug!("stage one epoch {epoch}: loss {mean:.6}");
        epoch_losses.push(mean);
    }

    let codebook = ShapeCodebook {
        codes: shapes
            .iter()
            .zip(&codes)
            .map(|(s, set)| (s.shape_id.clone(), LatentCode::from_row(set.value(z_id))))
            .collect(),
    };
    Ok(StageOneResult {
        decoder,
        codebook,
        epoch_losses,
    })
}

/// Full-dataset objective (no parameter updates).
pub fn dataset_loss<T: Scalar>(decoder: &Decoder<T>, codebook: &ShapeCodebook, shapes: &[SdfSampleSet]) -> Result<f64> {
    let cfg = decoder.config();
    let (mut total, mut count) = (0.0, 0usize);
    for s in shapes {
        let z = codebook
            .get(&s.shape_id)
            .ok_or_else(|| Error::Missing(format!("code for {}", s.shape_id)))?;
        let pred = decoder.eval_points(z, &s.points)?;
        let l1: f64 = pred
            .iter()
            .zip(&s.sdf)
            .map(|(&p, &t)| crate::nn::clamped_l1(p, t, cfg.delta))
            .sum();
        total += l1 + cfg.latent_reg * z.norm().powi(2) * s.len() as f64;
        count += s.len();
    }
    if count == 0 {
        return Err(Error::EmptyInput);
    }
    Ok(total / count as f64)
}
