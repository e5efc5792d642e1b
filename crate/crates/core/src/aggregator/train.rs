use ndarray::Array2;
use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{encoder_input, Aggregator};
use crate::error::{Error, Result};
use crate::lidar::SweepInstance;
use crate::nn::{mse, AdamConfig, AdamState, Graph, Scalar, Var};
use crate::sdf_model::LatentCode;

/// One training instance: prepared clouds, per-sweep codes and the target code.
#[derive(Debug, Clone)]
pub struct StageTwoExample {
    pub id: String,
    pub inputs: Vec<Array2<f64>>,
    pub latents: Vec<LatentCode>,
    pub target: LatentCode,
}

impl StageTwoExample {
    /// Pairs an instance (which must carry its ground-truth code) with its
    /// per-sweep codes.
    pub fn from_instance(instance: &SweepInstance, latents: &[LatentCode], points: usize) -> Result<Self> {
        let target = instance
            .gt_latent
            .clone()
            .ok_or_else(|| Error::Missing(format!("instance {} has no ground-truth code", instance.shape_id)))?;
        if latents.len() != instance.b() {
            return Err(Error::Missing(format!(
                "instance {} has {} sweeps but {} per-sweep codes",
                instance.shape_id,
                instance.b(),
                latents.len()
            )));
        }
        Ok(Self {
            id: instance.shape_id.clone(),
            inputs: instance
                .sweeps
                .iter()
                .map(|s| encoder_input(s, points))
                .collect::<Result<_>>()?,
            latents: latents.to_vec(),
            target,
        })
    }

    fn validate(&self, latent_dim: usize) -> Result<()> {
        if self.inputs.is_empty() || self.inputs.len() != self.latents.len() {
            return Err(Error::Missing(format!(
                "example {} has {} clouds and {} codes",
                self.id,
                self.inputs.len(),
                self.latents.len()
            )));
        }
        if self.target.len() != latent_dim || self.latents.iter().any(|z| z.len() != latent_dim) {
            return Err(Error::shape(format!("example {} has codes of the wrong width", self.id)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageTwoConfig {
    pub epochs: usize,
    pub lr: f64,
    /// Halve the learning rate every this many epochs (0 disables).
    pub lr_halve_every: usize,
    /// When set, every step uses a random subset of this many sweeps.
    pub subset: Option<usize>,
    pub seed: u64,
}

impl Default for StageTwoConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            lr: 1e-5,
            lr_halve_every: 0,
            subset: None,
            seed: 0,
        }
    }
}

#[derive(Debug)]
pub struct StageTwoResult<T> {
    pub aggregator: Aggregator<T>,
    /// Mean squared code error per epoch, measured before each step.
    pub epoch_losses: Vec<f64>,
}

fn example_loss<T: Scalar>(
    g: &mut Graph<T>,
    aggregator: &Aggregator<T>,
    ex: &StageTwoExample,
    pick: &[usize],
) -> Result<Var> {
    let clouds: Vec<Var> = pick.iter().map(|&i| g.constant(ex.inputs[i].mapv(T::of))).collect();
    let zs: Vec<Var> = pick.iter().map(|&i| g.constant(ex.latents[i].to_row())).collect();
    let pred = aggregator.forward(g, &clouds, &zs)?;
    let target = g.constant(ex.target.to_row());
    g.mse(pred, target)
}

/// Fits the aggregator to map each instance to its ground-truth code, one
/// instance per Adam step. Only the aggregator's parameters change.
pub fn train_stage_two<T: Scalar>(
    mut aggregator: Aggregator<T>,
    data: &[StageTwoExample],
    config: &StageTwoConfig,
) -> Result<StageTwoResult<T>> {
    if data.is_empty() {
        return Err(Error::EmptyInput);
    }
    let dim = aggregator.config().latent_dim;
    for ex in data {
        ex.validate(dim)?;
    }
    if config.subset == Some(0) {
        return Err(Error::Config("sweep subset size must be positive".into()));
    }
    let mut adam = AdamState::new(aggregator.params(), AdamConfig::with_lr(config.lr));
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5e7_a66);
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        adam.config.lr = match config.lr_halve_every {
            0 => config.lr,
            k => config.lr * 0.5f64.powi((epoch / k) as i32),
        };
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for j in order {
            let ex = &data[j];
            let b = ex.inputs.len();
            let pick: Vec<usize> = match config.subset {
                Some(k) if k < b => {
                    let mut p = index::sample(&mut rng, b, k).into_vec();
                    p.sort_unstable();
                    p
                }
                _ => (0..b).collect(),
            };
            let mut g = Graph::new();
            let loss = example_loss(&mut g, &aggregator, ex, &pick)?;
            let grads = g.backward(loss)?;
            aggregator.params_mut().zero_grad();
            grads.accumulate(aggregator.params_mut());
            adam.step(aggregator.params_mut());
            total += g.scalar(loss).as_f64();
        }
        let mean = total / data.len() as f64;
        if !mean.is_finite() {
            return Err(Error::Degenerate(format!("stage-two loss diverged at epoch {epoch}")));
        }
        log::debug!("stage two epoch {epoch}: mse {mean:.6}");
        epoch_losses.push(mean);
    }
    Ok(StageTwoResult {
        aggregator,
        epoch_losses,
    })
}

/// Mean squared code error over a dataset, using every sweep.
pub fn dataset_mse<T: Scalar>(aggregator: &Aggregator<T>, data: &[StageTwoExample]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut total = 0.0;
    for ex in data {
        let inputs: Vec<Array2<T>> = ex.inputs.iter().map(|x| x.mapv(T::of)).collect();
        let pred = aggregator.predict_from_inputs(&inputs, &ex.latents)?;
        total += mse(&pred.to_row::<f64>(), &ex.target.to_row::<f64>())?;
    }
    Ok(total / data.len() as f64)
}
