use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::predict::downsample;
use super::{AggregatorConfig, MergeMode, PoolMode};
use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::nn::{checkpoint, Dense, Graph, ParameterSet, Scalar, Var};
use crate::sdf_model::LatentCode;

/// One sweep's merged feature/latent vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementRepr(pub Vec<f64>);

/// Shared encoder plus the set-level mapping to a latent code.
///
/// Every encoder stage is a shared per-point dense layer. Stages before the
/// last apply ReLU, max-pool the result to a stage feature and append that
/// feature to every point. The last stage max-pools and applies `tanh`.
#[derive(Debug)]
pub struct Aggregator<T> {
    config: AggregatorConfig,
    params: ParameterSet<T>,
    stages: Vec<Dense>,
    map: Dense,
}

impl<T: Scalar> Clone for Aggregator<T> {
    fn clone(&self) -> Self {
        Self::from_params(self.config.clone(), self.params.clone()).expect("same layout")
    }
}

fn stage_inputs(config: &AggregatorConfig) -> Vec<usize> {
    let w = &config.encoder.widths;
    (0..w.len()).map(|s| if s == 0 { 3 } else { 2 * w[s - 1] }).collect()
}

impl<T: Scalar> Aggregator<T> {
    /// Fresh parameters. In the latent-carrying merge modes the mapping starts
    /// as the identity on the latent block and zero on the feature block, so
    /// an untrained model with average pooling returns the mean code.
    pub fn new(config: AggregatorConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParameterSet::new();
        for (s, (&n_in, &w)) in stage_inputs(&config).iter().zip(&config.encoder.widths).enumerate() {
            Dense::new(&mut params, &format!("enc{s}"), n_in, w, &mut rng);
        }
        let map = Dense::new(&mut params, "map", config.repr_dim(), config.latent_dim, &mut rng);
        let offset = match config.merge {
            MergeMode::Concat => Some(config.encoder.feature_dim()),
            MergeMode::Multiply => Some(0),
            MergeMode::EncoderOnly => None,
        };
        if let Some(offset) = offset {
            let w = params.value_mut(map.weight);
            w.fill(T::zero());
            for i in 0..config.latent_dim {
                w[[i, offset + i]] = T::one();
            }
        }
        Self::from_params(config, params)
    }

    /// Binds to existing parameters, checking names and shapes.
    pub fn from_params(config: AggregatorConfig, params: ParameterSet<T>) -> Result<Self> {
        config.validate()?;
        let bind = |name: &str, n_in: usize, n_out: usize| -> Result<Dense> {
            let d = Dense::bind(&params, name)
                .ok_or_else(|| Error::Checkpoint(format!("missing layer {name}")))?;
            if d.n_in != n_in || d.n_out != n_out || params.value(d.bias).dim() != (1, n_out) {
                return Err(Error::Checkpoint(format!(
                    "layer {name} is {}->{}, expected {n_in}->{n_out}",
                    d.n_in, d.n_out
                )));
            }
            Ok(d)
        };
        let stages = stage_inputs(&config)
            .iter()
            .zip(&config.encoder.widths)
            .enumerate()
            .map(|(s, (&n_in, &w))| bind(&format!("enc{s}"), n_in, w))
            .collect::<Result<Vec<_>>>()?;
        let map = bind("map", config.repr_dim(), config.latent_dim)?;
        if params.len() != 2 * (stages.len() + 1) {
            return Err(Error::Checkpoint(format!(
                "aggregator checkpoint has {} tensors, expected {}",
                params.len(),
                2 * (stages.len() + 1)
            )));
        }
        Ok(Self {
            config,
            params,
            stages,
            map,
        })
    }

    pub fn config(&self) -> &AggregatorConfig {
        &self.config
    }

    pub fn params(&self) -> &ParameterSet<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParameterSet<T> {
        &mut self.params
    }

    pub fn cast<U: Scalar>(&self) -> Aggregator<U> {
        Aggregator::from_params(self.config.clone(), self.params.cast()).expect("same layout")
    }

    /// Global feature (`1 × F`) of one `points × 3` cloud.
    pub fn encode(&self, g: &mut Graph<T>, cloud: Var) -> Result<Var> {
        let expected = (self.config.encoder.points, 3);
        if g.shape(cloud) != expected {
            return Err(Error::shape(format!(
                "encoder input is {:?}, expected {expected:?}",
                g.shape(cloud)
            )));
        }
        let n = expected.0;
        let last = self.stages.len() - 1;
        let mut h = cloud;
        for (s, stage) in self.stages.iter().enumerate() {
            let f = stage.forward(g, &self.params, h)?;
            if s == last {
                let pooled = g.maxpool_rows(f)?;
                return Ok(g.tanh(pooled));
            }
            let f = g.relu(f);
            let pooled = g.maxpool_rows(f)?;
            let tiled = g.tile_rows(pooled, n)?;
            h = g.concat_cols(&[f, tiled])?;
        }
        unreachable!("validated configs have at least one stage")
    }

    /// Element vector from a global feature and a `1 × L` latent.
    pub fn merge(&self, g: &mut Graph<T>, feature: Var, latent: Var) -> Result<Var> {
        if g.shape(latent) != (1, self.config.latent_dim) {
            return Err(Error::shape(format!(
                "latent is {:?}, aggregator expects 1x{}",
                g.shape(latent),
                self.config.latent_dim
            )));
        }
        match self.config.merge {
            MergeMode::Concat => g.concat_cols(&[feature, latent]),
            MergeMode::Multiply => g.mul(feature, latent),
            MergeMode::EncoderOnly => Ok(feature),
        }
    }

    /// Pools element vectors and maps the result to a `1 × L` code.
    pub fn pool_and_map(&self, g: &mut Graph<T>, elements: &[Var]) -> Result<Var> {
        let stacked = g.concat_rows(elements)?;
        let pooled = match self.config.pool {
            PoolMode::Avg => g.avgpool_rows(stacked)?,
            PoolMode::Max => g.maxpool_rows(stacked)?,
        };
        self.map.forward(g, &self.params, pooled)
    }

    /// Predicted code for `B` clouds (each `points × 3`) and their latents.
    pub fn forward(&self, g: &mut Graph<T>, clouds: &[Var], latents: &[Var]) -> Result<Var> {
        if clouds.len() != latents.len() {
            return Err(Error::shape(format!(
                "{} clouds but {} latent codes",
                clouds.len(),
                latents.len()
            )));
        }
        if clouds.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut elements = Vec::with_capacity(clouds.len());
        for (&c, &z) in clouds.iter().zip(latents) {
            let f = self.encode(g, c)?;
            elements.push(self.merge(g, f, z)?);
        }
        self.pool_and_map(g, &elements)
    }

    /// Untaped prediction from sweeps (downsampled or padded as needed).
    pub fn predict_latent(&self, sweeps: &[PointCloud], latents: &[LatentCode]) -> Result<LatentCode> {
        let inputs = sweeps
            .iter()
            .map(|s| encoder_input(s, self.config.encoder.points))
            .collect::<Result<Vec<_>>>()?;
        self.predict_from_inputs(&inputs, latents)
    }

    /// Untaped prediction from prepared `points × 3` inputs.
    pub fn predict_from_inputs(&self, inputs: &[Array2<T>], latents: &[LatentCode]) -> Result<LatentCode> {
        let mut g = Graph::frozen();
        let clouds: Vec<Var> = inputs.iter().map(|x| g.constant(x.clone())).collect();
        let zs: Vec<Var> = latents.iter().map(|z| g.constant(z.to_row())).collect();
        let out = self.forward(&mut g, &clouds, &zs)?;
        Ok(LatentCode::from_row(g.value(out)))
    }

    /// Writes the parameters and a `.json` sidecar with the config.
    pub fn save(&self, path: &Path) -> Result<()> {
        checkpoint::save(&self.params, path)?;
        fs::write(sidecar(path), serde_json::to_vec_pretty(&self.config)?)?;
        Ok(())
    }

    /// Loads a checkpoint. When `expected` is given, a sidecar describing a
    /// different configuration is refused.
    pub fn load(path: &Path, expected: Option<&AggregatorConfig>) -> Result<Self> {
        let config: AggregatorConfig = serde_json::from_slice(&fs::read(sidecar(path))?)?;
        if let Some(e) = expected {
            if e != &config {
                return Err(Error::Checkpoint(format!(
                    "{} was trained with {config:?}, expected {e:?}",
                    path.display()
                )));
            }
        }
        Self::from_params(config, checkpoint::load(path)?)
    }
}

fn sidecar(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// `points × 3` encoder input: farthest point sampling when the sweep is
/// larger, cyclic repetition of its points when it is smaller.
pub fn encoder_input<T: Scalar>(sweep: &PointCloud, points: usize) -> Result<Array2<T>> {
    let sampled = downsample(sweep, points)?;
    let m = sampled.len();
    Ok(Array2::from_shape_fn((points, 3), |(r, c)| T::of(sampled.points[r % m][c])))
}

/// Global feature of one prepared cloud.
pub fn shared_pcn_forward<T: Scalar>(aggregator: &Aggregator<T>, cloud: &Array2<T>) -> Result<Vec<f64>> {
    let mut g = Graph::frozen();
    let x = g.constant(cloud.clone());
    let f = aggregator.encode(&mut g, x)?;
    Ok(g.value(f).iter().map(|v| v.as_f64()).collect())
}

/// Element vectors for `B` sweeps and their latent codes.
pub fn build_element_reprs<T: Scalar>(
    aggregator: &Aggregator<T>,
    sweeps: &[PointCloud],
    latents: &[LatentCode],
) -> Result<Vec<ElementRepr>> {
    if sweeps.len() != latents.len() {
        return Err(Error::shape(format!(
            "{} sweeps but {} latent codes",
            sweeps.len(),
            latents.len()
        )));
    }
    if sweeps.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut out = Vec::with_capacity(sweeps.len());
    for (s, z) in sweeps.iter().zip(latents) {
        let mut g = Graph::frozen();
        let x = g.constant(encoder_input(s, aggregator.config().encoder.points)?);
        let zv = g.constant(z.to_row());
        let f = aggregator.encode(&mut g, x)?;
        let e = aggregator.merge(&mut g, f, zv)?;
        out.push(ElementRepr(g.value(e).iter().map(|v| v.as_f64()).collect()));
    }
    Ok(out)
}

/// Pools element vectors and maps them to the predicted code.
pub fn aggregate<T: Scalar>(aggregator: &Aggregator<T>, reprs: &[ElementRepr]) -> Result<LatentCode> {
    if reprs.is_empty() {
        return Err(Error::EmptyInput);
    }
    let dim = aggregator.config().repr_dim();
    let mut g = Graph::frozen();
    let mut elements = Vec::with_capacity(reprs.len());
    for r in reprs {
        if r.0.len() != dim {
            return Err(Error::shape(format!("element has length {}, expected {dim}", r.0.len())));
        }
        elements.push(g.constant(Array2::from_shape_fn((1, dim), |(_, c)| T::of(r.0[c]))));
    }
    let out = aggregator.pool_and_map(&mut g, &elements)?;
    Ok(LatentCode::from_row(g.value(out)))
}
