use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::LatentCode;
use crate::error::{Error, Result};
use crate::geometry::Point3;
use crate::nn::{checkpoint, kaiming_uniform, Graph, ParamId, ParameterSet, Scalar, Var};

/// Shape of the auto-decoder `f(z, x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecoderConfig {
    pub latent_dim: usize,
    pub hidden: usize,
    /// Number of hidden layers; a linear output layer follows them.
    pub layers: usize,
    /// Hidden layer that receives `(z, x)` again next to the previous activations.
    pub skip_layer: usize,
    /// Clamp used by the training and inference losses.
    pub delta: f64,
    /// Weight of `‖z‖²` (that is `1/σ²`).
    pub latent_reg: f64,
}

impl DecoderConfig {
    pub fn desk() -> Self {
        Self {
            latent_dim: 64,
            hidden: 128,
            layers: 4,
            skip_layer: 2,
            delta: 0.1,
            latent_reg: 1e-4,
        }
    }

    pub fn full() -> Self {
        Self {
            latent_dim: 256,
            hidden: 512,
            layers: 8,
            skip_layer: 4,
            delta: 0.1,
            latent_reg: 1e-4,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers < 2 {
            return Err(Error::Config("decoder needs at least 2 layers".into()));
        }
        if self.skip_layer == 0 || self.skip_layer >= self.layers {
            return Err(Error::Config(format!(
                "skip layer {} outside 1..{}",
                self.skip_layer, self.layers
            )));
        }
        if self.latent_dim == 0 || self.hidden == 0 {
            return Err(Error::Config("decoder widths must be positive".into()));
        }
        if !(self.delta > 0.0) || !(self.latent_reg >= 0.0) || !self.latent_reg.is_finite() {
            return Err(Error::Config("delta must be positive and latent_reg finite, non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct Layer {
    /// Weight on the previous activations (absent for the first layer).
    wh: Option<ParamId>,
    /// Weights on the re-injected latent code and coordinates.
    wz: Option<ParamId>,
    wx: Option<ParamId>,
    bias: ParamId,
}

/// DeepSDF-style MLP. Layers fed with `(z, x)` split their weight into blocks
/// so `z·Wzᵀ` is computed once per batch; this is the same function as
/// concatenating `z` onto every row.
#[derive(Debug)]
pub struct Decoder<T> {
    config: DecoderConfig,
    params: ParameterSet<T>,
    layers: Vec<Layer>,
    out_w: ParamId,
    out_b: ParamId,
}

impl<T: Scalar> Clone for Decoder<T> {
    fn clone(&self) -> Self {
        Self {
            config: self.config.clone(),
            params: self.params.clone(),
            layers: self.layers.clone(),
            out_w: self.out_w,
            out_b: self.out_b,
        }
    }
}

impl<T: Scalar> Decoder<T> {
    pub fn new(config: DecoderConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParameterSet::new();
        let (l, h) = (config.latent_dim, config.hidden);
        for i in 0..config.layers {
            let injects = i == 0 || i == config.skip_layer;
            let fan_in = if i == 0 { l + 3 } else if injects { h + l + 3 } else { h };
            if i > 0 {
                params.add(format!("l{i}.wh"), kaiming_uniform(h, h, fan_in, &mut rng));
            }
            if injects {
                params.add(format!("l{i}.wz"), kaiming_uniform(h, l, fan_in, &mut rng));
                params.add(format!("l{i}.wx"), kaiming_uniform(h, 3, fan_in, &mut rng));
            }
            params.add(format!("l{i}.bias"), Array2::zeros((1, h)));
        }
        params.add("out.weight", kaiming_uniform(1, h, h, &mut rng));
        params.add("out.bias", Array2::zeros((1, 1)));
        Self::from_params(config, params)
    }

    /// Binds a decoder to existing parameters, checking names and shapes.
    pub fn from_params(config: DecoderConfig, params: ParameterSet<T>) -> Result<Self> {
        config.validate()?;
        let (l, h) = (config.latent_dim, config.hidden);
        let get = |name: String, shape: (usize, usize)| -> Result<ParamId> {
            let id = params
                .find(&name)
                .ok_or_else(|| Error::Checkpoint(format!("missing tensor {name}")))?;
            if params.value(id).dim() != shape {
                return Err(Error::Checkpoint(format!(
                    "tensor {name} has shape {:?}, expected {shape:?}",
                    params.value(id).dim()
                )));
            }
            Ok(id)
        };
        let mut layers = Vec::with_capacity(config.layers);
        for i in 0..config.layers {
            let injects = i == 0 || i == config.skip_layer;
            layers.push(Layer {
                wh: (i > 0).then(|| get(format!("l{i}.wh"), (h, h))).transpose()?,
                wz: injects.then(|| get(format!("l{i}.wz"), (h, l))).transpose()?,
                wx: injects.then(|| get(format!("l{i}.wx"), (h, 3))).transpose()?,
                bias: get(format!("l{i}.bias"), (1, h))?,
            });
        }
        let out_w = get("out.weight".into(), (1, h))?;
        let out_b = get("out.bias".into(), (1, 1))?;
        let expected = 2 + layers
            .iter()
            .map(|l| 1 + l.wh.is_some() as usize + l.wz.is_some() as usize + l.wx.is_some() as usize)
            .sum::<usize>();
        if params.len() != expected {
            return Err(Error::Checkpoint(format!(
                "decoder checkpoint has {} tensors, expected {expected}",
                params.len()
            )));
        }
        Ok(Self {
            config,
            params,
            layers,
            out_w,
            out_b,
        })
    }

    pub fn config(&self) -> &DecoderConfig {
        &self.config
    }

    pub fn params(&self) -> &ParameterSet<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParameterSet<T> {
        &mut self.params
    }

    pub fn output_layer(&self) -> (ParamId, ParamId) {
        (self.out_w, self.out_b)
    }

    pub fn cast<U: Scalar>(&self) -> Decoder<U> {
        Decoder::from_params(self.config.clone(), self.params.cast()).expect("same layout")
    }

    /// Taped forward pass. `z` is `1 × L`, `x` is `n × 3`; returns `n × 1`.
    pub fn forward(&self, g: &mut Graph<T>, z: Var, x: Var) -> Result<Var> {
        if g.shape(z) != (1, self.config.latent_dim) {
            return Err(Error::shape(format!(
                "latent is {:?}, decoder expects 1x{}",
                g.shape(z),
                self.config.latent_dim
            )));
        }
        if g.shape(x).1 != 3 {
            return Err(Error::shape("query points must be n x 3"));
        }
        let p = &self.params;
        let mut h: Option<Var> = None;
        for layer in &self.layers {
            let mut pre = match (h, layer.wh) {
                (Some(h), Some(wh)) => {
                    let w = g.param(p, wh);
                    Some(g.matmul_t(h, w)?)
                }
                _ => None,
            };
            if let (Some(wz), Some(wx)) = (layer.wz, layer.wx) {
                let wx = g.param(p, wx);
                let xw = g.matmul_t(x, wx)?;
                pre = Some(match pre {
                    Some(a) => g.add(a, xw)?,
                    None => xw,
                });
                let wz = g.param(p, wz);
                let zw = g.matmul_t(z, wz)?;
                pre = Some(g.add_row(pre.expect("set above"), zw)?);
            }
            let b = g.param(p, layer.bias);
            let a = g.add_row(pre.expect("every layer has an input"), b)?;
            h = Some(g.relu(a));
        }
        let w = g.param(p, self.out_w);
        let b = g.param(p, self.out_b);
        let y = g.matmul_t(h.expect("at least two layers"), w)?;
        g.add_row(y, b)
    }

    /// Untaped batch evaluation; rows of `x` are query points.
    pub fn eval(&self, z: &Array2<T>, x: &Array2<T>) -> Result<Array2<T>> {
        if z.dim() != (1, self.config.latent_dim) || x.ncols() != 3 {
            return Err(Error::shape(format!(
                "decoder eval got z {:?} and x {:?}",
                z.dim(),
                x.dim()
            )));
        }
        let p = &self.params;
        let mut h: Option<Array2<T>> = None;
        for layer in &self.layers {
            let mut pre = match (&h, layer.wh) {
                (Some(h), Some(wh)) => Some(h.dot(&p.value(wh).t())),
                _ => None,
            };
            if let (Some(wz), Some(wx)) = (layer.wz, layer.wx) {
                let xw = x.dot(&p.value(wx).t());
                let mut a = match pre {
                    Some(a) => a + &xw,
                    None => xw,
                };
                a += &z.dot(&p.value(wz).t());
                pre = Some(a);
            }
            let mut a = pre.expect("every layer has an input");
            a += p.value(layer.bias);
            a.mapv_inplace(|v| if v > T::zero() { v } else { T::zero() });
            h = Some(a);
        }
        let mut y = h.expect("at least two layers").dot(&p.value(self.out_w).t());
        y += p.value(self.out_b);
        Ok(y)
    }

    /// SDF values at many points, evaluated in chunks.
    pub fn eval_points(&self, z: &LatentCode, points: &[Point3]) -> Result<Vec<f64>> {
        let zt = z.to_row::<T>();
        let mut out = Vec::with_capacity(points.len());
        for chunk in points.chunks(4096) {
            let x = points_to_array::<T>(chunk);
            let y = self.eval(&zt, &x)?;
            out.extend(y.index_axis(Axis(1), 0).iter().map(|v| v.as_f64()));
        }
        Ok(out)
    }

    /// Writes the parameters and a `.json` sidecar with the config.
    pub fn save(&self, path: &Path) -> Result<()> {
        checkpoint::save(&self.params, path)?;
        fs::write(sidecar(path), serde_json::to_vec_pretty(&self.config)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let config: DecoderConfig = serde_json::from_slice(&fs::read(sidecar(path))?)?;
        Self::from_params(config, checkpoint::load(path)?)
    }
}

fn sidecar(path: &Path) -> PathBuf {
    path.with_extension("json")
}

pub(crate) fn points_to_array<T: Scalar>(points: &[Point3]) -> Array2<T> {
    Array2::from_shape_fn((points.len(), 3), |(r, c)| T::of(points[r][c]))
}

/// `f(z, x)` at one point.
pub fn decode_sdf<T: Scalar>(decoder: &Decoder<T>, z: &LatentCode, x: &Point3) -> Result<f64> {
    if z.len() != decoder.config().latent_dim {
        return Err(Error::shape(format!(
            "latent has length {}, decoder expects {}",
            z.len(),
            decoder.config().latent_dim
        )));
    }
    Ok(decoder.eval_points(z, std::slice::from_ref(x))?[0])
}
