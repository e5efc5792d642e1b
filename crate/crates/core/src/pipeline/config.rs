use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::ProceduralVehicleParams;
use crate::aggregator::{AggregatorConfig, EncoderConfig, MergeMode, PoolMode, StageTwoConfig};
use crate::error::{Error, Result};
use crate::geometry::{DEFAULT_SOR_K, DEFAULT_SOR_STD_MULT};
use crate::lidar::LidarConfig;
use crate::metrics::{DEFAULT_EVAL_SAMPLES, DEFAULT_RECALL_THRESHOLD};
use crate::sdf_model::{DecoderConfig, InferConfig, StageOneConfig};

/// SDF supervision drawn from each training mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleConfig {
    pub n_surface: usize,
    pub n_uniform: usize,
    pub offsets: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    /// Points sampled on each reconstructed mesh.
    pub n_samples: usize,
    /// Bound on the squared nearest-neighbour distance counted by recall.
    pub recall_threshold: f64,
    pub sor_k: usize,
    pub sor_std_mult: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            n_samples: DEFAULT_EVAL_SAMPLES,
            recall_threshold: DEFAULT_RECALL_THRESHOLD,
            sor_k: DEFAULT_SOR_K,
            sor_std_mult: DEFAULT_SOR_STD_MULT,
        }
    }
}

/// Grid of aggregator variants, sweep counts and per-cloud point counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblationConfig {
    pub pools: Vec<PoolMode>,
    pub merges: Vec<MergeMode>,
    pub sweeps: Vec<usize>,
    pub points: Vec<usize>,
    /// Also run the variant that ignores per-sweep codes.
    pub encoder_only: bool,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self {
            pools: vec![PoolMode::Avg, PoolMode::Max],
            merges: vec![MergeMode::Concat, MergeMode::Multiply],
            sweeps: vec![3, 6, 9],
            points: vec![128, 256],
            encoder_only: true,
        }
    }
}

/// Everything one experiment depends on. All randomness derives from `seed`;
/// the `seed` fields of the nested training configs are replaced by named
/// sub-seeds of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub profile: String,
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub vehicles: ProceduralVehicleParams,
    pub samples: SampleConfig,
    pub decoder: DecoderConfig,
    pub stage_one: StageOneConfig,
    pub lidar: LidarConfig,
    /// Sweeps per instance used by the main experiment.
    pub sweeps: usize,
    /// Sweeps simulated per instance; smaller counts use a prefix.
    pub max_sweeps: usize,
    /// Points per sweep after farthest point sampling.
    pub points: usize,
    /// Simulated training instances per training shape.
    pub train_instances: usize,
    pub infer: InferConfig,
    pub encoder_widths: Vec<usize>,
    pub stage_two: StageTwoConfig,
    /// Points kept from the stacked sweeps for the single-inference baseline.
    pub ms_points: usize,
    pub mesh_resolution: u32,
    pub eval: EvalConfig,
    pub ablation: AblationConfig,
}

pub const PROFILES: [&str; 2] = ["desk", "full"];

impl ExperimentConfig {
    /// Small enough to run end to end on one core.
    pub fn desk() -> Self {
        Self {
            profile: "desk".into(),
            seed: 0,
            n_train: 20,
            n_test: 5,
            vehicles: ProceduralVehicleParams::default(),
            samples: SampleConfig {
                n_surface: 500,
                n_uniform: 500,
                offsets: vec![0.01, 0.04],
            },
            decoder: DecoderConfig::desk(),
            stage_one: StageOneConfig {
                epochs: 200,
                lr: 1e-3,
                latent_lr: 1e-3,
                batch_size: 1024,
                lr_halve_every: 80,
                latent_init_std: 0.01,
                seed: 0,
            },
            lidar: LidarConfig::default(),
            sweeps: 6,
            max_sweeps: 9,
            points: 256,
            train_instances: 2,
            infer: InferConfig {
                iters: 200,
                lr: 1e-2,
                lr_halve_every: 50,
                offsets: vec![0.04],
                ..InferConfig::default()
            },
            encoder_widths: EncoderConfig::desk().widths,
            stage_two: StageTwoConfig {
                epochs: 20,
                lr: 1e-4,
                ..StageTwoConfig::default()
            },
            ms_points: 512,
            mesh_resolution: 64,
            eval: EvalConfig::default(),
            ablation: AblationConfig::default(),
        }
    }

    /// Full-width networks and long training schedules.
    pub fn full() -> Self {
        Self {
            profile: "full".into(),
            n_train: 100,
            n_test: 25,
            decoder: DecoderConfig::full(),
            stage_one: StageOneConfig {
                epochs: 1000,
                lr: 5e-4,
                latent_lr: 1e-3,
                batch_size: 4096,
                lr_halve_every: 500,
                ..Self::desk().stage_one
            },
            infer: InferConfig::default(),
            encoder_widths: EncoderConfig::full().widths,
            stage_two: StageTwoConfig::default(),
            mesh_resolution: 128,
            ..Self::desk()
        }
    }

    pub fn profile(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(Self::desk()),
            "full" => Ok(Self::full()),
            other => Err(Error::Config(format!(
                "unknown profile `{other}` (expected one of {PROFILES:?})"
            ))),
        }
    }

    /// Starts from a profile (the flag, else the file's `profile`, else
    /// desk), deep-merges the file's fields over it and applies a seed
    /// override. The result is validated.
    pub fn resolve(profile: Option<&str>, file: Option<&Value>, seed: Option<u64>) -> Result<Self> {
        if let Some(f) = file {
            if !f.is_object() {
                return Err(Error::Config("config file must hold a JSON object".into()));
            }
        }
        let from_file = file.and_then(|f| f.get("profile")).and_then(Value::as_str);
        let name = profile.or(from_file).unwrap_or("desk");
        let mut value = serde_json::to_value(Self::profile(name)?)?;
        if let Some(f) = file {
            merge_json(&mut value, f);
        }
        value["profile"] = Value::String(name.to_string());
        let mut config: Self =
            serde_json::from_value(value).map_err(|e| Error::Config(format!("config file: {e}")))?;
        if let Some(s) = seed {
            config.seed = s;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn aggregator_config(&self, merge: MergeMode, pool: PoolMode) -> AggregatorConfig {
        AggregatorConfig::new(
            EncoderConfig {
                widths: self.encoder_widths.clone(),
                points: self.points,
            },
            self.decoder.latent_dim,
        )
        .with_merge(merge)
        .with_pool(pool)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n_train", self.n_train),
            ("n_test", self.n_test),
            ("sweeps", self.sweeps),
            ("points", self.points),
            ("train_instances", self.train_instances),
            ("ms_points", self.ms_points),
            ("eval.n_samples", self.eval.n_samples),
            ("eval.sor_k", self.eval.sor_k),
            ("stage_one.epochs", self.stage_one.epochs),
            ("stage_two.epochs", self.stage_two.epochs),
            ("infer.iters", self.infer.iters),
            ("samples", self.samples.n_surface + self.samples.n_uniform),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.max_sweeps < self.sweeps {
            return Err(Error::Config(format!(
                "max_sweeps {} is below sweeps {}",
                self.max_sweeps, self.sweeps
            )));
        }
        if let Some(&b) = self.ablation.sweeps.iter().find(|&&b| b == 0 || b > self.max_sweeps) {
            return Err(Error::Config(format!("ablation sweep count {b} outside 1..={}", self.max_sweeps)));
        }
        if self.ablation.points.contains(&0) {
            return Err(Error::Config("ablation point counts must be positive".into()));
        }
        if self.mesh_resolution < 2 {
            return Err(Error::Config("mesh_resolution must be at least 2".into()));
        }
        if !(self.eval.recall_threshold >= 0.0) || !(self.eval.sor_std_mult >= 0.0) {
            return Err(Error::Config("eval thresholds must be non-negative".into()));
        }
        if !(self.stage_one.lr > 0.0) || !(self.stage_two.lr > 0.0) || !(self.infer.lr > 0.0) {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        if self.infer.offsets.iter().chain(&self.samples.offsets).any(|o| !(*o > 0.0)) {
            return Err(Error::Config("sample offsets must be positive".into()));
        }
        self.vehicles.validate()?;
        self.decoder.validate()?;
        self.lidar.validate()?;
        for &merge in self.ablation.merges.iter().chain([&MergeMode::Concat, &MergeMode::EncoderOnly]) {
            self.aggregator_config(merge, PoolMode::Avg).validate()?;
        }
        Ok(())
    }
}

/// Recursively overlays `patch` onto `base`; non-object values replace.
fn merge_json(base: &mut Value, patch: &Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(k) {
                    Some(slot) => merge_json(slot, v),
                    None => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (b, p) => *b = p.clone(),
    }
}
