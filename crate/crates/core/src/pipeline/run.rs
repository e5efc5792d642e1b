use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::manifest::{hash_inputs, hash_json, hash_tree, StageManifest};
use super::{gen_shapes, sub_seed, ExperimentConfig};
use crate::aggregator::{
    infer_sweep_latents, mean_latent_baseline, train_stage_two, Aggregator, MergeMode, PoolMode, StageTwoConfig,
    StageTwoExample,
};
use crate::error::{Error, Result};
use crate::geometry::{estimate_normals, fps_indices, Point3, Vector3};
use crate::lidar::{generate_instance, SweepInstance};
use crate::mesh::io::{load_mesh, save_mesh};
use crate::mesh::TriangleMesh;
use crate::metrics::{best_single_shot, build_ground_truth, evaluate_method, EvalReport};
use crate::sdf_model::{
    generate_sdf_samples, infer_latent_oriented, reconstruct, train_stage_one, Decoder, LatentCode, SdfSampleSet,
    ShapeCodebook, StageOneConfig,
};

pub const METHOD_OURS: &str = "ours";
pub const METHOD_SINGLE: &str = "best_single_shot";
pub const METHOD_MS: &str = "deepsdf_ms";
pub const METHOD_MEAN: &str = "mean_latent";

/// Pipeline stages in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    GenShapes,
    SampleSdf,
    TrainDecoder,
    GenSweeps,
    InferLatents,
    TrainAggregator,
    Predict,
    Eval,
    Ablate,
    Export,
}

impl Stage {
    pub const ALL: [Stage; 10] = [
        Stage::GenShapes,
        Stage::SampleSdf,
        Stage::TrainDecoder,
        Stage::GenSweeps,
        Stage::InferLatents,
        Stage::TrainAggregator,
        Stage::Predict,
        Stage::Eval,
        Stage::Ablate,
        Stage::Export,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::GenShapes => "gen-shapes",
            Stage::SampleSdf => "sample-sdf",
            Stage::TrainDecoder => "train-decoder",
            Stage::GenSweeps => "gen-sweeps",
            Stage::InferLatents => "infer-latents",
            Stage::TrainAggregator => "train-aggregator",
            Stage::Predict => "predict",
            Stage::Eval => "eval",
            Stage::Ablate => "ablate",
            Stage::Export => "export",
        }
    }

    /// Stages whose outputs this stage reads.
    pub fn deps(self) -> &'static [Stage] {
        match self {
            Stage::GenShapes => &[],
            Stage::SampleSdf => &[Stage::GenShapes],
            Stage::TrainDecoder => &[Stage::SampleSdf],
            Stage::GenSweeps => &[Stage::GenShapes, Stage::TrainDecoder],
            Stage::InferLatents => &[Stage::TrainDecoder, Stage::GenSweeps],
            Stage::TrainAggregator => &[Stage::GenSweeps, Stage::InferLatents],
            Stage::Predict => &[Stage::TrainDecoder, Stage::GenSweeps, Stage::InferLatents, Stage::TrainAggregator],
            Stage::Eval => &[Stage::GenSweeps, Stage::Predict],
            Stage::Ablate => &[Stage::TrainDecoder, Stage::GenSweeps, Stage::InferLatents, Stage::TrainAggregator],
            Stage::Export => &[Stage::Predict, Stage::Eval],
        }
    }

    fn inputs(self) -> &'static [&'static str] {
        match self {
            Stage::GenShapes => &[],
            Stage::SampleSdf => &["shapes"],
            Stage::TrainDecoder => &["samples"],
            Stage::GenSweeps => &["shapes", "codebook"],
            Stage::InferLatents => &["decoder", "sweeps"],
            Stage::TrainAggregator => &["sweeps", "latents"],
            Stage::Predict | Stage::Ablate => &["decoder", "aggregators", "latents", "sweeps"],
            Stage::Eval => &["predictions", "sweeps"],
            Stage::Export => &["predictions", "reports/results.json"],
        }
    }

    fn outputs(self) -> &'static [&'static str] {
        match self {
            Stage::GenShapes => &["shapes"],
            Stage::SampleSdf => &["samples"],
            Stage::TrainDecoder => &["decoder", "codebook"],
            Stage::GenSweeps => &["sweeps"],
            Stage::InferLatents => &["latents"],
            Stage::TrainAggregator => &["aggregators"],
            Stage::Predict => &["predictions"],
            Stage::Eval => &["reports/results.csv", "reports/results.json"],
            Stage::Ablate => &["reports/ablation.csv", "reports/ablation.json"],
            Stage::Export => &["export"],
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown stage `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Ran,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ShapeIndex {
    train: Vec<String>,
    test: Vec<String>,
}

/// One experiment rooted at an output directory.
#[derive(Debug, Clone)]
pub struct Pipeline {
    config: ExperimentConfig,
    root: PathBuf,
}

impl Pipeline {
    /// Validates the config and records it as `config.json` under `root`.
    pub fn new(config: ExperimentConfig, root: impl Into<PathBuf>) -> Result<Self> {
        config.validate()?;
        let root = root.into();
        fs::create_dir_all(&root)?;
        fs::write(root.join("config.json"), serde_json::to_vec_pretty(&config)?)?;
        Ok(Self { config, root })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Runs `stage` after bringing its dependencies up to date. Returns the
    /// outcome of every stage visited, in execution order.
    pub fn run(&self, stage: Stage) -> Result<Vec<(Stage, Outcome)>> {
        let mut done = BTreeSet::new();
        let mut log = Vec::new();
        self.run_with_deps(stage, &mut done, &mut log)?;
        Ok(log)
    }

    /// Every stage up to and including the evaluation report.
    pub fn run_pipeline(&self) -> Result<Vec<(Stage, Outcome)>> {
        self.run(Stage::Eval)
    }

    /// Every stage.
    pub fn run_all(&self) -> Result<Vec<(Stage, Outcome)>> {
        let mut done = BTreeSet::new();
        let mut log = Vec::new();
        for stage in Stage::ALL {
            self.run_with_deps(stage, &mut done, &mut log)?;
        }
        Ok(log)
    }

    fn run_with_deps(&self, stage: Stage, done: &mut BTreeSet<Stage>, log: &mut Vec<(Stage, Outcome)>) -> Result<()> {
        if done.contains(&stage) {
            return Ok(());
        }
        for &dep in stage.deps() {
            self.run_with_deps(dep, done, log)?;
        }
        let outcome = self.execute(stage).map_err(|e| e.in_stage(stage.name()))?;
        done.insert(stage);
        log.push((stage, outcome));
        Ok(())
    }

    fn config_slice(&self, stage: Stage) -> Value {
        let c = &self.config;
        match stage {
            Stage::GenShapes => json!({"seed": c.seed, "n_train": c.n_train, "n_test": c.n_test, "vehicles": c.vehicles}),
            Stage::SampleSdf => json!({"seed": c.seed, "samples": c.samples}),
            Stage::TrainDecoder => json!({"seed": c.seed, "decoder": c.decoder, "stage_one": c.stage_one}),
            Stage::GenSweeps => json!({
                "seed": c.seed, "lidar": c.lidar, "sweeps": c.sweeps, "max_sweeps": c.max_sweeps,
                "train_instances": c.train_instances,
            }),
            Stage::InferLatents => json!({
                "seed": c.seed, "infer": c.infer, "points": self.point_counts(), "ms_points": c.ms_points,
                "sweeps": c.sweeps,
            }),
            Stage::TrainAggregator => json!({
                "seed": c.seed, "encoder_widths": c.encoder_widths, "stage_two": c.stage_two, "points": c.points,
                "variants": self.variants().iter().map(|(m, p)| format!("{m}_{p}")).collect::<Vec<_>>(),
            }),
            Stage::Predict => json!({
                "seed": c.seed, "sweeps": c.sweeps, "points": c.points, "mesh_resolution": c.mesh_resolution,
            }),
            Stage::Eval => json!({"seed": c.seed, "eval": c.eval}),
            Stage::Ablate => json!({
                "seed": c.seed, "ablation": c.ablation, "eval": c.eval, "mesh_resolution": c.mesh_resolution,
            }),
            Stage::Export => json!({}),
        }
    }

    fn execute(&self, stage: Stage) -> Result<Outcome> {
        let config_hash = hash_json(&self.config_slice(stage))?;
        let inputs_hash = hash_inputs(&self.root, stage.inputs())?;
        if let Some(m) = StageManifest::load(&self.root, stage.name())? {
            if m.config_hash == config_hash && m.inputs_hash == inputs_hash && m.outputs_intact(&self.root)? {
                log::info!("{stage}: up to date");
                return Ok(Outcome::Skipped);
            }
        }
        for out in stage.outputs() {
            let path = self.root.join(out);
            if path.is_dir() {
                fs::remove_dir_all(&path)?;
            } else if path.exists() {
                fs::remove_file(&path)?;
            }
        }
        log::info!("{stage}: running");
        match stage {
            Stage::GenShapes => self.gen_shapes(),
            Stage::SampleSdf => self.sample_sdf(),
            Stage::TrainDecoder => self.train_decoder(),
            Stage::GenSweeps => self.gen_sweeps(),
            Stage::InferLatents => self.infer_latents(),
            Stage::TrainAggregator => self.train_aggregator(),
            Stage::Predict => self.predict(),
            Stage::Eval => self.eval(),
            Stage::Ablate => self.ablate(),
            Stage::Export => self.export(),
        }?;
        let manifest = StageManifest {
            stage: stage.name().to_string(),
            config_hash,
            inputs_hash,
            outputs: hash_tree(&self.root, stage.outputs())?,
        };
        manifest.save(&self.root)?;
        Ok(Outcome::Ran)
    }

    fn dir(&self, rel: &str) -> Result<PathBuf> {
        let d = self.root.join(rel);
        fs::create_dir_all(&d)?;
        Ok(d)
    }

    fn seed(&self, name: &str) -> u64 {
        sub_seed(self.config.seed, name)
    }

    /// Per-cloud point counts that need per-sweep codes on held-out instances.
    fn point_counts(&self) -> Vec<usize> {
        let mut p: BTreeSet<usize> = self.config.ablation.points.iter().copied().collect();
        p.insert(self.config.points);
        p.into_iter().collect()
    }

    /// Trained aggregator variants; the main concat/avg model always comes first.
    pub fn variants(&self) -> Vec<(MergeMode, PoolMode)> {
        let a = &self.config.ablation;
        let mut out = vec![(MergeMode::Concat, PoolMode::Avg)];
        for &m in &a.merges {
            for &p in &a.pools {
                if !out.contains(&(m, p)) {
                    out.push((m, p));
                }
            }
        }
        if a.encoder_only && !out.contains(&(MergeMode::EncoderOnly, PoolMode::Avg)) {
            out.push((MergeMode::EncoderOnly, PoolMode::Avg));
        }
        out
    }

    fn shape_index(&self) -> Result<ShapeIndex> {
        let path = self.root.join("shapes/index.json");
        let bytes = fs::read(&path).map_err(|_| Error::Missing(format!("{} not found", path.display())))?;
        Ok(serde_json::from_slice(&bytes)?)
    }

    fn train_instance_ids(&self, index: &ShapeIndex) -> Vec<String> {
        index
            .train
            .iter()
            .flat_map(|id| (0..self.config.train_instances).map(move |k| format!("{id}_{k}")))
            .collect()
    }

    pub fn load_decoder(&self) -> Result<Decoder<f32>> {
        Decoder::load(&self.root.join("decoder/decoder.ckpt"))
    }

    pub fn load_aggregator(&self, merge: MergeMode, pool: PoolMode) -> Result<Aggregator<f32>> {
        let expected = self.config.aggregator_config(merge, pool);
        Aggregator::load(&self.root.join(format!("aggregators/{merge}_{pool}/aggregator.ckpt")), Some(&expected))
    }

    pub fn load_test_instance(&self, id: &str) -> Result<SweepInstance> {
        SweepInstance::load(&self.root.join("sweeps/test").join(id))
    }

    /// Held-out instance ids in order.
    pub fn test_ids(&self) -> Result<Vec<String>> {
        Ok(self.shape_index()?.test)
    }

    /// Per-sweep codes of a held-out instance inferred from `points`-point clouds.
    pub fn load_test_latents(&self, id: &str, points: usize, b: usize) -> Result<Vec<LatentCode>> {
        load_latents(&self.root.join(format!("latents/test/p{points}/{id}")), b)
    }

    /// Ground truth of a held-out instance: all simulated sweeps stacked and filtered.
    pub fn ground_truth(&self, instance: &SweepInstance) -> Result<crate::geometry::PointCloud> {
        build_ground_truth(instance, self.config.eval.sor_k, self.config.eval.sor_std_mult)
    }

    fn eval_seed(&self, id: &str) -> u64 {
        self.seed(&format!("eval/{id}"))
    }

    fn gen_shapes(&self) -> Result<()> {
        let c = &self.config;
        let dir = self.dir("shapes")?;
        let mut index = ShapeIndex {
            train: Vec::new(),
            test: Vec::new(),
        };
        for (split, n, ids) in [("train", c.n_train, &mut index.train), ("test", c.n_test, &mut index.test)] {
            let meshes = gen_shapes(&c.vehicles, n, self.seed(&format!("shapes/{split}")))?;
            for (i, m) in meshes.iter().enumerate() {
                let id = format!("{split}_{i:03}");
                save_mesh(m, &dir.join(format!("{id}.obj")))?;
                ids.push(id);
            }
        }
        fs::write(dir.join("index.json"), serde_json::to_vec_pretty(&index)?)?;
        Ok(())
    }

    fn sample_sdf(&self) -> Result<()> {
        let s = &self.config.samples;
        let dir = self.dir("samples")?;
        for id in self.shape_index()?.train {
            let mesh = load_mesh(&self.root.join(format!("shapes/{id}.obj")))?;
            let set = generate_sdf_samples(
                &id,
                &mesh,
                s.n_surface,
                s.n_uniform,
                &s.offsets,
                self.seed(&format!("samples/{id}")),
            )?;
            set.save(&dir.join(format!("{id}.json")))?;
        }
        Ok(())
    }

    fn train_decoder(&self) -> Result<()> {
        let sets = self
            .shape_index()?
            .train
            .iter()
            .map(|id| SdfSampleSet::load(&self.root.join(format!("samples/{id}.json"))))
            .collect::<Result<Vec<_>>>()?;
        let cfg = StageOneConfig {
            seed: self.seed("stage_one"),
            ..self.config.stage_one.clone()
        };
        let result = train_stage_one::<f32>(&sets, &self.config.decoder, &cfg)?;
        let dir = self.dir("decoder")?;
        result.decoder.save(&dir.join("decoder.ckpt"))?;
        fs::write(dir.join("losses.json"), serde_json::to_vec(&result.epoch_losses)?)?;
        result.codebook.save(&self.dir("codebook")?)?;
        log::info!(
            "stage one: loss {:.5} -> {:.5}",
            result.epoch_losses.first().copied().unwrap_or(f64::NAN),
            result.epoch_losses.last().copied().unwrap_or(f64::NAN)
        );
        Ok(())
    }

    fn gen_sweeps(&self) -> Result<()> {
        let c = &self.config;
        let index = self.shape_index()?;
        let codebook = ShapeCodebook::load(&self.root.join("codebook"))?;
        let load = |id: &str| load_mesh(&self.root.join(format!("shapes/{id}.obj")));
        for id in &index.train {
            let mesh = load(id)?;
            let code = codebook
                .get(id)
                .ok_or_else(|| Error::Missing(format!("no trained code for {id}")))?;
            for k in 0..c.train_instances {
                let inst_id = format!("{id}_{k}");
                let mut inst = generate_instance(id, &mesh, c.sweeps, &c.lidar, self.seed(&format!("sweeps/{inst_id}")))?;
                inst.gt_latent = Some(code.clone());
                inst.save(&self.root.join("sweeps/train").join(&inst_id))?;
            }
        }
        for id in &index.test {
            let inst = generate_instance(id, &load(id)?, c.max_sweeps, &c.lidar, self.seed(&format!("sweeps/{id}")))?;
            inst.save(&self.root.join("sweeps/test").join(id))?;
        }
        Ok(())
    }

    fn infer_latents(&self) -> Result<()> {
        let c = &self.config;
        let decoder = self.load_decoder()?;
        let index = self.shape_index()?;
        let seed = self.seed("infer");
        for inst_id in self.train_instance_ids(&index) {
            let inst = SweepInstance::load(&self.root.join("sweeps/train").join(&inst_id))?;
            let zs = infer_sweep_latents(&decoder, &inst.sweeps, c.points, &c.infer, seed)?;
            save_latents(&self.dir(&format!("latents/train/{inst_id}"))?, &zs)?;
        }
        for id in &index.test {
            let inst = self.load_test_instance(id)?;
            for p in self.point_counts() {
                let zs = infer_sweep_latents(&decoder, &inst.sweeps, p, &c.infer, seed)?;
                save_latents(&self.dir(&format!("latents/test/p{p}/{id}"))?, &zs)?;
            }
            let z = self.infer_stacked(&decoder, &inst.prefix(c.sweeps)?, self.seed(&format!("infer/ms/{id}")))?;
            z.save(&self.dir("latents/ms")?.join(format!("{id}.latent")))?;
        }
        Ok(())
    }

    /// Single inference on the stacked sweeps. Normals are estimated per
    /// sweep and oriented to that sweep's sensor before stacking; the stack
    /// is reduced to `ms_points` by farthest point sampling.
    fn infer_stacked(&self, decoder: &Decoder<f32>, inst: &SweepInstance, seed: u64) -> Result<LatentCode> {
        let mut points: Vec<Point3> = Vec::new();
        let mut normals: Vec<Vector3> = Vec::new();
        for s in &inst.sweeps {
            if s.len() < 3 {
                continue;
            }
            let n = estimate_normals(s, self.config.infer.normal_k.min(s.len() - 1))?;
            points.extend_from_slice(&s.points);
            normals.extend(n.0);
        }
        if points.is_empty() {
            return Err(Error::TooFewPoints { needed: 2, got: 0 });
        }
        let keep = fps_indices(&points, self.config.ms_points.min(points.len()), 0)?;
        let p: Vec<Point3> = keep.iter().map(|&i| points[i]).collect();
        let n: Vec<Vector3> = keep.iter().map(|&i| normals[i]).collect();
        infer_latent_oriented(decoder, &p, &n, &self.config.infer, seed)
    }

    fn train_aggregator(&self) -> Result<()> {
        let c = &self.config;
        let index = self.shape_index()?;
        let data = self
            .train_instance_ids(&index)
            .iter()
            .map(|inst_id| {
                let inst = SweepInstance::load(&self.root.join("sweeps/train").join(inst_id))?;
                let zs = load_latents(&self.root.join(format!("latents/train/{inst_id}")), inst.b())?;
                let mut ex = StageTwoExample::from_instance(&inst, &zs, c.points)?;
                ex.id = inst_id.clone();
                Ok(ex)
            })
            .collect::<Result<Vec<_>>>()?;
        for (merge, pool) in self.variants() {
            let name = format!("{merge}_{pool}");
            let agg = Aggregator::<f32>::new(c.aggregator_config(merge, pool), self.seed(&format!("aggregator_init/{name}")))?;
            let cfg = StageTwoConfig {
                seed: self.seed(&format!("stage_two/{name}")),
                ..c.stage_two.clone()
            };
            let result = train_stage_two(agg, &data, &cfg)?;
            let dir = self.dir(&format!("aggregators/{name}"))?;
            result.aggregator.save(&dir.join("aggregator.ckpt"))?;
            fs::write(dir.join("losses.json"), serde_json::to_vec(&result.epoch_losses)?)?;
            log::info!(
                "stage two {name}: mse {:.3e} -> {:.3e}",
                result.epoch_losses.first().copied().unwrap_or(f64::NAN),
                result.epoch_losses.last().copied().unwrap_or(f64::NAN)
            );
        }
        Ok(())
    }

    fn predict(&self) -> Result<()> {
        let c = &self.config;
        let decoder = self.load_decoder()?;
        let agg = self.load_aggregator(MergeMode::Concat, PoolMode::Avg)?;
        let res = c.mesh_resolution;
        for id in self.test_ids()? {
            let inst = self.load_test_instance(&id)?.prefix(c.sweeps)?;
            let zs = self.load_test_latents(&id, c.points, c.sweeps)?;
            let z = agg.predict_latent(&inst.sweeps, &zs)?;
            z.save(&self.dir("predictions/ours")?.join(format!("{id}.latent")))?;
            save_mesh(&reconstruct(&decoder, &z, res)?, &self.root.join(format!("predictions/ours/{id}.ply")))?;
            let mean = mean_latent_baseline(&zs)?;
            save_mesh(&reconstruct(&decoder, &mean, res)?, &self.dir("predictions/mean")?.join(format!("{id}.ply")))?;
            let ms = LatentCode::load(&self.root.join(format!("latents/ms/{id}.latent")))?;
            save_mesh(&reconstruct(&decoder, &ms, res)?, &self.dir("predictions/ms")?.join(format!("{id}.ply")))?;
            let single = self.dir(&format!("predictions/single/{id}"))?;
            for (i, zi) in zs.iter().enumerate() {
                save_mesh(&reconstruct(&decoder, zi, res)?, &single.join(format!("sweep_{i}.ply")))?;
            }
        }
        Ok(())
    }

    fn eval(&self) -> Result<()> {
        let c = &self.config;
        let e = &c.eval;
        let ids = self.test_ids()?;
        let mut gts = Vec::new();
        for id in &ids {
            gts.push(self.ground_truth(&self.load_test_instance(id)?)?);
        }
        let mut report = EvalReport::default();
        let mesh = |rel: String| load_mesh(&self.root.join(rel));
        for (method, dir) in [(METHOD_OURS, "ours"), (METHOD_SINGLE, "single"), (METHOD_MS, "ms"), (METHOD_MEAN, "mean")] {
            for (id, gt) in ids.iter().zip(&gts) {
                let seed = self.eval_seed(id);
                let row = if method == METHOD_SINGLE {
                    let meshes = (0..c.sweeps)
                        .map(|i| mesh(format!("predictions/single/{id}/sweep_{i}.ply")))
                        .collect::<Result<Vec<_>>>()?;
                    best_single_shot(method, id, &meshes, gt, e.n_samples, e.recall_threshold, seed)?.1
                } else {
                    let m = mesh(format!("predictions/{dir}/{id}.ply"))?;
                    evaluate_method(method, id, &m, gt, e.n_samples, e.recall_threshold, seed)?
                };
                report.push(row);
            }
        }
        report.save(&self.dir("reports")?, "results")?;
        for s in report.summary() {
            log::info!("{}: ACD mean {:.4e}, median {:.4e}, recall {:.3}", s.method, s.acd_mean, s.acd_median, s.recall);
        }
        Ok(())
    }

    fn ablate(&self) -> Result<()> {
        let report = self.run_ablations()?;
        report.save(&self.dir("reports")?, "ablation")
    }

    /// Scores every trained variant at every sweep count and point count,
    /// plus best-single-shot rows, on the held-out instances. All cells share
    /// the ground truth and evaluation seeds of the main report.
    pub fn run_ablations(&self) -> Result<EvalReport> {
        let c = &self.config;
        let e = &c.eval;
        let a = &c.ablation;
        let decoder = self.load_decoder()?;
        let ids = self.test_ids()?;
        let mut instances = Vec::new();
        let mut gts = Vec::new();
        for id in &ids {
            let inst = self.load_test_instance(id)?;
            gts.push(self.ground_truth(&inst)?);
            instances.push(inst);
        }
        let max_b = a.sweeps.iter().copied().max().unwrap_or(c.sweeps);
        let mut report = EvalReport::default();
        let mut variants: Vec<(MergeMode, PoolMode)> = Vec::new();
        for &merge in &a.merges {
            for &pool in &a.pools {
                variants.push((merge, pool));
            }
        }
        if a.encoder_only {
            variants.push((MergeMode::EncoderOnly, PoolMode::Avg));
        }
        for (merge, pool) in variants {
            let trained = self.load_aggregator(merge, pool)?;
            for &p in &a.points {
                let cfg = trained.config().with_points(p);
                let agg = Aggregator::<f32>::from_params(cfg, trained.params().clone())?;
                for &b in &a.sweeps {
                    let method = format!("{merge}_{pool}_B{b}_P{p}");
                    for ((id, inst), gt) in ids.iter().zip(&instances).zip(&gts) {
                        let zs = self.load_test_latents(id, p, b)?;
                        let z = agg.predict_latent(&inst.prefix(b)?.sweeps, &zs)?;
                        let mesh = reconstruct(&decoder, &z, c.mesh_resolution)?;
                        report.push(evaluate_method(&method, id, &mesh, gt, e.n_samples, e.recall_threshold, self.eval_seed(id))?);
                    }
                    log::info!("{method}: ACD mean {:.4e}", report.mean_acd(&method).unwrap_or(f64::NAN));
                }
            }
        }
        for &p in &a.points {
            let mut meshes: Vec<Vec<TriangleMesh>> = Vec::new();
            for id in &ids {
                meshes.push(
                    self.load_test_latents(id, p, max_b)?
                        .iter()
                        .map(|z| reconstruct(&decoder, z, c.mesh_resolution))
                        .collect::<Result<_>>()?,
                );
            }
            for &b in &a.sweeps {
                let method = format!("single_B{b}_P{p}");
                for ((id, m), gt) in ids.iter().zip(&meshes).zip(&gts) {
                    let (_, row) = best_single_shot(&method, id, &m[..b], gt, e.n_samples, e.recall_threshold, self.eval_seed(id))?;
                    report.push(row);
                }
            }
        }
        Ok(report)
    }

    fn export(&self) -> Result<()> {
        let dir = self.dir("export")?;
        for id in self.test_ids()? {
            for method in ["ours", "ms", "mean"] {
                let mesh = load_mesh(&self.root.join(format!("predictions/{method}/{id}.ply")))?;
                save_mesh(&mesh, &dir.join(format!("{id}_{method}.obj")))?;
            }
        }
        let results = EvalReport::load_csv(&self.root.join("reports/results.csv"))?;
        let ablation_path = self.root.join("reports/ablation.csv");
        let ablation = if ablation_path.exists() {
            Some(EvalReport::load_csv(&ablation_path)?)
        } else {
            None
        };
        fs::write(dir.join("index.html"), render_html(&self.config, &results, ablation.as_ref()))?;
        Ok(())
    }
}

fn save_latents(dir: &Path, zs: &[LatentCode]) -> Result<()> {
    for (i, z) in zs.iter().enumerate() {
        z.save(&dir.join(format!("sweep_{i}.latent")))?;
    }
    Ok(())
}

/// The first `b` per-sweep codes stored in `dir`.
fn load_latents(dir: &Path, b: usize) -> Result<Vec<LatentCode>> {
    (0..b)
        .map(|i| {
            let path = dir.join(format!("sweep_{i}.latent"));
            if !path.exists() {
                return Err(Error::Missing(format!("{} not found", path.display())));
            }
            LatentCode::load(&path)
        })
        .collect()
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn summary_table(report: &EvalReport) -> String {
    let mut html = String::from(
        "<table>\n<tr><th>method</th><th>instances</th><th>ACD mean</th><th>ACD median</th><th>Recall</th></tr>\n",
    );
    for s in report.summary() {
        html.push_str(&format!(
            "<tr><td>{}</td><td>{}</td><td>{:.4e}</td><td>{:.4e}</td><td>{:.3}</td></tr>\n",
            escape(&s.method),
            s.instances,
            s.acd_mean,
            s.acd_median,
            s.recall
        ));
    }
    html.push_str("</table>\n");
    html
}

fn render_html(config: &ExperimentConfig, results: &EvalReport, ablation: Option<&EvalReport>) -> String {
    let mut html = String::from(
        "<!DOCTYPE html>\n<html>\n<head><meta charset=\"utf-8\"><title>Reconstruction results</title>\n\
         <style>table{border-collapse:collapse}td,th{border:1px solid #999;padding:2px 8px;text-align:right}</style>\n\
         </head>\n<body>\n",
    );
    html.push_str(&format!(
        "<h1>Reconstruction results</h1>\n<p>profile {}, seed {}, {} sweeps of {} points</p>\n",
        escape(&config.profile),
        config.seed,
        config.sweeps,
        config.points
    ));
    html.push_str("<h2>Methods</h2>\n");
    html.push_str(&summary_table(results));
    if let Some(a) = ablation {
        html.push_str("<h2>Ablations</h2>\n");
        html.push_str(&summary_table(a));
    }
    html.push_str("</body>\n</html>\n");
    html
}
