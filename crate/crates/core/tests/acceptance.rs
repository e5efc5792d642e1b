//! End-to-end acceptance run. Every criterion prints one PASS/FAIL line; the
//! process exits nonzero when any criterion fails. Tolerances are pinned here.

mod common;

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use mvsdf::aggregator::{infer_sweep_latents, predict, MergeMode, PoolMode};
use mvsdf::geometry::{fps_indices, Point3, PointCloud};
use mvsdf::lidar::{generate_instance, sample_pose, LidarConfig, Side};
use mvsdf::mesh::io::{load_mesh, to_ply_bytes};
use mvsdf::mesh::{is_watertight, sample_surface, sample_surface_with_faces, MeshSdf};
use mvsdf::metrics::{acd, cd, evaluate_method, recall, EvalReport, DEFAULT_RECALL_THRESHOLD};
use mvsdf::nn::gradcheck::GradCheckReport;
use mvsdf::pipeline::{
    gen_shapes, ExperimentConfig, Pipeline, ProceduralVehicleParams, METHOD_MEAN, METHOD_OURS, METHOD_SINGLE,
};
use mvsdf::sdf_model::{
    generate_sdf_samples, infer_latent_oriented, reconstruct, train_stage_one, DecoderConfig, InferConfig,
    StageOneConfig,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const METRIC_PAIRS: usize = 100;
const METRIC_MAX_POINTS: usize = 200;
const METRIC_BUDGET: Duration = Duration::from_secs(10);
const FPS_CLOUDS: usize = 50;
const FPS_MAX_POINTS: usize = 500;
const FPS_MAX_K: usize = 256;
const FPS_BUDGET: Duration = Duration::from_secs(10);
const GRAD_TOL: f64 = 1e-4;
const GRAD_MIN_CONFIGS: usize = 5;
const GRAD_BUDGET: Duration = Duration::from_secs(60);
const OVERFIT_LOSS: f64 = 0.01;
const OVERFIT_RADIUS_TOL: f64 = 0.05;
const OVERFIT_BUDGET: Duration = Duration::from_secs(120);
const INFER_RATIO: f64 = 2.0;
const INFER_BUDGET: Duration = Duration::from_secs(300);
const DESK_BUDGET: Duration = Duration::from_secs(30 * 60);
const DESK_MIN_GAIN: f64 = 0.10;
const PERM_INSTANCES: usize = 20;
const PERM_TOL: f64 = 1e-9;
const POINTS_SLACK: f64 = 1.25;
const POOL_SLACK: f64 = 1.1;
const SIM_POSES: usize = 1000;
const SIM_SDF_TOL: f64 = 1e-6;
const SIM_VISIBILITY_EVERY: usize = 100;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_cloud(rng: &mut ChaCha8Rng, n: usize) -> PointCloud {
    PointCloud::new(
        (0..n)
            .map(|_| Point3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect(),
    )
}

fn metric_oracles() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for pair in 0..METRIC_PAIRS {
        let nx = rng.random_range(1..=METRIC_MAX_POINTS);
        let ny = rng.random_range(1..=METRIC_MAX_POINTS);
        let x = random_cloud(&mut rng, nx);
        let y = random_cloud(&mut rng, ny);
        let t = rng.random_range(0.0..0.5);
        let dx: Vec<f64> = x.points.iter().map(|p| common::brute_nearest2(p, &y.points)).collect();
        let dy: Vec<f64> = y.points.iter().map(|p| common::brute_nearest2(p, &x.points)).collect();
        let sx: f64 = dx.iter().sum();
        let sy: f64 = dy.iter().sum();
        let rec = dx.iter().filter(|&&d| d <= t).count() as f64 / nx as f64;
        let ok = acd(&x, &y, false).unwrap() == sx
            && acd(&x, &y, true).unwrap() == sx / nx as f64
            && cd(&x, &y).unwrap() == sx + sy
            && recall(&x, &y, t).unwrap() == rec;
        if !ok {
            return Err(format!("pair {pair} ({nx}x{ny}) differs from the exhaustive oracle"));
        }
    }
    let elapsed = start.elapsed();
    check(elapsed < METRIC_BUDGET, format!("{METRIC_PAIRS} pairs exact in {elapsed:.2?}"))
}

fn fps_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    for c in 0..FPS_CLOUDS {
        let n = rng.random_range(1..=FPS_MAX_POINTS);
        let k = rng.random_range(1..=FPS_MAX_K);
        let cloud = random_cloud(&mut rng, n);
        let s = rng.random_range(0..n);
        if fps_indices(&cloud.points, k, s).unwrap() != common::brute_fps(&cloud.points, k, s) {
            return Err(format!("cloud {c} (n={n}, k={k}) differs from the greedy oracle"));
        }
    }
    let elapsed = start.elapsed();
    check(elapsed < FPS_BUDGET, format!("{FPS_CLOUDS} clouds exact in {elapsed:.2?}"))
}

fn gradients() -> Outcome {
    let start = Instant::now();
    let groups: [(&str, Vec<(String, GradCheckReport)>); 4] = [
        ("ops", common::gradchecks::op_checks()),
        ("decoder", common::gradchecks::decoder_checks()),
        ("encoder", common::gradchecks::encoder_checks()),
        ("aggregator", common::gradchecks::aggregator_checks()),
    ];
    let mut worst = 0.0f64;
    for (group, checks) in &groups {
        if checks.len() < GRAD_MIN_CONFIGS {
            return Err(format!("{group}: only {} configurations", checks.len()));
        }
        for (name, report) in checks {
            if !(report.max_rel_error < GRAD_TOL) {
                return Err(format!("{name}: max relative error {:.3e}", report.max_rel_error));
            }
            worst = worst.max(report.max_rel_error);
        }
    }
    let total: usize = groups.iter().map(|(_, c)| c.len()).sum();
    let elapsed = start.elapsed();
    check(
        elapsed < GRAD_BUDGET,
        format!("{total} checks, worst relative error {worst:.2e}, in {elapsed:.2?}"),
    )
}

fn sphere_overfit() -> Outcome {
    let start = Instant::now();
    let config = DecoderConfig {
        latent_dim: 16,
        hidden: 64,
        layers: 4,
        skip_layer: 2,
        delta: 0.1,
        latent_reg: 1e-4,
    };
    let train = StageOneConfig {
        epochs: 150,
        lr: 1e-3,
        latent_lr: 1e-3,
        batch_size: 1024,
        lr_halve_every: 50,
        latent_init_std: 0.01,
        seed: 1,
    };
    let result = train_stage_one::<f32>(&[common::sphere_samples(4096, 2)], &config, &train).unwrap();
    let loss = *result.epoch_losses.last().unwrap();
    let mesh = reconstruct(&result.decoder, result.codebook.get("sphere").unwrap(), 64).unwrap();
    let radius_err = mesh
        .vertices
        .iter()
        .map(|v| (v.coords.norm() - 0.5).abs())
        .fold(0.0, f64::max);
    let watertight = is_watertight(&mesh);
    let elapsed = start.elapsed();
    check(
        loss < OVERFIT_LOSS && radius_err <= OVERFIT_RADIUS_TOL && watertight && elapsed < OVERFIT_BUDGET,
        format!("loss {loss:.4}, max radius error {radius_err:.4}, watertight {watertight}, {elapsed:.2?}"),
    )
}

fn inference_fidelity() -> Outcome {
    let start = Instant::now();
    let desk = ExperimentConfig::desk();
    let meshes = gen_shapes(&ProceduralVehicleParams::default(), 5, 303).unwrap();
    let sets: Vec<_> = meshes
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let s = &desk.samples;
            generate_sdf_samples(&format!("shape_{i}"), m, s.n_surface, s.n_uniform, &s.offsets, 40 + i as u64).unwrap()
        })
        .collect();
    let result = train_stage_one::<f32>(&sets, &desk.decoder, &desk.stage_one).unwrap();
    let mut worst = 0.0f64;
    let mut lines = Vec::new();
    for (i, mesh) in meshes.iter().enumerate() {
        let gt = sample_surface(mesh, 5000, 50 + i as u64).unwrap();
        let score = |m| evaluate_method("m", "s", m, &gt, 30_000, DEFAULT_RECALL_THRESHOLD, 7).unwrap().acd_mean;
        let code = result.codebook.get(&format!("shape_{i}")).unwrap();
        let trained_mesh = reconstruct(&result.decoder, code, desk.mesh_resolution).unwrap();
        let trained = score(&trained_mesh);
        let (points, faces) = sample_surface_with_faces(mesh, 1000, 60 + i as u64).unwrap();
        let normals: Vec<_> = faces.iter().map(|&f| mesh.face_cross(f).normalize()).collect();
        let z = infer_latent_oriented(&result.decoder, &points, &normals, &desk.infer, 70 + i as u64).unwrap();
        let inferred_mesh = reconstruct(&result.decoder, &z, desk.mesh_resolution).unwrap();
        let inferred = score(&inferred_mesh);
        worst = worst.max(inferred / trained);
        lines.push(format!("{inferred:.2e}/{trained:.2e}"));
    }
    let elapsed = start.elapsed();
    check(
        worst <= INFER_RATIO && elapsed < INFER_BUDGET,
        format!("inferred/stage-one ACD {}; worst ratio {worst:.2}, {elapsed:.2?}", lines.join(" ")),
    )
}

fn simulator() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    for i in 0..SIM_POSES {
        let side = if i % 2 == 0 { Side::Positive } else { Side::Negative };
        let p = sample_pose(&mut rng, side);
        let ok = (-180.0..=180.0).contains(&p.theta)
            && side.contains(p.theta)
            && (3.0..=15.0).contains(&p.r)
            && (0.8..=1.2).contains(&p.h);
        if !ok {
            return Err(format!("pose {p:?} violates the constraints"));
        }
    }
    let mesh = gen_shapes(&ProceduralVehicleParams::default(), 1, 405).unwrap().remove(0);
    let sdf = MeshSdf::new(&mesh).unwrap();
    let inst = generate_instance("v", &mesh, 6, &LidarConfig::default(), 406).unwrap();
    let (mut total, mut checked) = (0, 0);
    for sweep in &inst.sweeps {
        let origin = sweep.sensor_origin.unwrap();
        for (j, p) in sweep.points.iter().enumerate() {
            let d = sdf.unsigned(p);
            if d > SIM_SDF_TOL {
                return Err(format!("hit {p:?} is {d:.2e} off the surface"));
            }
            if j % SIM_VISIBILITY_EVERY == 0 {
                if !common::visible(&mesh, &origin, p) {
                    return Err(format!("hit {p:?} is occluded from {origin:?}"));
                }
                checked += 1;
            }
            total += 1;
        }
    }
    Ok(format!("{SIM_POSES} poses valid; {total} hits on the surface; {checked} visibility checks"))
}

struct DeskRun {
    pipeline: Pipeline,
    elapsed: Duration,
    results: EvalReport,
    ablation: EvalReport,
}

fn desk_run(dir: &Path) -> DeskRun {
    let pipeline = Pipeline::new(ExperimentConfig::desk(), dir).unwrap();
    let start = Instant::now();
    pipeline.run_pipeline().unwrap();
    let elapsed = start.elapsed();
    pipeline.run(mvsdf::pipeline::Stage::Ablate).unwrap();
    let results = EvalReport::load_csv(&dir.join("reports/results.csv")).unwrap();
    let ablation = EvalReport::load_csv(&dir.join("reports/ablation.csv")).unwrap();
    DeskRun {
        pipeline,
        elapsed,
        results,
        ablation,
    }
}

fn mean_of(report: &EvalReport, method: &str) -> f64 {
    report
        .mean_acd(method)
        .unwrap_or_else(|| panic!("no rows for method {method}"))
}

fn multi_sweep_gain(run: &DeskRun) -> Outcome {
    let ours = mean_of(&run.results, METHOD_OURS);
    let single = mean_of(&run.results, METHOD_SINGLE);
    let mean = mean_of(&run.results, METHOD_MEAN);
    let gain = 1.0 - ours / single;
    let rows = run.results.rows.len();
    let methods = run.results.methods().len();
    check(
        ours < single && ours < mean && gain >= DESK_MIN_GAIN && run.elapsed < DESK_BUDGET && rows == 20 && methods == 4,
        format!(
            "ours {ours:.3e}, best single {single:.3e} ({:.1}% lower), mean latent {mean:.3e}; {rows} rows; {:.1?}",
            100.0 * gain,
            run.elapsed
        ),
    )
}

fn permutation_invariance(run: &DeskRun) -> Outcome {
    let p = &run.pipeline;
    let c = p.config();
    let decoder = p.load_decoder().unwrap();
    let agg = p.load_aggregator(MergeMode::Concat, PoolMode::Avg).unwrap();
    let ids = p.test_ids().unwrap();
    let cheap = InferConfig {
        iters: 20,
        ..c.infer.clone()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let mut worst = 0.0f64;
    for k in 0..PERM_INSTANCES {
        let id = &ids[k % ids.len()];
        let mesh = load_mesh(&p.root().join(format!("shapes/{id}.obj"))).unwrap();
        let inst = generate_instance(id, &mesh, c.sweeps, &c.lidar, 7000 + k as u64).unwrap();
        let mut order: Vec<usize> = (0..inst.b()).collect();
        order.shuffle(&mut rng);
        let shuffled = inst.permuted(&order).unwrap();
        let (a, b) = if k < 3 {
            // Full path, including per-sweep inference on the shuffled sweeps.
            let a = predict(&inst, &decoder, &agg, None, &cheap, c.mesh_resolution, 9).unwrap();
            let b = predict(&shuffled, &decoder, &agg, None, &cheap, c.mesh_resolution, 9).unwrap();
            (a, b)
        } else {
            let zs = infer_sweep_latents(&decoder, &inst.sweeps, c.points, &cheap, 9).unwrap();
            let zs_shuffled: Vec<_> = order.iter().map(|&i| zs[i].clone()).collect();
            let a = predict(&inst, &decoder, &agg, Some(&zs), &cheap, c.mesh_resolution, 9).unwrap();
            let b = predict(&shuffled, &decoder, &agg, Some(&zs_shuffled), &cheap, c.mesh_resolution, 9).unwrap();
            (a, b)
        };
        let diff = a.latent.max_abs_diff(&b.latent);
        worst = worst.max(diff);
        if diff > PERM_TOL || to_ply_bytes(&a.mesh) != to_ply_bytes(&b.mesh) {
            return Err(format!("instance {k}: code change {diff:.2e} or mesh bytes differ"));
        }
    }
    Ok(format!("{PERM_INSTANCES} shuffled instances; max code change {worst:.1e}; meshes byte-identical"))
}

fn sweep_count(run: &DeskRun) -> Outcome {
    let p = run.pipeline.config().points;
    let b3 = mean_of(&run.ablation, &format!("concat_avg_B3_P{p}"));
    let b6 = mean_of(&run.ablation, &format!("concat_avg_B6_P{p}"));
    let b9 = mean_of(&run.ablation, &format!("concat_avg_B9_P{p}"));
    check(b9 <= b3, format!("B=3 {b3:.3e}, B=6 {b6:.3e}, B=9 {b9:.3e}"))
}

fn point_count(run: &DeskRun) -> Outcome {
    let b = run.pipeline.config().sweeps;
    let a128 = mean_of(&run.ablation, &format!("concat_avg_B{b}_P128"));
    let a256 = mean_of(&run.ablation, &format!("concat_avg_B{b}_P256"));
    let s128 = mean_of(&run.ablation, &format!("single_B{b}_P128"));
    let s256 = mean_of(&run.ablation, &format!("single_B{b}_P256"));
    check(
        a128 <= POINTS_SLACK * a256,
        format!("ours 128 pts {a128:.3e} vs 256 pts {a256:.3e}; best single {s128:.3e} vs {s256:.3e} (recorded)"),
    )
}

fn pooling(run: &DeskRun) -> Outcome {
    let c = run.pipeline.config();
    let (b, p) = (c.sweeps, c.points);
    let avg = mean_of(&run.ablation, &format!("concat_avg_B{b}_P{p}"));
    let max = mean_of(&run.ablation, &format!("concat_max_B{b}_P{p}"));
    let ours = mean_of(&run.results, METHOD_OURS);
    check(
        avg <= POOL_SLACK * max && avg == ours,
        format!("avg {avg:.3e}, max {max:.3e}; avg cell equals main result: {}", avg == ours),
    )
}

fn watertight(run: &DeskRun) -> Outcome {
    let mut stack = vec![run.pipeline.root().join("predictions")];
    let (mut total, mut closed) = (0, 0);
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if path.extension().is_some_and(|e| e == "ply") {
                total += 1;
                if is_watertight(&load_mesh(&path).unwrap()) {
                    closed += 1;
                }
            }
        }
    }
    check(total > 0 && closed == total, format!("{closed}/{total} predicted meshes watertight"))
}

fn determinism(first: &Path) -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let pipeline = Pipeline::new(ExperimentConfig::desk(), dir.path()).unwrap();
    pipeline.run_pipeline().unwrap();
    let a = fs::read(first.join("reports/results.csv")).unwrap();
    let b = fs::read(dir.path().join("reports/results.csv")).unwrap();
    check(a == b, format!("results.csv ({} bytes) identical across fresh runs: {}", a.len(), a == b))
}

fn run_criterion(n: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into());
        Err(format!("panic: {msg}"))
    });
    let (tag, detail) = match &outcome {
        Ok(d) => ("PASS", d),
        Err(d) => ("FAIL", d),
    };
    println!("criterion {n:>2} {tag} {name}: {detail} [{:.1?}]", start.elapsed());
    outcome.is_ok()
}

fn main() {
    let mut passed = Vec::new();
    passed.push(run_criterion(1, "metric oracles", metric_oracles));
    passed.push(run_criterion(2, "fps oracle", fps_oracle));
    passed.push(run_criterion(3, "gradient checks", gradients));
    passed.push(run_criterion(4, "single-shape overfit", sphere_overfit));
    passed.push(run_criterion(5, "latent inference fidelity", inference_fidelity));

    let dir = tempfile::tempdir().unwrap();
    let root: PathBuf = dir.path().to_path_buf();
    let run = panic::catch_unwind(AssertUnwindSafe(|| desk_run(&root)));
    match &run {
        Ok(run) => {
            passed.push(run_criterion(6, "multi-sweep gain", || multi_sweep_gain(run)));
            passed.push(run_criterion(7, "permutation invariance", || permutation_invariance(run)));
            passed.push(run_criterion(8, "sweep count", || sweep_count(run)));
            passed.push(run_criterion(9, "point count", || point_count(run)));
            passed.push(run_criterion(10, "pooling", || pooling(run)));
            passed.push(run_criterion(11, "watertight predictions", || watertight(run)));
        }
        Err(_) => {
            for (n, name) in [
                (6, "multi-sweep gain"),
                (7, "permutation invariance"),
                (8, "sweep count"),
                (9, "point count"),
                (10, "pooling"),
                (11, "watertight predictions"),
            ] {
                passed.push(run_criterion(n, name, || Err("desk pipeline failed".into())));
            }
        }
    }
    passed.push(run_criterion(12, "simulator soundness", simulator));
    passed.push(run_criterion(13, "determinism", || match &run {
        Ok(_) => determinism(&root),
        Err(_) => Err("desk pipeline failed".into()),
    }));

    let ok = passed.iter().filter(|&&p| p).count();
    println!("acceptance: {ok}/{} criteria passed", passed.len());
    if ok != passed.len() {
        std::process::exit(1);
    }
}
