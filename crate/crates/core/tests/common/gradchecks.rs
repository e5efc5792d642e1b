//! Finite-difference checks over random configurations, shared by the unit
//! level tests and the acceptance run.

use mvsdf::aggregator::{Aggregator, AggregatorConfig, EncoderConfig, MergeMode, PoolMode};
use mvsdf::nn::gradcheck::{check, GradCheckReport};
use mvsdf::nn::{Graph, ParameterSet, Var};
use mvsdf::sdf_model::{Decoder, DecoderConfig};
use mvsdf::Result;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const STEP: f64 = 1e-5;
pub const CONFIGS: u64 = 5;

fn rand_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Array2<f64> {
    Array2::from_shape_fn((r, c), |_| rng.random_range(-1.0..1.0))
}

/// Random weights turn any tensor into a scalar with distinct partials.
fn weighted_sum(g: &mut Graph<f64>, v: Var, rng: &mut ChaCha8Rng) -> Result<Var> {
    let (r, c) = g.shape(v);
    let w = g.constant(rand_matrix(rng, r, c));
    let p = g.mul(v, w)?;
    Ok(g.sum(p))
}

fn jitter(params: &mut ParameterSet<f64>, rng: &mut ChaCha8Rng, scale: f64) {
    for id in params.ids().collect::<Vec<_>>() {
        params.value_mut(id).mapv_inplace(|v| v + rng.random_range(-scale..scale));
    }
}

type OpBuilder = fn(&mut Graph<f64>, &[Var], &mut ChaCha8Rng) -> Result<Var>;

/// Every differentiable graph operation, each wrapped into a scalar. The
/// closures receive their inputs as graph variables.
pub fn op_checks() -> Vec<(String, GradCheckReport)> {
    // (name, input shapes from (n, m, k), builder)
    let ops: Vec<(&str, fn(usize, usize, usize) -> Vec<(usize, usize)>, OpBuilder)> = vec![
        ("matmul_t", |n, m, k| vec![(n, k), (m, k)], |g, v, r| {
            let y = g.matmul_t(v[0], v[1])?;
            weighted_sum(g, y, r)
        }),
        ("add", |n, m, _| vec![(n, m), (n, m)], |g, v, r| {
            let y = g.add(v[0], v[1])?;
            weighted_sum(g, y, r)
        }),
        ("sub", |n, m, _| vec![(n, m), (n, m)], |g, v, r| {
            let y = g.sub(v[0], v[1])?;
            weighted_sum(g, y, r)
        }),
        ("mul", |n, m, _| vec![(n, m), (n, m)], |g, v, r| {
            let y = g.mul(v[0], v[1])?;
            weighted_sum(g, y, r)
        }),
        ("add_row", |n, m, _| vec![(n, m), (1, m)], |g, v, r| {
            let y = g.add_row(v[0], v[1])?;
            weighted_sum(g, y, r)
        }),
        ("scale", |n, m, _| vec![(n, m)], |g, v, r| {
            let y = g.scale(v[0], -1.75);
            weighted_sum(g, y, r)
        }),
        ("relu", |n, m, _| vec![(n, m)], |g, v, r| {
            let y = g.relu(v[0]);
            weighted_sum(g, y, r)
        }),
        ("tanh", |n, m, _| vec![(n, m)], |g, v, r| {
            let y = g.tanh(v[0]);
            weighted_sum(g, y, r)
        }),
        ("concat_cols", |n, m, k| vec![(n, m), (n, k)], |g, v, r| {
            let y = g.concat_cols(&[v[0], v[1]])?;
            weighted_sum(g, y, r)
        }),
        ("concat_rows", |n, m, k| vec![(n, m), (k, m)], |g, v, r| {
            let y = g.concat_rows(&[v[0], v[1]])?;
            weighted_sum(g, y, r)
        }),
        ("tile_rows", |n, m, _| vec![(1, m + n)], |g, v, r| {
            let y = g.tile_rows(v[0], 4)?;
            weighted_sum(g, y, r)
        }),
        ("maxpool_rows", |n, m, _| vec![(n, m)], |g, v, r| {
            let y = g.maxpool_rows(v[0])?;
            weighted_sum(g, y, r)
        }),
        ("avgpool_rows", |n, m, _| vec![(n, m)], |g, v, r| {
            let y = g.avgpool_rows(v[0])?;
            weighted_sum(g, y, r)
        }),
        ("sum", |n, m, _| vec![(n, m)], |g, v, _| Ok(g.sum(v[0]))),
        ("mean", |n, m, _| vec![(n, m)], |g, v, _| Ok(g.mean(v[0]))),
        ("squared_norm", |n, m, _| vec![(n, m)], |g, v, _| Ok(g.squared_norm(v[0]))),
        ("clamped_l1_mean", |n, _, _| vec![(n, 1)], |g, v, r| {
            let t = rand_matrix(r, g.shape(v[0]).0, 1).mapv(|x| 0.3 * x);
            g.clamped_l1_mean(v[0], t, 0.5)
        }),
        ("mse", |n, m, _| vec![(n, m), (n, m)], |g, v, _| g.mse(v[0], v[1])),
    ];
    let mut out = Vec::new();
    for (name, shapes, build) in ops {
        for seed in 0..CONFIGS {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let (n, m, k) = (rng.random_range(1..6), rng.random_range(1..6), rng.random_range(1..5));
            let inputs: Vec<Array2<f64>> = shapes(n, m, k)
                .into_iter()
                .map(|(r, c)| rand_matrix(&mut rng, r, c))
                .collect();
            let weight_seed = rng.random::<u64>();
            let report = check(&ParameterSet::new(), &inputs, STEP, |g, _, v| {
                let mut r = ChaCha8Rng::seed_from_u64(weight_seed);
                build(g, v, &mut r)
            })
            .expect("op check runs");
            out.push((format!("{name}#{seed}"), report));
        }
    }
    out
}

pub fn decoder_checks() -> Vec<(String, GradCheckReport)> {
    (0..CONFIGS)
        .map(|seed| {
            let cfg = DecoderConfig {
                latent_dim: 3 + seed as usize,
                hidden: 6,
                layers: 3 + (seed as usize % 2),
                skip_layer: 1 + (seed as usize % 2),
                delta: 0.5,
                latent_reg: 1e-2,
            };
            let mut dec = Decoder::<f64>::new(cfg.clone(), seed).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
            jitter(dec.params_mut(), &mut rng, 0.1);
            let z = rand_matrix(&mut rng, 1, cfg.latent_dim).mapv(|v| 0.5 * v);
            let x = rand_matrix(&mut rng, 7, 3);
            let target = rand_matrix(&mut rng, 7, 1).mapv(|v| 0.3 * v);
            let report = check(dec.params(), &[z, x], STEP, |g, p, v| {
                let d = Decoder::from_params(cfg.clone(), p.clone())?;
                let y = d.forward(g, v[0], v[1])?;
                // A smooth loss keeps the check away from clamp kinks.
                let t = g.constant(target.clone());
                let l = g.mse(y, t)?;
                let zn = g.squared_norm(v[0]);
                let r = g.scale(zn, 1e-2);
                g.add(l, r)
            })
            .unwrap();
            (format!("decoder#{seed}"), report)
        })
        .collect()
}

fn random_aggregator_config(rng: &mut ChaCha8Rng, seed: u64) -> AggregatorConfig {
    let stages = 1 + (seed as usize % 4);
    let widths: Vec<usize> = (0..stages).map(|_| rng.random_range(2..6)).collect();
    let latent_dim = rng.random_range(2..5);
    let base = AggregatorConfig::new(EncoderConfig { widths, points: rng.random_range(4..9) }, latent_dim);
    let merge = [MergeMode::Concat, MergeMode::Multiply, MergeMode::EncoderOnly][seed as usize % 3];
    let pool = [PoolMode::Avg, PoolMode::Max][(seed as usize / 2) % 2];
    base.with_merge(merge).with_pool(pool)
}

fn random_aggregator(cfg: &AggregatorConfig, seed: u64, rng: &mut ChaCha8Rng) -> Aggregator<f64> {
    let mut agg = Aggregator::<f64>::new(cfg.clone(), seed).unwrap();
    // Fresh mappings are partly zero; random weights exercise every path.
    jitter(agg.params_mut(), rng, 0.5);
    agg
}

pub fn encoder_checks() -> Vec<(String, GradCheckReport)> {
    (0..CONFIGS)
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(2000 + seed);
            let cfg = random_aggregator_config(&mut rng, seed);
            let agg = random_aggregator(&cfg, seed, &mut rng);
            let x = rand_matrix(&mut rng, cfg.encoder.points, 3);
            let w = rand_matrix(&mut rng, 1, cfg.encoder.feature_dim());
            let report = check(agg.params(), &[x], STEP, |g, p, v| {
                let a = Aggregator::from_params(cfg.clone(), p.clone())?;
                let f = a.encode(g, v[0])?;
                let wv = g.constant(w.clone());
                let y = g.mul(f, wv)?;
                Ok(g.sum(y))
            })
            .unwrap();
            (format!("encoder#{seed}:{:?}", cfg.encoder.widths), report)
        })
        .collect()
}

pub fn aggregator_checks() -> Vec<(String, GradCheckReport)> {
    (0..CONFIGS)
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(3000 + seed);
            let cfg = random_aggregator_config(&mut rng, seed);
            let agg = random_aggregator(&cfg, seed, &mut rng);
            let b = rng.random_range(1..4);
            let mut inputs = Vec::new();
            for _ in 0..b {
                inputs.push(rand_matrix(&mut rng, cfg.encoder.points, 3));
            }
            for _ in 0..b {
                inputs.push(rand_matrix(&mut rng, 1, cfg.latent_dim));
            }
            let target = rand_matrix(&mut rng, 1, cfg.latent_dim);
            let report = check(agg.params(), &inputs, STEP, |g, p, v| {
                let a = Aggregator::from_params(cfg.clone(), p.clone())?;
                let pred = a.forward(g, &v[..b], &v[b..])?;
                let t = g.constant(target.clone());
                g.mse(pred, t)
            })
            .unwrap();
            (format!("aggregator#{seed}:{}/{}/B={b}", cfg.merge, cfg.pool), report)
        })
        .collect()
}
