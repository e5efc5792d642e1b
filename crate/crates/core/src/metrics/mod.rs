//! Reconstruction metrics and evaluation reports.

mod report;

pub use report::{EvalReport, EvalRow, MethodSummary};

use crate::error::{Error, Result};
use crate::geometry::{stack_sweeps, statistical_outlier_removal, KdTree, Point3, PointCloud};
use crate::lidar::SweepInstance;
use crate::mesh::{sample_surface, TriangleMesh};

pub const DEFAULT_RECALL_THRESHOLD: f64 = 0.1;
pub const DEFAULT_EVAL_SAMPLES: usize = 30_000;

fn nearest_sq(xs: &[Point3], ys: &[Point3]) -> Result<Vec<f64>> {
    if xs.is_empty() || ys.is_empty() {
        return Err(Error::EmptyInput);
    }
    let tree = KdTree::new(ys);
    Ok(xs.iter().map(|x| tree.nearest(x).expect("non-empty tree").1).collect())
}

/// Asymmetric Chamfer distance: summed squared distance from each point of
/// `x` to its nearest neighbour in `y`, divided by `|x|` when `normalize`.
pub fn acd(x: &PointCloud, y: &PointCloud, normalize: bool) -> Result<f64> {
    let d = nearest_sq(&x.points, &y.points)?;
    let sum: f64 = d.iter().sum();
    Ok(if normalize { sum / d.len() as f64 } else { sum })
}

/// Fraction of `x` whose squared nearest-neighbour distance to `y` is at most `t`.
pub fn recall(x: &PointCloud, y: &PointCloud, t: f64) -> Result<f64> {
    let d = nearest_sq(&x.points, &y.points)?;
    Ok(d.iter().filter(|&&v| v <= t).count() as f64 / d.len() as f64)
}

/// Symmetric Chamfer distance in sum form.
pub fn cd(x: &PointCloud, y: &PointCloud) -> Result<f64> {
    Ok(acd(x, y, false)? + acd(y, x, false)?)
}

/// Stacked sweeps with statistical outliers removed.
pub fn build_ground_truth(instance: &SweepInstance, k: usize, std_mult: f64) -> Result<PointCloud> {
    Ok(statistical_outlier_removal(&stack_sweeps(&instance.sweeps)?, k, std_mult))
}

/// Scores a reconstruction against ground-truth points using `n_samples`
/// surface samples of the mesh. Recall counts squared distances up to
/// `recall_threshold`. An empty mesh scores infinite ACD and zero recall.
pub fn evaluate_method(
    method: &str,
    instance: &str,
    mesh: &TriangleMesh,
    gt: &PointCloud,
    n_samples: usize,
    recall_threshold: f64,
    seed: u64,
) -> Result<EvalRow> {
    if gt.is_empty() {
        return Err(Error::EmptyInput);
    }
    if mesh.is_empty() {
        log::warn!("{method} produced an empty mesh for {instance}");
        return Ok(EvalRow {
            method: method.to_string(),
            instance: instance.to_string(),
            acd_sum: f64::INFINITY,
            acd_mean: f64::INFINITY,
            recall: 0.0,
            cd: None,
        });
    }
    let y = sample_surface(mesh, n_samples, seed)?;
    let d = nearest_sq(&gt.points, &y.points)?;
    let sum: f64 = d.iter().sum();
    Ok(EvalRow {
        method: method.to_string(),
        instance: instance.to_string(),
        acd_sum: sum,
        acd_mean: sum / d.len() as f64,
        recall: d.iter().filter(|&&v| v <= recall_threshold).count() as f64 / d.len() as f64,
        cd: None,
    })
}

/// The single-sweep reconstruction with the lowest mean-per-point ACD
/// (lowest index on ties). Every mesh is scored with the same sample seed.
pub fn best_single_shot(
    method: &str,
    instance: &str,
    meshes: &[TriangleMesh],
    gt: &PointCloud,
    n_samples: usize,
    recall_threshold: f64,
    seed: u64,
) -> Result<(usize, EvalRow)> {
    let mut best: Option<(usize, EvalRow)> = None;
    for (i, m) in meshes.iter().enumerate() {
        let row = evaluate_method(method, instance, m, gt, n_samples, recall_threshold, seed)?;
        if best.as_ref().is_none_or(|(_, b)| row.acd_mean < b.acd_mean) {
            best = Some((i, row));
        }
    }
    best.ok_or(Error::EmptyInput)
}
