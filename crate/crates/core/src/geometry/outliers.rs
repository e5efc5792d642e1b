use super::{KdTree, PointCloud};

pub const DEFAULT_SOR_K: usize = 20;
pub const DEFAULT_SOR_STD_MULT: f64 = 2.0;

/// Drops points whose mean distance to their `k` nearest neighbours exceeds
/// `mean + std_mult·std` over the whole cloud. Survivor order is preserved.
///
/// Clouds with at most `k` points are returned unchanged.
pub fn statistical_outlier_removal(cloud: &PointCloud, k: usize, std_mult: f64) -> PointCloud {
    let k = k.max(1);
    let n = cloud.len();
    if n <= k {
        return cloud.clone();
    }
    let tree = KdTree::new(&cloud.points);
    let mean_dist: Vec<f64> = cloud
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            // k + 1 because the query point finds itself.
            let nn = tree.knn(p, k + 1);
            let mut total = 0.0;
            let mut used = 0;
            for (j, d2) in nn {
                if j == i || used == k {
                    continue;
                }
                total += d2.sqrt();
                used += 1;
            }
            total / used as f64
        })
        .collect();
    let mean = mean_dist.iter().sum::<f64>() / n as f64;
    let var = mean_dist.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n as f64;
    let threshold = mean + std_mult * var.sqrt();
    PointCloud {
        points: cloud
            .points
            .iter()
            .zip(&mean_dist)
            .filter(|(_, &d)| d <= threshold)
            .map(|(p, _)| *p)
            .collect(),
        sensor_origin: cloud.sensor_origin,
    }
}
