use super::{PointCloud, Point3};
use crate::error::{Error, Result};

/// Greedy farthest point sampling seeded at `start_index`.
///
/// Returns indices in selection order. Each new index maximizes the distance
/// to the already selected set; ties go to the lowest index.
pub fn fps_indices(points: &[Point3], k: usize, start_index: usize) -> Result<Vec<usize>> {
    if points.is_empty() {
        return Err(Error::EmptyInput);
    }
    if start_index >= points.len() {
        return Err(Error::Config(format!(
            "fps start index {start_index} out of range for {} points",
            points.len()
        )));
    }
    let k = k.min(points.len());
    let mut selected = Vec::with_capacity(k);
    if k == 0 {
        return Ok(selected);
    }
    let mut min_d = vec![f64::INFINITY; points.len()];
    let mut current = start_index;
    selected.push(current);
    while selected.len() < k {
        let c = points[current];
        let mut best = usize::MAX;
        let mut best_d = f64::NEG_INFINITY;
        for (i, p) in points.iter().enumerate() {
            let d = (p - c).norm_squared();
            if d < min_d[i] {
                min_d[i] = d;
            }
            if min_d[i] > best_d {
                best_d = min_d[i];
                best = i;
            }
        }
        current = best;
        selected.push(current);
    }
    Ok(selected)
}

/// Farthest point sampling of `min(k, |cloud|)` points; keeps the sensor origin.
pub fn fps(cloud: &PointCloud, k: usize, start_index: usize) -> Result<PointCloud> {
    let idx = fps_indices(&cloud.points, k, start_index)?;
    Ok(PointCloud {
        points: idx.into_iter().map(|i| cloud.points[i]).collect(),
        sensor_origin: cloud.sensor_origin,
    })
}
