use nalgebra::{Matrix3, SymmetricEigen};

use super::{KdTree, PointCloud, Vector3};
use crate::error::{Error, Result};

pub const DEFAULT_NORMAL_K: usize = 10;

/// One unit normal per point of the cloud it was estimated from.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalSet(pub Vec<Vector3>);

impl NormalSet {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// PCA normals from the `k` nearest neighbours (the point included), flipped
/// to face the sensor origin.
pub fn estimate_normals(cloud: &PointCloud, k: usize) -> Result<NormalSet> {
    let origin = cloud.sensor_origin.ok_or(Error::MissingSensorOrigin)?;
    if cloud.len() <= k {
        return Err(Error::TooFewPoints {
            needed: k,
            got: cloud.len(),
        });
    }
    let tree = KdTree::new(&cloud.points);
    let normals = cloud
        .points
        .iter()
        .map(|p| {
            let nn = tree.knn(p, k);
            let centroid = nn
                .iter()
                .fold(Vector3::zeros(), |acc, &(j, _)| acc + cloud.points[j].coords)
                / nn.len() as f64;
            let mut cov = Matrix3::zeros();
            for &(j, _) in &nn {
                let d = cloud.points[j].coords - centroid;
                cov += d * d.transpose();
            }
            let eig = SymmetricEigen::new(cov);
            let smallest = eig.eigenvalues.imin();
            let mut n: Vector3 = eig.eigenvectors.column(smallest).into_owned();
            let norm = n.norm();
            n = if norm > 0.0 { n / norm } else { Vector3::z() };
            if n.dot(&(origin - p)) < 0.0 {
                n = -n;
            }
            n
        })
        .collect();
    Ok(NormalSet(normals))
}
