//! Point-cloud primitives: farthest point sampling, normalization, outlier
//! removal, normal estimation and sweep stacking.

mod fps;
pub mod io;
mod kdtree;
mod normalize;
mod normals;
mod outliers;

pub use fps::{fps, fps_indices};
pub use kdtree::KdTree;
pub use normalize::{normalize_points, UnitCubeTransform};
pub use normals::{estimate_normals, NormalSet, DEFAULT_NORMAL_K};
pub use outliers::{statistical_outlier_removal, DEFAULT_SOR_K, DEFAULT_SOR_STD_MULT};

use crate::error::{Error, Result};

pub type Point3 = nalgebra::Point3<f64>;
pub type Vector3 = nalgebra::Vector3<f64>;

/// An ordered set of points, optionally tagged with the sensor position it
/// was observed from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3>,
    pub sensor_origin: Option<Point3>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>) -> Self {
        Self {
            points,
            sensor_origin: None,
        }
    }

    pub fn with_origin(points: Vec<Point3>, origin: Point3) -> Self {
        Self {
            points,
            sensor_origin: Some(origin),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.points.iter().all(|p| p.coords.iter().all(|c| c.is_finite()))
            && self
                .sensor_origin
                .is_none_or(|o| o.coords.iter().all(|c| c.is_finite()))
    }

    /// Axis-aligned bounds `(min, max)`; `None` for an empty cloud.
    pub fn bounds(&self) -> Option<(Point3, Point3)> {
        bounds(&self.points)
    }
}

pub(crate) fn bounds(points: &[Point3]) -> Option<(Point3, Point3)> {
    let first = *points.first()?;
    Some(points.iter().fold((first, first), |(lo, hi), p| {
        (lo.inf(p), hi.sup(p))
    }))
}

/// Concatenates sweeps that already share one object frame. Duplicates are
/// kept and the sensor origin is dropped.
pub fn stack_sweeps(sweeps: &[PointCloud]) -> Result<PointCloud> {
    if sweeps.is_empty() {
        return Err(Error::EmptyInput);
    }
    let points = sweeps.iter().flat_map(|s| s.points.iter().copied()).collect();
    Ok(PointCloud::new(points))
}
