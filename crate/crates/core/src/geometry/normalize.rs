use serde::{Deserialize, Serialize};

use super::{bounds, Point3, Vector3};
use crate::error::{Error, Result};

/// Uniform scale followed by a translation: `p' = scale·p + translation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitCubeTransform {
    pub scale: f64,
    pub translation: Vector3,
}

impl UnitCubeTransform {
    pub fn identity() -> Self {
        Self {
            scale: 1.0,
            translation: Vector3::zeros(),
        }
    }

    /// Transform mapping the longest bounding-box axis of `points` onto
    /// `[-1, 1]` with the box centered at the origin.
    pub fn fit(points: &[Point3]) -> Result<Self> {
        let (lo, hi) = bounds(points).ok_or(Error::EmptyInput)?;
        let extent = hi - lo;
        let longest = extent.max();
        if !(longest > 0.0) || !longest.is_finite() {
            return Err(Error::Degenerate("bounding box has zero extent".into()));
        }
        let scale = 2.0 / longest;
        let center = nalgebra::center(&lo, &hi);
        Ok(Self {
            scale,
            translation: -center.coords * scale,
        })
    }

    pub fn apply(&self, p: &Point3) -> Point3 {
        Point3::from(p.coords * self.scale + self.translation)
    }

    pub fn invert(&self, p: &Point3) -> Point3 {
        Point3::from((p.coords - self.translation) / self.scale)
    }
}

/// Normalizes points into `[-1, 1]` along their longest axis.
pub fn normalize_points(points: &[Point3]) -> Result<(Vec<Point3>, UnitCubeTransform)> {
    let t = UnitCubeTransform::fit(points)?;
    Ok((points.iter().map(|p| t.apply(p)).collect(), t))
}
