use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::Point3;

/// Signed distances sampled on a regular lattice spanning an axis-aligned
/// box. Lattice nodes sit on the box corners; values are stored x-fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct SdfGrid {
    pub resolution: [u32; 3],
    /// `[xmin, ymin, zmin, xmax, ymax, zmax]`
    pub extent: [f64; 6],
    pub values: Vec<f64>,
}

pub const DEFAULT_EXTENT: [f64; 6] = [-1.1, -1.1, -1.1, 1.1, 1.1, 1.1];

impl SdfGrid {
    pub fn new(resolution: [u32; 3], extent: [f64; 6], values: Vec<f64>) -> Result<Self> {
        let g = Self {
            resolution,
            extent,
            values,
        };
        g.validate()?;
        Ok(g)
    }

    /// Evaluates `f` at every node, x-fastest.
    pub fn from_fn(resolution: u32, extent: [f64; 6], mut f: impl FnMut(&Point3) -> f64) -> Result<Self> {
        let res = [resolution; 3];
        let mut values = Vec::with_capacity((resolution as usize).pow(3));
        let proto = Self {
            resolution: res,
            extent,
            values: Vec::new(),
        };
        for k in 0..resolution as usize {
            for j in 0..resolution as usize {
                for i in 0..resolution as usize {
                    values.push(f(&proto.node(i, j, k)));
                }
            }
        }
        Self::new(res, extent, values)
    }

    /// Builds the grid from values computed elsewhere for `nodes()`.
    pub fn nodes_for(resolution: u32, extent: [f64; 6]) -> Vec<Point3> {
        let proto = Self {
            resolution: [resolution; 3],
            extent,
            values: Vec::new(),
        };
        proto.nodes()
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution.iter().any(|&r| r < 2) {
            return Err(Error::shape("grid resolution must be at least 2"));
        }
        let n: usize = self.resolution.iter().map(|&r| r as usize).product();
        if self.values.len() != n {
            return Err(Error::shape(format!(
                "grid has {} values, expected {n}",
                self.values.len()
            )));
        }
        if (0..3).any(|a| !(self.extent[a + 3] > self.extent[a])) {
            return Err(Error::shape("grid extent must have positive size"));
        }
        if self.values.iter().any(|v| !v.is_finite()) || self.extent.iter().any(|v| !v.is_finite()) {
            return Err(Error::Degenerate("non-finite grid value".into()));
        }
        Ok(())
    }

    pub fn spacing(&self) -> [f64; 3] {
        std::array::from_fn(|a| {
            (self.extent[a + 3] - self.extent[a]) / (self.resolution[a] - 1) as f64
        })
    }

    /// Largest node spacing.
    pub fn cell_width(&self) -> f64 {
        self.spacing().into_iter().fold(0.0, f64::max)
    }

    pub fn node(&self, i: usize, j: usize, k: usize) -> Point3 {
        let s = self.spacing();
        Point3::new(
            self.extent[0] + i as f64 * s[0],
            self.extent[1] + j as f64 * s[1],
            self.extent[2] + k as f64 * s[2],
        )
    }

    pub fn nodes(&self) -> Vec<Point3> {
        let [nx, ny, nz] = self.resolution.map(|r| r as usize);
        let mut out = Vec::with_capacity(nx * ny * nz);
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    out.push(self.node(i, j, k));
                }
            }
        }
        out
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        let nx = self.resolution[0] as usize;
        let ny = self.resolution[1] as usize;
        (k * ny + j) * nx + i
    }

    pub fn value(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.index(i, j, k)]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + 48 + 8 * self.values.len());
        for r in self.resolution {
            out.extend_from_slice(&r.to_le_bytes());
        }
        for e in self.extent {
            out.extend_from_slice(&e.to_le_bytes());
        }
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        if bytes.len() < 60 {
            return Err(Error::parse(path, 1, "truncated grid header"));
        }
        let u = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let f = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let resolution = [u(0), u(4), u(8)];
        let extent: [f64; 6] = std::array::from_fn(|i| f(12 + 8 * i));
        let n = resolution
            .iter()
            .try_fold(1usize, |acc, &r| acc.checked_mul(r as usize))
            .ok_or_else(|| Error::parse(path, 1, "grid too large"))?;
        if bytes.len() != 60 + 8 * n {
            return Err(Error::parse(
                path,
                1,
                format!("expected {} value bytes, found {}", 8 * n, bytes.len() - 60),
            ));
        }
        let values = (0..n).map(|i| f(60 + 8 * i)).collect();
        Self::new(resolution, extent, values)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        Ok(fs::write(path, self.to_bytes())?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bytes_round_trip() {
        let g = SdfGrid::from_fn(3, DEFAULT_EXTENT, |p| p.x + 2.0 * p.y - p.z).unwrap();
        let back = SdfGrid::from_bytes(&g.to_bytes(), Path::new("g.bin")).unwrap();
        assert_eq!(g, back);
        // x-fastest layout
        assert!((g.values[1] - g.values[0] - 1.1).abs() < 1e-12);
        assert!((g.values[3] - g.values[0] - 2.2).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(SdfGrid::new([1, 2, 2], DEFAULT_EXTENT, vec![0.0; 4]).is_err());
        assert!(SdfGrid::new([2, 2, 2], DEFAULT_EXTENT, vec![0.0; 7]).is_err());
        assert!(SdfGrid::new([2, 2, 2], DEFAULT_EXTENT, vec![f64::NAN; 8]).is_err());
        let g = SdfGrid::from_fn(2, DEFAULT_EXTENT, |_| 1.0).unwrap();
        let b = g.to_bytes();
        assert!(SdfGrid::from_bytes(&b[..b.len() - 3], Path::new("g")).is_err());
    }
}
