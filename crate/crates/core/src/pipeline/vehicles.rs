use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::sub_seed;
use crate::error::{Error, Result};
use crate::geometry::{Point3, UnitCubeTransform, Vector3};
use crate::mesh::{is_watertight, marching_cubes, SdfGrid, TriangleMesh};

/// Ranges (`[min, max]`, metres before normalization) the generator draws
/// vehicle proportions from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProceduralVehicleParams {
    pub body_length: [f64; 2],
    pub body_width: [f64; 2],
    pub body_height: [f64; 2],
    /// Gap between the ground and the underside of the body.
    pub clearance: [f64; 2],
    /// Cabin footprint length as a fraction of the body length.
    pub cabin_length_ratio: [f64; 2],
    pub cabin_height: [f64; 2],
    /// Roof length over cabin footprint length; 1 is a box, smaller is a wedge.
    pub cabin_wedge_ratio: [f64; 2],
    /// Shift of the cabin centre along the body, as a fraction of its length.
    pub cabin_offset: [f64; 2],
    pub wheel_radius: [f64; 2],
    pub wheel_width: f64,
    /// Even and at least 4; wheels are spread over `wheel_count / 2` axles.
    pub wheel_count: usize,
    /// Lattice nodes along the vehicle length used for meshing.
    pub resolution: u32,
}

impl Default for ProceduralVehicleParams {
    fn default() -> Self {
        Self {
            body_length: [3.8, 5.2],
            body_width: [1.6, 2.0],
            body_height: [0.55, 0.85],
            clearance: [0.15, 0.3],
            cabin_length_ratio: [0.4, 0.7],
            cabin_height: [0.45, 0.75],
            cabin_wedge_ratio: [0.45, 0.85],
            cabin_offset: [-0.15, 0.1],
            wheel_radius: [0.3, 0.4],
            wheel_width: 0.25,
            wheel_count: 4,
            resolution: 96,
        }
    }
}

/// One concrete draw from [`ProceduralVehicleParams`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleDims {
    pub length: f64,
    pub width: f64,
    pub height: f64,
    pub clearance: f64,
    pub cabin_length: f64,
    pub cabin_height: f64,
    pub wedge: f64,
    pub cabin_offset: f64,
    pub wheel_radius: f64,
    pub wheel_width: f64,
    pub axles: usize,
}

impl ProceduralVehicleParams {
    pub fn validate(&self) -> Result<()> {
        let ranges = [
            ("body_length", self.body_length, true),
            ("body_width", self.body_width, true),
            ("body_height", self.body_height, true),
            ("clearance", self.clearance, false),
            ("cabin_length_ratio", self.cabin_length_ratio, true),
            ("cabin_height", self.cabin_height, true),
            ("cabin_wedge_ratio", self.cabin_wedge_ratio, true),
            ("cabin_offset", self.cabin_offset, false),
            ("wheel_radius", self.wheel_radius, true),
        ];
        for (name, [lo, hi], positive) in ranges {
            if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() || (positive && lo <= 0.0) || (!positive && lo < -0.5) {
                return Err(Error::Config(format!("vehicle range {name} = [{lo}, {hi}] is degenerate")));
            }
        }
        if self.cabin_length_ratio[1] > 1.0 || self.cabin_wedge_ratio[1] > 1.0 {
            return Err(Error::Config("cabin ratios must not exceed 1".into()));
        }
        if self.cabin_offset[0].abs().max(self.cabin_offset[1].abs()) + self.cabin_length_ratio[1] / 2.0 > 0.5 {
            return Err(Error::Config("cabin can be pushed past the body ends".into()));
        }
        if self.wheel_count < 4 || !self.wheel_count.is_multiple_of(2) {
            return Err(Error::Config(format!("wheel count {} must be even and at least 4", self.wheel_count)));
        }
        if !(self.wheel_width > 0.0) || self.wheel_width * 2.0 >= self.body_width[0] {
            return Err(Error::Config("wheel width must be positive and narrower than half the body".into()));
        }
        if 2.0 * self.wheel_radius[0] <= self.clearance[1] + 0.05 {
            return Err(Error::Config("wheels too small to reach the body".into()));
        }
        let axles = self.wheel_count / 2;
        if 2.2 * self.wheel_radius[1] * axles as f64 > self.body_length[0] {
            return Err(Error::Config("wheels do not fit along the body".into()));
        }
        if self.resolution < 16 {
            return Err(Error::Config("vehicle meshing resolution must be at least 16".into()));
        }
        Ok(())
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> VehicleDims {
        let mut u = |[lo, hi]: [f64; 2]| if lo == hi { lo } else { rng.random_range(lo..hi) };
        let length = u(self.body_length);
        VehicleDims {
            length,
            width: u(self.body_width),
            height: u(self.body_height),
            clearance: u(self.clearance),
            cabin_length: length * u(self.cabin_length_ratio),
            cabin_height: u(self.cabin_height),
            wedge: u(self.cabin_wedge_ratio),
            cabin_offset: length * u(self.cabin_offset),
            wheel_radius: u(self.wheel_radius),
            wheel_width: self.wheel_width,
            axles: self.wheel_count / 2,
        }
    }
}

fn sd_round_box(p: Vector3, half: Vector3, radius: f64) -> f64 {
    let q = p.abs() - half + Vector3::repeat(radius);
    q.sup(&Vector3::zeros()).norm() + q.max().min(0.0) - radius
}

fn sd_y_cylinder(p: Vector3, radius: f64, half_width: f64) -> f64 {
    let d = [(p.x * p.x + p.z * p.z).sqrt() - radius, p.y.abs() - half_width];
    let outside = (d[0].max(0.0).powi(2) + d[1].max(0.0).powi(2)).sqrt();
    outside + d[0].max(d[1]).min(0.0)
}

/// Distance to the boundary of the half-space `n·p ≤ 0` with unit `n`.
fn sd_plane(p: Vector3, n: Vector3) -> f64 {
    n.dot(&p)
}

impl VehicleDims {
    /// Signed distance bound of the vehicle: x forward, y left, z up, with
    /// the ground at `z = 0` and the body centred on the z axis.
    pub fn sdf(&self, p: &Point3) -> f64 {
        let p = p.coords;
        let body_bottom = self.clearance;
        let body_top = self.clearance + self.height;
        let body_center = Vector3::new(0.0, 0.0, 0.5 * (body_bottom + body_top));
        let rounding = 0.25 * self.height.min(self.width);
        let body = sd_round_box(
            p - body_center,
            Vector3::new(0.5 * self.length, 0.5 * self.width, 0.5 * self.height),
            rounding,
        );

        // Trapezoid in x-z extruded along y, sunk slightly into the body.
        let z0 = body_top - 0.1 * self.height;
        let z1 = body_top + self.cabin_height;
        let bottom_half = 0.5 * self.cabin_length;
        let top_half = bottom_half * self.wedge;
        let xc = self.cabin_offset;
        let run = bottom_half - top_half;
        let rise = z1 - z0;
        let slope = Vector3::new(rise, 0.0, run).normalize();
        let front = sd_plane(p - Vector3::new(xc + bottom_half, 0.0, z0), slope);
        let back_n = Vector3::new(-slope.x, 0.0, slope.z);
        let back = sd_plane(p - Vector3::new(xc - bottom_half, 0.0, z0), back_n);
        let cabin = front
            .max(back)
            .max(z0 - p.z)
            .max(p.z - z1)
            .max(p.y.abs() - 0.45 * self.width);

        let mut d = body.min(cabin);
        let span = self.length - 2.6 * self.wheel_radius;
        let wy = 0.5 * self.width - 0.5 * self.wheel_width + 0.02;
        for a in 0..self.axles {
            let x = -0.5 * span + span * a as f64 / (self.axles - 1) as f64;
            for side in [-1.0, 1.0] {
                let c = Vector3::new(x, side * wy, self.wheel_radius);
                d = d.min(sd_y_cylinder(p - c, self.wheel_radius, 0.5 * self.wheel_width));
            }
        }
        d
    }

    /// Axis-aligned box containing the vehicle.
    pub fn bounds(&self) -> (Point3, Point3) {
        let half_len = 0.5 * self.length;
        let half_w = 0.5 * self.width + 0.05;
        let top = self.clearance + self.height + self.cabin_height;
        (Point3::new(-half_len, -half_w, 0.0), Point3::new(half_len, half_w, top))
    }

    /// Marching-cubes mesh at `resolution` nodes along the length, normalized
    /// to `[-1, 1]` along its longest axis.
    pub fn mesh(&self, resolution: u32) -> Result<TriangleMesh> {
        let (lo, hi) = self.bounds();
        let h = (hi.x - lo.x) / (resolution as f64 - 5.0);
        let margin = 2.0 * h;
        let lo = lo - Vector3::repeat(margin);
        let hi = hi + Vector3::repeat(margin);
        let res: [u32; 3] = std::array::from_fn(|a| ((hi[a] - lo[a]) / h).ceil() as u32 + 1);
        let extent = [lo.x, lo.y, lo.z, lo.x + h * (res[0] - 1) as f64, lo.y + h * (res[1] - 1) as f64, lo.z + h * (res[2] - 1) as f64];
        let mut values = Vec::with_capacity(res.iter().map(|&r| r as usize).product());
        for k in 0..res[2] {
            for j in 0..res[1] {
                for i in 0..res[0] {
                    let p = Point3::new(lo.x + h * i as f64, lo.y + h * j as f64, lo.z + h * k as f64);
                    let v = self.sdf(&p);
                    // Nodes exactly on the surface would produce zero-area triangles.
                    values.push(if v == 0.0 { f64::MIN_POSITIVE } else { v });
                }
            }
        }
        let grid = SdfGrid::new(res, extent, values)?;
        let mesh = marching_cubes(&grid, 0.0);
        if mesh.is_empty() || !is_watertight(&mesh) {
            return Err(Error::Degenerate("vehicle mesh is not a closed surface".into()));
        }
        let t = UnitCubeTransform::fit(&mesh.vertices)?;
        Ok(mesh.transformed(|p| t.apply(p)))
    }
}

/// `n` normalized vehicle meshes. Vehicle `i` depends only on `seed` and `i`,
/// so a shorter run is a prefix of a longer one.
pub fn gen_shapes(params: &ProceduralVehicleParams, n: usize, seed: u64) -> Result<Vec<TriangleMesh>> {
    params.validate()?;
    (0..n)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, &format!("vehicle/{i}")));
            params.draw(&mut rng).mesh(params.resolution)
        })
        .collect()
}
