//! Point-cloud data types, synthetic surface generators with parametric
//! ground truth, seeded noise injection and XYZ text file I/O.
//!
//! All generators are deterministic: identical arguments (and seeds) produce
//! bit-identical clouds. Every generated cloud is paired 1:1 with
//! [`GroundTruthSample`]s so downstream error metrics can be computed against
//! the exact parametric surface instead of the (possibly noisy) input.

use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PointCloudError {
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// A point in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn distance(&self, other: &Point3) -> f64 {
        let (dx, dy, dz) = (self.x - other.x, self.y - other.y, self.z - other.z);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }
}

/// A point in the 2D embedding plane.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Point2 {
    pub u: f64,
    pub v: f64,
}

impl Point2 {
    pub fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        let (du, dv) = (self.u - other.u, self.v - other.v);
        (du * du + dv * dv).sqrt()
    }
}

/// An ordered 3D point cloud. Index `i` here corresponds to index `i` in any
/// derived 2D embedding. The reconstruction pipeline needs at least 4 points
/// (and in practice far more); downstream stages reject clouds that are too
/// small for their own preconditions.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud3 {
    pub points: Vec<Point3>,
}

impl PointCloud3 {
    pub fn new(points: Vec<Point3>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// An ordered 2D point cloud (the embedding side of the correspondence).
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud2 {
    pub points: Vec<Point2>,
}

impl PointCloud2 {
    pub fn new(points: Vec<Point2>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Exact parametric surface evaluation paired with the parameters that
/// produced it. Metrics are defined against these, never against noisy input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruthSample {
    /// Surface parameters, in radians for angular parameters.
    pub params: (f64, f64),
    /// The exact surface point at `params`.
    pub point: Point3,
}

/// Zero-mean isotropic Gaussian noise, applied per coordinate.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NoiseSpec {
    /// Standard deviation in world units. Must be >= 0.
    pub sigma: f64,
    pub seed: u64,
}

/// Points on a torus patch
/// `((R + r cos(theta)) cos(gamma), (R + r cos(theta)) sin(gamma), r sin(theta))`
/// on a regular `n_theta x n_gamma` parameter grid.
pub fn gen_torus(
    big_radius: f64,
    small_radius: f64,
    theta_range: (f64, f64),
    gamma_range: (f64, f64),
    n_theta: usize,
    n_gamma: usize,
) -> Result<(PointCloud3, Vec<GroundTruthSample>), PointCloudError> {
    if !(big_radius > small_radius && small_radius > 0.0) {
        return Err(PointCloudError::InvalidParams(format!(
            "torus radii must satisfy R > r > 0, got R={big_radius}, r={small_radius}"
        )));
    }
    if theta_range.1 <= theta_range.0 || gamma_range.1 <= gamma_range.0 {
        return Err(PointCloudError::InvalidParams(
            "parameter ranges must be non-empty".into(),
        ));
    }
    if n_theta < 2 || n_gamma < 2 {
        return Err(PointCloudError::InvalidParams(
            "grid must be at least 2x2".into(),
        ));
    }

    let mut points = Vec::with_capacity(n_theta * n_gamma);
    let mut truth = Vec::with_capacity(n_theta * n_gamma);
    for it in 0..n_theta {
        let theta = lerp(theta_range.0, theta_range.1, it as f64 / (n_theta - 1) as f64);
        for ig in 0..n_gamma {
            let gamma = lerp(gamma_range.0, gamma_range.1, ig as f64 / (n_gamma - 1) as f64);
            let p = torus_point(big_radius, small_radius, theta, gamma);
            points.push(p);
            truth.push(GroundTruthSample { params: (theta, gamma), point: p });
        }
    }
    Ok((PointCloud3::new(points), truth))
}

/// Exact torus surface evaluation. Exposed so tests and metrics can query
/// the surface at arbitrary parameters.
pub fn torus_point(big_radius: f64, small_radius: f64, theta: f64, gamma: f64) -> Point3 {
    let ring = big_radius + small_radius * theta.cos();
    Point3::new(ring * gamma.cos(), ring * gamma.sin(), small_radius * theta.sin())
}

/// `n` points sampled uniformly at random (seeded) on the S-curve manifold
/// `(sin t, v, sign(t)(cos t - 1))` with `t in [-3pi/2, 3pi/2]`, `v in [0, 2]`:
/// two half-cylinders joined smoothly at the origin.
pub fn gen_scurve(
    n: usize,
    seed: u64,
) -> Result<(PointCloud3, Vec<GroundTruthSample>), PointCloudError> {
    if n < 4 {
        return Err(PointCloudError::InvalidParams(format!(
            "s-curve needs at least 4 points, got {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t_dist = Uniform::new_inclusive(-1.5 * std::f64::consts::PI, 1.5 * std::f64::consts::PI)
        .expect("valid range");
    let v_dist = Uniform::new_inclusive(0.0, 2.0).expect("valid range");

    let mut points = Vec::with_capacity(n);
    let mut truth = Vec::with_capacity(n);
    for _ in 0..n {
        let t = t_dist.sample(&mut rng);
        let v = v_dist.sample(&mut rng);
        let p = scurve_point(t, v);
        points.push(p);
        truth.push(GroundTruthSample { params: (t, v), point: p });
    }
    Ok((PointCloud3::new(points), truth))
}

/// Exact S-curve surface evaluation.
pub fn scurve_point(t: f64, v: f64) -> Point3 {
    Point3::new(t.sin(), v, t.signum() * (t.cos() - 1.0))
}

/// `n_side^2` points on a cone patch: half-angle 30 degrees, apex at the
/// origin, axis +z, heights in `[1/n_side, 1]` (the apex itself is excluded so
/// no two samples coincide) and sweep `gamma in [0, 3pi/2]`.
pub fn gen_cone(n_side: usize) -> Result<(PointCloud3, Vec<GroundTruthSample>), PointCloudError> {
    if n_side < 3 {
        return Err(PointCloudError::InvalidParams(format!(
            "cone needs n_side >= 3, got {n_side}"
        )));
    }
    let mut points = Vec::with_capacity(n_side * n_side);
    let mut truth = Vec::with_capacity(n_side * n_side);
    for ih in 0..n_side {
        let h = (ih + 1) as f64 / n_side as f64;
        for ig in 0..n_side {
            let gamma = lerp(0.0, 1.5 * std::f64::consts::PI, ig as f64 / (n_side - 1) as f64);
            let p = cone_point(h, gamma);
            points.push(p);
            truth.push(GroundTruthSample { params: (h, gamma), point: p });
        }
    }
    Ok((PointCloud3::new(points), truth))
}

/// Exact cone surface evaluation: height `h in (0, 1]`, angle `gamma`.
pub fn cone_point(h: f64, gamma: f64) -> Point3 {
    // tan(30 deg) = 1/sqrt(3)
    let radius = h / 3.0_f64.sqrt();
    Point3::new(radius * gamma.cos(), radius * gamma.sin(), h)
}

/// Perturbs each coordinate by independent zero-mean Gaussian noise of
/// standard deviation `spec.sigma`. Deterministic per seed; `sigma = 0`
/// returns the input unchanged.
pub fn add_noise(cloud: &PointCloud3, spec: &NoiseSpec) -> PointCloud3 {
    assert!(spec.sigma >= 0.0, "noise sigma must be >= 0");
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let points = cloud
        .points
        .iter()
        .map(|p| {
            let dx: f64 = StandardNormal.sample(&mut rng);
            let dy: f64 = StandardNormal.sample(&mut rng);
            let dz: f64 = StandardNormal.sample(&mut rng);
            Point3::new(
                p.x + spec.sigma * dx,
                p.y + spec.sigma * dy,
                p.z + spec.sigma * dz,
            )
        })
        .collect();
    PointCloud3::new(points)
}

/// Loads a whitespace-separated `x y z` text file. Blank lines and lines
/// starting with `#` are ignored.
pub fn load_xyz(path: impl AsRef<Path>) -> Result<PointCloud3, PointCloudError> {
    let text = std::fs::read_to_string(path)?;
    parse_xyz(&text)
}

/// Parses XYZ text. Split out from [`load_xyz`] so in-memory data can be
/// parsed without touching the filesystem.
pub fn parse_xyz(text: &str) -> Result<PointCloud3, PointCloudError> {
    let mut points = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split_whitespace();
        let mut coord = |name: &str| -> Result<f64, PointCloudError> {
            let field = fields.next().ok_or_else(|| PointCloudError::Parse {
                line: idx + 1,
                msg: format!("missing {name} coordinate"),
            })?;
            field.parse::<f64>().map_err(|e| PointCloudError::Parse {
                line: idx + 1,
                msg: format!("bad {name} coordinate {field:?}: {e}"),
            })
        };
        let (x, y, z) = (coord("x")?, coord("y")?, coord("z")?);
        if fields.next().is_some() {
            return Err(PointCloudError::Parse {
                line: idx + 1,
                msg: "expected exactly 3 fields".into(),
            });
        }
        points.push(Point3::new(x, y, z));
    }
    Ok(PointCloud3::new(points))
}

/// Writes a cloud in XYZ text format. Coordinates use shortest round-trip
/// formatting, so `load_xyz(save_xyz(c))` reproduces `c` exactly.
pub fn save_xyz(cloud: &PointCloud3, path: impl AsRef<Path>) -> Result<(), PointCloudError> {
    std::fs::write(path, format_xyz(cloud))?;
    Ok(())
}

pub fn format_xyz(cloud: &PointCloud3) -> String {
    let mut out = String::new();
    for p in &cloud.points {
        writeln!(out, "{} {} {}", p.x, p.y, p.z).expect("string write");
    }
    out
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}
