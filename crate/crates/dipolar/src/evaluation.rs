//! Ground-truth shape generators, the orientation-accuracy metric and
//! potential probes for inside/outside checks.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cloud::PointCloud;
use crate::dipole::{potential_sum, DEFAULT_EPSILON};
use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// Torus major radius used by the `torus` shape.
pub const TORUS_MAJOR: f64 = 1.0;
/// Torus minor radius used by the `torus` shape.
pub const TORUS_MINOR: f64 = 0.3;
/// Gap between the two slab sheets.
pub const SLAB_GAP: f64 = 0.02;
/// Radii of the nested-spheres shape.
pub const NESTED_RADII: (f64, f64) = (1.0, 0.5);

/// Supported synthetic ground-truth shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeKind {
    Sphere,
    Torus,
    /// Two parallel unit squares 0.02 apart with opposite outward normals.
    Slab,
    Cube,
    /// Concentric spheres of radii 1.0 and 0.5, both oriented outward.
    NestedSpheres,
}

impl ShapeKind {
    pub fn name(&self) -> &'static str {
        match self {
            ShapeKind::Sphere => "sphere",
            ShapeKind::Torus => "torus",
            ShapeKind::Slab => "slab",
            ShapeKind::Cube => "cube",
            ShapeKind::NestedSpheres => "nested-spheres",
        }
    }

    /// Largest distance from the origin to any surface point.
    pub fn radius(&self) -> f64 {
        match self {
            ShapeKind::Sphere | ShapeKind::NestedSpheres => 1.0,
            ShapeKind::Torus => TORUS_MAJOR + TORUS_MINOR,
            ShapeKind::Slab => (0.5f64 * 0.5 * 2.0 + (SLAB_GAP / 2.0).powi(2)).sqrt(),
            ShapeKind::Cube => 0.75f64.sqrt(),
        }
    }

    /// Closed shapes enclose a volume; the slab does not.
    pub fn is_closed(&self) -> bool {
        !matches!(self, ShapeKind::Slab)
    }
}

impl FromStr for ShapeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sphere" => Ok(ShapeKind::Sphere),
            "torus" => Ok(ShapeKind::Torus),
            "slab" => Ok(ShapeKind::Slab),
            "cube" => Ok(ShapeKind::Cube),
            "nested-spheres" | "nested" => Ok(ShapeKind::NestedSpheres),
            other => Err(Error::InvalidConfig(format!("unknown shape '{other}'"))),
        }
    }
}

/// A sampling request: shape, sample count, Gaussian noise along the true
/// normal (sigma as a fraction of the bounding-box diagonal) and RNG seed.
#[derive(Debug, Clone)]
pub struct SyntheticShape {
    pub kind: ShapeKind,
    pub samples: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SyntheticShape {
    pub fn new(kind: ShapeKind, samples: usize) -> Self {
        SyntheticShape {
            kind,
            samples,
            noise_sigma: 0.0,
            seed: 0,
        }
    }
}

/// Uniform-area sample of the shape with exact analytic outward normals.
/// Deterministic per seed.
pub fn generate(shape: &SyntheticShape) -> Result<PointCloud> {
    if shape.samples < 100 {
        return Err(Error::InvalidConfig(format!(
            "synthetic shapes need at least 100 samples, got {}",
            shape.samples
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(shape.seed);
    let mut positions = Vec::with_capacity(shape.samples);
    let mut normals = Vec::with_capacity(shape.samples);

    for _ in 0..shape.samples {
        let (p, n) = sample_one(shape.kind, &mut rng);
        positions.push(p);
        normals.push(n);
    }

    if shape.noise_sigma > 0.0 {
        let (lo, hi) = bounding_box(&positions);
        let sigma = shape.noise_sigma * (hi - lo).norm();
        for (p, n) in positions.iter_mut().zip(&normals) {
            *p += *n * (sigma * gaussian(&mut rng));
        }
    }

    PointCloud::with_normals(positions, normals)
}

fn bounding_box(points: &[Vec3]) -> (Vec3, Vec3) {
    let mut lo = points[0];
    let mut hi = points[0];
    for &p in &points[1..] {
        lo = lo.min_by_component(p);
        hi = hi.max_by_component(p);
    }
    (lo, hi)
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; u is bounded away from zero to keep ln finite.
    let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let v: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    (-2.0 * u.ln()).sqrt() * v.cos()
}

fn sample_sphere_dir(rng: &mut ChaCha8Rng) -> Vec3 {
    let z: f64 = rng.gen_range(-1.0..1.0);
    let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let r = (1.0 - z * z).sqrt();
    Vec3::new(r * phi.cos(), r * phi.sin(), z)
}

fn sample_one(kind: ShapeKind, rng: &mut ChaCha8Rng) -> (Vec3, Vec3) {
    match kind {
        ShapeKind::Sphere => {
            let d = sample_sphere_dir(rng);
            (d, d)
        }
        ShapeKind::NestedSpheres => {
            // Area-weighted choice between the two shells (4 : 1).
            let (outer, inner) = NESTED_RADII;
            let outer_area = outer * outer;
            let inner_area = inner * inner;
            let radius = if rng.gen_range(0.0..outer_area + inner_area) < outer_area {
                outer
            } else {
                inner
            };
            let d = sample_sphere_dir(rng);
            (d * radius, d)
        }
        ShapeKind::Torus => {
            let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            // Rejection on the minor angle for uniform surface area.
            let theta = loop {
                let t: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                let accept: f64 = rng.gen_range(0.0..1.0);
                if accept <= (TORUS_MAJOR + TORUS_MINOR * t.cos()) / (TORUS_MAJOR + TORUS_MINOR) {
                    break t;
                }
            };
            let ring = TORUS_MAJOR + TORUS_MINOR * theta.cos();
            let p = Vec3::new(ring * phi.cos(), ring * phi.sin(), TORUS_MINOR * theta.sin());
            let n = Vec3::new(
                theta.cos() * phi.cos(),
                theta.cos() * phi.sin(),
                theta.sin(),
            );
            (p, n)
        }
        ShapeKind::Slab => {
            let x: f64 = rng.gen_range(-0.5..0.5);
            let y: f64 = rng.gen_range(-0.5..0.5);
            if rng.gen_bool(0.5) {
                (Vec3::new(x, y, SLAB_GAP / 2.0), Vec3::new(0.0, 0.0, 1.0))
            } else {
                (Vec3::new(x, y, -SLAB_GAP / 2.0), Vec3::new(0.0, 0.0, -1.0))
            }
        }
        ShapeKind::Cube => {
            let face = rng.gen_range(0..6u8);
            let a: f64 = rng.gen_range(-0.5..0.5);
            let b: f64 = rng.gen_range(-0.5..0.5);
            let (p, n) = match face {
                0 => (Vec3::new(0.5, a, b), Vec3::new(1.0, 0.0, 0.0)),
                1 => (Vec3::new(-0.5, a, b), Vec3::new(-1.0, 0.0, 0.0)),
                2 => (Vec3::new(a, 0.5, b), Vec3::new(0.0, 1.0, 0.0)),
                3 => (Vec3::new(a, -0.5, b), Vec3::new(0.0, -1.0, 0.0)),
                4 => (Vec3::new(a, b, 0.5), Vec3::new(0.0, 0.0, 1.0)),
                _ => (Vec3::new(a, b, -0.5), Vec3::new(0.0, 0.0, -1.0)),
            };
            (p, n)
        }
    }
}

/// Accuracy of an estimated orientation against index-aligned ground truth.
#[derive(Debug, Clone, Copy)]
pub struct Accuracy {
    /// Percentage in [50, 100] after global-sign resolution.
    pub percent: f64,
    /// The sign applied to the estimate before counting.
    pub sign: i8,
    pub correct: usize,
    pub total: usize,
}

/// Percentage of correctly oriented normals: a point counts as correct when
/// `sign * n_est . n_true > 0`, with the global sign chosen to maximize the
/// count (orientation is defined only up to a global flip).
pub fn accuracy(estimated: &PointCloud, truth: &PointCloud) -> Result<Accuracy> {
    if estimated.len() != truth.len() {
        return Err(Error::SizeMismatch {
            expected: truth.len(),
            got: estimated.len(),
        });
    }
    if !estimated.has_normals() || !truth.has_normals() {
        return Err(Error::MissingNormals);
    }
    let mut plus = 0usize;
    let mut minus = 0usize;
    for (e, t) in estimated.normals.iter().zip(&truth.normals) {
        let d = e.dot(*t);
        if d > 0.0 {
            plus += 1;
        } else if d < 0.0 {
            minus += 1;
        }
    }
    let (correct, sign) = if plus >= minus { (plus, 1) } else { (minus, -1) };
    Ok(Accuracy {
        percent: 100.0 * correct as f64 / estimated.len() as f64,
        sign,
        correct,
        total: estimated.len(),
    })
}

/// Summed dipole potential of the oriented cloud at each query point.
pub fn probe_potential(cloud: &PointCloud, queries: &[Vec3]) -> Vec<f64> {
    let sources: Vec<(Vec3, Vec3)> = (0..cloud.len())
        .map(|i| (cloud.positions[i], cloud.normals[i] * cloud.weight(i)))
        .collect();
    queries
        .par_iter()
        .map(|&q| potential_sum(&sources, q, DEFAULT_EPSILON).0)
        .collect()
}

/// Deterministic interior probe points for a closed shape, comfortably away
/// from the sampled surface.
pub fn interior_probes(kind: ShapeKind, count: usize, seed: u64) -> Vec<Vec3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probes = Vec::with_capacity(count);
    while probes.len() < count {
        let p = match kind {
            ShapeKind::Sphere => {
                let r = 0.8 * rng.gen_range(0.0f64..1.0).cbrt();
                sample_sphere_dir(&mut rng) * r
            }
            ShapeKind::NestedSpheres => {
                // Anywhere inside the outer shell but clear of both surfaces.
                let r = rng.gen_range(0.0..0.9f64);
                if (r - NESTED_RADII.1).abs() < 0.1 {
                    continue;
                }
                sample_sphere_dir(&mut rng) * r
            }
            ShapeKind::Torus => {
                let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                let theta: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                let rho = 0.8 * TORUS_MINOR * rng.gen_range(0.0f64..1.0).sqrt();
                let ring = TORUS_MAJOR + rho * theta.cos();
                Vec3::new(ring * phi.cos(), ring * phi.sin(), rho * theta.sin())
            }
            ShapeKind::Cube => Vec3::new(
                rng.gen_range(-0.4..0.4),
                rng.gen_range(-0.4..0.4),
                rng.gen_range(-0.4..0.4),
            ),
            ShapeKind::Slab => Vec3::new(
                rng.gen_range(-0.4..0.4),
                rng.gen_range(-0.4..0.4),
                0.0,
            ),
        };
        probes.push(p);
    }
    probes
}

/// A probe point at twice the shape radius.
pub fn exterior_probe(kind: ShapeKind) -> Vec3 {
    Vec3::new(0.0, 0.0, 2.0 * kind.radius())
}
