//! Closed-form dipole potential and field, plus the incremental per-point
//! field accumulator driving patch propagation.
//!
//! Each oriented point acts as a dipole with polarization `c * n` (unit
//! normal scaled by its confidence weight). The potential at displacement
//! `r` from the source is
//!
//! ```text
//! u(r) = c (n . r) / (4 pi |r|^3)
//! ```
//!
//! and the field is its gradient,
//!
//! ```text
//! E(r) = grad u = -(3 c (n . r^) r^ - c n) / (4 pi |r|^3),
//! ```
//!
//! i.e. the physics field up to sign: normals are oriented toward rising
//! potential. Distances are clamped below by an epsilon so coincident scan
//! points cannot produce infinities; inside the clamp ball the potential
//! continues linearly and the field is the (constant) gradient of that
//! continuation, so field and potential stay consistent everywhere.

use rayon::prelude::*;

use crate::cloud::PointCloud;
use crate::geometry::Vec3;
use crate::patching::Patch;

/// Distance clamp in unit-cube coordinates.
pub const DEFAULT_EPSILON: f64 = 1e-6;

const INV_FOUR_PI: f64 = 1.0 / (4.0 * std::f64::consts::PI);

/// An oriented point treated as an electric dipole.
#[derive(Debug, Clone, Copy)]
pub struct DipoleSource {
    pub position: Vec3,
    /// Unit polarization direction.
    pub normal: Vec3,
    /// Confidence weight in [0,1].
    pub weight: f64,
}

impl DipoleSource {
    pub fn new(position: Vec3, normal: Vec3, weight: f64) -> Self {
        DipoleSource {
            position,
            normal,
            weight,
        }
    }

    #[inline]
    fn polarization(&self) -> Vec3 {
        self.normal * self.weight
    }
}

/// Potential of a single source measured at `at` (epsilon-clamped).
pub fn dipole_potential(source: &DipoleSource, at: Vec3) -> f64 {
    potential_kernel(source.position, source.polarization(), at, DEFAULT_EPSILON).0
}

/// Field of a single source measured at `at` (epsilon-clamped).
pub fn dipole_field(source: &DipoleSource, at: Vec3) -> Vec3 {
    field_kernel(source.position, source.polarization(), at, DEFAULT_EPSILON).0
}

#[inline]
pub(crate) fn potential_kernel(pos: Vec3, polarization: Vec3, at: Vec3, eps: f64) -> (f64, bool) {
    let r = at - pos;
    let d2 = r.norm_squared();
    if d2 < eps * eps {
        ((polarization.dot(r)) * INV_FOUR_PI / (eps * eps * eps), true)
    } else {
        let d = d2.sqrt();
        (polarization.dot(r) * INV_FOUR_PI / (d2 * d), false)
    }
}

#[inline]
pub(crate) fn field_kernel(pos: Vec3, polarization: Vec3, at: Vec3, eps: f64) -> (Vec3, bool) {
    let r = at - pos;
    let d2 = r.norm_squared();
    if d2 < eps * eps {
        // Gradient of the linear potential inside the clamp ball.
        (polarization * (INV_FOUR_PI / (eps * eps * eps)), true)
    } else {
        let inv_d2 = 1.0 / d2;
        let scale = INV_FOUR_PI * inv_d2 / d2.sqrt();
        let k = 3.0 * polarization.dot(r) * inv_d2;
        ((polarization - r * k) * scale, false)
    }
}

/// Sum the field of many sources at one measurement point.
/// Returns the field and the number of clamped pair evaluations.
#[inline]
pub(crate) fn field_sum(sources: &[(Vec3, Vec3)], at: Vec3, eps: f64) -> (Vec3, u64) {
    let mut e = Vec3::ZERO;
    let mut clamped = 0u64;
    for &(pos, pol) in sources {
        let (de, c) = field_kernel(pos, pol, at, eps);
        e += de;
        clamped += c as u64;
    }
    (e, clamped)
}

/// Sum the potential of many sources at one measurement point.
pub(crate) fn potential_sum(sources: &[(Vec3, Vec3)], at: Vec3, eps: f64) -> (f64, u64) {
    let mut u = 0.0;
    let mut clamped = 0u64;
    for &(pos, pol) in sources {
        let (du, c) = potential_kernel(pos, pol, at, eps);
        u += du;
        clamped += c as u64;
    }
    (u, clamped)
}

/// Extract `(position, c * n)` source tuples for a set of point indices.
pub(crate) fn gather_sources(cloud: &PointCloud, indices: &[u32]) -> Vec<(Vec3, Vec3)> {
    indices
        .iter()
        .map(|&i| {
            let i = i as usize;
            (cloud.positions[i], cloud.normals[i] * cloud.weight(i))
        })
        .collect()
}

/// Running per-point field sum over all so-far-oriented patches, with a
/// cached interaction energy per patch.
///
/// After a patch is accumulated, `field[k]` holds the superposed field of
/// every accumulated patch that does not contain point `k`, and
/// `interaction[j]` holds `sum over k in j of c_k n_k . field[k]` for every
/// patch `j`, kept current incrementally.
pub struct FieldAccumulator {
    pub field: Vec<Vec3>,
    pub interaction: Vec<f64>,
    pub point_patch: Vec<u32>,
    pub epsilon: f64,
    pub clamped: u64,
    scratch: Vec<f64>,
}

impl FieldAccumulator {
    pub fn new(cloud_len: usize, patches: &[Patch]) -> Self {
        let mut point_patch = vec![u32::MAX; cloud_len];
        for p in patches {
            for &i in &p.indices {
                point_patch[i as usize] = p.id as u32;
            }
        }
        FieldAccumulator {
            field: vec![Vec3::ZERO; cloud_len],
            interaction: vec![0.0; patches.len()],
            point_patch,
            epsilon: DEFAULT_EPSILON,
            clamped: 0,
            scratch: vec![0.0; cloud_len],
        }
    }

    /// Add the field of `patch` to every point outside it and fold the
    /// increments into the cached interactions of all other patches.
    pub fn accumulate_patch(&mut self, patch: &Patch, cloud: &PointCloud) {
        let sources = gather_sources(cloud, &patch.indices);
        let pid = patch.id as u32;
        let eps = self.epsilon;
        let point_patch = &self.point_patch;
        let positions = &cloud.positions;
        let normals = &cloud.normals;
        let confidence = &cloud.confidence;

        let clamped: u64 = self
            .field
            .par_iter_mut()
            .zip(self.scratch.par_iter_mut())
            .enumerate()
            .map(|(k, (e, dot))| {
                if point_patch[k] == pid {
                    *dot = 0.0;
                    return 0u64;
                }
                let (de, clamps) = field_sum(&sources, positions[k], eps);
                *e += de;
                let w = if confidence.is_empty() {
                    1.0
                } else {
                    confidence[k]
                };
                *dot = w * normals[k].dot(de);
                clamps
            })
            .sum();
        self.clamped += clamped;

        for (k, &dot) in self.scratch.iter().enumerate() {
            let owner = self.point_patch[k];
            if owner != u32::MAX && owner != pid {
                self.interaction[owner as usize] += dot;
            }
        }
    }

    /// Interaction energy of a patch against the current field:
    /// `V = sum over i in patch of c_i n_i . E[i]`.
    pub fn patch_interaction(&self, patch: &Patch, cloud: &PointCloud) -> f64 {
        patch
            .indices
            .iter()
            .map(|&i| {
                let i = i as usize;
                cloud.weight(i) * cloud.normals[i].dot(self.field[i])
            })
            .sum()
    }

    /// Rebuild the leave-own-patch-out field of every point from scratch
    /// (the state propagation would have produced with the cloud's current
    /// normals) and refresh all cached interactions.
    pub fn recompute_from_scratch(&mut self, cloud: &PointCloud) {
        let all: Vec<(Vec3, Vec3, u32)> = (0..cloud.len())
            .map(|i| {
                (
                    cloud.positions[i],
                    cloud.normals[i] * cloud.weight(i),
                    self.point_patch[i],
                )
            })
            .collect();
        let eps = self.epsilon;
        let point_patch = &self.point_patch;
        let positions = &cloud.positions;

        let clamped: u64 = self
            .field
            .par_iter_mut()
            .enumerate()
            .map(|(k, e)| {
                let own = point_patch[k];
                let at = positions[k];
                let mut sum = Vec3::ZERO;
                let mut clamps = 0u64;
                for &(pos, pol, patch) in &all {
                    if patch == own {
                        continue;
                    }
                    let (de, c) = field_kernel(pos, pol, at, eps);
                    sum += de;
                    clamps += c as u64;
                }
                *e = sum;
                clamps
            })
            .sum();
        self.clamped += clamped;

        for v in &mut self.interaction {
            *v = 0.0;
        }
        for k in 0..cloud.len() {
            let owner = self.point_patch[k];
            if owner != u32::MAX {
                self.interaction[owner as usize] +=
                    cloud.weight(k) * cloud.normals[k].dot(self.field[k]);
            }
        }
    }

    /// True when every accumulated field vector is finite.
    pub fn is_finite(&self) -> bool {
        self.field.iter().all(|e| e.is_finite())
    }
}

impl std::fmt::Debug for FieldAccumulator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FieldAccumulator")
            .field("points", &self.field.len())
            .field("patches", &self.interaction.len())
            .field("clamped", &self.clamped)
            .finish()
    }
}
