use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// An unstructured point cloud with optional unit normals and per-point
/// bookkeeping.
///
/// Normals are always stored unit-length; their magnitude carries no
/// meaning. Per-point confidence weights live in a separate channel and are
/// never folded into the normal. `normal_given` distinguishes normals that
/// arrived with the input from normals estimated by the pipeline;
/// `flipped_by_diffusion` marks points the diffusion pass sign-corrected.
#[derive(Debug, Clone, Default)]
pub struct PointCloud {
    pub positions: Vec<Vec3>,
    /// Empty when the cloud carries no normals, otherwise one per point.
    pub normals: Vec<Vec3>,
    /// Empty until assigned, otherwise one weight in [0,1] per point.
    pub confidence: Vec<f64>,
    /// Empty when the cloud carries no normals.
    pub normal_given: Vec<bool>,
    pub flipped_by_diffusion: Vec<bool>,
}

impl PointCloud {
    pub fn from_positions(positions: Vec<Vec3>) -> Self {
        let n = positions.len();
        PointCloud {
            positions,
            normals: Vec::new(),
            confidence: Vec::new(),
            normal_given: Vec::new(),
            flipped_by_diffusion: vec![false; n],
        }
    }

    /// Build a cloud where every point carries a given unit normal.
    pub fn with_normals(positions: Vec<Vec3>, normals: Vec<Vec3>) -> Result<Self> {
        if positions.len() != normals.len() {
            return Err(Error::SizeMismatch {
                expected: positions.len(),
                got: normals.len(),
            });
        }
        let n = positions.len();
        let mut unit = Vec::with_capacity(n);
        for (row, m) in normals.into_iter().enumerate() {
            match m.normalized() {
                Some(u) => unit.push(u),
                None => return Err(Error::ZeroLengthNormal { row }),
            }
        }
        Ok(PointCloud {
            positions,
            normals: unit,
            confidence: Vec::new(),
            normal_given: vec![true; n],
            flipped_by_diffusion: vec![false; n],
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    #[inline]
    pub fn has_normals(&self) -> bool {
        !self.normals.is_empty()
    }

    /// Ensure the normal/flag channels exist, zero-filled for new slots.
    pub fn allocate_normals(&mut self) {
        if self.normals.is_empty() {
            self.normals = vec![Vec3::ZERO; self.len()];
            self.normal_given = vec![false; self.len()];
        }
    }

    /// Confidence weight of a point; 1 when no weights were assigned.
    #[inline]
    pub fn weight(&self, index: usize) -> f64 {
        if self.confidence.is_empty() {
            1.0
        } else {
            self.confidence[index]
        }
    }

    pub fn set_confidence(&mut self, weights: Vec<f64>) -> Result<()> {
        if weights.len() != self.len() {
            return Err(Error::SizeMismatch {
                expected: self.len(),
                got: weights.len(),
            });
        }
        self.confidence = weights;
        Ok(())
    }

    /// Axis-aligned bounding box, or `None` for an empty cloud.
    pub fn bounding_box(&self) -> Option<(Vec3, Vec3)> {
        let first = *self.positions.first()?;
        let mut lo = first;
        let mut hi = first;
        for &p in &self.positions[1..] {
            lo = lo.min_by_component(p);
            hi = hi.max_by_component(p);
        }
        Some((lo, hi))
    }

    /// Flip the stored normal of one point.
    #[inline]
    pub fn flip_normal(&mut self, index: usize) {
        self.normals[index] = -self.normals[index];
    }

    /// Negate every normal in place.
    pub fn negate_all_normals(&mut self) {
        for n in &mut self.normals {
            *n = -*n;
        }
    }
}
