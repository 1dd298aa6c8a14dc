//! Cloud normalization and patch construction.
//!
//! The cloud is scaled into the unit cube and cut into cubical voxel
//! patches. Undersized patches are merged into their nearest 26-connected
//! neighbor until every patch either reaches the minimum size or has no
//! neighbor left. Patches whose smallest normalized covariance eigenvalue
//! falls below a threshold are classified planar; every patch then gets a
//! coherent initial orientation from a reference-point rule, and each point
//! a confidence weight from a pluggable provider.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::geometry::eigen::{eigen_sym, EigenDecomp, SymMat3};
use crate::geometry::{SpatialIndex, Vec3};

/// Default voxel width (fraction of the unit cube edge).
pub const DEFAULT_VOXEL_WIDTH: f64 = 1.0 / 25.0;
/// Default minimum patch size before merging stops.
pub const DEFAULT_MIN_PATCH_SIZE: usize = 100;
/// Default planarity threshold on the smallest normalized eigenvalue.
pub const DEFAULT_PLANARITY_THRESHOLD: f64 = 0.00015;

/// Similarity transform mapping a cloud into the unit cube and back.
#[derive(Debug, Clone, Copy)]
pub struct UnitCubeTransform {
    pub scale: f64,
    pub offset: Vec3,
    pub min: Vec3,
}

impl UnitCubeTransform {
    #[inline]
    pub fn forward(&self, p: Vec3) -> Vec3 {
        (p - self.min) * self.scale + self.offset
    }

    #[inline]
    pub fn inverse(&self, p: Vec3) -> Vec3 {
        (p - self.offset) / self.scale + self.min
    }

    /// Identity transform (for clouds that are already normalized).
    pub fn identity() -> Self {
        UnitCubeTransform {
            scale: 1.0,
            offset: Vec3::ZERO,
            min: Vec3::ZERO,
        }
    }
}

/// Scale and translate the cloud so its bounding box lies in [0,1]^3: the
/// longest axis spans [0,1], the others are centered. Normals are left
/// untouched. Returns the transform for exact inverse mapping.
pub fn normalize_unit_cube(cloud: &mut PointCloud) -> Result<UnitCubeTransform> {
    let (lo, hi) = cloud.bounding_box().ok_or(Error::EmptyCloud)?;
    let extent = hi - lo;
    let longest = extent.x.max(extent.y).max(extent.z);
    if longest <= 0.0 {
        return Err(Error::ZeroExtent);
    }
    let scale = 1.0 / longest;
    let offset = Vec3::new(
        0.5 * (1.0 - extent.x * scale),
        0.5 * (1.0 - extent.y * scale),
        0.5 * (1.0 - extent.z * scale),
    );
    let transform = UnitCubeTransform {
        scale,
        offset,
        min: lo,
    };
    for p in &mut cloud.positions {
        *p = transform.forward(*p);
    }
    Ok(transform)
}

/// A contiguous group of points assigned to one voxel region.
#[derive(Debug, Clone)]
pub struct Patch {
    pub id: usize,
    pub indices: Vec<u32>,
    pub centroid: Vec3,
    pub eigen: EigenDecomp,
    pub planar: bool,
    pub oriented: bool,
}

impl Patch {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Largest point-to-point extent, estimated by a two-sweep scan
    /// (farthest point from the centroid, then farthest point from that).
    pub fn diameter(&self, cloud: &PointCloud) -> f64 {
        let far = |from: Vec3| -> Vec3 {
            let mut best = from;
            let mut best_d = -1.0;
            for &i in &self.indices {
                let d = (cloud.positions[i as usize] - from).norm_squared();
                if d > best_d {
                    best_d = d;
                    best = cloud.positions[i as usize];
                }
            }
            best
        };
        let a = far(self.centroid);
        let b = far(a);
        (a - b).norm()
    }
}

struct Candidate {
    cells: Vec<u64>,
    indices: Vec<u32>,
    position_sum: Vec3,
    alive: bool,
}

impl Candidate {
    fn centroid(&self) -> Vec3 {
        self.position_sum / self.indices.len() as f64
    }
}

/// Partition a unit-cube-normalized cloud into voxel patches and merge
/// undersized ones into their nearest 26-connected neighbor until no
/// undersized patch has a nonempty neighbor left.
pub fn voxel_partition(
    cloud: &PointCloud,
    voxel_width: f64,
    min_patch_size: usize,
) -> Result<Vec<Patch>> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if !(voxel_width > 0.0 && voxel_width <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "voxel width must be in (0,1], got {voxel_width}"
        )));
    }
    if cloud.len() < min_patch_size {
        // Too few points to meet the size floor anywhere: one patch.
        let indices: Vec<u32> = (0..cloud.len() as u32).collect();
        let (cov, mean, _) =
            SymMat3::covariance(indices.iter().map(|&i| cloud.positions[i as usize]));
        return Ok(vec![Patch {
            id: 0,
            indices,
            centroid: mean,
            eigen: eigen_sym(&cov),
            planar: false,
            oriented: false,
        }]);
    }

    let dims = (1.0 / voxel_width).ceil().max(1.0) as i64;
    let cell_of = |p: Vec3| -> (i64, i64, i64) {
        let clamp = |v: f64| ((v / voxel_width) as i64).clamp(0, dims - 1);
        (clamp(p.x), clamp(p.y), clamp(p.z))
    };
    let linear = |c: (i64, i64, i64)| (c.0 + dims * (c.1 + dims * c.2)) as u64;

    let mut by_cell: HashMap<u64, Vec<u32>> = HashMap::new();
    for (i, &p) in cloud.positions.iter().enumerate() {
        by_cell.entry(linear(cell_of(p))).or_default().push(i as u32);
    }

    let mut cell_keys: Vec<u64> = by_cell.keys().copied().collect();
    cell_keys.sort_unstable();

    let mut candidates: Vec<Candidate> = Vec::with_capacity(cell_keys.len());
    let mut owner: HashMap<u64, usize> = HashMap::with_capacity(cell_keys.len());
    for key in cell_keys {
        let indices = by_cell.remove(&key).unwrap();
        let position_sum = indices
            .iter()
            .fold(Vec3::ZERO, |acc, &i| acc + cloud.positions[i as usize]);
        owner.insert(key, candidates.len());
        candidates.push(Candidate {
            cells: vec![key],
            indices,
            position_sum,
            alive: true,
        });
    }

    let neighbors_of = |key: u64, owner: &HashMap<u64, usize>, slot: usize| -> Vec<usize> {
        let z = (key / (dims * dims) as u64) as i64;
        let rem = key % (dims * dims) as u64;
        let y = (rem / dims as u64) as i64;
        let x = (rem % dims as u64) as i64;
        let mut out = Vec::new();
        for dz in -1..=1i64 {
            for dy in -1..=1i64 {
                for dx in -1..=1i64 {
                    if dx == 0 && dy == 0 && dz == 0 {
                        continue;
                    }
                    let (nx, ny, nz) = (x + dx, y + dy, z + dz);
                    if nx < 0 || ny < 0 || nz < 0 || nx >= dims || ny >= dims || nz >= dims {
                        continue;
                    }
                    if let Some(&other) = owner.get(&((nx + dims * (ny + dims * nz)) as u64)) {
                        if other != slot {
                            out.push(other);
                        }
                    }
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    };

    // Smallest undersized patch first; ties by candidate order.
    use std::collections::BTreeSet;
    let mut queue: BTreeSet<(usize, usize)> = candidates
        .iter()
        .enumerate()
        .filter(|(_, c)| c.indices.len() < min_patch_size)
        .map(|(slot, c)| (c.indices.len(), slot))
        .collect();

    while let Some(&(size, slot)) = queue.iter().next() {
        queue.remove(&(size, slot));
        if !candidates[slot].alive || candidates[slot].indices.len() != size {
            continue;
        }
        let mut adjacent: Vec<usize> = Vec::new();
        for &cell in &candidates[slot].cells {
            adjacent.extend(neighbors_of(cell, &owner, slot));
        }
        adjacent.sort_unstable();
        adjacent.dedup();
        if adjacent.is_empty() {
            continue; // sole patch of its voxel region
        }
        let centroid = candidates[slot].centroid();
        let target = adjacent
            .into_iter()
            .min_by(|&a, &b| {
                let da = (candidates[a].centroid() - centroid).norm_squared();
                let db = (candidates[b].centroid() - centroid).norm_squared();
                da.total_cmp(&db).then(a.cmp(&b))
            })
            .unwrap();

        let Candidate {
            cells,
            indices,
            position_sum,
            ..
        } = std::mem::replace(
            &mut candidates[slot],
            Candidate {
                cells: Vec::new(),
                indices: Vec::new(),
                position_sum: Vec3::ZERO,
                alive: false,
            },
        );
        if candidates[target].indices.len() < min_patch_size {
            queue.remove(&(candidates[target].indices.len(), target));
        }
        for &cell in &cells {
            owner.insert(cell, target);
        }
        candidates[target].cells.extend(cells);
        candidates[target].indices.extend(indices);
        candidates[target].position_sum += position_sum;
        if candidates[target].indices.len() < min_patch_size {
            queue.insert((candidates[target].indices.len(), target));
        }
    }

    let mut survivors: Vec<Candidate> = candidates.into_iter().filter(|c| c.alive).collect();
    for c in &mut survivors {
        c.indices.sort_unstable();
    }
    survivors.sort_by_key(|c| c.indices[0]);

    let patches: Vec<Patch> = survivors
        .into_par_iter()
        .enumerate()
        .map(|(id, c)| {
            let (cov, mean, _) = SymMat3::covariance(
                c.indices.iter().map(|&i| cloud.positions[i as usize]),
            );
            Patch {
                id,
                indices: c.indices,
                centroid: mean,
                eigen: eigen_sym(&cov),
                planar: false,
                oriented: false,
            }
        })
        .collect();

    verify_partition(&patches, cloud.len())?;
    Ok(patches)
}

/// Check that the patches partition `0..n` (pairwise disjoint, exhaustive).
pub fn verify_partition(patches: &[Patch], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    let mut total = 0usize;
    for p in patches {
        for &i in &p.indices {
            let i = i as usize;
            if i >= n || seen[i] {
                return Err(Error::Invariant(format!(
                    "patch partition broken at point {i}"
                )));
            }
            seen[i] = true;
            total += 1;
        }
    }
    if total != n {
        return Err(Error::Invariant(format!(
            "patch partition covers {total} of {n} points"
        )));
    }
    Ok(())
}

/// Planarity test: eigenvalues scaled so the largest is 1, planar when the
/// smallest falls below `threshold`. Patches with fewer than three
/// non-collinear points are planar by convention (their scaled smallest
/// eigenvalue is zero).
pub fn classify_planar(patch: &Patch, threshold: f64) -> bool {
    patch.eigen.normalized_smallest() < threshold
}

/// Reference point used to coherently orient a patch: the centroid, or for
/// planar patches the centroid displaced off-plane along the smallest
/// eigenvector by one patch diameter so one side is chosen consistently.
pub fn default_reference(patch: &Patch, cloud: &PointCloud) -> Vec3 {
    if patch.planar {
        patch.centroid - patch.eigen.vectors[2] * patch.diameter(cloud)
    } else {
        patch.centroid
    }
}

/// Flip every normal of the patch so it points away from the reference
/// point (`n . (x - ref) >= 0`). Exact ties keep their current sign.
/// Returns the indices that were flipped and marks the patch oriented.
pub fn coherent_orient_patch(
    patch: &mut Patch,
    cloud: &mut PointCloud,
    reference: Option<Vec3>,
) -> Vec<u32> {
    let reference = reference.unwrap_or_else(|| default_reference(patch, cloud));
    let mut flips = Vec::new();
    for &i in &patch.indices {
        let idx = i as usize;
        if cloud.normals[idx].dot(cloud.positions[idx] - reference) < 0.0 {
            cloud.flip_normal(idx);
            flips.push(i);
        }
    }
    patch.oriented = true;
    flips
}

/// Coherently orient every patch: flip decisions are computed in parallel
/// (the default reference rule is read-only) and applied afterwards.
pub fn orient_all_patches(patches: &mut [Patch], cloud: &mut PointCloud) -> usize {
    let decisions: Vec<Vec<u32>> = patches
        .par_iter()
        .map(|patch| {
            let reference = default_reference(patch, cloud);
            patch
                .indices
                .iter()
                .copied()
                .filter(|&i| {
                    let idx = i as usize;
                    cloud.normals[idx].dot(cloud.positions[idx] - reference) < 0.0
                })
                .collect()
        })
        .collect();
    let mut flipped = 0usize;
    for (patch, flips) in patches.iter_mut().zip(decisions) {
        for &i in &flips {
            cloud.flip_normal(i as usize);
        }
        flipped += flips.len();
        patch.oriented = true;
    }
    flipped
}

/// Source of per-point confidence weights in [0,1].
#[derive(Debug, Clone)]
pub enum ConfidenceStrategy {
    /// Every point gets weight 1.
    Uniform,
    /// Weight from local normal agreement: `max(0, mean of n_i . n_j)` over
    /// the k nearest neighbors, clamped to [0,1].
    Consistency { k: usize },
    /// Weights supplied externally (e.g. a sidecar file), one per point.
    External(Vec<f64>),
}

impl ConfidenceStrategy {
    pub fn tag(&self) -> String {
        match self {
            ConfidenceStrategy::Uniform => "uniform".into(),
            ConfidenceStrategy::Consistency { k } => format!("consistency:{k}"),
            ConfidenceStrategy::External(_) => "file".into(),
        }
    }
}

/// Evaluate the confidence provider for every point.
pub fn confidence(
    strategy: &ConfidenceStrategy,
    cloud: &PointCloud,
    index: &SpatialIndex,
) -> Result<Vec<f64>> {
    match strategy {
        ConfidenceStrategy::Uniform => Ok(vec![1.0; cloud.len()]),
        ConfidenceStrategy::Consistency { k } => {
            if !cloud.has_normals() {
                return Err(Error::MissingNormals);
            }
            let weights = (0..cloud.len())
                .into_par_iter()
                .map(|i| {
                    let neighbors = index.knn_of_point(i, *k);
                    if neighbors.is_empty() {
                        return 1.0;
                    }
                    let mean = neighbors
                        .iter()
                        .map(|n| cloud.normals[i].dot(cloud.normals[n.index]))
                        .sum::<f64>()
                        / neighbors.len() as f64;
                    mean.clamp(0.0, 1.0)
                })
                .collect();
            Ok(weights)
        }
        ConfidenceStrategy::External(values) => {
            if values.len() != cloud.len() {
                return Err(Error::SizeMismatch {
                    expected: cloud.len(),
                    got: values.len(),
                });
            }
            if let Some(bad) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::InvalidConfig(format!(
                    "confidence value {bad} outside [0,1]"
                )));
            }
            Ok(values.clone())
        }
    }
}
