//! Greedy dipole patch propagation.
//!
//! Starting from the flattest patch, the field of every oriented patch is
//! accumulated incrementally; at each step the remaining patch with the
//! strongest absolute interaction is chosen, flipped when the interaction
//! is negative, and its dipoles are added to the field. A diffusion pass
//! then flips individual points that disagree with the final field.
//! Clouds above a size threshold run the whole scheme on a per-patch
//! subsample and orient the remainder by interpolation against the
//! subsample's field.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cloud::PointCloud;
use crate::dipole::{field_sum, gather_sources, FieldAccumulator};
use crate::error::{Error, Result};
use crate::geometry::eigen::{eigen_sym, SymMat3};
use crate::geometry::Vec3;
use crate::patching::Patch;

/// Knobs for propagation and the large-cloud subsample path.
#[derive(Debug, Clone)]
pub struct PropagationConfig {
    /// Diffusion passes after propagation (first pass reuses the
    /// accumulated field, later passes recompute it from scratch).
    pub diffusion_passes: usize,
    /// Point count above which the subsample path kicks in.
    pub subsample_threshold: usize,
    /// Fraction of each patch kept in the subsample.
    pub subsample_fraction: f64,
    /// Seed for the subsample draw (the only randomness in the pipeline).
    pub seed: u64,
}

impl Default for PropagationConfig {
    fn default() -> Self {
        PropagationConfig {
            diffusion_passes: 1,
            subsample_threshold: 500_000,
            subsample_fraction: 0.1,
            seed: 0,
        }
    }
}

/// One propagation step: which patch, its interaction at selection time,
/// and whether it was flipped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub patch: usize,
    pub interaction: f64,
    pub flipped: bool,
}

/// One diffusion flip: the point and its field disagreement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionEntry {
    pub point: usize,
    pub dot: f64,
}

/// Ordered log of a propagation run.
#[derive(Debug, Clone, Default)]
pub struct PropagationTrace {
    pub entries: Vec<TraceEntry>,
    pub diffusion: Vec<DiffusionEntry>,
    pub diffusion_passes_run: usize,
    pub phase_seconds: Vec<(String, f64)>,
}

impl PropagationTrace {
    pub fn patches_flipped(&self) -> usize {
        self.entries.iter().filter(|e| e.flipped).count()
    }

    pub fn push_phase(&mut self, name: &str, started: Instant) {
        self.phase_seconds
            .push((name.to_string(), started.elapsed().as_secs_f64()));
    }
}

/// The flattest patch: minimal smallest normalized eigenvalue, ties broken
/// by lowest id.
pub fn select_seed(patches: &[Patch]) -> Result<usize> {
    patches
        .iter()
        .min_by(|a, b| {
            a.eigen
                .normalized_smallest()
                .total_cmp(&b.eigen.normalized_smallest())
                .then(a.id.cmp(&b.id))
        })
        .map(|p| p.id)
        .ok_or_else(|| Error::InvalidConfig("no patches to propagate".into()))
}

/// Run the greedy propagation loop over coherently oriented patches.
///
/// On return every patch is oriented and the accumulator holds, for each
/// point, the field of all patches except the point's own.
pub fn propagate(
    cloud: &mut PointCloud,
    patches: &mut [Patch],
) -> Result<(PropagationTrace, FieldAccumulator)> {
    if !cloud.has_normals() {
        return Err(Error::MissingNormals);
    }
    debug_assert!(
        patches.iter().enumerate().all(|(i, p)| p.id == i),
        "patch ids must index their slice"
    );
    let started = Instant::now();
    let seed = select_seed(patches)?;
    let mut acc = FieldAccumulator::new(cloud.len(), patches);
    let mut trace = PropagationTrace::default();
    trace.entries.reserve(patches.len());

    patches[seed].oriented = true;
    trace.entries.push(TraceEntry {
        patch: seed,
        interaction: 0.0,
        flipped: false,
    });
    acc.accumulate_patch(&patches[seed], cloud);

    let mut remaining: Vec<usize> = (0..patches.len()).filter(|&i| i != seed).collect();
    while !remaining.is_empty() {
        let mut best_slot = 0;
        let mut best_mag = -1.0f64;
        for (slot, &id) in remaining.iter().enumerate() {
            let mag = acc.interaction[id].abs();
            if mag > best_mag {
                best_mag = mag;
                best_slot = slot;
            }
        }
        let id = remaining.swap_remove(best_slot);
        let interaction = acc.interaction[id];
        if !interaction.is_finite() {
            return Err(Error::Invariant(format!(
                "non-finite interaction for patch {id}"
            )));
        }
        let flipped = interaction < 0.0;
        if flipped {
            for &i in &patches[id].indices {
                cloud.flip_normal(i as usize);
            }
        }
        patches[id].oriented = true;
        trace.entries.push(TraceEntry {
            patch: id,
            interaction,
            flipped,
        });
        acc.accumulate_patch(&patches[id], cloud);
    }

    if !acc.is_finite() {
        return Err(Error::Invariant("non-finite field after propagation".into()));
    }
    trace.push_phase("propagate", started);
    Ok((trace, acc))
}

/// Result of the diffusion correction.
#[derive(Debug, Clone, Default)]
pub struct DiffusionOutcome {
    pub flips: usize,
    pub entries: Vec<DiffusionEntry>,
    pub passes_run: usize,
}

/// Flip individual points that disagree with the leave-own-patch-out field.
///
/// The first pass reuses the accumulator's field exactly as propagation
/// left it; every further pass recomputes the field from scratch with the
/// current normals. Flips are decided against a frozen field and applied
/// in one batch per pass; a pass that flips nothing stops early.
pub fn diffuse(
    cloud: &mut PointCloud,
    acc: &mut FieldAccumulator,
    passes: usize,
) -> DiffusionOutcome {
    let mut outcome = DiffusionOutcome::default();
    for pass in 0..passes {
        if pass > 0 {
            acc.recompute_from_scratch(cloud);
        }
        let normals = &cloud.normals;
        let field = &acc.field;
        let decisions: Vec<Option<f64>> = (0..cloud.len())
            .into_par_iter()
            .map(|k| {
                let dot = normals[k].dot(field[k]);
                (dot < 0.0).then_some(dot)
            })
            .collect();
        let mut any = false;
        for (k, dot) in decisions.into_iter().enumerate() {
            if let Some(dot) = dot {
                cloud.flip_normal(k);
                cloud.flipped_by_diffusion[k] = true;
                outcome.entries.push(DiffusionEntry { point: k, dot });
                outcome.flips += 1;
                any = true;
            }
        }
        outcome.passes_run = pass + 1;
        if !any {
            break;
        }
    }
    outcome
}

/// Result of orientation interpolation.
#[derive(Debug, Clone, Default)]
pub struct InterpolationOutcome {
    /// Points whose sign was decided by the field of the given set.
    pub oriented: usize,
    /// How many of those were flipped.
    pub flipped: usize,
    /// Points whose normal was exactly orthogonal to the field (sign kept).
    pub low_confidence: usize,
    /// Flips applied by the optional re-correction pass (may touch given
    /// normals).
    pub recorrect_flips: usize,
    pub clamped: u64,
}

/// Orient every point without a given normal by the field built from the
/// points with given normals. With `recorrect`, a final point-level
/// diffusion over the field of all points (excluding each point's own
/// contribution) may also flip the given normals.
pub fn interpolate_orientation(
    cloud: &mut PointCloud,
    recorrect: bool,
) -> Result<InterpolationOutcome> {
    if !cloud.has_normals() {
        return Err(Error::MissingNormals);
    }
    let is_given: Vec<bool> = (0..cloud.len())
        .map(|i| cloud.normal_given.get(i).copied().unwrap_or(false))
        .collect();
    let given: Vec<u32> = (0..cloud.len())
        .filter(|&i| is_given[i])
        .map(|i| i as u32)
        .collect();
    if given.is_empty() {
        return Err(Error::NoGivenNormals);
    }
    let sources = gather_sources(cloud, &given);
    let mut outcome = InterpolationOutcome::default();

    let normals = &cloud.normals;
    let positions = &cloud.positions;
    let decisions: Vec<Option<(bool, bool, u64)>> = (0..cloud.len())
        .into_par_iter()
        .map(|k| {
            if is_given[k] {
                return None;
            }
            let (e, clamps) = field_sum(&sources, positions[k], crate::dipole::DEFAULT_EPSILON);
            let dot = normals[k].dot(e);
            Some((dot < 0.0, dot == 0.0, clamps))
        })
        .collect();
    for (k, d) in decisions.into_iter().enumerate() {
        if let Some((flip, tie, clamps)) = d {
            outcome.oriented += 1;
            outcome.clamped += clamps;
            if flip {
                cloud.flip_normal(k);
                outcome.flipped += 1;
            }
            if tie {
                outcome.low_confidence += 1;
            }
        }
    }

    if recorrect {
        let all: Vec<(Vec3, Vec3)> = (0..cloud.len())
            .map(|i| (cloud.positions[i], cloud.normals[i] * cloud.weight(i)))
            .collect();
        let normals = &cloud.normals;
        let flips: Vec<Option<u64>> = (0..cloud.len())
            .into_par_iter()
            .map(|k| {
                let mut e = Vec3::ZERO;
                let mut clamps = 0u64;
                for (i, &(pos, pol)) in all.iter().enumerate() {
                    if i == k {
                        continue;
                    }
                    let (de, c) =
                        crate::dipole::field_kernel(pos, pol, all[k].0, crate::dipole::DEFAULT_EPSILON);
                    e += de;
                    clamps += c as u64;
                }
                (normals[k].dot(e) < 0.0).then_some(clamps)
            })
            .collect();
        for (k, f) in flips.into_iter().enumerate() {
            if let Some(clamps) = f {
                cloud.flip_normal(k);
                cloud.flipped_by_diffusion[k] = true;
                outcome.recorrect_flips += 1;
                outcome.clamped += clamps;
            }
        }
    }
    Ok(outcome)
}

/// Everything a propagation run produces.
#[derive(Debug)]
pub struct PropagationOutcome {
    pub trace: PropagationTrace,
    pub diffusion: DiffusionOutcome,
    /// Present on the plain (non-subsampled) path.
    pub accumulator: Option<FieldAccumulator>,
    /// Interpolation statistics of the subsample path.
    pub interpolation: Option<InterpolationOutcome>,
    /// Size of the subsample when one was drawn.
    pub subsample_size: Option<usize>,
    pub clamped: u64,
}

/// Orient a cloud whose patches are coherently oriented: plain
/// propagate-plus-diffuse when the cloud fits under the subsample
/// threshold, otherwise the seeded per-patch subsample path with
/// interpolation of the remainder.
pub fn orient_large(
    cloud: &mut PointCloud,
    patches: &mut [Patch],
    config: &PropagationConfig,
) -> Result<PropagationOutcome> {
    if cloud.len() <= config.subsample_threshold {
        let (trace, mut acc) = propagate(cloud, patches)?;
        let started = Instant::now();
        let diffusion = diffuse(cloud, &mut acc, config.diffusion_passes);
        let mut trace = trace;
        trace.diffusion = diffusion.entries.clone();
        trace.diffusion_passes_run = diffusion.passes_run;
        trace.push_phase("diffuse", started);
        let clamped = acc.clamped;
        return Ok(PropagationOutcome {
            trace,
            diffusion,
            accumulator: Some(acc),
            interpolation: None,
            subsample_size: None,
            clamped,
        });
    }

    if !(config.subsample_fraction > 0.0 && config.subsample_fraction <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "subsample fraction must be in (0,1], got {}",
            config.subsample_fraction
        )));
    }

    // Seeded uniform draw per patch, deterministic in patch id order.
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut chosen: Vec<u32> = Vec::new();
    for patch in patches.iter() {
        let m = ((patch.len() as f64 * config.subsample_fraction).round() as usize)
            .clamp(1, patch.len());
        let mut pool = patch.indices.clone();
        let (picked, _) = pool.partial_shuffle(&mut rng, m);
        chosen.extend_from_slice(picked);
    }
    chosen.sort_unstable();

    let mut sub_slot = vec![u32::MAX; cloud.len()];
    for (slot, &g) in chosen.iter().enumerate() {
        sub_slot[g as usize] = slot as u32;
    }

    let mut sub_cloud = PointCloud::from_positions(
        chosen.iter().map(|&g| cloud.positions[g as usize]).collect(),
    );
    sub_cloud.normals = chosen.iter().map(|&g| cloud.normals[g as usize]).collect();
    sub_cloud.normal_given = chosen
        .iter()
        .map(|&g| cloud.normal_given[g as usize])
        .collect();
    if !cloud.confidence.is_empty() {
        sub_cloud.confidence = chosen
            .iter()
            .map(|&g| cloud.confidence[g as usize])
            .collect();
    }

    let mut sub_patches: Vec<Patch> = patches
        .iter()
        .map(|patch| {
            let indices: Vec<u32> = patch
                .indices
                .iter()
                .filter_map(|&g| {
                    let s = sub_slot[g as usize];
                    (s != u32::MAX).then_some(s)
                })
                .collect();
            let (cov, mean, _) = SymMat3::covariance(
                indices.iter().map(|&s| sub_cloud.positions[s as usize]),
            );
            Patch {
                id: patch.id,
                indices,
                centroid: mean,
                eigen: eigen_sym(&cov),
                planar: patch.planar,
                oriented: patch.oriented,
            }
        })
        .collect();

    let (mut trace, mut acc) = propagate(&mut sub_cloud, &mut sub_patches)?;
    let diffuse_started = Instant::now();
    let mut diffusion = diffuse(&mut sub_cloud, &mut acc, config.diffusion_passes);
    trace.push_phase("diffuse", diffuse_started);

    // Map subsample bookkeeping back to global point ids.
    for e in &mut diffusion.entries {
        e.point = chosen[e.point] as usize;
    }
    trace.diffusion = diffusion.entries.clone();
    trace.diffusion_passes_run = diffusion.passes_run;
    for (slot, &g) in chosen.iter().enumerate() {
        let g = g as usize;
        cloud.normals[g] = sub_cloud.normals[slot];
        if sub_cloud.flipped_by_diffusion[slot] {
            cloud.flipped_by_diffusion[g] = true;
        }
    }

    // Orient the remainder against the subsample's field.
    let interp_started = Instant::now();
    let sub_sources: Vec<(Vec3, Vec3)> = chosen
        .iter()
        .map(|&g| {
            let g = g as usize;
            (cloud.positions[g], cloud.normals[g] * cloud.weight(g))
        })
        .collect();
    let positions = &cloud.positions;
    let normals = &cloud.normals;
    let decisions: Vec<Option<(bool, bool, u64)>> = (0..cloud.len())
        .into_par_iter()
        .map(|k| {
            if sub_slot[k] != u32::MAX {
                return None;
            }
            let (e, clamps) = field_sum(&sub_sources, positions[k], crate::dipole::DEFAULT_EPSILON);
            let dot = normals[k].dot(e);
            Some((dot < 0.0, dot == 0.0, clamps))
        })
        .collect();
    let mut interpolation = InterpolationOutcome::default();
    for (k, d) in decisions.into_iter().enumerate() {
        if let Some((flip, tie, clamps)) = d {
            interpolation.oriented += 1;
            interpolation.clamped += clamps;
            if flip {
                cloud.flip_normal(k);
                interpolation.flipped += 1;
            }
            if tie {
                interpolation.low_confidence += 1;
            }
        }
    }
    trace.push_phase("interpolate", interp_started);
    trace
        .phase_seconds
        .push(("subsample_total".into(), started.elapsed().as_secs_f64()));

    for patch in patches.iter_mut() {
        patch.oriented = true;
    }

    let clamped = acc.clamped + interpolation.clamped;
    let sub_len = chosen.len();
    Ok(PropagationOutcome {
        trace,
        diffusion,
        accumulator: None,
        interpolation: Some(interpolation),
        subsample_size: Some(sub_len),
        clamped,
    })
}
