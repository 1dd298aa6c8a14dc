//! End-to-end workflows shared by the CLI, the examples and the tests:
//! orient a cloud from scratch, interpolate orientation from given normals,
//! and score an estimate against ground truth.

use std::time::Instant;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::evaluation::{self, Accuracy};
use crate::geometry::{estimate_normals_pca, SpatialIndex, Vec3};
use crate::io::EvalReport;
use crate::patching::{
    classify_planar, confidence, normalize_unit_cube, orient_all_patches, voxel_partition,
    ConfidenceStrategy, DEFAULT_MIN_PATCH_SIZE, DEFAULT_PLANARITY_THRESHOLD, DEFAULT_VOXEL_WIDTH,
};
use crate::propagation::{
    interpolate_orientation, orient_large, PropagationConfig, PropagationTrace,
};

/// Anchor for fixing the arbitrary global sign: the normal of `point` is
/// forced to agree with `direction`, negating the whole cloud if needed.
#[derive(Debug, Clone, Copy)]
pub struct FlipTo {
    pub point: usize,
    pub direction: Vec3,
}

impl FlipTo {
    /// Parse `"<index>:<+x|-x|+y|-y|+z|-z>"`.
    pub fn parse(text: &str) -> Result<Self> {
        let (index, dir) = text
            .split_once(':')
            .ok_or_else(|| Error::InvalidConfig(format!("flip-to '{text}' wants index:dir")))?;
        let point = index
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("bad flip-to index '{index}'")))?;
        let direction = match dir {
            "+x" => Vec3::new(1.0, 0.0, 0.0),
            "-x" => Vec3::new(-1.0, 0.0, 0.0),
            "+y" => Vec3::new(0.0, 1.0, 0.0),
            "-y" => Vec3::new(0.0, -1.0, 0.0),
            "+z" => Vec3::new(0.0, 0.0, 1.0),
            "-z" => Vec3::new(0.0, 0.0, -1.0),
            other => {
                return Err(Error::InvalidConfig(format!(
                    "bad flip-to direction '{other}'"
                )))
            }
        };
        Ok(FlipTo { point, direction })
    }
}

/// Full parameter set of the orient workflow. Defaults match the documented
/// pipeline defaults.
#[derive(Debug, Clone)]
pub struct OrientParams {
    pub voxel_width: f64,
    pub min_patch_size: usize,
    pub planarity_threshold: f64,
    pub knn: usize,
    pub diffusion_passes: usize,
    pub subsample_threshold: usize,
    pub subsample_fraction: f64,
    pub seed: u64,
    pub confidence: ConfidenceStrategy,
    pub flip_to: Option<FlipTo>,
    /// Discard any input normals and re-estimate them from scratch.
    pub reestimate_normals: bool,
}

impl Default for OrientParams {
    fn default() -> Self {
        OrientParams {
            voxel_width: DEFAULT_VOXEL_WIDTH,
            min_patch_size: DEFAULT_MIN_PATCH_SIZE,
            planarity_threshold: DEFAULT_PLANARITY_THRESHOLD,
            knn: 16,
            diffusion_passes: 1,
            subsample_threshold: 500_000,
            subsample_fraction: 0.1,
            seed: 0,
            confidence: ConfidenceStrategy::Uniform,
            flip_to: None,
            reestimate_normals: false,
        }
    }
}

/// Result of the orient workflow.
#[derive(Debug)]
pub struct OrientOutcome {
    /// The input cloud with globally consistent unit normals, positions
    /// back in their original coordinates.
    pub cloud: PointCloud,
    pub trace: PropagationTrace,
    pub report: EvalReport,
}

/// Orient a cloud end to end: normalize, estimate missing normals,
/// partition into patches, orient each patch coherently, assign
/// confidences, run dipole propagation plus diffusion (or the subsample
/// path for very large clouds), and map positions back.
pub fn orient(mut cloud: PointCloud, params: &OrientParams) -> Result<OrientOutcome> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let mut report = EvalReport::new("orient");
    stamp_params(&mut report, params);
    report.points = cloud.len();

    if params.reestimate_normals {
        cloud.normals.clear();
        cloud.normal_given.clear();
    }

    let t = Instant::now();
    let transform = normalize_unit_cube(&mut cloud)?;
    report.timing("normalize", t.elapsed().as_secs_f64());

    let t = Instant::now();
    let index = SpatialIndex::build(&cloud.positions)?;
    report.timing("index", t.elapsed().as_secs_f64());

    let t = Instant::now();
    let needs_estimation =
        !cloud.has_normals() || cloud.normal_given.iter().any(|given| !given);
    if needs_estimation {
        report.degenerate_normals = estimate_normals_pca(&mut cloud, &index, params.knn)?;
    }
    report.timing("estimate", t.elapsed().as_secs_f64());

    let t = Instant::now();
    let mut patches = voxel_partition(&cloud, params.voxel_width, params.min_patch_size)?;
    for patch in &mut patches {
        patch.planar = classify_planar(patch, params.planarity_threshold);
    }
    report.patches = patches.len();
    report.planar_patches = patches.iter().filter(|p| p.planar).count();
    report.timing("partition", t.elapsed().as_secs_f64());

    let t = Instant::now();
    orient_all_patches(&mut patches, &mut cloud);
    report.timing("orient_patches", t.elapsed().as_secs_f64());

    let t = Instant::now();
    let weights = confidence(&params.confidence, &cloud, &index)?;
    cloud.set_confidence(weights)?;
    report.timing("confidence", t.elapsed().as_secs_f64());

    let config = PropagationConfig {
        diffusion_passes: params.diffusion_passes,
        subsample_threshold: params.subsample_threshold,
        subsample_fraction: params.subsample_fraction,
        seed: params.seed,
    };
    let outcome = orient_large(&mut cloud, &mut patches, &config)?;

    for p in &mut cloud.positions {
        *p = transform.inverse(*p);
    }

    if let Some(anchor) = params.flip_to {
        if anchor.point >= cloud.len() {
            return Err(Error::InvalidConfig(format!(
                "flip-to index {} out of range for {} points",
                anchor.point,
                cloud.len()
            )));
        }
        if cloud.normals[anchor.point].dot(anchor.direction) < 0.0 {
            cloud.negate_all_normals();
            report.param("flip_to_applied", "negated");
        } else {
            report.param("flip_to_applied", "kept");
        }
    }

    report.flips_propagation = outcome.trace.patches_flipped();
    report.flips_diffusion = outcome.diffusion.flips;
    report.diffusion_passes_run = outcome.diffusion.passes_run;
    report.clamped_pairs = outcome.clamped;
    if let Some(interp) = &outcome.interpolation {
        report.low_confidence = interp.low_confidence;
        report.param("subsample_size", outcome.subsample_size.unwrap_or(0));
    }
    for (phase, seconds) in &outcome.trace.phase_seconds {
        report.timing(phase, *seconds);
    }
    report.trace = outcome.trace.entries.clone();
    report.diffusion_flips = outcome.trace.diffusion.clone();

    Ok(OrientOutcome {
        cloud,
        trace: outcome.trace,
        report,
    })
}

fn stamp_params(report: &mut EvalReport, params: &OrientParams) {
    report.param("voxel_width", params.voxel_width);
    report.param("min_patch_size", params.min_patch_size);
    report.param("planarity_threshold", params.planarity_threshold);
    report.param("knn", params.knn);
    report.param("diffusion_passes", params.diffusion_passes);
    report.param("subsample_threshold", params.subsample_threshold);
    report.param("subsample_fraction", params.subsample_fraction);
    report.param("seed", params.seed);
    report.param("confidence", params.confidence.tag());
}

/// Parameters of the interpolate workflow.
#[derive(Debug, Clone)]
pub struct InterpolateParams {
    pub knn: usize,
    pub confidence: ConfidenceStrategy,
    /// Run a final diffusion over the combined field that may also flip the
    /// given normals.
    pub recorrect: bool,
}

impl Default for InterpolateParams {
    fn default() -> Self {
        InterpolateParams {
            knn: 16,
            confidence: ConfidenceStrategy::Uniform,
            recorrect: false,
        }
    }
}

/// Result of the interpolate workflow.
#[derive(Debug)]
pub struct InterpolateOutcome {
    pub cloud: PointCloud,
    pub report: EvalReport,
}

/// Orient points without given normals by the field of those with given
/// normals. Missing unsigned estimates are filled in by PCA first.
pub fn interpolate(mut cloud: PointCloud, params: &InterpolateParams) -> Result<InterpolateOutcome> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if !cloud.has_normals() || !cloud.normal_given.iter().any(|g| *g) {
        return Err(Error::NoGivenNormals);
    }
    let mut report = EvalReport::new("interpolate");
    report.param("knn", params.knn);
    report.param("confidence", params.confidence.tag());
    report.param("recorrect", params.recorrect);
    report.points = cloud.len();

    let t = Instant::now();
    let index = SpatialIndex::build(&cloud.positions)?;
    let needs_estimation = cloud
        .normal_given
        .iter()
        .enumerate()
        .any(|(i, given)| !given && cloud.normals[i] == Vec3::ZERO);
    if needs_estimation {
        report.degenerate_normals = estimate_normals_pca(&mut cloud, &index, params.knn)?;
    }
    report.timing("estimate", t.elapsed().as_secs_f64());

    let t = Instant::now();
    let weights = confidence(&params.confidence, &cloud, &index)?;
    cloud.set_confidence(weights)?;
    report.timing("confidence", t.elapsed().as_secs_f64());

    let t = Instant::now();
    let outcome = interpolate_orientation(&mut cloud, params.recorrect)?;
    report.timing("interpolate", t.elapsed().as_secs_f64());

    report.low_confidence = outcome.low_confidence;
    report.clamped_pairs = outcome.clamped;
    report.flips_diffusion = outcome.recorrect_flips;
    report.param("oriented", outcome.oriented);
    report.param("flipped", outcome.flipped);

    Ok(InterpolateOutcome { cloud, report })
}

/// Score an estimated orientation against index-aligned ground truth.
pub fn evaluate(estimate: &PointCloud, truth: &PointCloud) -> Result<(Accuracy, EvalReport)> {
    let a = evaluation::accuracy(estimate, truth)?;
    let mut report = EvalReport::new("eval");
    report.points = estimate.len();
    report.accuracy = Some(a.percent);
    report.global_sign = Some(a.sign);
    Ok((a, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::{accuracy, generate, ShapeKind, SyntheticShape};

    #[test]
    fn orient_recovers_sphere_orientation_from_positions_only() {
        let truth = generate(&SyntheticShape::new(ShapeKind::Sphere, 3000)).unwrap();
        let input = PointCloud::from_positions(truth.positions.clone());
        let out = orient(input, &OrientParams::default()).unwrap();
        let a = accuracy(&out.cloud, &truth).unwrap();
        assert!(a.percent >= 99.9, "sphere accuracy {}", a.percent);
        // Positions come back in original coordinates.
        for (p, q) in out.cloud.positions.iter().zip(&truth.positions) {
            assert!((*p - *q).norm() < 1e-12);
        }
    }

    #[test]
    fn orient_handles_tiny_single_patch_cloud() {
        // Below the min-patch-size floor the whole cloud is one patch.
        let truth = generate(&SyntheticShape::new(ShapeKind::Sphere, 100)).unwrap();
        let input = PointCloud::from_positions(truth.positions.clone());
        let params = OrientParams {
            knn: 12,
            min_patch_size: 150,
            ..OrientParams::default()
        };
        let out = orient(input, &params).unwrap();
        assert_eq!(out.report.patches, 1);
        assert!(out.cloud.has_normals());
        let a = accuracy(&out.cloud, &truth).unwrap();
        assert!(a.percent >= 95.0, "tiny sphere accuracy {}", a.percent);
    }

    #[test]
    fn orient_handles_sparse_cloud_with_isolated_patches() {
        // 120 points over a whole sphere leave most voxels empty; isolated
        // undersized patches survive and propagation still runs point-wise.
        let truth = generate(&SyntheticShape::new(ShapeKind::Sphere, 120)).unwrap();
        let input = PointCloud::from_positions(truth.positions.clone());
        let params = OrientParams {
            knn: 12,
            ..OrientParams::default()
        };
        let out = orient(input, &params).unwrap();
        assert!(out.report.patches > 1);
        let a = accuracy(&out.cloud, &truth).unwrap();
        assert!(a.percent >= 90.0, "sparse sphere accuracy {}", a.percent);
    }

    #[test]
    fn orient_report_counts_are_consistent() {
        let truth = generate(&SyntheticShape::new(ShapeKind::Sphere, 2000)).unwrap();
        let input = PointCloud::from_positions(truth.positions.clone());
        let out = orient(input, &OrientParams::default()).unwrap();
        assert_eq!(out.report.points, 2000);
        assert_eq!(out.report.trace.len(), out.report.patches);
        assert_eq!(
            out.report.flips_propagation,
            out.report.trace.iter().filter(|e| e.flipped).count()
        );
    }

    #[test]
    fn flip_to_fixes_global_sign() {
        let truth = generate(&SyntheticShape::new(ShapeKind::Sphere, 2000)).unwrap();
        let input = PointCloud::from_positions(truth.positions.clone());

        // Anchor point 0 to its true outward direction.
        let dir = truth.normals[0];
        let axis = if dir.z.abs() >= dir.x.abs() && dir.z.abs() >= dir.y.abs() {
            if dir.z > 0.0 { "+z" } else { "-z" }
        } else if dir.x.abs() >= dir.y.abs() {
            if dir.x > 0.0 { "+x" } else { "-x" }
        } else if dir.y > 0.0 {
            "+y"
        } else {
            "-y"
        };
        let params = OrientParams {
            flip_to: Some(FlipTo::parse(&format!("0:{axis}")).unwrap()),
            ..OrientParams::default()
        };
        let out = orient(input, &params).unwrap();
        let a = accuracy(&out.cloud, &truth).unwrap();
        assert!(a.percent >= 99.9);
        assert_eq!(a.sign, 1, "anchored run must match truth without negation");
    }

    #[test]
    fn interpolate_orients_heldout_points() {
        let truth = generate(&SyntheticShape::new(ShapeKind::Sphere, 1500)).unwrap();
        let mut cloud = truth.clone();
        // Hold out every tenth point: unsigned axis, scrambled sign.
        for k in (0..cloud.len()).step_by(10) {
            cloud.normal_given[k] = false;
            if k % 20 == 0 {
                cloud.flip_normal(k);
            }
        }
        let out = interpolate(cloud, &InterpolateParams::default()).unwrap();
        let a = accuracy(&out.cloud, &truth).unwrap();
        assert_eq!(a.percent, 100.0);
        assert_eq!(a.sign, 1);
    }

    #[test]
    fn evaluate_reports_sign_and_accuracy() {
        let truth = generate(&SyntheticShape::new(ShapeKind::Sphere, 500)).unwrap();
        let mut est = truth.clone();
        est.negate_all_normals();
        let (a, report) = evaluate(&est, &truth).unwrap();
        assert_eq!(a.percent, 100.0);
        assert_eq!(report.global_sign, Some(-1));
    }

    #[test]
    fn flip_to_parse_rejects_garbage() {
        assert!(FlipTo::parse("12:+z").is_ok());
        assert!(FlipTo::parse("12+z").is_err());
        assert!(FlipTo::parse("x:+z").is_err());
        assert!(FlipTo::parse("3:+w").is_err());
    }
}
