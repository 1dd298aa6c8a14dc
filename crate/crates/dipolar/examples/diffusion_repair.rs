//! Local errors only degrade the field locally: negate a random 1% of an
//! already-correct orientation, rebuild the leave-own-patch-out field, and
//! watch one diffusion pass flip the injected errors back without
//! disturbing the rest.
//!
//! ```text
//! cargo run --release --example diffusion_repair
//! ```

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use dipolar::cloud::PointCloud;
use dipolar::evaluation::{generate, ShapeKind, SyntheticShape};
use dipolar::geometry::{estimate_normals_pca, SpatialIndex};
use dipolar::patching::{
    confidence, normalize_unit_cube, orient_all_patches, voxel_partition, ConfidenceStrategy,
};
use dipolar::propagation::{diffuse, propagate};

fn main() -> dipolar::Result<()> {
    let truth = generate(&SyntheticShape::new(ShapeKind::Sphere, 8_000))?;
    let mut cloud = PointCloud::from_positions(truth.positions.clone());

    // Run the pipeline stage by stage so the field accumulator stays in
    // hand for the repair pass afterwards.
    normalize_unit_cube(&mut cloud)?;
    let index = SpatialIndex::build(&cloud.positions)?;
    estimate_normals_pca(&mut cloud, &index, 16)?;
    let mut patches = voxel_partition(&cloud, 1.0 / 25.0, 100)?;
    orient_all_patches(&mut patches, &mut cloud);
    let weights = confidence(&ConfidenceStrategy::Uniform, &cloud, &index)?;
    cloud.set_confidence(weights)?;
    let (_, mut accumulator) = propagate(&mut cloud, &mut patches)?;
    diffuse(&mut cloud, &mut accumulator, 1);

    // Inject sign errors on a random 1%.
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut ids: Vec<usize> = (0..cloud.len()).collect();
    let (injected, _) = ids.partial_shuffle(&mut rng, cloud.len() / 100);
    let injected = injected.to_vec();
    for &k in &injected {
        cloud.flip_normal(k);
    }
    println!("injected {} sign errors", injected.len());

    // One diffusion pass against the field of the damaged cloud.
    let before = cloud.normals.clone();
    accumulator.recompute_from_scratch(&cloud);
    let outcome = diffuse(&mut cloud, &mut accumulator, 1);

    let corrected = injected
        .iter()
        .filter(|&&k| cloud.normals[k] == -before[k])
        .count();
    println!(
        "one diffusion pass flipped {} points: {} of {} injected errors corrected, {} healthy points touched",
        outcome.flips,
        corrected,
        injected.len(),
        outcome.flips - corrected
    );
    Ok(())
}
