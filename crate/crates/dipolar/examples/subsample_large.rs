//! The large-cloud path: propagate on a seeded per-patch subsample, then
//! orient the remaining points by interpolation against the subsample's
//! field. The threshold is lowered here so the demo finishes quickly; the
//! pipeline default kicks in above 500k points.
//!
//! ```text
//! cargo run --release --example subsample_large
//! ```

use std::time::Instant;

use dipolar::cloud::PointCloud;
use dipolar::evaluation::{accuracy, generate, ShapeKind, SyntheticShape};
use dipolar::pipeline::{orient, OrientParams};

fn main() -> dipolar::Result<()> {
    let n = 120_000;
    let truth = generate(&SyntheticShape::new(ShapeKind::Sphere, n))?;
    let params = OrientParams {
        subsample_threshold: 50_000,
        subsample_fraction: 0.1,
        seed: 42,
        ..OrientParams::default()
    };

    let started = Instant::now();
    let outcome = orient(PointCloud::from_positions(truth.positions.clone()), &params)?;
    let elapsed = started.elapsed().as_secs_f64();

    let sub_size = outcome
        .report
        .params
        .iter()
        .find(|(k, _)| k == "subsample_size")
        .map(|(_, v)| v.clone())
        .unwrap_or_default();
    let score = accuracy(&outcome.cloud, &truth)?;
    println!(
        "{n} points, propagated on a {sub_size}-point subsample, rest interpolated"
    );
    println!("accuracy {:.2}% in {elapsed:.1}s", score.percent);
    for (phase, seconds) in &outcome.report.timings {
        println!("  {phase:>16}: {seconds:.3}s");
    }

    // Same seed, same draw, bit-identical output.
    let again = orient(PointCloud::from_positions(truth.positions.clone()), &params)?;
    let identical = again
        .cloud
        .normals
        .iter()
        .zip(&outcome.cloud.normals)
        .all(|(a, b)| a == b);
    println!("re-run with the same seed is bit-identical: {identical}");
    Ok(())
}
