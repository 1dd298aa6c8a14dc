//! Orientation interpolation: when most points already carry trusted
//! normals (scan data, upsampling input), build the field once from those
//! and sign the rest directly instead of propagating from scratch.
//!
//! ```text
//! cargo run --release --example interpolate_holdout
//! ```

use dipolar::evaluation::{generate, ShapeKind, SyntheticShape};
use dipolar::pipeline::{interpolate, InterpolateParams};

fn main() -> dipolar::Result<()> {
    let truth = generate(&SyntheticShape::new(ShapeKind::Torus, 12_000))?;

    // Hold out every tenth point: keep its unsigned axis, scramble the
    // sign, and drop the normal-given flag.
    let mut cloud = truth.clone();
    let mut held_out = Vec::new();
    for k in 0..cloud.len() {
        if k % 10 == 3 {
            cloud.normal_given[k] = false;
            if k % 20 == 3 {
                cloud.flip_normal(k);
            }
            held_out.push(k);
        }
    }
    println!(
        "{} given normals, {} held out with scrambled signs",
        cloud.len() - held_out.len(),
        held_out.len()
    );

    let outcome = interpolate(cloud, &InterpolateParams::default())?;
    let correct = held_out
        .iter()
        .filter(|&&k| outcome.cloud.normals[k].dot(truth.normals[k]) > 0.0)
        .count();
    println!(
        "interpolation signed {}/{} held-out points correctly ({} exactly orthogonal to the field)",
        correct,
        held_out.len(),
        outcome.report.low_confidence
    );
    Ok(())
}
