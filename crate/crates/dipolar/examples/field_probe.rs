//! The dipole primitives, hands on: evaluate the potential and field of a
//! single source, check the field against a finite-difference gradient,
//! and use the summed potential of an oriented cloud as an inside/outside
//! probe (the winding-number view of the final field).
//!
//! ```text
//! cargo run --release --example field_probe
//! ```

use dipolar::dipole::{dipole_field, dipole_potential, DipoleSource};
use dipolar::evaluation::{generate, probe_potential, ShapeKind, SyntheticShape};
use dipolar::Vec3;

fn main() -> dipolar::Result<()> {
    // One unit dipole at the origin, polarized along +z.
    let source = DipoleSource::new(Vec3::ZERO, Vec3::new(0.0, 0.0, 1.0), 1.0);

    println!("single dipole, polarization +z:");
    for (label, at) in [
        ("on axis, r = (0,0,1)   ", Vec3::new(0.0, 0.0, 1.0)),
        ("on axis, r = (0,0,2)   ", Vec3::new(0.0, 0.0, 2.0)),
        ("in plane, r = (1,0,0)  ", Vec3::new(1.0, 0.0, 0.0)),
        ("below,    r = (0,0,-1) ", Vec3::new(0.0, 0.0, -1.0)),
    ] {
        let u = dipole_potential(&source, at);
        let e = dipole_field(&source, at);
        println!("  {label} u = {u:+.6}  E = ({:+.4}, {:+.4}, {:+.4})", e.x, e.y, e.z);
    }

    // The field is the exact gradient of the potential; verify one point
    // by central differences.
    let at = Vec3::new(0.4, -0.3, 0.7);
    let h = 1e-5;
    let fd = Vec3::new(
        (dipole_potential(&source, at + Vec3::new(h, 0.0, 0.0))
            - dipole_potential(&source, at - Vec3::new(h, 0.0, 0.0)))
            / (2.0 * h),
        (dipole_potential(&source, at + Vec3::new(0.0, h, 0.0))
            - dipole_potential(&source, at - Vec3::new(0.0, h, 0.0)))
            / (2.0 * h),
        (dipole_potential(&source, at + Vec3::new(0.0, 0.0, h))
            - dipole_potential(&source, at - Vec3::new(0.0, 0.0, h)))
            / (2.0 * h),
    );
    let analytic = dipole_field(&source, at);
    println!(
        "gradient check at {at:?}: |E - FD|/|E| = {:.2e}",
        (analytic - fd).norm() / analytic.norm()
    );

    // Summed over a correctly oriented closed surface, the potential
    // separates inside from outside like a winding number.
    let sphere = generate(&SyntheticShape::new(ShapeKind::Sphere, 4000))?;
    let queries = vec![
        Vec3::ZERO,                  // center
        Vec3::new(0.5, 0.0, 0.0),    // interior
        Vec3::new(0.0, 0.9, 0.0),    // interior, near surface
        Vec3::new(0.0, 0.0, 1.5),    // exterior
        Vec3::new(2.0, 2.0, 2.0),    // far exterior
    ];
    let values = probe_potential(&sphere, &queries);
    println!("summed potential of an oriented unit sphere (4000 dipoles):");
    for (q, u) in queries.iter().zip(&values) {
        let side = if q.norm() < 1.0 { "inside " } else { "outside" };
        println!("  {side} at ({:+.1},{:+.1},{:+.1}): u = {u:+.1}", q.x, q.y, q.z);
    }
    Ok(())
}
