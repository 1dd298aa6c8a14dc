//! Unsigned normal estimation by local PCA.

use rayon::prelude::*;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::geometry::eigen::{eigen_sym, SymMat3};
use crate::geometry::{SpatialIndex, Vec3};

/// Estimate a unit normal for every point that has none (no given normal,
/// no prior unsigned estimate), as the smallest-eigenvalue eigenvector of
/// the covariance of the point and its `k` nearest neighbors. The sign of
/// each estimate is arbitrary; patching fixes it later.
///
/// Degenerate neighborhoods (all `k+1` points coincident) receive the +z
/// axis; the returned counter reports how many.
pub fn estimate_normals_pca(
    cloud: &mut PointCloud,
    index: &SpatialIndex,
    k: usize,
) -> Result<usize> {
    if k < 3 {
        return Err(Error::InvalidConfig(format!(
            "normal estimation needs k >= 3, got {k}"
        )));
    }
    if cloud.len() <= k {
        return Err(Error::InvalidConfig(format!(
            "normal estimation needs more than k={k} points, got {}",
            cloud.len()
        )));
    }
    cloud.allocate_normals();

    let positions = &cloud.positions;
    let given = &cloud.normal_given;
    let normals = &cloud.normals;
    let estimates: Vec<Option<(Vec3, bool)>> = (0..cloud.len())
        .into_par_iter()
        .map(|i| {
            if given[i] || normals[i] != Vec3::ZERO {
                return None;
            }
            let neighbors = index.knn_of_point(i, k);
            let pts = std::iter::once(positions[i])
                .chain(neighbors.iter().map(|n| positions[n.index]));
            let (cov, _, _) = SymMat3::covariance(pts);
            let decomp = eigen_sym(&cov);
            if decomp.values[0] <= 0.0 {
                // Every gathered point coincides with the query.
                Some((Vec3::new(0.0, 0.0, 1.0), true))
            } else {
                Some((decomp.vectors[2], false))
            }
        })
        .collect();

    let mut degenerate = 0usize;
    for (i, e) in estimates.into_iter().enumerate() {
        if let Some((normal, was_degenerate)) = e {
            cloud.normals[i] = normal;
            cloud.normal_given[i] = false;
            if was_degenerate {
                degenerate += 1;
            }
        }
    }
    Ok(degenerate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid_cloud(n: usize) -> PointCloud {
        let side = (n as f64).sqrt().ceil() as usize;
        let pts: Vec<Vec3> = (0..n)
            .map(|i| Vec3::new((i % side) as f64 * 0.1, (i / side) as f64 * 0.1, 0.0))
            .collect();
        PointCloud::from_positions(pts)
    }

    #[test]
    fn planar_grid_normals_are_z() {
        let mut cloud = grid_cloud(100);
        let index = SpatialIndex::build(&cloud.positions).unwrap();
        let degenerate = estimate_normals_pca(&mut cloud, &index, 8).unwrap();
        assert_eq!(degenerate, 0);
        for n in &cloud.normals {
            assert!(n.z.abs() > 1.0 - 1e-9, "expected +-z, got {n:?}");
        }
    }

    #[test]
    fn sphere_normals_are_nearly_radial() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<Vec3> = (0..5000)
            .map(|_| {
                let z: f64 = rng.gen_range(-1.0..1.0);
                let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                let r = (1.0 - z * z).sqrt();
                Vec3::new(r * phi.cos(), r * phi.sin(), z)
            })
            .collect();
        let mut cloud = PointCloud::from_positions(pts);
        let index = SpatialIndex::build(&cloud.positions).unwrap();
        estimate_normals_pca(&mut cloud, &index, 16).unwrap();

        let within = cloud
            .positions
            .iter()
            .zip(&cloud.normals)
            .filter(|(p, n)| {
                let radial = p.normalized().unwrap();
                n.dot(radial).abs() >= (5.0f64).to_radians().cos()
            })
            .count();
        assert!(
            within as f64 >= 0.99 * cloud.len() as f64,
            "only {within} of {} within 5 degrees of radial",
            cloud.len()
        );
    }

    #[test]
    fn coincident_neighborhood_counts_as_degenerate() {
        let mut pts = vec![Vec3::new(5.0, 5.0, 5.0); 4];
        for i in 0..20 {
            pts.push(Vec3::new(i as f64 * 0.5, 0.0, 0.0));
        }
        // Collinear filler is fine for PCA; only the four coincident points
        // are fully degenerate.
        let mut cloud = PointCloud::from_positions(pts);
        let index = SpatialIndex::build(&cloud.positions).unwrap();
        let degenerate = estimate_normals_pca(&mut cloud, &index, 3).unwrap();
        assert_eq!(degenerate, 4);
        for n in &cloud.normals {
            assert!(n.is_finite());
            assert!((n.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rotation_equivariant_up_to_sign_on_plane() {
        let mut cloud = grid_cloud(64);
        let index = SpatialIndex::build(&cloud.positions).unwrap();
        estimate_normals_pca(&mut cloud, &index, 8).unwrap();

        // Rotate 90 degrees about x: (x, y, z) -> (x, -z, y).
        let rotate = |v: Vec3| Vec3::new(v.x, -v.z, v.y);
        let rotated_pts: Vec<Vec3> = cloud.positions.iter().map(|&p| rotate(p)).collect();
        let mut rotated = PointCloud::from_positions(rotated_pts);
        let rindex = SpatialIndex::build(&rotated.positions).unwrap();
        estimate_normals_pca(&mut rotated, &rindex, 8).unwrap();

        for (n, rn) in cloud.normals.iter().zip(&rotated.normals) {
            let expect = rotate(*n);
            let agree = expect.dot(*rn).abs();
            assert!(agree > 1.0 - 1e-6, "rotation equivariance violated: {agree}");
        }
    }

    #[test]
    fn rejects_too_small_k_or_cloud() {
        let mut cloud = grid_cloud(10);
        let index = SpatialIndex::build(&cloud.positions).unwrap();
        assert!(estimate_normals_pca(&mut cloud, &index, 2).is_err());
        assert!(estimate_normals_pca(&mut cloud, &index, 10).is_err());
    }
}
