//! Eigen-decomposition of 3x3 symmetric matrices.
//!
//! The solver is closed-form: eigenvalues come from the trigonometric
//! solution of the characteristic cubic, eigenvectors from cross products
//! of rows of `A - lambda I`. When the spectrum is nearly degenerate
//! (relative gap below 1e-12) the analytic eigenvector construction loses
//! accuracy, so the decomposition falls back to cyclic Jacobi sweeps.

use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// Sorted eigen-decomposition of a symmetric 3x3 matrix.
///
/// Eigenvalues satisfy `values[0] >= values[1] >= values[2]`; the matching
/// eigenvectors are orthonormal. For covariance matrices all values are
/// non-negative up to rounding.
#[derive(Debug, Clone, Copy)]
pub struct EigenDecomp {
    pub values: [f64; 3],
    pub vectors: [Vec3; 3],
}

impl EigenDecomp {
    /// Smallest eigenvalue scaled so the largest equals one.
    ///
    /// Returns 0 for a zero matrix (a patch of coincident points is flat
    /// by convention).
    pub fn normalized_smallest(&self) -> f64 {
        if self.values[0] > 0.0 {
            self.values[2] / self.values[0]
        } else {
            0.0
        }
    }
}

/// Symmetric 3x3 matrix stored as its six distinct entries.
#[derive(Debug, Clone, Copy, Default)]
pub struct SymMat3 {
    pub xx: f64,
    pub yy: f64,
    pub zz: f64,
    pub xy: f64,
    pub xz: f64,
    pub yz: f64,
}

impl SymMat3 {
    pub fn from_rows(rows: [[f64; 3]; 3]) -> Result<Self> {
        let asym = (rows[0][1] - rows[1][0])
            .abs()
            .max((rows[0][2] - rows[2][0]).abs())
            .max((rows[1][2] - rows[2][1]).abs());
        let scale = rows
            .iter()
            .flatten()
            .fold(0.0f64, |acc, v| acc.max(v.abs()))
            .max(1.0);
        if asym > 1e-12 * scale {
            return Err(Error::NotSymmetric(asym));
        }
        Ok(SymMat3 {
            xx: rows[0][0],
            yy: rows[1][1],
            zz: rows[2][2],
            xy: 0.5 * (rows[0][1] + rows[1][0]),
            xz: 0.5 * (rows[0][2] + rows[2][0]),
            yz: 0.5 * (rows[1][2] + rows[2][1]),
        })
    }

    /// Covariance of a set of points about their mean.
    pub fn covariance(points: impl Iterator<Item = Vec3> + Clone) -> (Self, Vec3, usize) {
        let mut mean = Vec3::ZERO;
        let mut count = 0usize;
        for p in points.clone() {
            mean += p;
            count += 1;
        }
        if count == 0 {
            return (SymMat3::default(), Vec3::ZERO, 0);
        }
        mean = mean / count as f64;
        let mut m = SymMat3::default();
        for p in points {
            let d = p - mean;
            m.xx += d.x * d.x;
            m.yy += d.y * d.y;
            m.zz += d.z * d.z;
            m.xy += d.x * d.y;
            m.xz += d.x * d.z;
            m.yz += d.y * d.z;
        }
        let inv = 1.0 / count as f64;
        m.xx *= inv;
        m.yy *= inv;
        m.zz *= inv;
        m.xy *= inv;
        m.xz *= inv;
        m.yz *= inv;
        (m, mean, count)
    }

    #[inline]
    pub fn apply(&self, v: Vec3) -> Vec3 {
        Vec3::new(
            self.xx * v.x + self.xy * v.y + self.xz * v.z,
            self.xy * v.x + self.yy * v.y + self.yz * v.z,
            self.xz * v.x + self.yz * v.y + self.zz * v.z,
        )
    }

    fn rows(&self) -> [[f64; 3]; 3] {
        [
            [self.xx, self.xy, self.xz],
            [self.xy, self.yy, self.yz],
            [self.xz, self.yz, self.zz],
        ]
    }

    fn max_abs(&self) -> f64 {
        self.xx
            .abs()
            .max(self.yy.abs())
            .max(self.zz.abs())
            .max(self.xy.abs())
            .max(self.xz.abs())
            .max(self.yz.abs())
    }
}

/// Relative eigengap below which the analytic eigenvector construction is
/// abandoned in favor of Jacobi sweeps.
const DEGENERATE_GAP: f64 = 1e-12;

/// Decompose a symmetric 3x3 matrix given as full rows.
///
/// Fails with [`Error::NotSymmetric`] when the input is asymmetric beyond
/// 1e-12 relative.
pub fn symmetric_eigen3(rows: [[f64; 3]; 3]) -> Result<EigenDecomp> {
    Ok(eigen_sym(&SymMat3::from_rows(rows)?))
}

/// Decompose a [`SymMat3`]. Always succeeds; symmetry holds by construction.
pub fn eigen_sym(m: &SymMat3) -> EigenDecomp {
    let scale = m.max_abs();
    if scale == 0.0 {
        return EigenDecomp {
            values: [0.0; 3],
            vectors: axis_vectors(),
        };
    }

    let off = m.xy * m.xy + m.xz * m.xz + m.yz * m.yz;
    if off == 0.0 {
        // Already diagonal: sort the diagonal entries.
        let mut pairs = [
            (m.xx, Vec3::new(1.0, 0.0, 0.0)),
            (m.yy, Vec3::new(0.0, 1.0, 0.0)),
            (m.zz, Vec3::new(0.0, 0.0, 1.0)),
        ];
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
        return EigenDecomp {
            values: [pairs[0].0, pairs[1].0, pairs[2].0],
            vectors: [pairs[0].1, pairs[1].1, pairs[2].1],
        };
    }

    let values = analytic_eigenvalues(m, off);
    let spread = values[0] - values[2];
    let gap = (values[0] - values[1]).min(values[1] - values[2]);
    if spread <= 0.0 || gap < DEGENERATE_GAP * spread.max(scale) {
        return jacobi(m);
    }

    let mut vectors = [Vec3::ZERO; 3];
    for (slot, &lambda) in [0usize, 2].iter().zip([values[0], values[2]].iter()) {
        match analytic_eigenvector(m, lambda) {
            Some(v) => vectors[*slot] = v,
            None => return jacobi(m),
        }
    }
    // The middle eigenvector completes the right-handed orthonormal frame.
    vectors[1] = vectors[2].cross(vectors[0]);
    match vectors[1].normalized() {
        Some(v) => vectors[1] = v,
        None => return jacobi(m),
    }
    // Re-orthogonalize the extreme pair against the middle vector to hold
    // the 1e-12 orthonormality contract.
    vectors[0] = match orthogonalize(vectors[0], vectors[1]) {
        Some(v) => v,
        None => return jacobi(m),
    };
    vectors[2] = vectors[0].cross(vectors[1]);

    let decomp = EigenDecomp { values, vectors };
    if residual(m, &decomp) > 1e-9 * scale {
        return jacobi(m);
    }
    decomp
}

fn axis_vectors() -> [Vec3; 3] {
    [
        Vec3::new(1.0, 0.0, 0.0),
        Vec3::new(0.0, 1.0, 0.0),
        Vec3::new(0.0, 0.0, 1.0),
    ]
}

/// Trigonometric (Cardano) eigenvalues, sorted descending.
fn analytic_eigenvalues(m: &SymMat3, off: f64) -> [f64; 3] {
    let q = (m.xx + m.yy + m.zz) / 3.0;
    let p2 = (m.xx - q).powi(2) + (m.yy - q).powi(2) + (m.zz - q).powi(2) + 2.0 * off;
    let p = (p2 / 6.0).sqrt();
    if p == 0.0 {
        return [q, q, q];
    }
    let inv_p = 1.0 / p;
    let b = SymMat3 {
        xx: (m.xx - q) * inv_p,
        yy: (m.yy - q) * inv_p,
        zz: (m.zz - q) * inv_p,
        xy: m.xy * inv_p,
        xz: m.xz * inv_p,
        yz: m.yz * inv_p,
    };
    let det_b = b.xx * (b.yy * b.zz - b.yz * b.yz) - b.xy * (b.xy * b.zz - b.yz * b.xz)
        + b.xz * (b.xy * b.yz - b.yy * b.xz);
    let r = (det_b / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let big = q + 2.0 * p * phi.cos();
    let small = q + 2.0 * p * (phi + 2.0 * std::f64::consts::FRAC_PI_3).cos();
    let mid = 3.0 * q - big - small;
    [big, mid, small]
}

/// Eigenvector for an isolated eigenvalue via the largest cross product of
/// rows of `A - lambda I`.
fn analytic_eigenvector(m: &SymMat3, lambda: f64) -> Option<Vec3> {
    let r = m.rows();
    let rows = [
        Vec3::new(r[0][0] - lambda, r[0][1], r[0][2]),
        Vec3::new(r[1][0], r[1][1] - lambda, r[1][2]),
        Vec3::new(r[2][0], r[2][1], r[2][2] - lambda),
    ];
    let candidates = [
        rows[0].cross(rows[1]),
        rows[0].cross(rows[2]),
        rows[1].cross(rows[2]),
    ];
    let best = candidates
        .iter()
        .max_by(|a, b| a.norm_squared().total_cmp(&b.norm_squared()))?;
    best.normalized()
}

fn orthogonalize(v: Vec3, against: Vec3) -> Option<Vec3> {
    (v - against * v.dot(against)).normalized()
}

fn residual(m: &SymMat3, d: &EigenDecomp) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..3 {
        let r = m.apply(d.vectors[i]) - d.vectors[i] * d.values[i];
        worst = worst.max(r.norm());
    }
    worst
}

/// Cyclic Jacobi diagonalization; robust for degenerate spectra.
fn jacobi(m: &SymMat3) -> EigenDecomp {
    let mut a = m.rows();
    let mut v = [[0.0f64; 3]; 3];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }

    for _ in 0..64 {
        let off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
        if off < 1e-60 * m.max_abs().powi(2).max(f64::MIN_POSITIVE) {
            break;
        }
        for &(p, q) in &[(0usize, 1usize), (0, 2), (1, 2)] {
            if a[p][q].abs() < 1e-300 {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            let rotate = |mat: &mut [[f64; 3]; 3], i: usize, j: usize| {
                for row in mat.iter_mut() {
                    let (vi, vj) = (row[i], row[j]);
                    row[i] = c * vi - s * vj;
                    row[j] = s * vi + c * vj;
                }
            };
            // A <- J^T A J applied as column then row rotation.
            rotate(&mut a, p, q);
            let (rp, rq) = (a[p], a[q]);
            a[p] = std::array::from_fn(|k| c * rp[k] - s * rq[k]);
            a[q] = std::array::from_fn(|k| s * rp[k] + c * rq[k]);
            rotate(&mut v, p, q);
        }
    }

    let mut pairs: Vec<(f64, Vec3)> = (0..3)
        .map(|i| (a[i][i], Vec3::new(v[0][i], v[1][i], v[2][i])))
        .collect();
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0));
    EigenDecomp {
        values: [pairs[0].0, pairs[1].0, pairs[2].0],
        vectors: [
            pairs[0].1.normalized().unwrap_or(Vec3::new(1.0, 0.0, 0.0)),
            pairs[1].1.normalized().unwrap_or(Vec3::new(0.0, 1.0, 0.0)),
            pairs[2].1.normalized().unwrap_or(Vec3::new(0.0, 0.0, 1.0)),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn check(decomp: &EigenDecomp, m: &SymMat3) {
        let scale = m.max_abs().max(1.0);
        assert!(decomp.values[0] >= decomp.values[1]);
        assert!(decomp.values[1] >= decomp.values[2]);
        for i in 0..3 {
            let r = m.apply(decomp.vectors[i]) - decomp.vectors[i] * decomp.values[i];
            assert!(
                r.norm() < 1e-9 * scale,
                "residual {:e} too large for eigenpair {i}",
                r.norm()
            );
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (decomp.vectors[i].dot(decomp.vectors[j]) - expect).abs() < 1e-12,
                    "vectors not orthonormal"
                );
            }
        }
    }

    #[test]
    fn identity_has_unit_spectrum() {
        let d = symmetric_eigen3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]).unwrap();
        assert_eq!(d.values, [1.0, 1.0, 1.0]);
    }

    #[test]
    fn diagonal_sorts_axes() {
        let d = symmetric_eigen3([[1.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 4.0]]).unwrap();
        assert_eq!(d.values, [4.0, 1.0, 0.0]);
        assert!(d.vectors[0].z.abs() > 1.0 - 1e-15);
        assert!(d.vectors[1].x.abs() > 1.0 - 1e-15);
        assert!(d.vectors[2].y.abs() > 1.0 - 1e-15);
    }

    #[test]
    fn rejects_asymmetric_input() {
        let r = symmetric_eigen3([[1.0, 2.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        assert!(matches!(r, Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn random_matrices_satisfy_residual_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..2000 {
            let m = SymMat3 {
                xx: rng.gen_range(-2.0..2.0),
                yy: rng.gen_range(-2.0..2.0),
                zz: rng.gen_range(-2.0..2.0),
                xy: rng.gen_range(-2.0..2.0),
                xz: rng.gen_range(-2.0..2.0),
                yz: rng.gen_range(-2.0..2.0),
            };
            let d = eigen_sym(&m);
            check(&d, &m);
        }
    }

    #[test]
    fn near_degenerate_spectra_fall_back_cleanly() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            // Two nearly equal eigenvalues in a random frame.
            let eps = 10f64.powi(rng.gen_range(-18..-10));
            let m = SymMat3 {
                xx: 1.0,
                yy: 1.0 + eps,
                zz: 3.0,
                xy: eps * rng.gen_range(-1.0..1.0),
                xz: 0.0,
                yz: 0.0,
            };
            let d = eigen_sym(&m);
            check(&d, &m);
        }
    }

    #[test]
    fn covariance_of_plane_is_rank_two() {
        let pts: Vec<Vec3> = (0..40)
            .map(|i| Vec3::new((i % 8) as f64, (i / 8) as f64, 0.0))
            .collect();
        let (m, mean, n) = SymMat3::covariance(pts.iter().copied());
        assert_eq!(n, 40);
        assert!((mean.z).abs() < 1e-15);
        let d = eigen_sym(&m);
        assert!(d.values[2].abs() < 1e-12);
        assert!(d.vectors[2].z.abs() > 1.0 - 1e-12);
    }
}
