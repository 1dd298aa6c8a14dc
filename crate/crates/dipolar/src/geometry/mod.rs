//! Spatial primitives: vectors, kd-tree neighbor queries, 3x3 symmetric
//! eigen-decomposition and PCA normal estimation.

pub mod eigen;
pub mod index;
pub mod normals;
mod vec3;

pub use eigen::{eigen_sym, symmetric_eigen3, EigenDecomp, SymMat3};
pub use index::{Neighbor, SpatialIndex};
pub use normals::estimate_normals_pca;
pub use vec3::Vec3;
