//! Globally consistent normal orientation for unstructured point clouds.
//!
//! The cloud is cut into coherent voxel patches, each patch's normals are
//! made locally consistent against a reference point, and a global
//! orientation is then propagated greedily: every oriented point becomes an
//! electric dipole, and the patch interacting most strongly with the
//! accumulated field is oriented next (flipped when the interaction is
//! negative). A diffusion pass corrects individual stragglers against the
//! final field, whose scalar potential doubles as an inside/outside
//! classifier. Orientation can also be interpolated from a subset of known
//! normals, which is how clouds beyond half a million points are handled:
//! propagate on a per-patch subsample, interpolate the rest.
//!
//! Entry points:
//!
//! - [`pipeline::orient`] - full pipeline from bare positions (or unsigned
//!   normal estimates) to a consistently oriented cloud.
//! - [`pipeline::interpolate`] - orient new points from given normals.
//! - [`evaluation`] - synthetic ground-truth shapes, the accuracy metric
//!   and potential probes.
//! - [`baselines::hoppe_orient`] - the MST propagation baseline.
//! - [`io`] - XYZ/PLY readers and writers plus the run-report format.
//!
//! The `examples/` directory has one runnable walkthrough per capability;
//! the `dipolar` binary wires the same pipeline behind `orient`,
//! `interpolate`, `eval` and `synth` subcommands.

pub mod baselines;
pub mod cloud;
pub mod dipole;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod io;
pub mod patching;
pub mod pipeline;
pub mod propagation;

pub use cloud::PointCloud;
pub use error::{Error, Result};
pub use geometry::Vec3;
