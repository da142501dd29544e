//! Delineation of individual apple trees in trellis-orchard 3D color point
//! clouds and assignment of detected apples to their bearing trees.
//!
//! The pipeline ingests a leaf-off winter cloud and a fruiting-season harvest
//! cloud of the same row, calibrates both to a common metric frame, removes
//! trellis wires, the water pipe and support poles, separates the remaining
//! trunk/branch points into individual trees, detects apples by color in the
//! harvest cloud, aligns the two clouds with ICP and assigns every apple to
//! the tree of its nearest labeled branch point.

pub mod apples;
pub mod calibrate;
pub mod cloud;
pub mod config;
pub mod error;
pub mod evaluate;
pub mod hough;
pub mod knn;
pub mod msac;
pub mod pgm;
pub mod pipeline;
pub mod ply;
pub mod register;
pub mod segment;
pub mod separate;
pub mod skeleton;
pub mod synth;
pub mod voxel;

pub use cloud::{ColorPointCloud, Line3, Plane3};
pub use error::{OrchardError, Result};
