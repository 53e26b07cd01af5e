//! Reconstruction of mixed-dimensional meshes (triangles for sheets,
//! segments for curves) from unsigned distance fields.
//!
//! The pipeline samples the α-offset surface of the field, places inscribed
//! medial spheres with a shrinking-ball pass and a greedy covering, refines
//! them by alternating cluster assignment with closed-form quadric fits, and
//! meshes the dual of the cluster adjacency.

pub mod error;
pub mod field;
pub mod geom;
pub mod io;
pub mod medial_init;
pub mod mesh;
pub mod mesher;
pub mod metrics;
pub mod optimizer;
pub mod par;
pub mod pipeline;
pub mod quadric;
pub mod sampler;
pub mod spatial;

pub use error::{Error, Result};
