//! Spatial acceleration structures: a 3-d tree for point sets and a BVH
//! for triangle soups.

mod bvh;
mod kdtree;

pub use bvh::TriangleBvh;
pub use kdtree::KdTree;
