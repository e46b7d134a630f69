//! Gauge-equivariant convolutions on triangle meshes.

mod atlas;
mod conv;
mod mesh;

pub use atlas::{build_atlas, build_atlas_with_frames, default_frames, Frame, Neighbour, TangentAtlas};
pub use conv::{
    gem_conv, gem_gauge_audit, harmonic_conv, harmonic_gauge_audit, random_self_kernel, self_kernel_residual,
    MeshFeature, TypedField,
};
pub use mesh::{convex_hull, TriMesh};
