//! Voxel lattices, their voxel-to-world geometry, and NIfTI-1 I/O.

mod affine;
mod grid;
mod mask;
mod nifti_io;

pub use affine::AffineTransform;
pub use grid::{DataType, VoxelGrid};
pub use mask::BinaryMask;
pub use nifti_io::{load_volume, save_volume};

/// World-space or continuous voxel-space triple.
pub type Vec3 = nalgebra::Vector3<f64>;
