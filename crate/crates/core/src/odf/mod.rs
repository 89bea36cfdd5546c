//! Tensor orientation distributions on a discrete sphere and direction sampling.

mod dodf;
mod pmf;
mod sphere;

pub use dodf::{dodf_eval, DodfConvention, TensorOdf, EIGENVALUE_FLOOR};
pub use pmf::{sample_direction, sharpen_normalize, ConeDistribution, PropagationPmf, DEFAULT_SHARPENING};
pub use sphere::{build_sphere, SphereGrid, SPHERE_POINTS};
