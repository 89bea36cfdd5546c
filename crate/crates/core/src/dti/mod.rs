//! Diffusion tensor estimation and the scalar maps derived from it.

mod fit;
mod protocol;
mod scalars;
mod tensor;

pub use fit::{fit_wlls, FitReport, TensorField};
pub use protocol::{DiffusionProtocol, B0_THRESHOLD};
pub use scalars::{derive_scalars, fractional_anisotropy, ScalarMaps};
pub use tensor::{canonical_sign, eigendecompose, Eigen, SymTensor};
