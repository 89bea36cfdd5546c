use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::dti::{DiffusionProtocol, TensorField};
use crate::error::Result;
use crate::odf::SphereGrid;
use crate::volume::{DataType, VoxelGrid};

/// `n_b0` unweighted volumes plus `n_dirs` near-uniform hemisphere directions at `bval`.
pub fn shell_protocol(n_b0: usize, n_dirs: usize, bval: f64) -> Result<DiffusionProtocol> {
    let sphere = SphereGrid::fibonacci(2 * n_dirs)?;
    DiffusionProtocol::single_shell(n_b0, bval, &sphere.directions()[..n_dirs])
}

/// Stejskal-Tanner signals `s0·exp(-b gᵀDg)` for every voxel of `field`, with Rician noise
/// of standard deviation `sigma` when it is positive.
pub fn synth_signal(
    field: &TensorField,
    protocol: &DiffusionProtocol,
    s0: f64,
    sigma: f64,
    rng: &mut impl Rng,
) -> VoxelGrid {
    let grid = field.grid();
    let n = protocol.len();
    let mut out = grid.like(n, DataType::F32);
    let noise = (sigma > 0.0).then(|| Normal::new(0.0, sigma).expect("finite sigma"));
    for i in 0..grid.n_voxels() {
        let t = field.tensor(i);
        let v = out.voxel_mut(i);
        for (k, s) in v.iter_mut().enumerate() {
            let clean = s0 * (-protocol.bvals()[k] * t.quad_form(&protocol.bvecs()[k])).exp();
            *s = match &noise {
                Some(nd) => (clean + nd.sample(rng)).hypot(nd.sample(rng)),
                None => clean,
            };
        }
    }
    out
}
