use super::TensorField;
use crate::volume::{DataType, VoxelGrid};

/// FA, MD, principal eigenvector and the FA-weighted direction map of a tensor field.
#[derive(Debug, Clone)]
pub struct ScalarMaps {
    pub fa: VoxelGrid,
    pub md: VoxelGrid,
    pub v1: VoxelGrid,
    /// `v1 · FA`, the orientation input for tissue segmentation.
    pub dirmap: VoxelGrid,
    /// Fitted voxels where at least one negative eigenvalue was clamped to zero for FA.
    pub clamped: usize,
}

/// Fractional anisotropy of three eigenvalues; zero when all vanish.
pub fn fractional_anisotropy(l: [f64; 3]) -> f64 {
    let m = (l[0] + l[1] + l[2]) / 3.0;
    let num = (l[0] - m).powi(2) + (l[1] - m).powi(2) + (l[2] - m).powi(2);
    let den = l[0] * l[0] + l[1] * l[1] + l[2] * l[2];
    if den <= 0.0 {
        return 0.0;
    }
    (1.5 * num / den).sqrt().clamp(0.0, 1.0)
}

/// Scalar maps of every fitted voxel; unfitted voxels stay zero.
pub fn derive_scalars(field: &TensorField) -> ScalarMaps {
    let grid = field.grid();
    let mut fa = grid.like(1, DataType::F32);
    let mut md = grid.like(1, DataType::F32);
    let mut v1 = grid.like(3, DataType::F32);
    let mut dirmap = grid.like(3, DataType::F32);
    let mut clamped = 0;
    for i in 0..grid.n_voxels() {
        if !field.is_fitted(i) {
            continue;
        }
        let t = field.tensor(i);
        if !t.is_finite() {
            continue;
        }
        let e = t.eigen();
        md.voxel_mut(i)[0] = e.values.iter().sum::<f64>() / 3.0;
        let mut pos = e.values;
        if pos.iter().any(|&l| l < 0.0) {
            clamped += 1;
            pos.iter_mut().for_each(|l| *l = l.max(0.0));
        }
        let a = fractional_anisotropy(pos);
        fa.voxel_mut(i)[0] = a;
        let v = e.principal();
        v1.voxel_mut(i).copy_from_slice(v.as_slice());
        dirmap.voxel_mut(i).copy_from_slice((v * a).as_slice());
    }
    ScalarMaps {
        fa,
        md,
        v1,
        dirmap,
        clamped,
    }
}
