use nalgebra::{Matrix3, Matrix4};

use super::Vec3;
use crate::error::{Error, Result};

/// Maps continuous voxel index coordinates to world millimetres.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineTransform {
    matrix: Matrix4<f64>,
    inverse: Matrix4<f64>,
}

impl AffineTransform {
    pub fn new(matrix: Matrix4<f64>) -> Result<Self> {
        if !matrix.iter().all(|v| v.is_finite()) {
            return Err(Error::Parameter("affine has non-finite entries".into()));
        }
        let linear: Matrix3<f64> = matrix.fixed_view::<3, 3>(0, 0).into_owned();
        let scale = linear.abs().max().max(f64::MIN_POSITIVE);
        if linear.determinant().abs() <= 1e-12 * scale.powi(3) {
            return Err(Error::Parameter("affine 3x3 block is singular".into()));
        }
        let mut matrix = matrix;
        matrix[(3, 0)] = 0.0;
        matrix[(3, 1)] = 0.0;
        matrix[(3, 2)] = 0.0;
        matrix[(3, 3)] = 1.0;
        let inverse = matrix
            .try_inverse()
            .ok_or_else(|| Error::Parameter("affine is not invertible".into()))?;
        Ok(Self { matrix, inverse })
    }

    pub fn identity() -> Self {
        Self {
            matrix: Matrix4::identity(),
            inverse: Matrix4::identity(),
        }
    }

    /// Axis-aligned transform with the given voxel size and the world position of voxel (0,0,0).
    pub fn from_spacing(spacing: [f64; 3], origin: [f64; 3]) -> Result<Self> {
        let mut m = Matrix4::identity();
        for a in 0..3 {
            m[(a, a)] = spacing[a];
            m[(a, 3)] = origin[a];
        }
        Self::new(m)
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.matrix
    }

    #[inline]
    pub fn voxel_to_world(&self, v: &Vec3) -> Vec3 {
        let m = &self.matrix;
        Vec3::new(
            m[(0, 0)] * v.x + m[(0, 1)] * v.y + m[(0, 2)] * v.z + m[(0, 3)],
            m[(1, 0)] * v.x + m[(1, 1)] * v.y + m[(1, 2)] * v.z + m[(1, 3)],
            m[(2, 0)] * v.x + m[(2, 1)] * v.y + m[(2, 2)] * v.z + m[(2, 3)],
        )
    }

    #[inline]
    pub fn world_to_voxel(&self, w: &Vec3) -> Vec3 {
        let m = &self.inverse;
        Vec3::new(
            m[(0, 0)] * w.x + m[(0, 1)] * w.y + m[(0, 2)] * w.z + m[(0, 3)],
            m[(1, 0)] * w.x + m[(1, 1)] * w.y + m[(1, 2)] * w.z + m[(1, 3)],
            m[(2, 0)] * w.x + m[(2, 1)] * w.y + m[(2, 2)] * w.z + m[(2, 3)],
        )
    }

    /// Column norms of the linear block, i.e. the voxel edge lengths in mm.
    pub fn spacing(&self) -> [f64; 3] {
        let mut s = [0.0; 3];
        for (a, s) in s.iter_mut().enumerate() {
            *s = self.matrix.fixed_view::<3, 1>(0, a).norm();
        }
        s
    }

    /// Volume of one voxel in mm³.
    pub fn voxel_volume(&self) -> f64 {
        self.matrix
            .fixed_view::<3, 3>(0, 0)
            .determinant()
            .abs()
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.matrix
            .iter()
            .zip(other.matrix.iter())
            .all(|(a, b)| (a - b).abs() <= tol)
    }
}

impl Default for AffineTransform {
    fn default() -> Self {
        Self::identity()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn singular_matrix_rejected() {
        let mut m = Matrix4::identity();
        m[(2, 2)] = 0.0;
        assert!(AffineTransform::new(m).is_err());
    }

    #[test]
    fn spacing_from_columns() {
        let a = AffineTransform::from_spacing([1.2, 1.2, 1.2], [-10.0, 4.0, 0.5]).unwrap();
        for s in a.spacing() {
            assert!((s - 1.2).abs() < 1e-12);
        }
        assert!((a.voxel_volume() - 1.728).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn world_voxel_round_trip(
            entries in proptest::collection::vec(-2.0f64..2.0, 9),
            t in proptest::collection::vec(-100.0f64..100.0, 3),
            p in proptest::collection::vec(-50.0f64..50.0, 3),
        ) {
            let mut m = Matrix4::identity();
            for r in 0..3 {
                for c in 0..3 {
                    m[(r, c)] = entries[3 * r + c] + if r == c { 3.0 } else { 0.0 };
                }
                m[(r, 3)] = t[r];
            }
            let a = AffineTransform::new(m).unwrap();
            let w = Vec3::new(p[0], p[1], p[2]);
            let back = a.voxel_to_world(&a.world_to_voxel(&w));
            prop_assert!((back - w).norm() < 1e-9);
        }
    }
}
