use nalgebra::{Matrix3, SymmetricEigen};

use crate::error::{Error, Result};
use crate::volume::Vec3;

/// Symmetric 3×3 diffusion tensor in mm²/s, stored as (Dxx, Dxy, Dxz, Dyy, Dyz, Dzz).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SymTensor(pub [f64; 6]);

/// Eigen-decomposition with eigenvalues in descending order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Eigen {
    pub values: [f64; 3],
    pub vectors: [Vec3; 3],
}

impl Eigen {
    pub fn principal(&self) -> Vec3 {
        self.vectors[0]
    }

    pub fn reconstruct(&self) -> Matrix3<f64> {
        let mut m = Matrix3::zeros();
        for (l, v) in self.values.iter().zip(&self.vectors) {
            m += *l * v * v.transpose();
        }
        m
    }
}

impl SymTensor {
    pub fn diag(a: f64, b: f64, c: f64) -> Self {
        Self([a, 0.0, 0.0, b, 0.0, c])
    }

    pub fn isotropic(d: f64) -> Self {
        Self::diag(d, d, d)
    }

    pub fn from_slice(s: &[f64]) -> Self {
        let mut t = [0.0; 6];
        t.copy_from_slice(&s[..6]);
        Self(t)
    }

    /// Tensor with eigenvalues `values` along the orthonormal axes `axes`.
    pub fn from_eigen(values: [f64; 3], axes: [Vec3; 3]) -> Self {
        let mut m = Matrix3::zeros();
        for (l, v) in values.iter().zip(&axes) {
            m += *l * v * v.transpose();
        }
        Self::from_matrix(&m)
    }

    /// Cylindrically symmetric tensor with `parallel` along `axis` and `perpendicular` across it.
    pub fn prolate(axis: &Vec3, parallel: f64, perpendicular: f64) -> Self {
        let a = axis.normalize();
        let m = perpendicular * Matrix3::identity() + (parallel - perpendicular) * a * a.transpose();
        Self::from_matrix(&m)
    }

    /// Upper triangle of `m`; the lower triangle is ignored.
    pub fn from_matrix(m: &Matrix3<f64>) -> Self {
        Self([m[(0, 0)], m[(0, 1)], m[(0, 2)], m[(1, 1)], m[(1, 2)], m[(2, 2)]])
    }

    pub fn to_matrix(&self) -> Matrix3<f64> {
        let [xx, xy, xz, yy, yz, zz] = self.0;
        Matrix3::new(xx, xy, xz, xy, yy, yz, xz, yz, zz)
    }

    #[inline]
    pub fn quad_form(&self, u: &Vec3) -> f64 {
        let [xx, xy, xz, yy, yz, zz] = self.0;
        xx * u.x * u.x
            + yy * u.y * u.y
            + zz * u.z * u.z
            + 2.0 * (xy * u.x * u.y + xz * u.x * u.z + yz * u.y * u.z)
    }

    pub fn trace(&self) -> f64 {
        self.0[0] + self.0[3] + self.0[5]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.to_matrix().norm()
    }

    pub fn eigen(&self) -> Eigen {
        decompose(self.to_matrix())
    }

    pub fn determinant(&self) -> f64 {
        let [xx, xy, xz, yy, yz, zz] = self.0;
        xx * (yy * zz - yz * yz) - xy * (xy * zz - yz * xz) + xz * (xy * yz - yy * xz)
    }

    /// Inverse through the adjugate; `None` when the determinant is not a usable divisor.
    pub fn inverse(&self) -> Option<SymTensor> {
        let [xx, xy, xz, yy, yz, zz] = self.0;
        let det = self.determinant();
        if !(det.abs() > f64::MIN_POSITIVE) || !det.is_finite() {
            return None;
        }
        let inv = 1.0 / det;
        Some(SymTensor([
            (yy * zz - yz * yz) * inv,
            (xz * yz - xy * zz) * inv,
            (xy * yz - xz * yy) * inv,
            (xx * zz - xz * xz) * inv,
            (xy * xz - xx * yz) * inv,
            (xx * yy - xy * xy) * inv,
        ]))
    }

    /// Eigenvalues in descending order from the trigonometric closed form.
    ///
    /// Cheaper than [`SymTensor::eigen`] and accurate to a few ulps of the spectral radius.
    pub fn eigenvalues(&self) -> [f64; 3] {
        let [xx, xy, xz, yy, yz, zz] = self.0;
        let off = xy * xy + xz * xz + yz * yz;
        if off == 0.0 {
            let mut d = [xx, yy, zz];
            d.sort_by(|a, b| b.total_cmp(a));
            return d;
        }
        let q = (xx + yy + zz) / 3.0;
        let (a, b, c) = (xx - q, yy - q, zz - q);
        let p2 = a * a + b * b + c * c + 2.0 * off;
        let p = (p2 / 6.0).sqrt();
        // det((D - qI) / p) / 2, clamped against round-off before acos.
        let det = a * (b * c - yz * yz) - xy * (xy * c - yz * xz) + xz * (xy * yz - b * xz);
        let r = (det / (2.0 * p * p * p)).clamp(-1.0, 1.0);
        let phi = r.acos() / 3.0;
        let l1 = q + 2.0 * p * phi.cos();
        let l3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::FRAC_PI_3).cos();
        [l1, 3.0 * q - l1 - l3, l3]
    }
}

/// Eigen-decomposition of a symmetric matrix.
///
/// Eigenvalues come back in descending order with orthonormal eigenvectors whose
/// first non-negligible component is positive.
pub fn eigendecompose(m: &Matrix3<f64>) -> Result<Eigen> {
    let scale = m.abs().max();
    let asym = (m - m.transpose()).abs().max();
    if !(asym <= 1e-12 * scale) {
        return Err(Error::Contract(format!(
            "eigendecompose needs a symmetric matrix (asymmetry {asym:e})"
        )));
    }
    Ok(decompose(*m))
}

fn decompose(m: Matrix3<f64>) -> Eigen {
    let se = SymmetricEigen::new(m);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| se.eigenvalues[b].total_cmp(&se.eigenvalues[a]));
    let mut values = [0.0; 3];
    let mut vectors = [Vec3::zeros(); 3];
    for (k, &i) in order.iter().enumerate() {
        values[k] = se.eigenvalues[i];
        vectors[k] = canonical_sign(&se.eigenvectors.column(i).into_owned().normalize());
    }
    Eigen { values, vectors }
}

/// Flips `v` so that its first component with magnitude above 1e-12 is positive.
#[inline]
pub fn canonical_sign(v: &Vec3) -> Vec3 {
    for a in 0..3 {
        if v[a].abs() > 1e-12 {
            return if v[a] > 0.0 { *v } else { -v };
        }
    }
    *v
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Rotation3;
    use proptest::prelude::*;

    #[test]
    fn diagonal_spectrum() {
        let e = SymTensor::diag(3.0, 2.0, 1.0).eigen();
        assert_eq!(e.values, [3.0, 2.0, 1.0]);
        assert!((e.vectors[0] - Vec3::x()).norm() < 1e-12);
    }

    #[test]
    fn unsorted_diagonal() {
        let e = SymTensor::diag(1.0, 3.0, 2.0).eigen();
        assert_eq!(e.values, [3.0, 2.0, 1.0]);
        assert!((e.vectors[0] - Vec3::y()).norm() < 1e-12);
        assert!((e.vectors[1] - Vec3::z()).norm() < 1e-12);
    }

    #[test]
    fn isotropic_reconstructs() {
        let d = SymTensor::isotropic(0.7e-3);
        let e = d.eigen();
        for l in e.values {
            assert!((l - 0.7e-3).abs() < 1e-18);
        }
        assert!((e.reconstruct() - d.to_matrix()).norm() < 1e-15);
    }

    #[test]
    fn asymmetric_input_is_contract_violation() {
        let m = Matrix3::new(1.0, 0.5, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(matches!(eigendecompose(&m), Err(Error::Contract(_))));
    }

    #[test]
    fn sign_convention() {
        assert_eq!(canonical_sign(&Vec3::new(-1.0, 2.0, 0.0)), Vec3::new(1.0, -2.0, 0.0));
        assert_eq!(canonical_sign(&Vec3::new(0.0, -1.0, 0.0)), Vec3::new(0.0, 1.0, 0.0));
        assert_eq!(canonical_sign(&Vec3::new(0.0, 0.0, -1.0)), Vec3::new(0.0, 0.0, 1.0));
    }

    #[test]
    fn quad_form_matches_matrix() {
        let t = SymTensor([1.0, 0.2, -0.3, 2.0, 0.1, 0.5]);
        let u = Vec3::new(0.3, -0.5, 0.8).normalize();
        let expect = (u.transpose() * t.to_matrix() * u)[0];
        assert!((t.quad_form(&u) - expect).abs() < 1e-14);
    }

    #[test]
    fn inverse_of_diagonal() {
        let inv = SymTensor::diag(2.0, 4.0, 0.5).inverse().unwrap();
        assert_eq!(inv, SymTensor::diag(0.5, 0.25, 2.0));
        assert!(SymTensor::diag(1.0, 0.0, 1.0).inverse().is_none());
    }

    proptest! {
        #[test]
        fn closed_form_eigenvalues_agree(v in proptest::collection::vec(-1.0f64..1.0, 6)) {
            let t = SymTensor::from_slice(&v);
            let fast = t.eigenvalues();
            let slow = t.eigen().values;
            for i in 0..3 {
                prop_assert!((fast[i] - slow[i]).abs() < 1e-9, "{:?} vs {:?}", fast, slow);
            }
            prop_assert!((t.determinant() - t.to_matrix().determinant()).abs() < 1e-12);
        }

        #[test]
        fn inverse_times_tensor_is_identity(
            l in proptest::collection::vec(1e-4f64..3e-3, 3),
            axis in proptest::collection::vec(-1.0f64..1.0, 3),
            angle in 0.0f64..3.1,
        ) {
            let ax = Vec3::new(axis[0], axis[1], axis[2] + 1e-3);
            let r = Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(ax), angle);
            let m = r.matrix() * Matrix3::from_diagonal(&Vec3::new(l[0], l[1], l[2])) * r.matrix().transpose();
            let inv = SymTensor::from_matrix(&m).inverse().unwrap();
            prop_assert!((inv.to_matrix() * m - Matrix3::identity()).abs().max() < 1e-9);
        }

        #[test]
        fn random_symmetric_reconstructs(v in proptest::collection::vec(-1.0f64..1.0, 6)) {
            let t = SymTensor::from_slice(&v);
            let e = eigendecompose(&t.to_matrix()).unwrap();
            prop_assert!(e.values[0] >= e.values[1] && e.values[1] >= e.values[2]);
            prop_assert!((e.reconstruct() - t.to_matrix()).abs().max() < 1e-10);
            for i in 0..3 {
                prop_assert!((e.vectors[i].norm() - 1.0).abs() < 1e-12);
                for j in 0..i {
                    prop_assert!(e.vectors[i].dot(&e.vectors[j]).abs() < 1e-10);
                }
            }
        }

        #[test]
        fn rotated_spd_reconstructs(
            l in proptest::collection::vec(1e-4f64..3e-3, 3),
            axis in proptest::collection::vec(-1.0f64..1.0, 3),
            angle in 0.0f64..3.1,
        ) {
            let ax = Vec3::new(axis[0], axis[1], axis[2] + 1e-3);
            let r = Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(ax), angle);
            let m = r.matrix() * Matrix3::from_diagonal(&Vec3::new(l[0], l[1], l[2])) * r.matrix().transpose();
            let e = SymTensor::from_matrix(&m).eigen();
            prop_assert!((e.reconstruct() - m).abs().max() < 1e-15);
        }
    }
}
