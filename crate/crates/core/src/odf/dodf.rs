use std::f64::consts::PI;

use super::SphereGrid;
use crate::dti::SymTensor;
use crate::error::{Error, Result};
use crate::volume::Vec3;

/// Smallest eigenvalue (mm²/s) a tensor may carry before its dODF is evaluated.
pub const EIGENVALUE_FLOOR: f64 = 1e-6;

/// Which quadratic form sits in the denominator of the tensor dODF.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum DodfConvention {
    /// `uᵀD⁻¹u`: the Gaussian ODF, which integrates to one over the sphere.
    #[default]
    Inverse,
    /// `uᵀDu`, kept for comparison.
    Literal,
}

/// A tensor prepared for repeated dODF evaluation at arbitrary unit vectors.
///
/// dODF(u) = 1 / (4π |D|^½ q(u)^{3/2}) with q the quadratic form selected by the convention.
#[derive(Debug, Clone, Copy)]
pub struct TensorOdf {
    form: SymTensor,
    q_min: f64,
    norm: f64,
}

impl TensorOdf {
    /// Floors eigenvalues at [`EIGENVALUE_FLOOR`]; fails when the largest one is below it.
    pub fn new(d: &SymTensor, convention: DodfConvention) -> Result<Self> {
        if !d.is_finite() {
            return Err(Error::DegenerateTensor("non-finite tensor".into()));
        }
        let mut l = d.eigenvalues();
        if !(l[0] > EIGENVALUE_FLOOR) {
            return Err(Error::DegenerateTensor(format!(
                "largest eigenvalue {:e} is not above {EIGENVALUE_FLOOR:e}",
                l[0]
            )));
        }
        let d = if l[2] < EIGENVALUE_FLOOR {
            let e = d.eigen();
            l = e.values.map(|v| v.max(EIGENVALUE_FLOOR));
            SymTensor::from_eigen(l, e.vectors)
        } else {
            *d
        };
        let det = l[0] * l[1] * l[2];
        let (form, q_min) = match convention {
            DodfConvention::Inverse => {
                let inv = d
                    .inverse()
                    .ok_or_else(|| Error::DegenerateTensor("singular tensor".into()))?;
                (inv, 1.0 / l[0])
            }
            DodfConvention::Literal => (d, l[2]),
        };
        Ok(Self {
            form,
            q_min,
            norm: 1.0 / (4.0 * PI * det.sqrt()),
        })
    }

    #[inline]
    pub fn eval(&self, u: &Vec3) -> f64 {
        let q = self.form.quad_form(u);
        self.norm / (q * q.sqrt())
    }

    /// dODF(u) divided by its maximum over all unit vectors, in (0, 1].
    #[inline]
    pub fn relative(&self, u: &Vec3) -> f64 {
        let r = self.q_min / self.form.quad_form(u);
        r * r.sqrt()
    }

    /// Natural log of [`TensorOdf::relative`].
    #[inline]
    pub fn log_relative(&self, u: &Vec3) -> f64 {
        1.5 * (self.q_min / self.form.quad_form(u)).ln()
    }

    /// Largest dODF value over all unit vectors.
    pub fn max_value(&self) -> f64 {
        self.norm / (self.q_min * self.q_min.sqrt())
    }
}

/// dODF of `d` at every direction of `sphere`.
pub fn dodf_eval(d: &SymTensor, sphere: &SphereGrid, convention: DodfConvention) -> Result<Vec<f64>> {
    let odf = TensorOdf::new(d, convention)?;
    Ok(sphere.directions().iter().map(|u| odf.eval(u)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::odf::build_sphere;

    fn anisotropic() -> SymTensor {
        SymTensor::diag(1.5e-3, 0.3e-3, 0.3e-3)
    }

    /// Direct transcription of the formula with a freshly inverted matrix.
    fn oracle(d: &SymTensor, u: &Vec3) -> f64 {
        let m = d.to_matrix();
        let q = (u.transpose() * m.try_inverse().unwrap() * u)[0];
        1.0 / (4.0 * PI * m.determinant().sqrt() * q.powf(1.5))
    }

    #[test]
    fn isotropic_is_uniform() {
        let s = build_sphere();
        let v = dodf_eval(&SymTensor::isotropic(0.8e-3), &s, DodfConvention::Inverse).unwrap();
        for x in v {
            assert!((x - 1.0 / (4.0 * PI)).abs() < 1e-12);
        }
    }

    #[test]
    fn anisotropic_values() {
        let odf = TensorOdf::new(&anisotropic(), DodfConvention::Inverse).unwrap();
        let (e1, e2) = (odf.eval(&Vec3::x()), odf.eval(&Vec3::y()));
        assert!((e1 / e2 - 5f64.powf(1.5)).abs() < 1e-9);
        assert!((e1 - 0.3979).abs() < 1e-4);
        assert!((e1 - oracle(&anisotropic(), &Vec3::x())).abs() < 1e-12);
        assert!((odf.max_value() - e1).abs() < 1e-12);
        assert!((odf.relative(&Vec3::x()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn literal_form_peaks_across_the_fibre() {
        let odf = TensorOdf::new(&anisotropic(), DodfConvention::Literal).unwrap();
        let (e1, e2) = (odf.eval(&Vec3::x()), odf.eval(&Vec3::y()));
        assert!((e2 / e1 - 5f64.powf(1.5)).abs() < 1e-9);
        assert!((odf.relative(&Vec3::y()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_tensors_rejected() {
        for d in [
            SymTensor::default(),
            SymTensor::isotropic(-1e-3),
            SymTensor([f64::NAN, 0.0, 0.0, 1e-3, 0.0, 1e-3]),
        ] {
            assert!(matches!(
                TensorOdf::new(&d, DodfConvention::Inverse),
                Err(Error::DegenerateTensor(_))
            ));
        }
    }

    #[test]
    fn small_eigenvalues_are_floored() {
        let odf = TensorOdf::new(&SymTensor::diag(1e-3, 0.0, -1e-4), DodfConvention::Inverse).unwrap();
        let floored = SymTensor::diag(1e-3, EIGENVALUE_FLOOR, EIGENVALUE_FLOOR);
        let u = Vec3::new(0.6, 0.0, 0.8);
        assert!((odf.eval(&u) / oracle(&floored, &u) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn relative_matches_ratio_to_max() {
        let d = SymTensor([1.1e-3, 0.2e-3, -0.1e-3, 0.7e-3, 0.05e-3, 0.4e-3]);
        let odf = TensorOdf::new(&d, DodfConvention::Inverse).unwrap();
        for u in build_sphere().directions() {
            let r = odf.eval(u) / odf.max_value();
            assert!((odf.relative(u) - r).abs() < 1e-12);
            assert!((odf.log_relative(u) - r.ln()).abs() < 1e-9);
            assert!(r <= 1.0 + 1e-12);
            assert!((odf.eval(u) - oracle(&d, u)).abs() < 1e-9 * oracle(&d, u));
        }
    }
}
