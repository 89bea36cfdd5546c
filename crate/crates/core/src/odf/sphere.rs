use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::volume::Vec3;

pub const SPHERE_POINTS: usize = 724;

/// Antipodally symmetric point set on the unit sphere with uniform quadrature weights.
///
/// Directions `0..n/2` cover the upper hemisphere; direction `i + n/2` is exactly `-u_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereGrid {
    directions: Vec<Vec3>,
}

/// The 724-direction grid used for dODF sampling.
pub fn build_sphere() -> SphereGrid {
    SphereGrid::fibonacci(SPHERE_POINTS).expect("even point count")
}

impl SphereGrid {
    /// Upper half of an `n`-point spherical Fibonacci lattice mirrored through the origin.
    pub fn fibonacci(n: usize) -> Result<Self> {
        if n < 2 || !n.is_multiple_of(2) {
            return Err(Error::Parameter(format!(
                "sphere point count must be even and at least 2, got {n}"
            )));
        }
        let golden = PI * (3.0 - 5f64.sqrt());
        let half = n / 2;
        let mut directions = Vec::with_capacity(n);
        for i in 0..half {
            let z = 1.0 - (2 * i + 1) as f64 / n as f64;
            let r = (1.0 - z * z).sqrt();
            let (s, c) = (i as f64 * golden).sin_cos();
            directions.push(Vec3::new(r * c, r * s, z));
        }
        for i in 0..half {
            let u = -directions[i];
            directions.push(u);
        }
        Ok(Self { directions })
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn half_len(&self) -> usize {
        self.directions.len() / 2
    }

    pub fn directions(&self) -> &[Vec3] {
        &self.directions
    }

    #[inline]
    pub fn direction(&self, i: usize) -> Vec3 {
        self.directions[i]
    }

    #[inline]
    pub fn antipode(&self, i: usize) -> usize {
        let h = self.half_len();
        if i < h {
            i + h
        } else {
            i - h
        }
    }

    /// Quadrature weight of every direction, 4π/n.
    pub fn weight(&self) -> f64 {
        4.0 * PI / self.len() as f64
    }

    /// Index of the grid direction with the largest dot product with `u` (first on ties).
    pub fn nearest(&self, u: &Vec3) -> usize {
        let mut best = 0;
        let mut best_dot = f64::NEG_INFINITY;
        for (i, d) in self.directions.iter().enumerate() {
            let dot = d.dot(u);
            if dot > best_dot {
                best_dot = dot;
                best = i;
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nn_angles(s: &SphereGrid) -> Vec<f64> {
        let d = s.directions();
        d.iter()
            .enumerate()
            .map(|(i, a)| {
                d.iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, b)| a.dot(b).clamp(-1.0, 1.0).acos())
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }

    #[test]
    fn has_724_unit_directions() {
        let s = build_sphere();
        assert_eq!(s.len(), 724);
        for u in s.directions() {
            assert!((u.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn weights_sum_to_sphere_area() {
        let s = build_sphere();
        assert!((s.weight() * s.len() as f64 - 4.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn exact_antipodes() {
        let s = build_sphere();
        for i in 0..s.len() {
            assert_eq!(s.direction(s.antipode(i)), -s.direction(i));
            assert_eq!(s.antipode(s.antipode(i)), i);
        }
    }

    #[test]
    fn linear_functions_average_out() {
        let s = build_sphere();
        for a in [Vec3::x(), Vec3::new(0.3, -2.0, 1.1), Vec3::z() * 5.0] {
            let mean = s.directions().iter().map(|u| a.dot(u)).sum::<f64>() / s.len() as f64;
            assert!(mean.abs() < 1e-2 * a.norm());
        }
    }

    #[test]
    fn spacing_is_even() {
        let angles = nn_angles(&build_sphere());
        let n = angles.len() as f64;
        let mean = angles.iter().sum::<f64>() / n;
        let var = angles.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
        assert!(angles.iter().all(|&a| a > 0.0));
        assert!(var.sqrt() / mean < 0.25, "cv {}", var.sqrt() / mean);
    }

    #[test]
    fn deterministic() {
        assert_eq!(build_sphere(), build_sphere());
    }

    #[test]
    fn nearest_finds_itself() {
        let s = build_sphere();
        for i in [0, 17, 361, 362, 700] {
            assert_eq!(s.nearest(&s.direction(i)), i);
        }
    }

    #[test]
    fn odd_count_rejected() {
        assert!(SphereGrid::fibonacci(7).is_err());
    }
}
