use rand::Rng;

use super::{DodfConvention, SphereGrid, TensorOdf};
use crate::dti::SymTensor;
use crate::error::{Error, Result};
use crate::volume::Vec3;

pub const DEFAULT_SHARPENING: f64 = 4.0;

/// Probability mass over the directions of a [`SphereGrid`], `p ∝ dODF^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationPmf {
    probs: Vec<f64>,
    k: f64,
}

/// Raises `dodf` to the power `k` and renormalises to unit sum.
///
/// The power is taken in the log domain with the peak subtracted, so large exponents do
/// not overflow.
pub fn sharpen_normalize(dodf: &[f64], k: f64) -> Result<PropagationPmf> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::Parameter(format!("sharpening exponent must be positive, got {k}")));
    }
    if dodf.is_empty() || dodf.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::Parameter("dODF values must be positive and finite".into()));
    }
    let logs: Vec<f64> = dodf.iter().map(|v| k * v.ln()).collect();
    Ok(PropagationPmf::from_log_weights(&logs, k))
}

impl PropagationPmf {
    fn from_log_weights(logs: &[f64], k: f64) -> Self {
        let peak = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut probs: Vec<f64> = logs.iter().map(|l| (l - peak).exp()).collect();
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);
        Self { probs, k }
    }

    /// Sharpened dODF of a tensor on `sphere`.
    pub fn from_tensor(
        d: &SymTensor,
        sphere: &SphereGrid,
        k: f64,
        convention: DodfConvention,
    ) -> Result<Self> {
        if !(k > 0.0) || !k.is_finite() {
            return Err(Error::Parameter(format!("sharpening exponent must be positive, got {k}")));
        }
        let odf = TensorOdf::new(d, convention)?;
        let logs: Vec<f64> = sphere
            .directions()
            .iter()
            .map(|u| k * odf.log_relative(u))
            .collect();
        Ok(Self::from_log_weights(&logs, k))
    }

    /// Arbitrary probabilities, renormalised; all must be non-negative with a positive sum.
    pub fn from_probs(probs: Vec<f64>, k: f64) -> Result<Self> {
        let total: f64 = probs.iter().sum();
        if probs.iter().any(|&p| !(p >= 0.0)) || !(total > 0.0) || !total.is_finite() {
            return Err(Error::Parameter("probabilities must be non-negative with a positive sum".into()));
        }
        Ok(Self {
            probs: probs.into_iter().map(|p| p / total).collect(),
            k,
        })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Index of the largest probability; the lowest index wins ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }

    pub fn peak_to_mean(&self) -> f64 {
        self.probs[self.argmax()] * self.probs.len() as f64
    }
}

/// Draws a direction from `pmf`.
///
/// With `prev`, only directions within `max_angle_deg` of it are eligible, with probability
/// proportional to `p(u)`; since the cone is narrower than a hemisphere at most one member
/// of every antipodal pair qualifies. Without `prev`, each antipodal pair carries
/// `p(u) + p(-u)` and the upper-hemisphere member is returned. `None` means the cone holds
/// no probability mass and the caller should stop.
pub fn sample_direction<R: Rng + ?Sized>(
    pmf: &PropagationPmf,
    sphere: &SphereGrid,
    prev: Option<&Vec3>,
    max_angle_deg: f64,
    rng: &mut R,
) -> Option<Vec3> {
    assert_eq!(pmf.len(), sphere.len(), "pmf and sphere sizes differ");
    let dist = match prev {
        Some(p) => ConeDistribution::cone(sphere, p, max_angle_deg.to_radians().cos(), |i| {
            pmf.probs[i]
        }),
        None => ConeDistribution::folded(sphere, |i| pmf.probs[i] + pmf.probs[sphere.antipode(i)]),
    }?;
    Some(dist.draw(rng))
}

/// Discrete distribution over a set of candidate directions, reusable for repeated draws.
#[derive(Debug, Clone, Default)]
pub struct ConeDistribution {
    dirs: Vec<Vec3>,
    cumulative: Vec<f64>,
}

impl ConeDistribution {
    /// Directions `u` of `sphere` with `u·prev ≥ cos_max`, weighted by `weight(index)`.
    pub fn cone(
        sphere: &SphereGrid,
        prev: &Vec3,
        cos_max: f64,
        weight: impl FnMut(usize) -> f64,
    ) -> Option<Self> {
        let mut d = Self::default();
        d.fill_cone(sphere, prev, cos_max, weight).then_some(d)
    }

    /// One entry per antipodal pair (upper-hemisphere member), weighted by `weight(index)`.
    pub fn folded(sphere: &SphereGrid, mut weight: impl FnMut(usize) -> f64) -> Option<Self> {
        let mut d = Self::default();
        let mut acc = 0.0;
        for i in 0..sphere.half_len() {
            acc += weight(i);
            d.dirs.push(sphere.direction(i));
            d.cumulative.push(acc);
        }
        (acc > 0.0 && acc.is_finite()).then_some(d)
    }

    /// Refills in place, keeping allocations; returns false when the cone carries no mass.
    pub fn fill_cone(
        &mut self,
        sphere: &SphereGrid,
        prev: &Vec3,
        cos_max: f64,
        mut weight: impl FnMut(usize) -> f64,
    ) -> bool {
        self.dirs.clear();
        self.cumulative.clear();
        let mut acc = 0.0;
        for (i, u) in sphere.directions().iter().enumerate() {
            if u.dot(prev) >= cos_max {
                let w = weight(i);
                if w > 0.0 {
                    acc += w;
                    self.dirs.push(*u);
                    self.cumulative.push(acc);
                }
            }
        }
        acc > 0.0 && acc.is_finite()
    }

    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec3 {
        let total = *self.cumulative.last().expect("non-empty distribution");
        let t = rng.random::<f64>() * total;
        let i = self.cumulative.partition_point(|&c| c <= t);
        self.dirs[i.min(self.dirs.len() - 1)]
    }
}
