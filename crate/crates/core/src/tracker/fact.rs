use super::TrackerConfig;
use crate::dti::{fractional_anisotropy, TensorField};
use crate::volume::{BinaryMask, Vec3};

/// Deterministic Euler integration along the principal eigenvector.
pub struct FactPropagator<'a> {
    field: &'a TensorField,
    mask: &'a BinaryMask,
    step: f64,
    cos_max: f64,
    fa_stop: f64,
    nearest: bool,
    max_length: f64,
}

impl<'a> FactPropagator<'a> {
    /// Tracks stop on leaving `mask`, on a turn sharper than the configured angle, on an
    /// unusable tensor, below the FA stop when one is set, or past `max_length`.
    pub fn new(field: &'a TensorField, mask: &'a BinaryMask, cfg: &TrackerConfig, max_length: f64) -> Self {
        Self {
            field,
            mask,
            step: cfg.step_mm,
            cos_max: cfg.angle_deg.to_radians().cos(),
            fa_stop: cfg.fact_fa_stop,
            nearest: cfg.fact_nearest,
            max_length,
        }
    }

    /// Principal eigenvector at `p` (canonical sign) and the FA there.
    pub fn direction_at(&self, p: &Vec3) -> Option<(Vec3, f64)> {
        let t = if self.nearest {
            self.field.sample_nearest(p)?
        } else {
            self.field.sample(p)?
        };
        if t.is_zero() || !t.is_finite() {
            return None;
        }
        let e = t.eigen();
        Some((e.principal(), fractional_anisotropy(e.values.map(|l| l.max(0.0)))))
    }

    /// One half-track from `start`, leaving along `dir` (or its closest eigenvector sign).
    pub fn propagate(&self, start: Vec3, dir: Vec3) -> Vec<Vec3> {
        if !self.mask.contains_world(&start) {
            return Vec::new();
        }
        let mut points = vec![start];
        let mut p = start;
        let mut prev = dir.normalize();
        let mut first = true;
        while let Some((mut v, fa)) = self.direction_at(&p) {
            if v.dot(&prev) < 0.0 {
                v = -v;
            }
            if !first && v.dot(&prev) < self.cos_max {
                break;
            }
            if self.fa_stop > 0.0 && fa < self.fa_stop {
                break;
            }
            let q = p + self.step * v;
            if !self.mask.contains_world(&q) {
                break;
            }
            points.push(q);
            p = q;
            prev = v;
            first = false;
            if (points.len() - 1) as f64 * self.step > self.max_length {
                break;
            }
        }
        points
    }

    /// Both halves from `seed` joined into one polyline; empty outside the mask.
    pub fn track(&self, seed: Vec3) -> Vec<Vec3> {
        let Some((v, _)) = self.direction_at(&seed) else {
            return if self.mask.contains_world(&seed) { vec![seed] } else { Vec::new() };
        };
        let forward = self.propagate(seed, v);
        if forward.is_empty() {
            return forward;
        }
        let mut back = self.propagate(seed, -v);
        back.reverse();
        back.pop();
        back.extend(forward);
        back
    }
}
