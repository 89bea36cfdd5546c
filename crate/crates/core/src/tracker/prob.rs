use rand::Rng;

use super::TrackerConfig;
use crate::act::{FiveTissueTypeMap, Tissue};
use crate::dti::TensorField;
use crate::odf::{ConeDistribution, DodfConvention, SphereGrid, TensorOdf};
use crate::volume::Vec3;

/// Why a half-track stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// No candidate arc was accepted, or the orientation field was unusable.
    NoDirection,
    /// The last point entered gray matter and was kept.
    ReachedGm,
    /// The next point fell in CSF and was dropped.
    EnteredCsf,
    /// The next point fell in background or outside the grid and was dropped.
    ExitedBrain,
    /// The next point fell in pathological tissue and was dropped.
    Pathological,
    MaxLength,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HalfTrack {
    /// Starts with the seed point.
    pub points: Vec<Vec3>,
    pub end: Termination,
}

/// Second-order probabilistic propagation over sharpened tensor dODFs.
///
/// Each step draws an end tangent `t1` from the cone-restricted PMF at the provisional
/// midpoint `p + (s/2)·t0`, forms the circular arc from `p` with tangents `t0 → t1` whose
/// chord has length `s`, and accepts it with probability equal to the product of the
/// PMF values at the arc midpoint (along the chord) and at the end point (along `t1`),
/// divided by the square of the largest provisional PMF value inside the cone. Up to
/// `trials` candidates are drawn per step.
pub struct ProbPropagator<'a> {
    field: &'a TensorField,
    sphere: &'a SphereGrid,
    tt: Option<&'a FiveTissueTypeMap>,
    step: f64,
    cos_max: f64,
    k: f64,
    trials: usize,
    convention: DodfConvention,
    max_length: f64,
    /// Tissue samples per step, fine enough that no voxel is stepped over.
    scan: usize,
}

impl<'a> ProbPropagator<'a> {
    /// Without a tissue map, tracks stop only on direction failure, leaving the grid,
    /// or reaching `max_length`. Tissue is checked along every step at half-voxel spacing,
    /// so thin gray matter cannot be stepped over; a step that enters cortical GM ends at
    /// its first sample inside it.
    pub fn new(
        field: &'a TensorField,
        sphere: &'a SphereGrid,
        tt: Option<&'a FiveTissueTypeMap>,
        cfg: &TrackerConfig,
        max_length: f64,
    ) -> Self {
        Self {
            field,
            sphere,
            tt,
            step: cfg.step_mm,
            cos_max: cfg.angle_deg.to_radians().cos(),
            k: cfg.k,
            trials: cfg.trials,
            convention: cfg.dodf,
            max_length,
            scan: {
                let spacing = tt.map_or_else(|| field.grid().spacing(), |t| t.affine().spacing());
                let h = spacing.into_iter().fold(f64::INFINITY, f64::min);
                ((2.0 * cfg.step_mm / h).ceil() as usize).max(1)
            },
        }
    }

    fn odf_at(&self, p: &Vec3) -> Option<TensorOdf> {
        TensorOdf::new(&self.field.sample(p)?, self.convention).ok()
    }

    /// Orientation drawn from the full PMF at `p`, antipodal pairs folded.
    pub fn initial_direction<R: Rng + ?Sized>(&self, p: &Vec3, rng: &mut R) -> Option<Vec3> {
        let odf = self.odf_at(p)?;
        let k = self.k;
        ConeDistribution::folded(self.sphere, |i| {
            (k * odf.log_relative(&self.sphere.direction(i))).exp()
        })
        .map(|d| d.draw(rng))
    }

    fn classify(&self, p: &Vec3) -> Tissue {
        match self.tt {
            Some(tt) => tt.classify(p),
            None => match self.field.grid().nearest_voxel(p) {
                Some(_) => Tissue::WhiteMatter,
                None => Tissue::Background,
            },
        }
    }

    pub fn propagate<R: Rng + ?Sized>(&self, start: Vec3, dir: Vec3, rng: &mut R) -> HalfTrack {
        let s = self.step;
        let mut points = vec![start];
        let mut p = start;
        let mut t0 = dir.normalize();
        let mut cone = ConeDistribution::default();
        let end = loop {
            let Some(odf) = self.odf_at(&(p + 0.5 * s * t0)) else {
                break Termination::NoDirection;
            };
            let k = self.k;
            let sphere = self.sphere;
            let mut peak = f64::NEG_INFINITY;
            if !cone.fill_cone(sphere, &t0, self.cos_max, |i| {
                let l = k * odf.log_relative(&sphere.direction(i));
                peak = peak.max(l);
                l.exp()
            }) {
                break Termination::NoDirection;
            }
            let mut next = None;
            for _ in 0..self.trials {
                let t1 = cone.draw(rng);
                if let Some(q) = self.try_arc(&p, &t0, &t1, 2.0 * peak, rng) {
                    next = Some((q, t1));
                    break;
                }
            }
            let Some((q, t1)) = next else {
                break Termination::NoDirection;
            };
            if let Some((tissue, at)) = self.first_exit(&p, &q) {
                match tissue {
                    Tissue::CorticalGm => {
                        points.push(at);
                        break Termination::ReachedGm;
                    }
                    Tissue::Csf => break Termination::EnteredCsf,
                    Tissue::Pathological => break Termination::Pathological,
                    _ => break Termination::ExitedBrain,
                }
            }
            points.push(q);
            p = q;
            t0 = t1;
            if (points.len() - 1) as f64 * s > self.max_length {
                break Termination::MaxLength;
            }
        };
        HalfTrack { points, end }
    }

    /// First sample on the segment `p → q` (excluding `p`) outside WM and subcortical GM.
    fn first_exit(&self, p: &Vec3, q: &Vec3) -> Option<(Tissue, Vec3)> {
        (1..=self.scan).find_map(|j| {
            let x = p + (q - p) * (j as f64 / self.scan as f64);
            match self.classify(&x) {
                Tissue::WhiteMatter | Tissue::SubcorticalGm => None,
                t => Some((t, x)),
            }
        })
    }

    /// End point of the candidate arc if the rejection test accepts it.
    fn try_arc<R: Rng + ?Sized>(
        &self,
        p: &Vec3,
        t0: &Vec3,
        t1: &Vec3,
        log_bound: f64,
        rng: &mut R,
    ) -> Option<Vec3> {
        let s = self.step;
        let chord = (t0 + t1).normalize();
        let end = p + s * chord;
        let cos_turn = t0.dot(t1).clamp(-1.0, 1.0);
        let bulge = t0 - t1;
        let mid = if bulge.norm() > 1e-12 {
            let sagitta = 0.5 * s * (0.25 * cos_turn.acos()).tan();
            p + 0.5 * s * chord + sagitta * bulge.normalize()
        } else {
            p + 0.5 * s * chord
        };
        let log_mid = self.odf_at(&mid)?.log_relative(&chord);
        let log_end = self.odf_at(&end)?.log_relative(t1);
        let u: f64 = rng.random();
        (u.ln() < self.k * (log_mid + log_end) - log_bound).then_some(end)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::act::Tissue;
    use crate::dti::SymTensor;
    use crate::odf::build_sphere;
    use crate::volume::{AffineTransform, DataType, VoxelGrid};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn uniform_field(dims: [usize; 3], t: SymTensor) -> TensorField {
        let g = VoxelGrid::zeros(dims, 1, AffineTransform::identity(), DataType::F32).unwrap();
        TensorField::from_fn(&g, |_, _| t)
    }

    #[test]
    fn uniform_field_tracks_stay_on_axis() {
        let field = uniform_field([80, 21, 21], SymTensor::diag(1.7e-3, 0.3e-3, 0.3e-3));
        let sphere = build_sphere();
        let cfg = TrackerConfig::act_prob();
        let prop = ProbPropagator::new(&field, &sphere, None, &cfg, 60.0);
        let start = Vec3::new(5.0, 10.0, 10.0);
        let mut total = 0.0;
        let mut count = 0usize;
        for i in 0..500u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(i);
            let h = prop.propagate(start, Vec3::x(), &mut rng);
            for p in &h.points {
                total += ((p.y - start.y).powi(2) + (p.z - start.z).powi(2)).sqrt();
                count += 1;
            }
        }
        let mad = total / count as f64;
        assert!(mad < 2.0 * cfg.step_mm, "mean deviation {mad}");
    }

    #[test]
    fn steps_are_exact_and_turns_bounded() {
        let field = uniform_field([30, 30, 30], SymTensor::diag(0.9e-3, 0.6e-3, 0.5e-3));
        let sphere = build_sphere();
        let cfg = TrackerConfig::act_prob();
        let prop = ProbPropagator::new(&field, &sphere, None, &cfg, 200.0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let h = prop.propagate(Vec3::new(15.0, 15.0, 15.0), Vec3::new(1.0, 1.0, 0.0), &mut rng);
            for w in h.points.windows(2) {
                assert!(((w[1] - w[0]).norm() - 0.6).abs() < 1e-9);
            }
            for w in h.points.windows(3) {
                let (a, b) = ((w[1] - w[0]).normalize(), (w[2] - w[1]).normalize());
                assert!(a.dot(&b).clamp(-1.0, 1.0).acos().to_degrees() <= 20.0 + 1e-6);
            }
        }
    }

    #[test]
    fn csf_truncates_at_previous_point() {
        let field = uniform_field([20, 5, 5], SymTensor::diag(1.7e-3, 0.2e-3, 0.2e-3));
        let labels = (0..500)
            .map(|i| if i % 20 >= 12 { Tissue::Csf } else { Tissue::WhiteMatter })
            .collect();
        let tt = FiveTissueTypeMap::new([20, 5, 5], AffineTransform::identity(), labels).unwrap();
        let sphere = build_sphere();
        let cfg = TrackerConfig { k: 200.0, ..TrackerConfig::act_prob() };
        let prop = ProbPropagator::new(&field, &sphere, Some(&tt), &cfg, 100.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = prop.propagate(Vec3::new(2.0, 2.0, 2.0), Vec3::x(), &mut rng);
        assert_eq!(h.end, Termination::EnteredCsf);
        let last = h.points.last().unwrap();
        assert_eq!(tt.classify(last), Tissue::WhiteMatter);
        assert!(last.x > 11.5 - 0.6 - 1e-9 && last.x <= 11.5);
    }

    #[test]
    fn cortical_gm_point_is_kept() {
        let field = uniform_field([20, 5, 5], SymTensor::diag(1.7e-3, 0.2e-3, 0.2e-3));
        let labels = (0..500)
            .map(|i| if i % 20 >= 12 { Tissue::CorticalGm } else { Tissue::WhiteMatter })
            .collect();
        let tt = FiveTissueTypeMap::new([20, 5, 5], AffineTransform::identity(), labels).unwrap();
        let sphere = build_sphere();
        let cfg = TrackerConfig { k: 200.0, ..TrackerConfig::act_prob() };
        let prop = ProbPropagator::new(&field, &sphere, Some(&tt), &cfg, 100.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = prop.propagate(Vec3::new(2.0, 2.0, 2.0), Vec3::x(), &mut rng);
        assert_eq!(h.end, Termination::ReachedGm);
        assert_eq!(tt.classify(h.points.last().unwrap()), Tissue::CorticalGm);
    }

    #[test]
    fn thin_gray_matter_is_not_stepped_over() {
        // 0.2 mm voxels: a one-voxel cortical slab at x = 3.0 sits between WM and CSF.
        let aff = AffineTransform::from_spacing([0.2; 3], [0.0; 3]).unwrap();
        let g = VoxelGrid::zeros([30, 5, 5], 1, aff.clone(), DataType::F32).unwrap();
        let field = TensorField::from_fn(&g, |_, _| SymTensor::diag(1.7e-3, 0.2e-3, 0.2e-3));
        let labels = (0..750)
            .map(|i| match i % 30 {
                15 => Tissue::CorticalGm,
                x if x > 15 => Tissue::Csf,
                _ => Tissue::WhiteMatter,
            })
            .collect();
        let tt = FiveTissueTypeMap::new([30, 5, 5], aff, labels).unwrap();
        let sphere = build_sphere();
        let cfg = TrackerConfig { k: 200.0, ..TrackerConfig::act_prob() };
        let prop = ProbPropagator::new(&field, &sphere, Some(&tt), &cfg, 100.0);
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = prop.propagate(Vec3::new(0.4 + 0.01 * seed as f64, 0.4, 0.4), Vec3::x(), &mut rng);
            assert_eq!(h.end, Termination::ReachedGm);
            let last = h.points.last().unwrap();
            assert_eq!(tt.classify(last), Tissue::CorticalGm);
            assert!(last.x > 2.9 && last.x <= 3.1 + 1e-9);
        }
    }

    #[test]
    fn degenerate_field_stops_immediately() {
        let field = uniform_field([10, 10, 10], SymTensor::default());
        let sphere = build_sphere();
        let cfg = TrackerConfig::act_prob();
        let prop = ProbPropagator::new(&field, &sphere, None, &cfg, 100.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = prop.propagate(Vec3::new(5.0, 5.0, 5.0), Vec3::x(), &mut rng);
        assert_eq!(h.points.len(), 1);
        assert_eq!(h.end, Termination::NoDirection);
        assert!(prop.initial_direction(&Vec3::new(5.0, 5.0, 5.0), &mut rng).is_none());
    }
}
