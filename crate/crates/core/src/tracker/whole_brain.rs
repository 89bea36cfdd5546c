use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{Algorithm, FactPropagator, ProbPropagator, Termination, TrackerConfig};
use crate::act::{gmwmi_extract, judge_streamline, length_bounds, FiveTissueTypeMap, RejectReason, Verdict};
use crate::dti::TensorField;
use crate::error::{Error, Result};
use crate::odf::build_sphere;
use crate::volume::{AffineTransform, Vec3};

/// Attempts evaluated per parallel batch. Fixed so results do not depend on thread count.
const BATCH: u64 = 256;

/// Upper bound on FACT half-track length, in multiples of the grid diagonal.
const FACT_LENGTH_FACTOR: f64 = 4.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Streamline {
    pub points: Vec<Vec3>,
    /// Index of the attempt that produced the streamline; its random stream is
    /// seeded with `seed ^ attempt`.
    pub attempt: u64,
}

impl AsRef<[Vec3]> for Streamline {
    fn as_ref(&self) -> &[Vec3] {
        &self.points
    }
}

/// Attempt outcomes, by reason, up to and including the attempt that completed the run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RejectionStats {
    pub attempts: u64,
    pub accepted: u64,
    pub rejected: [u64; 6],
}

impl RejectionStats {
    pub fn count(&self, reason: RejectReason) -> u64 {
        self.rejected[reason as usize]
    }

    fn record(&mut self, verdict: Verdict) {
        self.attempts += 1;
        match verdict {
            Verdict::Accept => self.accepted += 1,
            Verdict::Reject(r) => self.rejected[r as usize] += 1,
        }
    }
}

impl fmt::Display for RejectionStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "attempts={} accepted={}", self.attempts, self.accepted)?;
        for r in RejectReason::ALL {
            write!(f, " {}={}", r, self.count(r))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Tractogram {
    pub streamlines: Vec<Streamline>,
    pub config: TrackerConfig,
    pub stats: RejectionStats,
}

impl Tractogram {
    pub fn len(&self) -> usize {
        self.streamlines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.streamlines.is_empty()
    }

    pub fn points(&self) -> Vec<&[Vec3]> {
        self.streamlines.iter().map(|s| s.points.as_slice()).collect()
    }
}

/// Uniform point inside voxel `index` of a lattice.
fn jitter_in_voxel<R: Rng + ?Sized>(affine: &AffineTransform, dims: [usize; 3], index: usize, rng: &mut R) -> Vec3 {
    let x = index % dims[0];
    let y = (index / dims[0]) % dims[1];
    let z = index / (dims[0] * dims[1]);
    let v = Vec3::new(
        x as f64 + rng.random::<f64>() - 0.5,
        y as f64 + rng.random::<f64>() - 0.5,
        z as f64 + rng.random::<f64>() - 0.5,
    );
    affine.voxel_to_world(&v)
}

/// Tracks until `cfg.target_count` streamlines are kept.
///
/// `act_prob` seeds on the gray/white interface, propagates both ways from the seed and
/// keeps streamlines the anatomical judge accepts. `fact` seeds anywhere in the brain mask
/// and keeps every streamline with at least two points. Attempt `i` draws from its own
/// random stream seeded with `cfg.seed ^ i`, and attempts are consumed in index order, so
/// the output does not depend on the number of threads. Gives up after `1000·M` attempts.
pub fn track_whole_brain(field: &TensorField, tt: &FiveTissueTypeMap, cfg: &TrackerConfig) -> Result<Tractogram> {
    cfg.validate()?;
    if field.grid().dims() != tt.dims() {
        return Err(Error::GridMismatch(format!(
            "tensor grid {:?} vs 5TT grid {:?}",
            field.grid().dims(),
            tt.dims()
        )));
    }
    let m = cfg.target_count;
    let cap = 1000 * m as u64;
    let dims = tt.dims();
    let affine = tt.affine().clone();
    let mut stats = RejectionStats::default();
    let mut streamlines = Vec::with_capacity(m);

    let run = |attempt: &(dyn Fn(u64) -> (Vec<Vec3>, Verdict) + Sync),
               stats: &mut RejectionStats,
               streamlines: &mut Vec<Streamline>|
     -> Result<()> {
        let mut start = 0u64;
        while streamlines.len() < m {
            if start >= cap {
                return Err(Error::AttemptCap {
                    cap,
                    accepted: streamlines.len(),
                    stats: stats.clone(),
                });
            }
            let end = (start + BATCH).min(cap);
            let results: Vec<(Vec<Vec3>, Verdict)> = (start..end).into_par_iter().map(attempt).collect();
            for (i, (points, verdict)) in (start..end).zip(results) {
                stats.record(verdict);
                if verdict.is_accept() {
                    streamlines.push(Streamline { points, attempt: i });
                    if streamlines.len() == m {
                        break;
                    }
                }
            }
            start = end;
        }
        Ok(())
    };

    match cfg.algorithm {
        Algorithm::ActProb => {
            let interface = gmwmi_extract(tt);
            if interface.is_empty() {
                return Err(Error::Seeding("gray/white matter interface is empty".into()));
            }
            let bounds = length_bounds(tt.brain_volume_with(cfg.brain_volume))?;
            let sphere = build_sphere();
            let prop = ProbPropagator::new(field, &sphere, Some(tt), cfg, bounds.max_mm);
            let seeds = interface.voxels();
            let attempt = |i: u64| {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ i);
                let voxel = seeds[rng.random_range(0..seeds.len())];
                let seed = jitter_in_voxel(&affine, dims, voxel, &mut rng);
                let Some(dir) = prop.initial_direction(&seed, &mut rng) else {
                    return (vec![seed], Verdict::Reject(RejectReason::TooShort));
                };
                let a = prop.propagate(seed, dir, &mut rng);
                let b = prop.propagate(seed, -dir, &mut rng);
                let mut points = b.points;
                points.reverse();
                points.pop();
                points.extend(a.points);
                let verdict = match (a.end, b.end) {
                    (Termination::EnteredCsf, _) | (_, Termination::EnteredCsf) => {
                        Verdict::Reject(RejectReason::EnteredCsf)
                    }
                    (Termination::ExitedBrain, _) | (_, Termination::ExitedBrain) => {
                        Verdict::Reject(RejectReason::ExitedBrain)
                    }
                    (Termination::Pathological, _) | (_, Termination::Pathological) => {
                        Verdict::Reject(RejectReason::InvalidInterior)
                    }
                    _ => judge_streamline(&points, tt, &bounds),
                };
                (points, verdict)
            };
            run(&attempt, &mut stats, &mut streamlines)?;
        }
        Algorithm::Fact => {
            let mask = tt.brain_mask();
            let seeds: Vec<usize> = mask.iter_set().collect();
            if seeds.is_empty() {
                return Err(Error::Seeding("brain mask is empty".into()));
            }
            let spacing = affine.spacing();
            let diag = (0..3).map(|a| (dims[a] as f64 * spacing[a]).powi(2)).sum::<f64>().sqrt();
            let prop = FactPropagator::new(field, &mask, cfg, FACT_LENGTH_FACTOR * diag);
            let attempt = |i: u64| {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ i);
                let voxel = seeds[rng.random_range(0..seeds.len())];
                let seed = jitter_in_voxel(&affine, dims, voxel, &mut rng);
                let points = prop.track(seed);
                let verdict = if points.len() >= 2 {
                    Verdict::Accept
                } else {
                    Verdict::Reject(RejectReason::TooShort)
                };
                (points, verdict)
            };
            run(&attempt, &mut stats, &mut streamlines)?;
        }
    }
    log::info!("{} streamlines kept: {stats}", streamlines.len());
    Ok(Tractogram {
        streamlines,
        config: cfg.clone(),
        stats,
    })
}
