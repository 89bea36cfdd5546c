use std::collections::HashSet;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::volume::{AffineTransform, BinaryMask, DataType, Vec3, VoxelGrid};

use super::nearest_rank;

/// Fraction of the sorted non-zero densities below which voxels are dropped.
pub const DEFAULT_PERCENTILE: f64 = 0.01;

/// Sub-steps per polyline segment, raised so no sub-step exceeds a quarter of the smallest voxel side.
fn substeps(len: f64, min_spacing: f64) -> usize {
    ((4.0 * len / min_spacing).ceil() as usize).max(4)
}

/// Linear voxel indices `track` passes through on `(dims, affine)`, each once, in first-visit order.
pub fn visited_voxels(track: &[Vec3], dims: [usize; 3], affine: &AffineTransform) -> Vec<usize> {
    let h = affine.spacing().into_iter().fold(f64::INFINITY, f64::min);
    let probe = BinaryMask::empty(dims, affine.clone());
    let mut out: Vec<usize> = Vec::new();
    let mut seen = HashSet::new();
    let mut push = |p: &Vec3| {
        if let Some(i) = probe.nearest_index(p) {
            if seen.insert(i) {
                out.push(i);
            }
        }
    };
    match track {
        [] => {}
        [only] => push(only),
        _ => {
            push(&track[0]);
            for w in track.windows(2) {
                let d = w[1] - w[0];
                let n = substeps(d.norm(), h);
                for k in 1..=n {
                    push(&(w[0] + d * (k as f64 / n as f64)));
                }
            }
        }
    }
    out
}

/// Number of streamlines visiting each voxel of `reference`'s lattice.
pub fn density_map<S: AsRef<[Vec3]> + Sync>(tracks: &[S], reference: &VoxelGrid) -> VoxelGrid {
    let mut out = reference.like(1, DataType::I32);
    let dims = reference.dims();
    let affine = reference.affine().clone();
    let counts: Vec<Vec<usize>> = tracks.par_iter().map(|t| visited_voxels(t.as_ref(), dims, &affine)).collect();
    let data = out.data_mut();
    for i in counts.into_iter().flatten() {
        data[i] += 1.0;
    }
    out
}

/// Keeps voxels whose density is at least the nearest-rank `pct` percentile (a fraction in
/// (0, 1]) of the non-zero densities.
pub fn binarize_percentile(density: &VoxelGrid, pct: f64) -> Result<BinaryMask> {
    if !(pct > 0.0 && pct <= 1.0) {
        return Err(Error::Parameter(format!("percentile fraction must lie in (0, 1], got {pct}")));
    }
    let mut nonzero: Vec<f64> = density.data().iter().copied().filter(|&v| v > 0.0).collect();
    if nonzero.is_empty() {
        return Err(Error::EmptyMask("density map has no non-zero voxel".into()));
    }
    nonzero.sort_by(f64::total_cmp);
    let threshold = nonzero[nearest_rank(pct, nonzero.len()) - 1];
    let bits = density.data().iter().map(|&v| v > 0.0 && v >= threshold).collect();
    BinaryMask::from_bits(density.dims(), density.affine().clone(), bits)
}

/// Streamlines that visit every `include` mask and none of the `exclude` masks.
pub fn filter_by_rois<S: AsRef<[Vec3]> + Clone>(
    tracks: &[S],
    include: &[BinaryMask],
    exclude: &[BinaryMask],
) -> Vec<S> {
    let visits = |t: &[Vec3], m: &BinaryMask| {
        visited_voxels(t, m.dims(), m.affine()).into_iter().any(|i| m.get_index(i))
    };
    tracks
        .iter()
        .filter(|t| {
            let t = t.as_ref();
            include.iter().all(|m| visits(t, m)) && !exclude.iter().any(|m| visits(t, m))
        })
        .cloned()
        .collect()
}
