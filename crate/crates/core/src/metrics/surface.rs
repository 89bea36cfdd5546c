use kiddo::{ImmutableKdTree, SquaredEuclidean};

use super::nearest_rank;
use super::overlap::check_grids;
use crate::error::{Error, Result};
use crate::volume::BinaryMask;

/// Mask voxels with at least one six-connected neighbour outside the mask; the grid
/// border counts as outside.
pub fn surface_voxels(mask: &BinaryMask) -> Vec<usize> {
    mask.iter_set()
        .filter(|&i| mask.neighbors6(i).any(|n| n.is_none_or(|j| !mask.get_index(j))))
        .collect()
}

/// Directed nearest-surface distances in mm, from each surface voxel of one mask to the
/// other mask's surface.
#[derive(Debug, Clone)]
pub struct SurfaceDistances {
    pub a_to_b: Vec<f64>,
    pub b_to_a: Vec<f64>,
}

impl SurfaceDistances {
    /// Larger of the two directed 95th nearest-rank percentiles.
    pub fn hd95(&self) -> f64 {
        percentile(&self.a_to_b, 0.95).max(percentile(&self.b_to_a, 0.95))
    }

    /// Mean over both directions pooled.
    pub fn assd(&self) -> f64 {
        let n = self.a_to_b.len() + self.b_to_a.len();
        (self.a_to_b.iter().sum::<f64>() + self.b_to_a.iter().sum::<f64>()) / n as f64
    }
}

fn percentile(d: &[f64], p: f64) -> f64 {
    let mut s = d.to_vec();
    s.sort_by(f64::total_cmp);
    s[nearest_rank(p, s.len()) - 1]
}

fn directed(from: &BinaryMask, from_surface: &[usize], to: &BinaryMask, to_surface: &[usize]) -> Vec<f64> {
    let points: Vec<[f64; 3]> = to_surface.iter().map(|&i| to.voxel_center(i).into()).collect();
    let tree: ImmutableKdTree<f64, 3> = ImmutableKdTree::new_from_slice(&points).expect("finite voxel centers");
    from_surface
        .iter()
        .map(|&i| {
            let q: [f64; 3] = from.voxel_center(i).into();
            tree.query(&q).nearest_one::<SquaredEuclidean<f64>>().execute().distance.sqrt()
        })
        .collect()
}

pub fn surface_distances(a: &BinaryMask, b: &BinaryMask) -> Result<SurfaceDistances> {
    check_grids(a, b)?;
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyMask("surface distances need two non-empty masks".into()));
    }
    let (sa, sb) = (surface_voxels(a), surface_voxels(b));
    Ok(SurfaceDistances { a_to_b: directed(a, &sa, b, &sb), b_to_a: directed(b, &sb, a, &sa) })
}

/// 95th-percentile symmetric Hausdorff distance between mask surfaces, in mm.
pub fn hd95(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    Ok(surface_distances(a, b)?.hd95())
}

/// Average symmetric surface distance, in mm.
pub fn assd(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    Ok(surface_distances(a, b)?.assd())
}
