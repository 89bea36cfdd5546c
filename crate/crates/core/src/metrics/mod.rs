//! Density maps, percentile binarization, mask agreement metrics and ROI filtering.

mod density;
mod overlap;
mod surface;

pub use density::{binarize_percentile, density_map, filter_by_rois, visited_voxels, DEFAULT_PERCENTILE};
pub use overlap::{dsc, voldiff};
pub use surface::{assd, hd95, surface_distances, surface_voxels, SurfaceDistances};

use crate::error::Result;
use crate::volume::BinaryMask;

/// All four agreement scores between two masks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskComparison {
    pub dsc: f64,
    pub hd95: f64,
    pub assd: f64,
    pub voldiff: f64,
}

impl MaskComparison {
    pub fn new(a: &BinaryMask, b: &BinaryMask) -> Result<Self> {
        let s = surface_distances(a, b)?;
        Ok(Self {
            dsc: dsc(a, b)?,
            hd95: s.hd95(),
            assd: s.assd(),
            voldiff: voldiff(a, b)?,
        })
    }

    /// `(name, value)` pairs in a fixed order.
    pub fn fields(&self) -> [(&'static str, f64); 4] {
        [("dsc", self.dsc), ("hd95", self.hd95), ("assd", self.assd), ("voldiff", self.voldiff)]
    }

    /// Element-wise mean; `None` for an empty slice.
    pub fn mean(all: &[Self]) -> Option<Self> {
        if all.is_empty() {
            return None;
        }
        let n = all.len() as f64;
        let sum = |f: fn(&Self) -> f64| all.iter().map(f).sum::<f64>() / n;
        Some(Self {
            dsc: sum(|m| m.dsc),
            hd95: sum(|m| m.hd95),
            assd: sum(|m| m.assd),
            voldiff: sum(|m| m.voldiff),
        })
    }
}

/// 1-based nearest-rank index `⌈p·n⌉`, at least 1, for `p` in (0, 1].
pub(crate) fn nearest_rank(p: f64, n: usize) -> usize {
    // The small slack keeps exact products such as 0.95·20 from rounding up a rank.
    ((p * n as f64 - 1e-9).ceil() as usize).clamp(1, n)
}
