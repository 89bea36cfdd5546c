use std::path::Path;

use crate::error::{Error, Result};
use crate::volume::{load_volume, AffineTransform, BinaryMask, DataType, Vec3, VoxelGrid};

/// Tissue classes of a 5TT label map, by integer code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Tissue {
    Background = 0,
    CorticalGm = 1,
    SubcorticalGm = 2,
    WhiteMatter = 3,
    Csf = 4,
    Pathological = 5,
}

impl Tissue {
    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => Self::Background,
            1 => Self::CorticalGm,
            2 => Self::SubcorticalGm,
            3 => Self::WhiteMatter,
            4 => Self::Csf,
            5 => Self::Pathological,
            _ => return None,
        })
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn is_gm(self) -> bool {
        matches!(self, Self::CorticalGm | Self::SubcorticalGm)
    }
}

/// Which labels count towards the brain volume used for length bounds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum BrainVolume {
    /// Every non-background label (1–5).
    #[default]
    AllTissue,
    /// Gray and white matter only (1–3).
    ParenchymaOnly,
}

/// Hard tissue labels on a voxel lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct FiveTissueTypeMap {
    dims: [usize; 3],
    affine: AffineTransform,
    labels: Vec<Tissue>,
}

/// Reads a 5TT volume: integer labels or five partial-volume channels.
pub fn load_5tt(path: impl AsRef<Path>) -> Result<FiveTissueTypeMap> {
    FiveTissueTypeMap::from_grid(&load_volume(path)?)
}

impl FiveTissueTypeMap {
    pub fn new(dims: [usize; 3], affine: AffineTransform, labels: Vec<Tissue>) -> Result<Self> {
        if labels.len() != dims[0] * dims[1] * dims[2] {
            return Err(Error::Parameter(format!(
                "{} labels for dims {dims:?}",
                labels.len()
            )));
        }
        Ok(Self {
            dims,
            affine,
            labels,
        })
    }

    /// One channel of integer codes 0–5, or five channels (cGM, sGM, WM, CSF, pathological)
    /// reduced by per-voxel argmax. All-zero partial volumes are background.
    pub fn from_grid(grid: &VoxelGrid) -> Result<Self> {
        let labels = match grid.channels() {
            1 => grid
                .data()
                .iter()
                .map(|&v| {
                    let code = (v.fract() == 0.0 && (0.0..=5.0).contains(&v))
                        .then(|| Tissue::from_code(v as u8))
                        .flatten();
                    code.ok_or_else(|| Error::Format(format!("5TT label {v} outside 0-5")))
                })
                .collect::<Result<Vec<_>>>()?,
            5 => grid
                .data()
                .chunks_exact(5)
                .map(|pv| {
                    let mut best = 0;
                    for c in 1..5 {
                        if pv[c] > pv[best] {
                            best = c;
                        }
                    }
                    if pv[best] > 0.0 {
                        Tissue::from_code(best as u8 + 1).expect("code in range")
                    } else {
                        Tissue::Background
                    }
                })
                .collect(),
            n => {
                return Err(Error::Format(format!(
                    "5TT volume needs 1 or 5 channels, found {n}"
                )))
            }
        };
        Self::new(grid.dims(), grid.affine().clone(), labels)
    }

    /// Integer label grid (uint8).
    pub fn to_grid(&self) -> VoxelGrid {
        let data = self.labels.iter().map(|t| t.code() as f64).collect();
        VoxelGrid::from_data(self.dims, 1, self.affine.clone(), DataType::U8, data)
            .expect("dims match")
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn affine(&self) -> &AffineTransform {
        &self.affine
    }

    pub fn labels(&self) -> &[Tissue] {
        &self.labels
    }

    #[inline]
    pub fn label(&self, index: usize) -> Tissue {
        self.labels[index]
    }

    pub fn voxel_volume(&self) -> f64 {
        self.affine.voxel_volume()
    }

    /// Brain volume in mm³ counting every non-background label.
    pub fn brain_volume(&self) -> f64 {
        self.brain_volume_with(BrainVolume::AllTissue)
    }

    pub fn brain_volume_with(&self, which: BrainVolume) -> f64 {
        let n = self
            .labels
            .iter()
            .filter(|t| match which {
                BrainVolume::AllTissue => **t != Tissue::Background,
                BrainVolume::ParenchymaOnly => {
                    matches!(t, Tissue::CorticalGm | Tissue::SubcorticalGm | Tissue::WhiteMatter)
                }
            })
            .count();
        n as f64 * self.voxel_volume()
    }

    /// Voxels with any non-background label.
    pub fn brain_mask(&self) -> BinaryMask {
        self.mask_of(|t| t != Tissue::Background)
    }

    pub fn mask_of(&self, pred: impl Fn(Tissue) -> bool) -> BinaryMask {
        let bits = self.labels.iter().map(|&t| pred(t)).collect();
        BinaryMask::from_bits(self.dims, self.affine.clone(), bits).expect("dims match")
    }

    /// Label of the voxel nearest to `world`; background outside the grid.
    #[inline]
    pub fn classify(&self, world: &Vec3) -> Tissue {
        self.nearest_index(world)
            .map_or(Tissue::Background, |i| self.labels[i])
    }

    /// Nearest voxel with round-half-down tie-breaking on faces.
    #[inline]
    pub fn nearest_index(&self, world: &Vec3) -> Option<usize> {
        let v = self.affine.world_to_voxel(world);
        let mut idx = 0;
        let mut stride = 1;
        for a in 0..3 {
            let r = (v[a] - 0.5).ceil();
            if !(r >= 0.0 && r < self.dims[a] as f64) {
                return None;
            }
            idx += r as usize * stride;
            stride *= self.dims[a];
        }
        Some(idx)
    }
}

/// White-matter voxels touching gray matter, the seeding region.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceMask {
    mask: BinaryMask,
    voxels: Vec<usize>,
}

impl InterfaceMask {
    pub fn mask(&self) -> &BinaryMask {
        &self.mask
    }

    /// Marked voxel indices in ascending order.
    pub fn voxels(&self) -> &[usize] {
        &self.voxels
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }

    pub fn len(&self) -> usize {
        self.voxels.len()
    }
}

/// Marks WM voxels with at least one six-connected cortical or sub-cortical GM neighbour.
pub fn gmwmi_extract(tt: &FiveTissueTypeMap) -> InterfaceMask {
    let mut mask = BinaryMask::empty(tt.dims, tt.affine.clone());
    let mut voxels = Vec::new();
    for i in 0..tt.labels.len() {
        if tt.labels[i] != Tissue::WhiteMatter {
            continue;
        }
        let touches = mask
            .neighbors6(i)
            .flatten()
            .any(|n| tt.labels[n].is_gm());
        if touches {
            voxels.push(i);
        }
    }
    for &v in &voxels {
        mask.set_index(v, true);
    }
    InterfaceMask { mask, voxels }
}
