use super::{AffineTransform, Vec3};
use crate::error::{Error, Result};

/// On-disk sample type. Samples are held as `f64` in memory regardless.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DataType {
    U8,
    I16,
    I32,
    F32,
    F64,
}

impl DataType {
    pub fn is_integer(self) -> bool {
        matches!(self, DataType::U8 | DataType::I16 | DataType::I32)
    }
}

/// A 3D lattice of `channels` samples per voxel with a voxel-to-world affine.
///
/// Samples are stored channel-minor with x varying fastest:
/// `data[c + nc * (x + nx * (y + ny * z))]`.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    dims: [usize; 3],
    channels: usize,
    affine: AffineTransform,
    datatype: DataType,
    data: Vec<f64>,
}

impl VoxelGrid {
    pub fn zeros(
        dims: [usize; 3],
        channels: usize,
        affine: AffineTransform,
        datatype: DataType,
    ) -> Result<Self> {
        let len = checked_len(dims, channels)?;
        Ok(Self {
            dims,
            channels,
            affine,
            datatype,
            data: vec![0.0; len],
        })
    }

    pub fn from_data(
        dims: [usize; 3],
        channels: usize,
        affine: AffineTransform,
        datatype: DataType,
        data: Vec<f64>,
    ) -> Result<Self> {
        let len = checked_len(dims, channels)?;
        if data.len() != len {
            return Err(Error::Parameter(format!(
                "data length {} does not match {}x{}x{}x{}",
                data.len(),
                dims[0],
                dims[1],
                dims[2],
                channels
            )));
        }
        Ok(Self {
            dims,
            channels,
            affine,
            datatype,
            data,
        })
    }

    /// A grid with the same geometry but a different channel count and type.
    pub fn like(&self, channels: usize, datatype: DataType) -> Self {
        Self::zeros(self.dims, channels, self.affine.clone(), datatype)
            .expect("dims already validated")
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn n_voxels(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn affine(&self) -> &AffineTransform {
        &self.affine
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.affine.spacing()
    }

    pub fn voxel_volume(&self) -> f64 {
        self.affine.voxel_volume()
    }

    pub fn datatype(&self) -> DataType {
        self.datatype
    }

    pub fn set_datatype(&mut self, datatype: DataType) {
        self.datatype = datatype;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn same_geometry(&self, other: &VoxelGrid) -> bool {
        self.dims == other.dims && self.affine.approx_eq(&other.affine, 1e-6)
    }

    #[inline]
    pub fn voxel_index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn voxel_coords(&self, index: usize) -> [usize; 3] {
        let x = index % self.dims[0];
        let yz = index / self.dims[0];
        [x, yz % self.dims[1], yz / self.dims[1]]
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize, c: usize) -> f64 {
        self.data[c + self.channels * self.voxel_index(x, y, z)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, z: usize, c: usize, value: f64) {
        let i = c + self.channels * self.voxel_index(x, y, z);
        self.data[i] = value;
    }

    /// All channels of one voxel, by linear voxel index.
    #[inline]
    pub fn voxel(&self, index: usize) -> &[f64] {
        &self.data[index * self.channels..(index + 1) * self.channels]
    }

    #[inline]
    pub fn voxel_mut(&mut self, index: usize) -> &mut [f64] {
        let nc = self.channels;
        &mut self.data[index * nc..(index + 1) * nc]
    }

    pub fn world_to_voxel(&self, world: &Vec3) -> Vec3 {
        self.affine.world_to_voxel(world)
    }

    pub fn voxel_to_world(&self, voxel: &Vec3) -> Vec3 {
        self.affine.voxel_to_world(voxel)
    }

    pub fn voxel_center(&self, x: usize, y: usize, z: usize) -> Vec3 {
        self.affine
            .voxel_to_world(&Vec3::new(x as f64, y as f64, z as f64))
    }

    /// Index of the voxel whose center is nearest to `world`, or `None` outside the grid.
    ///
    /// Ties on a voxel face go to the lower index on that axis (round half down).
    #[inline]
    pub fn nearest_voxel(&self, world: &Vec3) -> Option<[usize; 3]> {
        let v = self.affine.world_to_voxel(world);
        let mut out = [0usize; 3];
        for a in 0..3 {
            let r = (v[a] - 0.5).ceil();
            if !(r >= 0.0 && r < self.dims[a] as f64) {
                return None;
            }
            out[a] = r as usize;
        }
        Some(out)
    }

    /// Trilinear blend of the 8 voxel centers surrounding `world`, one value per channel.
    ///
    /// Returns `None` when the point falls outside the hull of voxel centers, which
    /// callers treat as a boundary crossing.
    pub fn sample_trilinear(&self, world: &Vec3) -> Option<Vec<f64>> {
        let mut out = vec![0.0; self.channels];
        self.sample_trilinear_into(world, &mut out).then_some(out)
    }

    /// Allocation-free form of [`sample_trilinear`](Self::sample_trilinear).
    pub fn sample_trilinear_into(&self, world: &Vec3, out: &mut [f64]) -> bool {
        debug_assert_eq!(out.len(), self.channels);
        let v = self.affine.world_to_voxel(world);
        let mut base = [0usize; 3];
        let mut frac = [0.0f64; 3];
        for a in 0..3 {
            let n = self.dims[a];
            let c = v[a];
            if n == 1 {
                if !(c.abs() <= 0.5) {
                    return false;
                }
                continue;
            }
            let hi = (n - 1) as f64;
            if !(c >= -EDGE_TOL && c <= hi + EDGE_TOL) {
                return false;
            }
            let c = c.clamp(0.0, hi);
            let i = (c.floor() as usize).min(n - 2);
            base[a] = i;
            frac[a] = c - i as f64;
        }
        out.iter_mut().for_each(|o| *o = 0.0);
        let nc = self.channels;
        for corner in 0..8 {
            let mut w = 1.0;
            let mut idx = [0usize; 3];
            for a in 0..3 {
                let hi = (corner >> a) & 1 == 1;
                if self.dims[a] == 1 {
                    if hi {
                        w = 0.0;
                    }
                    idx[a] = 0;
                } else {
                    idx[a] = base[a] + hi as usize;
                    w *= if hi { frac[a] } else { 1.0 - frac[a] };
                }
            }
            if w == 0.0 {
                continue;
            }
            let off = nc * self.voxel_index(idx[0], idx[1], idx[2]);
            for (o, s) in out.iter_mut().zip(&self.data[off..off + nc]) {
                *o += w * s;
            }
        }
        true
    }
}

/// Slack on the hull of voxel centers that absorbs affine round-off.
const EDGE_TOL: f64 = 1e-9;

fn checked_len(dims: [usize; 3], channels: usize) -> Result<usize> {
    if dims.contains(&0) || channels == 0 {
        return Err(Error::Parameter(format!(
            "grid dimensions must be positive, got {dims:?} x {channels}"
        )));
    }
    dims.iter()
        .try_fold(channels, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::Parameter("grid too large".into()))
}
