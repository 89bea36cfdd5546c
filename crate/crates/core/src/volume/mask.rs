use super::{AffineTransform, DataType, Vec3, VoxelGrid};
use crate::error::{Error, Result};

/// Boolean voxel lattice sharing the geometry of the grid it was derived from.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMask {
    dims: [usize; 3],
    affine: AffineTransform,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn empty(dims: [usize; 3], affine: AffineTransform) -> Self {
        Self {
            dims,
            affine,
            bits: vec![false; dims[0] * dims[1] * dims[2]],
        }
    }

    pub fn empty_like(grid: &VoxelGrid) -> Self {
        Self::empty(grid.dims(), grid.affine().clone())
    }

    pub fn from_bits(dims: [usize; 3], affine: AffineTransform, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != dims[0] * dims[1] * dims[2] {
            return Err(Error::Parameter(format!(
                "mask length {} does not match dims {dims:?}",
                bits.len()
            )));
        }
        Ok(Self { dims, affine, bits })
    }

    /// Non-zero voxels of channel 0.
    pub fn from_grid(grid: &VoxelGrid) -> Self {
        let bits = (0..grid.n_voxels()).map(|i| grid.voxel(i)[0] != 0.0).collect();
        Self {
            dims: grid.dims(),
            affine: grid.affine().clone(),
            bits,
        }
    }

    pub fn to_grid(&self) -> VoxelGrid {
        let data = self.bits.iter().map(|&b| b as u8 as f64).collect();
        VoxelGrid::from_data(self.dims, 1, self.affine.clone(), DataType::U8, data)
            .expect("mask dims valid")
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn affine(&self) -> &AffineTransform {
        &self.affine
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn voxel_volume(&self) -> f64 {
        self.affine.voxel_volume()
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Volume of the set voxels in mm³.
    pub fn volume(&self) -> f64 {
        self.count() as f64 * self.voxel_volume()
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn coords(&self, index: usize) -> [usize; 3] {
        let x = index % self.dims[0];
        let yz = index / self.dims[0];
        [x, yz % self.dims[1], yz / self.dims[1]]
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> bool {
        self.bits[self.index(x, y, z)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, z: usize, value: bool) {
        let i = self.index(x, y, z);
        self.bits[i] = value;
    }

    #[inline]
    pub fn get_index(&self, index: usize) -> bool {
        self.bits[index]
    }

    #[inline]
    pub fn set_index(&mut self, index: usize, value: bool) {
        self.bits[index] = value;
    }

    pub fn iter_set(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
    }

    pub fn voxel_center(&self, index: usize) -> Vec3 {
        let [x, y, z] = self.coords(index);
        self.affine
            .voxel_to_world(&Vec3::new(x as f64, y as f64, z as f64))
    }

    /// Voxel nearest to `world` (round half down per axis), or `None` outside the lattice.
    #[inline]
    pub fn nearest_index(&self, world: &Vec3) -> Option<usize> {
        let v = self.affine.world_to_voxel(world);
        let mut out = [0usize; 3];
        for a in 0..3 {
            let r = (v[a] - 0.5).ceil();
            if !(r >= 0.0 && r < self.dims[a] as f64) {
                return None;
            }
            out[a] = r as usize;
        }
        Some(self.index(out[0], out[1], out[2]))
    }

    pub fn contains_world(&self, world: &Vec3) -> bool {
        self.nearest_index(world).is_some_and(|i| self.bits[i])
    }

    pub fn same_geometry(&self, other: &BinaryMask) -> bool {
        self.dims == other.dims && self.affine.approx_eq(&other.affine, 1e-6)
    }

    /// Six-connected neighbours of a voxel that lie inside the lattice.
    pub fn neighbors6(&self, index: usize) -> impl Iterator<Item = Option<usize>> + '_ {
        let [x, y, z] = self.coords(index);
        let d = self.dims;
        const OFFSETS: [(isize, isize, isize); 6] = [
            (-1, 0, 0),
            (1, 0, 0),
            (0, -1, 0),
            (0, 1, 0),
            (0, 0, -1),
            (0, 0, 1),
        ];
        OFFSETS.iter().map(move |&(dx, dy, dz)| {
            let nx = x as isize + dx;
            let ny = y as isize + dy;
            let nz = z as isize + dz;
            if nx < 0
                || ny < 0
                || nz < 0
                || nx >= d[0] as isize
                || ny >= d[1] as isize
                || nz >= d[2] as isize
            {
                None
            } else {
                Some(self.index(nx as usize, ny as usize, nz as usize))
            }
        })
    }
}
