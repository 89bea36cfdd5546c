use crate::error::{Error, Result};
use crate::volume::BinaryMask;

pub(super) fn check_grids(a: &BinaryMask, b: &BinaryMask) -> Result<()> {
    if a.same_geometry(b) {
        Ok(())
    } else {
        Err(Error::GridMismatch(format!("masks of dims {:?} and {:?} differ in geometry", a.dims(), b.dims())))
    }
}

/// Dice coefficient `2|A∩B| / (|A| + |B|)`; 1 when both masks are empty.
pub fn dsc(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    check_grids(a, b)?;
    let both = a.bits().iter().zip(b.bits()).filter(|(x, y)| **x && **y).count();
    let total = a.count() + b.count();
    Ok(if total == 0 { 1.0 } else { 2.0 * both as f64 / total as f64 })
}

/// Relative volume difference `|V_A - V_B| / ((V_A + V_B) / 2)`. The voxel volume cancels,
/// so it is computed from voxel counts.
pub fn voldiff(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    check_grids(a, b)?;
    let (va, vb) = (a.count() as f64, b.count() as f64);
    if va + vb == 0.0 {
        return Err(Error::EmptyMask("volume difference of two empty masks".into()));
    }
    Ok((va - vb).abs() / ((va + vb) / 2.0))
}
