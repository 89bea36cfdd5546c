use std::path::Path;

use nalgebra::Matrix4;
use ndarray::{Array, IxDyn, Order, ShapeBuilder};
use nifti::writer::WriterOptions;
use nifti::{IntoNdArray, NiftiHeader, NiftiObject, NiftiType, NiftiVolume, ReaderOptions, XForm};

use super::{AffineTransform, DataType, VoxelGrid};
use crate::error::{Error, Result};

/// Reads a NIfTI-1 volume (`.nii` or `.nii.gz`) as a 3D grid with an optional 4th channel axis.
///
/// Geometry comes from the sform when its code is set, otherwise the qform, otherwise
/// the pixel dimensions alone.
pub fn load_volume(path: impl AsRef<Path>) -> Result<VoxelGrid> {
    let path = path.as_ref();
    let obj = ReaderOptions::new().read_file(path)?;
    let header = obj.header().clone();
    let datatype = match header.data_type()? {
        NiftiType::Uint8 => DataType::U8,
        NiftiType::Int16 => DataType::I16,
        NiftiType::Int32 => DataType::I32,
        NiftiType::Float32 => DataType::F32,
        NiftiType::Float64 => DataType::F64,
        other => return Err(Error::Unsupported(format!("NIfTI datatype {other:?}"))),
    };

    let ndim = header.dim[0] as usize;
    if !(1..=7).contains(&ndim) {
        return Err(Error::Format(format!("dim[0] = {ndim} out of range")));
    }
    let mut shape = [1usize; 4];
    for (a, s) in shape.iter_mut().enumerate().take(ndim.min(4)) {
        *s = header.dim[a + 1] as usize;
    }
    if header.dim[5..=ndim.max(4)].iter().any(|&d| d > 1) {
        return Err(Error::Unsupported(format!(
            "volumes with more than 4 dimensions ({:?})",
            &header.dim[1..=ndim]
        )));
    }
    if shape.contains(&0) {
        return Err(Error::Format(format!("zero-length axis in {shape:?}")));
    }

    let affine = AffineTransform::new(header_affine(&header)?)?;

    let volume = obj.into_volume();
    if volume.dim().contains(&0) {
        return Err(Error::Format("empty volume".into()));
    }
    let array = volume.into_ndarray::<f64>()?;
    let array = array
        .into_shape_with_order((IxDyn(&shape), Order::ColumnMajor))
        .map_err(|e| Error::Format(format!("volume shape: {e}")))?;

    let [nx, ny, nz, nc] = shape;
    let mut data = Vec::with_capacity(nx * ny * nz * nc);
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                for c in 0..nc {
                    data.push(array[[x, y, z, c].as_slice()]);
                }
            }
        }
    }
    VoxelGrid::from_data([nx, ny, nz], nc, affine, datatype, data)
}

fn header_affine(header: &NiftiHeader) -> Result<Matrix4<f64>> {
    if header.sform_code != 0 {
        return Ok(header.sform_affine::<f64>());
    }
    if header.qform_code != 0 {
        if header.pixdim[1..4].iter().any(|&p| !(p > 0.0)) {
            return Err(Error::Format("qform with non-positive pixdim".into()));
        }
        let qfac = header.pixdim[0];
        let mut h = header.clone();
        if qfac != 1.0 && qfac != -1.0 {
            h.pixdim[0] = 1.0;
        }
        return Ok(h.qform_affine::<f64>());
    }
    let mut m = Matrix4::identity();
    for a in 0..3 {
        let p = header.pixdim[a + 1] as f64;
        m[(a, a)] = if p > 0.0 { p } else { 1.0 };
    }
    Ok(m)
}

/// Writes `grid` as NIfTI-1; a `.gz` suffix selects gzip compression.
///
/// Integer grids are written with their integer datatype; values are rounded and
/// saturated to that type's range.
pub fn save_volume(grid: &VoxelGrid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let [nx, ny, nz] = grid.dims();
    let nc = grid.channels();
    let mut header = NiftiHeader::default();
    let m = grid.affine().matrix();
    header.set_sform(m, XForm::ScannerAnat);
    header.set_qform(m, XForm::ScannerAnat);
    // NIFTI_UNITS_MM
    header.xyzt_units = 2;
    header.scl_slope = 1.0;

    let shape: Vec<usize> = if nc == 1 {
        vec![nx, ny, nz]
    } else {
        vec![nx, ny, nz, nc]
    };
    let writer = WriterOptions::new(path).reference_header(&header);

    // Fortran order so the flat channel-minor buffer maps without reshuffling.
    let nv = nx * ny * nz;
    let mut fortran = vec![0.0; nv * nc];
    for (v, chunk) in grid.data().chunks_exact(nc).enumerate() {
        for (c, &s) in chunk.iter().enumerate() {
            fortran[v + c * nv] = s;
        }
    }

    macro_rules! write_as {
        ($t:ty, $conv:expr) => {{
            let flat: Vec<$t> = fortran.iter().copied().map($conv).collect();
            let arr = Array::from_shape_vec(IxDyn(&shape).f(), flat)
                .map_err(|e| Error::Format(format!("volume shape: {e}")))?;
            writer.write_nifti(&arr)?;
        }};
    }

    match grid.datatype() {
        DataType::U8 => write_as!(u8, |v: f64| v.round().clamp(0.0, u8::MAX as f64) as u8),
        DataType::I16 => write_as!(i16, |v: f64| v
            .round()
            .clamp(i16::MIN as f64, i16::MAX as f64) as i16),
        DataType::I32 => write_as!(i32, |v: f64| v
            .round()
            .clamp(i32::MIN as f64, i32::MAX as f64) as i32),
        DataType::F32 => write_as!(f32, |v: f64| v as f32),
        DataType::F64 => write_as!(f64, |v: f64| v),
    }
    Ok(())
}
