//! Python bindings: phantoms, tensor fitting, propagation PMFs, tracking and mask metrics.
//!
//! Volumes cross the boundary as numpy arrays indexed `[x, y, z]` or `[x, y, z, channel]`.

use std::path::PathBuf;

use acttrack_core::act::FiveTissueTypeMap;
use acttrack_core::dti::{derive_scalars, fit_wlls, DiffusionProtocol, SymTensor};
use acttrack_core::metrics::MaskComparison;
use acttrack_core::odf::{build_sphere, DodfConvention, PropagationPmf};
use acttrack_core::phantom::{make_phantom, shell_protocol, PhantomKind, PhantomSpec};
use acttrack_core::tck::{read_tck as core_read_tck, write_tck};
use acttrack_core::tracker::{track_whole_brain, TrackerConfig};
use acttrack_core::volume::{load_volume, save_volume, AffineTransform, BinaryMask, DataType, Vec3, VoxelGrid};
use numpy::ndarray::{Array, Array2, ArrayD, IxDyn};
use numpy::{IntoPyArray, PyArray1, PyArray2, PyArrayDyn, PyReadonlyArray1, PyReadonlyArray2, PyReadonlyArrayDyn};
use pyo3::exceptions::{PyIOError, PyIndexError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyDict};

fn py_err(e: acttrack_core::Error) -> PyErr {
    match e {
        acttrack_core::Error::Io(io) => PyIOError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

/// Grid samples as an `[x, y, z]` or `[x, y, z, c]` array.
fn grid_to_array(grid: &VoxelGrid) -> ArrayD<f64> {
    let [nx, ny, nz] = grid.dims();
    let nc = grid.channels();
    let zyxc = Array::from_shape_vec((nz, ny, nx, nc), grid.data().to_vec()).expect("grid length");
    let xyzc = zyxc.permuted_axes([2, 1, 0, 3]).as_standard_layout().into_owned();
    if nc == 1 {
        xyzc.into_shape_with_order(IxDyn(&[nx, ny, nz])).expect("same length").into_dyn()
    } else {
        xyzc.into_dyn()
    }
}

fn array_to_grid(a: &PyReadonlyArrayDyn<'_, f64>, spacing: [f64; 3], datatype: DataType) -> PyResult<VoxelGrid> {
    let view = a.as_array();
    let (dims, nc, view4) = match view.ndim() {
        3 => {
            let s = view.shape();
            let v = view.to_owned().into_shape_with_order(IxDyn(&[s[0], s[1], s[2], 1])).expect("same length");
            ([s[0], s[1], s[2]], 1, v)
        }
        4 => {
            let s = view.shape();
            ([s[0], s[1], s[2]], s[3], view.to_owned())
        }
        n => return Err(PyValueError::new_err(format!("expected a 3D or 4D array, got {n}D"))),
    };
    let data: Vec<f64> = view4.permuted_axes(IxDyn(&[2, 1, 0, 3])).iter().copied().collect();
    let affine = AffineTransform::from_spacing(spacing, [0.0; 3]).map_err(py_err)?;
    VoxelGrid::from_data(dims, nc, affine, datatype, data).map_err(py_err)
}

fn mask_from_array(a: &PyReadonlyArrayDyn<'_, bool>, spacing: [f64; 3]) -> PyResult<BinaryMask> {
    let view = a.as_array();
    if view.ndim() != 3 {
        return Err(PyValueError::new_err("masks must be 3D"));
    }
    let s = view.shape();
    let dims = [s[0], s[1], s[2]];
    let bits = view.permuted_axes(IxDyn(&[2, 1, 0])).iter().copied().collect();
    let affine = AffineTransform::from_spacing(spacing, [0.0; 3]).map_err(py_err)?;
    BinaryMask::from_bits(dims, affine, bits).map_err(py_err)
}

fn mask_to_array(mask: &BinaryMask) -> ArrayD<bool> {
    grid_to_array(&mask.to_grid()).mapv(|v| v != 0.0)
}

fn points_to_array(points: &[Vec3]) -> Array2<f64> {
    Array2::from_shape_fn((points.len(), 3), |(i, j)| points[i][j])
}

fn kwarg_text(value: &Bound<'_, PyAny>) -> PyResult<String> {
    if value.is_instance_of::<PyBool>() {
        Ok(if value.extract::<bool>()? { "true" } else { "false" }.to_string())
    } else {
        Ok(value.str()?.to_string())
    }
}

fn tracker_config(kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<TrackerConfig> {
    let mut cfg = TrackerConfig::act_prob();
    if let Some(kw) = kwargs {
        if let Some(alg) = kw.get_item("algorithm")? {
            cfg = TrackerConfig::for_algorithm(kwarg_text(&alg)?.parse().map_err(py_err)?);
        }
        for (k, v) in kw.iter() {
            cfg.set(&k.extract::<String>()?, &kwarg_text(&v)?).map_err(py_err)?;
        }
    }
    cfg.validate().map_err(py_err)?;
    Ok(cfg)
}

/// A 6-channel tensor volume (Dxx, Dxy, Dxz, Dyy, Dyz, Dzz) in mm²/s.
#[pyclass(module = "acttrack_py")]
struct TensorField {
    inner: acttrack_core::dti::TensorField,
}

#[pymethods]
impl TensorField {
    /// Fits tensors to a 4D dMRI array with weighted linear least squares.
    #[staticmethod]
    #[pyo3(signature = (dwi, bvals, bvecs, spacing = (1.0, 1.0, 1.0)))]
    fn fit(
        dwi: PyReadonlyArrayDyn<'_, f64>,
        bvals: PyReadonlyArray1<'_, f64>,
        bvecs: PyReadonlyArray2<'_, f64>,
        spacing: (f64, f64, f64),
    ) -> PyResult<Self> {
        let grid = array_to_grid(&dwi, [spacing.0, spacing.1, spacing.2], DataType::F32)?;
        let g = bvecs.as_array();
        if g.ncols() != 3 {
            return Err(PyValueError::new_err("bvecs must have shape (n, 3)"));
        }
        let bvecs = g.rows().into_iter().map(|r| Vec3::new(r[0], r[1], r[2])).collect();
        let protocol = DiffusionProtocol::new(bvals.as_array().to_vec(), bvecs).map_err(py_err)?;
        let inner = fit_wlls(&grid, &protocol, None).map_err(py_err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let grid = load_volume(path).map_err(py_err)?;
        let inner = acttrack_core::dti::TensorField::from_grid(grid).map_err(py_err)?;
        Ok(Self { inner })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        save_volume(self.inner.grid(), path).map_err(py_err)
    }

    #[getter]
    fn shape(&self) -> [usize; 3] {
        self.inner.grid().dims()
    }

    /// The `[x, y, z, 6]` coefficient array.
    fn array<'py>(&self, py: Python<'py>) -> Bound<'py, PyArrayDyn<f64>> {
        grid_to_array(self.inner.grid()).into_pyarray(py)
    }

    /// Voxel counts from the fit.
    fn report<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let r = self.inner.report();
        let d = PyDict::new(py);
        d.set_item("fitted", r.fitted)?;
        d.set_item("outside_mask", r.outside_mask)?;
        d.set_item("nonpositive_s0", r.nonpositive_s0)?;
        d.set_item("nonfinite", r.nonfinite)?;
        d.set_item("ols_fallbacks", r.ols_fallbacks)?;
        Ok(d)
    }

    /// FA, MD, V1 and the FA-weighted direction map.
    fn scalars<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let maps = derive_scalars(&self.inner);
        let d = PyDict::new(py);
        d.set_item("fa", grid_to_array(&maps.fa).into_pyarray(py))?;
        d.set_item("md", grid_to_array(&maps.md).into_pyarray(py))?;
        d.set_item("v1", grid_to_array(&maps.v1).into_pyarray(py))?;
        d.set_item("dirmap", grid_to_array(&maps.dirmap).into_pyarray(py))?;
        Ok(d)
    }

    /// Tensor coefficients at voxel `(x, y, z)`.
    fn tensor(&self, x: usize, y: usize, z: usize) -> PyResult<[f64; 6]> {
        let [nx, ny, nz] = self.inner.grid().dims();
        if x >= nx || y >= ny || z >= nz {
            return Err(PyIndexError::new_err(format!("voxel ({x}, {y}, {z}) outside {nx}x{ny}x{nz}")));
        }
        Ok(self.inner.tensor(self.inner.grid().voxel_index(x, y, z)).0)
    }

    fn __repr__(&self) -> String {
        format!("TensorField(shape={:?}, fitted={})", self.shape(), self.inner.report().fitted)
    }
}

/// Accepted streamlines and the attempt counts that produced them.
#[pyclass(module = "acttrack_py")]
struct Tractogram {
    streamlines: Vec<Vec<Vec3>>,
    properties: Vec<(String, String)>,
    #[pyo3(get)]
    stats: String,
}

#[pymethods]
impl Tractogram {
    fn __len__(&self) -> usize {
        self.streamlines.len()
    }

    fn __getitem__<'py>(&self, py: Python<'py>, i: isize) -> PyResult<Bound<'py, PyArray2<f64>>> {
        let n = self.streamlines.len() as isize;
        let j = if i < 0 { i + n } else { i };
        if !(0..n).contains(&j) {
            return Err(PyIndexError::new_err("streamline index out of range"));
        }
        Ok(points_to_array(&self.streamlines[j as usize]).into_pyarray(py))
    }

    /// Every streamline as an `(n, 3)` array of world coordinates in mm.
    fn streamlines<'py>(&self, py: Python<'py>) -> Vec<Bound<'py, PyArray2<f64>>> {
        self.streamlines.iter().map(|s| points_to_array(s).into_pyarray(py)).collect()
    }

    /// Writes an MRtrix `.tck` file.
    fn save_tck(&self, path: PathBuf) -> PyResult<()> {
        write_tck(path, &self.streamlines, &self.properties).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("Tractogram({} streamlines; {})", self.streamlines.len(), self.stats)
    }
}

fn run_tracking(
    field: &acttrack_core::dti::TensorField,
    tt: &FiveTissueTypeMap,
    kwargs: Option<&Bound<'_, PyDict>>,
    py: Python<'_>,
) -> PyResult<Tractogram> {
    let cfg = tracker_config(kwargs)?;
    let tg = py
        .detach(|| track_whole_brain(field, tt, &cfg))
        .map_err(py_err)?;
    Ok(Tractogram {
        streamlines: tg.streamlines.into_iter().map(|s| s.points).collect(),
        properties: cfg.to_key_values(),
        stats: tg.stats.to_string(),
    })
}

/// Synthetic bundle phantom: tensors, 5TT labels, truth mask and GM end caps.
#[pyclass(module = "acttrack_py")]
struct Phantom {
    inner: acttrack_core::phantom::Phantom,
}

#[pymethods]
impl Phantom {
    /// `kind` is straight, curved or crossing; keyword arguments override manifest fields,
    /// e.g. `Phantom("curved", noise_sigma=0.0)`.
    #[new]
    #[pyo3(signature = (kind = "curved", **overrides))]
    fn new(kind: &str, overrides: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let mut spec = PhantomSpec::for_kind(kind.parse::<PhantomKind>().map_err(py_err)?);
        if let Some(kw) = overrides {
            for (k, v) in kw.iter() {
                let key: String = k.extract()?;
                let text = if key == "dims" {
                    let d: [usize; 3] = v.extract()?;
                    format!("{}x{}x{}", d[0], d[1], d[2])
                } else {
                    kwarg_text(&v)?
                };
                spec.set(&key, &text).map_err(py_err)?;
            }
        }
        let inner = make_phantom(&spec).map_err(py_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn manifest(&self) -> String {
        self.inner.spec.manifest()
    }

    #[getter]
    fn shape(&self) -> [usize; 3] {
        self.inner.spec.dims
    }

    #[getter]
    fn voxel_mm(&self) -> f64 {
        self.inner.spec.voxel_mm
    }

    /// Ground-truth tensors.
    #[getter]
    fn tensors(&self) -> TensorField {
        TensorField {
            inner: self.inner.tensors.clone(),
        }
    }

    /// 5TT label codes, 0 background to 5 pathological.
    fn labels<'py>(&self, py: Python<'py>) -> Bound<'py, PyArrayDyn<u8>> {
        grid_to_array(&self.inner.tt.to_grid()).mapv(|v| v as u8).into_pyarray(py)
    }

    fn truth<'py>(&self, py: Python<'py>) -> Bound<'py, PyArrayDyn<bool>> {
        mask_to_array(&self.inner.truth).into_pyarray(py)
    }

    fn end_caps<'py>(&self, py: Python<'py>) -> Vec<Bound<'py, PyArrayDyn<bool>>> {
        self.inner.end_caps.iter().map(|m| mask_to_array(m).into_pyarray(py)).collect()
    }

    /// Single-shell signals with unit b=0 intensity: `(dwi, bvals, bvecs)`.
    #[pyo3(signature = (b0 = 2, dirs = 32, bval = 500.0))]
    #[allow(clippy::type_complexity)]
    fn dmri<'py>(
        &self,
        py: Python<'py>,
        b0: usize,
        dirs: usize,
        bval: f64,
    ) -> PyResult<(Bound<'py, PyArrayDyn<f64>>, Bound<'py, PyArray1<f64>>, Bound<'py, PyArray2<f64>>)> {
        let protocol = shell_protocol(b0, dirs, bval).map_err(py_err)?;
        let dwi = grid_to_array(&self.inner.dmri(&protocol)).into_pyarray(py);
        let bvals = protocol.bvals().to_vec().into_pyarray(py);
        let bvecs = points_to_array(protocol.bvecs()).into_pyarray(py);
        Ok((dwi, bvals, bvecs))
    }

    /// Tensors fitted to the phantom's own signals.
    #[pyo3(signature = (b0 = 2, dirs = 32, bval = 500.0))]
    fn fit(&self, b0: usize, dirs: usize, bval: f64) -> PyResult<TensorField> {
        let protocol = shell_protocol(b0, dirs, bval).map_err(py_err)?;
        let inner = fit_wlls(&self.inner.dmri(&protocol), &protocol, None).map_err(py_err)?;
        Ok(TensorField { inner })
    }

    /// Tracks on `field` (default: the ground-truth tensors) within the phantom's 5TT map.
    /// Keyword arguments are tracker settings, e.g. `algorithm="fact", angle_deg=30`.
    #[pyo3(signature = (field = None, **config))]
    fn track(&self, py: Python<'_>, field: Option<&TensorField>, config: Option<&Bound<'_, PyDict>>) -> PyResult<Tractogram> {
        let field = field.map_or(&self.inner.tensors, |f| &f.inner);
        run_tracking(field, &self.inner.tt, config, py)
    }

    /// Writes tensors, 5TT, truth and caps as NIfTI plus `manifest.txt` into `directory`.
    fn save(&self, directory: PathBuf) -> PyResult<()> {
        std::fs::create_dir_all(&directory).map_err(|e| PyIOError::new_err(e.to_string()))?;
        let ph = &self.inner;
        save_volume(ph.tensors.grid(), directory.join("tensors.nii.gz")).map_err(py_err)?;
        save_volume(&ph.tt.to_grid(), directory.join("5tt.nii.gz")).map_err(py_err)?;
        save_volume(&ph.truth.to_grid(), directory.join("truth.nii.gz")).map_err(py_err)?;
        for (i, cap) in ph.end_caps.iter().enumerate() {
            save_volume(&cap.to_grid(), directory.join(format!("cap_{i}.nii.gz"))).map_err(py_err)?;
        }
        std::fs::write(directory.join("manifest.txt"), ph.spec.manifest()).map_err(|e| PyIOError::new_err(e.to_string()))
    }
}

/// Tracks on NIfTI tensor and 5TT volumes.
#[pyfunction]
#[pyo3(signature = (tensors, tt, **config))]
fn track(py: Python<'_>, tensors: PathBuf, tt: PathBuf, config: Option<&Bound<'_, PyDict>>) -> PyResult<Tractogram> {
    let grid = load_volume(tensors).map_err(py_err)?;
    let field = acttrack_core::dti::TensorField::from_grid(grid).map_err(py_err)?;
    let tt = acttrack_core::act::load_5tt(tt).map_err(py_err)?;
    run_tracking(&field, &tt, config, py)
}

/// The 724 unit directions of the sampling sphere, shape `(724, 3)`.
#[pyfunction]
fn sphere_directions(py: Python<'_>) -> Bound<'_, PyArray2<f64>> {
    points_to_array(build_sphere().directions()).into_pyarray(py)
}

/// Sharpened, normalized dODF of one tensor over the sphere directions.
#[pyfunction]
#[pyo3(signature = (tensor, k = 4.0, literal = false))]
fn propagation_pmf(py: Python<'_>, tensor: [f64; 6], k: f64, literal: bool) -> PyResult<Bound<'_, PyArray1<f64>>> {
    let convention = if literal { DodfConvention::Literal } else { DodfConvention::Inverse };
    let pmf = PropagationPmf::from_tensor(&SymTensor(tensor), &build_sphere(), k, convention).map_err(py_err)?;
    Ok(pmf.probs().to_vec().into_pyarray(py))
}

/// DSC, HD95, ASSD and VolDiff of two boolean masks on the same grid.
#[pyfunction]
#[pyo3(signature = (a, b, spacing = (1.0, 1.0, 1.0)))]
fn compare_masks<'py>(
    py: Python<'py>,
    a: PyReadonlyArrayDyn<'py, bool>,
    b: PyReadonlyArrayDyn<'py, bool>,
    spacing: (f64, f64, f64),
) -> PyResult<Bound<'py, PyDict>> {
    let h = [spacing.0, spacing.1, spacing.2];
    let c = MaskComparison::new(&mask_from_array(&a, h)?, &mask_from_array(&b, h)?).map_err(py_err)?;
    let d = PyDict::new(py);
    for (k, v) in c.fields() {
        d.set_item(k, v)?;
    }
    Ok(d)
}

/// Streamlines of a `.tck` file as `(n, 3)` arrays.
#[pyfunction]
fn read_tck(py: Python<'_>, path: PathBuf) -> PyResult<Vec<Bound<'_, PyArray2<f64>>>> {
    let tck = core_read_tck(path).map_err(py_err)?;
    Ok(tck.tracks.iter().map(|t| points_to_array(t).into_pyarray(py)).collect())
}

/// A NIfTI volume as an `[x, y, z(, c)]` array and its voxel spacing.
#[pyfunction]
fn load_nifti(py: Python<'_>, path: PathBuf) -> PyResult<(Bound<'_, PyArrayDyn<f64>>, [f64; 3])> {
    let grid = load_volume(path).map_err(py_err)?;
    Ok((grid_to_array(&grid).into_pyarray(py), grid.spacing()))
}

#[pymodule]
fn acttrack_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<TensorField>()?;
    m.add_class::<Tractogram>()?;
    m.add_class::<Phantom>()?;
    m.add_function(wrap_pyfunction!(track, m)?)?;
    m.add_function(wrap_pyfunction!(sphere_directions, m)?)?;
    m.add_function(wrap_pyfunction!(propagation_pmf, m)?)?;
    m.add_function(wrap_pyfunction!(compare_masks, m)?)?;
    m.add_function(wrap_pyfunction!(read_tck, m)?)?;
    m.add_function(wrap_pyfunction!(load_nifti, m)?)?;
    Ok(())
}
