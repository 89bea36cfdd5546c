use nalgebra::{DMatrix, SMatrix, SVector};
use rayon::prelude::*;

use super::{DiffusionProtocol, SymTensor};
use crate::error::{Error, Result};
use crate::volume::{BinaryMask, DataType, Vec3, VoxelGrid};

type Mat7 = SMatrix<f64, 7, 7>;
type Vec7 = SVector<f64, 7>;

/// Per-voxel diffusion tensors on a 6-channel grid plus the set of voxels that were fitted.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField {
    tensors: VoxelGrid,
    fitted: Vec<bool>,
    report: FitReport,
}

/// What happened to each voxel during fitting.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FitReport {
    pub fitted: usize,
    pub outside_mask: usize,
    /// Voxels whose mean unweighted signal was not positive.
    pub nonpositive_s0: usize,
    /// Voxels with a NaN or infinite sample; these are the fit warnings.
    pub nonfinite: usize,
    /// Voxels where the weighted system was singular and the OLS estimate was kept.
    pub ols_fallbacks: usize,
}

impl TensorField {
    /// Wraps a 6-channel grid (Dxx, Dxy, Dxz, Dyy, Dyz, Dzz). Voxels with an all-zero tensor
    /// are treated as not fitted.
    pub fn from_grid(tensors: VoxelGrid) -> Result<Self> {
        if tensors.channels() != 6 {
            return Err(Error::Format(format!(
                "tensor volume needs 6 channels, found {}",
                tensors.channels()
            )));
        }
        let fitted: Vec<bool> = (0..tensors.n_voxels())
            .map(|i| tensors.voxel(i).iter().any(|&v| v != 0.0))
            .collect();
        let report = FitReport {
            fitted: fitted.iter().filter(|&&f| f).count(),
            ..Default::default()
        };
        Ok(Self {
            tensors,
            fitted,
            report,
        })
    }

    /// Builds a field from a per-voxel tensor function; every voxel counts as fitted.
    pub fn from_fn(
        template: &VoxelGrid,
        mut f: impl FnMut([usize; 3], Vec3) -> SymTensor,
    ) -> Self {
        let mut tensors = template.like(6, DataType::F32);
        for i in 0..tensors.n_voxels() {
            let [x, y, z] = tensors.voxel_coords(i);
            let t = f([x, y, z], tensors.voxel_center(x, y, z));
            tensors.voxel_mut(i).copy_from_slice(&t.0);
        }
        let n = tensors.n_voxels();
        Self {
            tensors,
            fitted: vec![true; n],
            report: FitReport {
                fitted: n,
                ..Default::default()
            },
        }
    }

    pub fn grid(&self) -> &VoxelGrid {
        &self.tensors
    }

    pub fn into_grid(self) -> VoxelGrid {
        self.tensors
    }

    pub fn report(&self) -> &FitReport {
        &self.report
    }

    pub fn is_fitted(&self, voxel: usize) -> bool {
        self.fitted[voxel]
    }

    pub fn fitted_mask(&self) -> BinaryMask {
        BinaryMask::from_bits(
            self.tensors.dims(),
            self.tensors.affine().clone(),
            self.fitted.clone(),
        )
        .expect("same dims")
    }

    #[inline]
    pub fn tensor(&self, voxel: usize) -> SymTensor {
        SymTensor::from_slice(self.tensors.voxel(voxel))
    }

    pub fn set_tensor(&mut self, voxel: usize, t: SymTensor) {
        self.tensors.voxel_mut(voxel).copy_from_slice(&t.0);
        self.fitted[voxel] = true;
    }

    /// Component-wise trilinear interpolation; `None` outside the grid.
    #[inline]
    pub fn sample(&self, world: &Vec3) -> Option<SymTensor> {
        let mut out = [0.0; 6];
        self.tensors
            .sample_trilinear_into(world, &mut out)
            .then_some(SymTensor(out))
    }

    /// Tensor of the voxel nearest to `world`.
    pub fn sample_nearest(&self, world: &Vec3) -> Option<SymTensor> {
        let [x, y, z] = self.tensors.nearest_voxel(world)?;
        Some(self.tensor(self.tensors.voxel_index(x, y, z)))
    }
}

/// Log-linear design for the parameters (ln S0, Dxx, Dxy, Dxz, Dyy, Dyz, Dzz), with
/// b-values scaled by `b_scale` so that the columns are of comparable size.
fn design(protocol: &DiffusionProtocol, b_scale: f64) -> Vec<[f64; 7]> {
    protocol
        .bvals()
        .iter()
        .zip(protocol.bvecs())
        .map(|(&b, g)| {
            let b = b / b_scale;
            [
                1.0,
                -b * g.x * g.x,
                -2.0 * b * g.x * g.y,
                -2.0 * b * g.x * g.z,
                -b * g.y * g.y,
                -2.0 * b * g.y * g.z,
                -b * g.z * g.z,
            ]
        })
        .collect()
}

/// Weighted linear least-squares tensor fit.
///
/// Each voxel is solved in the log domain first by ordinary least squares, then once more
/// with weights equal to the squared signals predicted by that first pass. Voxels with a
/// non-positive mean b=0 signal or any non-finite sample are left unfitted (zero tensor).
pub fn fit_wlls(
    dmri: &VoxelGrid,
    protocol: &DiffusionProtocol,
    mask: Option<&VoxelGrid>,
) -> Result<TensorField> {
    let n = protocol.len();
    if dmri.channels() != n {
        return Err(Error::Protocol(format!(
            "dMRI has {} volumes but the protocol lists {n}",
            dmri.channels()
        )));
    }
    if let Some(m) = mask {
        if m.dims() != dmri.dims() {
            return Err(Error::GridMismatch("fit mask dims differ from dMRI".into()));
        }
    }

    let b_scale = protocol.bvals().iter().cloned().fold(0.0, f64::max).max(1.0);
    let rows = design(protocol, b_scale);
    let x = DMatrix::from_fn(n, 7, |r, c| rows[r][c]);
    let xtx = x.transpose() * &x;
    let sv = xtx.clone().svd(false, false).singular_values;
    let (smax, smin) = (sv.max(), sv.min());
    if !(smin > 1e-10 * smax) {
        return Err(Error::Protocol(
            "design matrix is rank deficient for a tensor fit".into(),
        ));
    }
    let pinv = xtx
        .try_inverse()
        .ok_or_else(|| Error::Protocol("design matrix is singular".into()))?
        * x.transpose();
    let pinv: Vec<[f64; 7]> = (0..n)
        .map(|r| std::array::from_fn(|c| pinv[(c, r)]))
        .collect();
    let b0_idx: Vec<usize> = (0..n).filter(|&i| protocol.is_b0(i)).collect();

    let nv = dmri.n_voxels();
    let results: Vec<VoxelFit> = (0..nv)
        .into_par_iter()
        .map_init(
            || vec![0.0; n],
            |logs, v| {
                if let Some(m) = mask {
                    if m.voxel(v)[0] == 0.0 {
                        return VoxelFit::OutsideMask;
                    }
                }
                fit_voxel(dmri.voxel(v), &rows, &pinv, &b0_idx, logs)
            },
        )
        .collect();

    let mut tensors = dmri.like(6, DataType::F32);
    let mut fitted = vec![false; nv];
    let mut report = FitReport::default();
    for (v, r) in results.into_iter().enumerate() {
        match r {
            VoxelFit::Fitted(p, fallback) => {
                let out = tensors.voxel_mut(v);
                for k in 0..6 {
                    out[k] = p[k + 1] / b_scale;
                }
                fitted[v] = true;
                report.fitted += 1;
                report.ols_fallbacks += fallback as usize;
            }
            VoxelFit::OutsideMask => report.outside_mask += 1,
            VoxelFit::NonPositiveS0 => report.nonpositive_s0 += 1,
            VoxelFit::NonFinite => report.nonfinite += 1,
        }
    }
    if report.nonfinite > 0 {
        log::warn!("{} voxels with non-finite signal were not fitted", report.nonfinite);
    }
    Ok(TensorField {
        tensors,
        fitted,
        report,
    })
}

enum VoxelFit {
    Fitted([f64; 7], bool),
    OutsideMask,
    NonPositiveS0,
    NonFinite,
}

fn fit_voxel(
    signal: &[f64],
    rows: &[[f64; 7]],
    pinv: &[[f64; 7]],
    b0_idx: &[usize],
    logs: &mut [f64],
) -> VoxelFit {
    if signal.iter().any(|s| !s.is_finite()) {
        return VoxelFit::NonFinite;
    }
    let s0 = b0_idx.iter().map(|&i| signal[i]).sum::<f64>() / b0_idx.len() as f64;
    if !(s0 > 0.0) {
        return VoxelFit::NonPositiveS0;
    }
    // Zero or negative samples would send the log to -inf.
    let floor = s0 * 1e-6;
    for (l, &s) in logs.iter_mut().zip(signal) {
        *l = s.max(floor).ln();
    }

    let mut ols = [0.0; 7];
    for (row, &y) in pinv.iter().zip(logs.iter()) {
        for c in 0..7 {
            ols[c] += row[c] * y;
        }
    }

    let predicted: Vec<f64> = rows
        .iter()
        .map(|r| r.iter().zip(&ols).map(|(a, b)| a * b).sum::<f64>())
        .collect();
    let peak = predicted.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut a = Mat7::zeros();
    let mut rhs = Vec7::zeros();
    for ((row, &y), &pred) in rows.iter().zip(logs.iter()).zip(&predicted) {
        // Squared predicted signal, rescaled by the largest one (the solution is scale free).
        let w = (2.0 * (pred - peak)).exp();
        let xr = Vec7::from_row_slice(row);
        a += w * xr * xr.transpose();
        rhs += w * y * xr;
    }
    match a.cholesky() {
        Some(ch) => {
            let p = ch.solve(&rhs);
            if p.iter().all(|v| v.is_finite()) {
                VoxelFit::Fitted(std::array::from_fn(|i| p[i]), false)
            } else {
                VoxelFit::Fitted(ols, true)
            }
        }
        None => VoxelFit::Fitted(ols, true),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::AffineTransform;

    fn directions(n: usize) -> Vec<Vec3> {
        // Golden-spiral half sphere.
        let ga = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        (0..n)
            .map(|i| {
                let z = 1.0 - (i as f64 + 0.5) / n as f64;
                let r = (1.0 - z * z).sqrt();
                let phi = i as f64 * ga;
                Vec3::new(r * phi.cos(), r * phi.sin(), z)
            })
            .collect()
    }

    fn one_voxel(signal: Vec<f64>) -> VoxelGrid {
        let n = signal.len();
        VoxelGrid::from_data([1, 1, 1], n, AffineTransform::identity(), DataType::F64, signal)
            .unwrap()
    }

    fn forward(t: &SymTensor, p: &DiffusionProtocol, s0: f64) -> Vec<f64> {
        p.bvals()
            .iter()
            .zip(p.bvecs())
            .map(|(b, g)| s0 * (-b * t.quad_form(g)).exp())
            .collect()
    }

    fn rel_err(a: &SymTensor, b: &SymTensor) -> f64 {
        (a.to_matrix() - b.to_matrix()).norm() / b.to_matrix().norm()
    }

    #[test]
    fn isotropic_exact() {
        let p = DiffusionProtocol::single_shell(2, 500.0, &directions(32)).unwrap();
        let sig: Vec<f64> = (0..p.len())
            .map(|i| if p.is_b0(i) { 1000.0 } else { 1000.0 * (-500.0f64 * 1e-3).exp() })
            .collect();
        let f = fit_wlls(&one_voxel(sig), &p, None).unwrap();
        let got = f.tensor(0);
        assert!(rel_err(&got, &SymTensor::isotropic(1e-3)) < 1e-8, "{got:?}");
    }

    #[test]
    fn anisotropic_exact() {
        let p = DiffusionProtocol::single_shell(1, 500.0, &directions(12)).unwrap();
        let t = SymTensor::diag(1.5e-3, 0.3e-3, 0.3e-3);
        let f = fit_wlls(&one_voxel(forward(&t, &p, 800.0)), &p, None).unwrap();
        assert!(rel_err(&f.tensor(0), &t) < 1e-6);
        assert_eq!(f.report().fitted, 1);
    }

    #[test]
    fn zero_signal_is_masked() {
        let p = DiffusionProtocol::single_shell(1, 500.0, &directions(12)).unwrap();
        let f = fit_wlls(&one_voxel(vec![0.0; p.len()]), &p, None).unwrap();
        assert!(!f.is_fitted(0));
        assert!(f.tensor(0).is_zero());
        assert_eq!(f.report().nonpositive_s0, 1);
    }

    #[test]
    fn nonfinite_is_counted() {
        let p = DiffusionProtocol::single_shell(1, 500.0, &directions(12)).unwrap();
        let mut s = forward(&SymTensor::isotropic(1e-3), &p, 100.0);
        s[3] = f64::NAN;
        let f = fit_wlls(&one_voxel(s), &p, None).unwrap();
        assert!(!f.is_fitted(0));
        assert_eq!(f.report().nonfinite, 1);
    }

    #[test]
    fn channel_count_mismatch() {
        let p = DiffusionProtocol::single_shell(1, 500.0, &directions(12)).unwrap();
        assert!(matches!(
            fit_wlls(&one_voxel(vec![1.0; 5]), &p, None),
            Err(Error::Protocol(_))
        ));
    }

    #[test]
    fn rank_deficient_protocol() {
        // Six distinct axes that all lie in the xy plane leave Dzz unidentifiable.
        let dirs: Vec<Vec3> = (0..6)
            .map(|i| {
                let a = i as f64 * std::f64::consts::PI / 6.0;
                Vec3::new(a.cos(), a.sin(), 0.0)
            })
            .collect();
        let p = DiffusionProtocol::single_shell(1, 500.0, &dirs).unwrap();
        assert!(matches!(
            fit_wlls(&one_voxel(vec![1.0; 7]), &p, None),
            Err(Error::Protocol(_))
        ));
    }

    #[test]
    fn mask_skips_voxels() {
        let p = DiffusionProtocol::single_shell(1, 500.0, &directions(12)).unwrap();
        let s = forward(&SymTensor::isotropic(1e-3), &p, 100.0);
        let mut data = s.clone();
        data.extend(&s);
        let g = VoxelGrid::from_data([2, 1, 1], p.len(), AffineTransform::identity(), DataType::F64, data)
            .unwrap();
        let m = VoxelGrid::from_data([2, 1, 1], 1, AffineTransform::identity(), DataType::U8, vec![1.0, 0.0])
            .unwrap();
        let f = fit_wlls(&g, &p, Some(&m)).unwrap();
        assert!(f.is_fitted(0) && !f.is_fitted(1));
        assert_eq!(f.report().outside_mask, 1);
    }

    #[test]
    fn noisy_fit_close() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let p = DiffusionProtocol::single_shell(2, 500.0, &directions(30)).unwrap();
        let t = SymTensor::prolate(&Vec3::new(1.0, 1.0, 0.0), 1.7e-3, 0.4e-3);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let noise = Normal::new(0.0, 2.0).unwrap();
        let s: Vec<f64> = forward(&t, &p, 1000.0)
            .into_iter()
            .map(|v| v + noise.sample(&mut rng))
            .collect();
        let f = fit_wlls(&one_voxel(s), &p, None).unwrap();
        assert!(rel_err(&f.tensor(0), &t) < 0.05);
    }
}
