//! Synthetic bundles with known geometry, tissue labels and diffusion signals.

mod geometry;
mod signal;

pub use signal::{shell_protocol, synth_signal};

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::act::{FiveTissueTypeMap, Tissue};
use crate::dti::{DiffusionProtocol, SymTensor, TensorField};
use crate::error::{Error, Result};
use crate::volume::{AffineTransform, BinaryMask, DataType, Vec3, VoxelGrid};
use geometry::{Centerline, Zone};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhantomKind {
    Straight,
    CurvedTorus,
    Crossing,
}

impl PhantomKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Straight => "straight",
            Self::CurvedTorus => "curved_torus",
            Self::Crossing => "crossing",
        }
    }
}

impl fmt::Display for PhantomKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PhantomKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "straight" => Ok(Self::Straight),
            "curved_torus" | "curved" => Ok(Self::CurvedTorus),
            "crossing" => Ok(Self::Crossing),
            other => Err(Error::Spec(format!("unknown phantom kind {other:?}"))),
        }
    }
}

/// Geometry and diffusion parameters of a synthetic phantom. Lengths in mm, diffusivities
/// in mm²/s, angles in degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSpec {
    pub kind: PhantomKind,
    pub dims: [usize; 3],
    pub voxel_mm: f64,
    pub bundle_radius_mm: f64,
    pub lambda_par: f64,
    pub lambda_perp: f64,
    /// Bundle length for straight and crossing kinds.
    pub length_mm: f64,
    /// Centerline radius for the curved kind.
    pub torus_radius_mm: f64,
    /// Angle subtended by the curved bundle.
    pub arc_deg: f64,
    pub crossing_deg: f64,
    /// Thickness of the CSF layer around bundle and caps.
    pub csf_rim_mm: f64,
    /// Rician noise level of synthesized signals, relative to the b=0 signal of 1.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl PhantomSpec {
    pub fn straight() -> Self {
        Self {
            kind: PhantomKind::Straight,
            dims: [64, 28, 28],
            voxel_mm: 1.0,
            bundle_radius_mm: 4.0,
            lambda_par: 1.5e-3,
            lambda_perp: 0.4e-3,
            length_mm: 40.0,
            torus_radius_mm: 20.0,
            arc_deg: 90.0,
            crossing_deg: 90.0,
            csf_rim_mm: 6.0,
            noise_sigma: 0.0,
            seed: 0,
        }
    }

    /// Quarter torus of radius 10 mm in a 1 mm grid, with low anisotropy (FA ≈ 0.38) and
    /// noisy signals (SNR 5 at b=0).
    pub fn curved() -> Self {
        Self {
            kind: PhantomKind::CurvedTorus,
            dims: [38, 38, 22],
            bundle_radius_mm: 3.0,
            lambda_par: 1.1e-3,
            lambda_perp: 0.5e-3,
            torus_radius_mm: 10.0,
            csf_rim_mm: 5.0,
            noise_sigma: 0.2,
            seed: 1,
            ..Self::straight()
        }
    }

    pub fn crossing() -> Self {
        Self {
            kind: PhantomKind::Crossing,
            dims: [60, 60, 24],
            bundle_radius_mm: 3.0,
            csf_rim_mm: 5.0,
            ..Self::straight()
        }
    }

    pub fn for_kind(kind: PhantomKind) -> Self {
        match kind {
            PhantomKind::Straight => Self::straight(),
            PhantomKind::CurvedTorus => Self::curved(),
            PhantomKind::Crossing => Self::crossing(),
        }
    }

    fn validate(&self) -> Result<()> {
        let positive = [
            ("voxel size", self.voxel_mm),
            ("bundle radius", self.bundle_radius_mm),
            ("perpendicular diffusivity", self.lambda_perp),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Spec(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.lambda_par > self.lambda_perp) {
            return Err(Error::Spec("parallel diffusivity must exceed the perpendicular one".into()));
        }
        if self.dims.contains(&0) {
            return Err(Error::Spec(format!("empty grid {:?}", self.dims)));
        }
        if !(self.csf_rim_mm >= 0.0) || !(self.noise_sigma >= 0.0) {
            return Err(Error::Spec("rim and noise must be non-negative".into()));
        }
        match self.kind {
            PhantomKind::Straight | PhantomKind::Crossing if !(self.length_mm > 0.0) => {
                Err(Error::Spec("bundle length must be positive".into()))
            }
            PhantomKind::CurvedTorus
                if !(self.torus_radius_mm > self.bundle_radius_mm) || !(self.arc_deg > 0.0 && self.arc_deg <= 180.0) =>
            {
                Err(Error::Spec(
                    "torus radius must exceed the bundle radius and the arc lie in (0, 180]".into(),
                ))
            }
            PhantomKind::Crossing if !(self.crossing_deg > 0.0 && self.crossing_deg <= 90.0) => {
                Err(Error::Spec("crossing angle must lie in (0, 90]".into()))
            }
            _ => Ok(()),
        }
    }

    /// `key=value` lines describing the spec.
    pub fn manifest(&self) -> String {
        format!(
            "kind={}\ndims={}x{}x{}\nvoxel_mm={}\nbundle_radius_mm={}\nlambda_par={}\nlambda_perp={}\n\
             length_mm={}\ntorus_radius_mm={}\narc_deg={}\ncrossing_deg={}\ncsf_rim_mm={}\n\
             noise_sigma={}\nseed={}\n",
            self.kind,
            self.dims[0],
            self.dims[1],
            self.dims[2],
            self.voxel_mm,
            self.bundle_radius_mm,
            self.lambda_par,
            self.lambda_perp,
            self.length_mm,
            self.torus_radius_mm,
            self.arc_deg,
            self.crossing_deg,
            self.csf_rim_mm,
            self.noise_sigma,
            self.seed
        )
    }

    /// Sets one manifest field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Spec(format!("invalid value {value:?} for {key}")))
        }
        match key {
            "kind" => self.kind = value.parse()?,
            "dims" => {
                let parts: Vec<&str> = value.split('x').collect();
                if parts.len() != 3 {
                    return Err(Error::Spec(format!("dims must look like NXxNYxNZ, got {value:?}")));
                }
                for (d, p) in self.dims.iter_mut().zip(parts) {
                    *d = num(key, p.trim())?;
                }
            }
            "voxel_mm" => self.voxel_mm = num(key, value)?,
            "bundle_radius_mm" => self.bundle_radius_mm = num(key, value)?,
            "lambda_par" => self.lambda_par = num(key, value)?,
            "lambda_perp" => self.lambda_perp = num(key, value)?,
            "length_mm" => self.length_mm = num(key, value)?,
            "torus_radius_mm" => self.torus_radius_mm = num(key, value)?,
            "arc_deg" => self.arc_deg = num(key, value)?,
            "crossing_deg" => self.crossing_deg = num(key, value)?,
            "csf_rim_mm" => self.csf_rim_mm = num(key, value)?,
            "noise_sigma" => self.noise_sigma = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            _ => return Err(Error::Spec(format!("unknown phantom field {key:?}"))),
        }
        Ok(())
    }

    /// Reads a manifest. A `kind` line, if present, must come first and resets the other
    /// fields to that kind's preset.
    pub fn from_manifest(text: &str) -> Result<Self> {
        let mut spec = Self::curved();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Spec(format!("line {}: expected key=value, got {line:?}", n + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if k == "kind" {
                spec = Self::for_kind(v.parse()?);
            } else {
                spec.set(k, v)?;
            }
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone)]
pub struct Phantom {
    pub spec: PhantomSpec,
    pub tensors: TensorField,
    pub tt: FiveTissueTypeMap,
    /// Bundle voxels.
    pub truth: BinaryMask,
    /// Cortical GM caps, two per bundle, in bundle order.
    pub end_caps: Vec<BinaryMask>,
}

impl Phantom {
    /// Noisy (per the spec) signals for `protocol` with a unit b=0 signal.
    pub fn dmri(&self, protocol: &DiffusionProtocol) -> VoxelGrid {
        let mut rng = ChaCha8Rng::seed_from_u64(self.spec.seed);
        synth_signal(&self.tensors, protocol, 1.0, self.spec.noise_sigma, &mut rng)
    }
}

/// Builds tensors, 5TT labels and masks for `spec`.
///
/// Inside the bundle the tensor is prolate along the centerline tangent; everywhere else
/// it is isotropic with the bundle's mean diffusivity. Bundle voxels are WM, a one-voxel
/// slab beyond each bundle end is cortical GM, a rim of `csf_rim_mm` around both is CSF
/// and the rest is background. Where crossing bundles overlap the first bundle's tensor
/// is used.
pub fn make_phantom(spec: &PhantomSpec) -> Result<Phantom> {
    spec.validate()?;
    let h = spec.voxel_mm;
    let affine = AffineTransform::from_spacing([h; 3], [0.0; 3])?;
    let center = Vec3::new(
        (spec.dims[0] - 1) as f64 * h / 2.0,
        (spec.dims[1] - 1) as f64 * h / 2.0,
        (spec.dims[2] - 1) as f64 * h / 2.0,
    );
    let lines: Vec<Centerline> = match spec.kind {
        PhantomKind::Straight => vec![Centerline::segment_through(center, Vec3::x(), spec.length_mm)],
        PhantomKind::Crossing => {
            let a = spec.crossing_deg.to_radians();
            vec![
                Centerline::segment_through(center, Vec3::x(), spec.length_mm),
                Centerline::segment_through(center, Vec3::new(a.cos(), a.sin(), 0.0), spec.length_mm),
            ]
        }
        PhantomKind::CurvedTorus => vec![Centerline::arc_centered(
            center,
            spec.torus_radius_mm,
            spec.arc_deg.to_radians(),
            spec.bundle_radius_mm + spec.csf_rim_mm,
            h + spec.csf_rim_mm,
        )],
    };

    // Everything labelled must keep a two-voxel margin from the grid faces.
    let reach = spec.bundle_radius_mm + spec.csf_rim_mm;
    let ext = h + spec.csf_rim_mm;
    let margin = 2.0 * h;
    for line in &lines {
        let (lo, hi) = line.bounding_box(reach, ext);
        for a in 0..3 {
            let top = (spec.dims[a] - 1) as f64 * h;
            if lo[a] < margin - 1e-9 || hi[a] > top - margin + 1e-9 {
                return Err(Error::Spec(format!(
                    "bundle with its caps and rim spans [{:.2}, {:.2}] mm on axis {a}, grid allows [{margin}, {:.2}]",
                    lo[a],
                    hi[a],
                    top - margin
                )));
            }
        }
    }

    let template = VoxelGrid::zeros(spec.dims, 1, affine.clone(), DataType::U8)?;
    let n = template.n_voxels();
    let mean_d = (spec.lambda_par + 2.0 * spec.lambda_perp) / 3.0;
    let mut labels = vec![Tissue::Background; n];
    let mut truth = vec![false; n];
    let mut caps = vec![vec![false; n]; 2 * lines.len()];
    let mut tensors = TensorField::from_fn(&template, |_, _| SymTensor::isotropic(mean_d));

    for (i, label) in labels.iter_mut().enumerate() {
        let [x, y, z] = template.voxel_coords(i);
        let p = template.voxel_center(x, y, z);
        let zones: Vec<Zone> = lines
            .iter()
            .map(|l| l.zone(&p, spec.bundle_radius_mm, h, spec.csf_rim_mm))
            .collect();
        if let Some(tangent) = zones.iter().find_map(|z| match z {
            Zone::Bundle(t) => Some(*t),
            _ => None,
        }) {
            *label = Tissue::WhiteMatter;
            truth[i] = true;
            tensors.set_tensor(i, SymTensor::prolate(&tangent, spec.lambda_par, spec.lambda_perp));
        } else if let Some((b, end)) = zones.iter().enumerate().find_map(|(b, z)| match z {
            Zone::Cap(end) => Some((b, *end)),
            _ => None,
        }) {
            *label = Tissue::CorticalGm;
            caps[2 * b + end][i] = true;
        } else if zones.iter().any(|z| matches!(z, Zone::Rim)) {
            *label = Tissue::Csf;
        }
    }

    let mask = |bits: Vec<bool>| BinaryMask::from_bits(spec.dims, affine.clone(), bits);
    Ok(Phantom {
        spec: spec.clone(),
        tensors,
        tt: FiveTissueTypeMap::new(spec.dims, affine.clone(), labels)?,
        truth: mask(truth)?,
        end_caps: caps.into_iter().map(mask).collect::<Result<_>>()?,
    })
}

/// Centerline radius at which successive steps of `step_mm` turn by `turn_deg`.
pub fn radius_for_turn(step_mm: f64, turn_deg: f64) -> f64 {
    step_mm / (2.0 * (turn_deg.to_radians() / 2.0).sin())
}
