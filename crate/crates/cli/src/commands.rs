use std::fs;
use std::path::{Path, PathBuf};

use acttrack_core::act::{judge_streamline, length_bounds, load_5tt, BrainVolume, RejectReason, Verdict};
use acttrack_core::dti::{derive_scalars, fit_wlls, DiffusionProtocol, TensorField};
use acttrack_core::metrics::{binarize_percentile, density_map, filter_by_rois, MaskComparison};
use acttrack_core::odf::{build_sphere, DodfConvention, PropagationPmf};
use acttrack_core::phantom::{make_phantom, shell_protocol, PhantomKind, PhantomSpec};
use acttrack_core::tck::{read_tck, write_tck};
use acttrack_core::tracker::{track_whole_brain, Algorithm};
use acttrack_core::volume::{load_volume, save_volume, BinaryMask, DataType, Vec3};
use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use serde_json::json;

use crate::run_config::RunConfig;
use crate::{
    BinarizeArgs, DensityArgs, FilterArgs, FitArgs, JudgeArgs, MetricsArgs, OdfArgs, PhantomArgs, RobustnessArgs,
    TrackArgs, TrackerFlags,
};

fn save(grid: &acttrack_core::volume::VoxelGrid, path: &Path) -> Result<()> {
    save_volume(grid, path).with_context(|| format!("writing {}", path.display()))
}

fn load_mask(path: &Path) -> Result<BinaryMask> {
    let grid = load_volume(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(BinaryMask::from_grid(&grid))
}

fn load_tensors(path: &Path) -> Result<TensorField> {
    let grid = load_volume(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(TensorField::from_grid(grid)?)
}

fn percent_to_fraction(pct: f64) -> Result<f64> {
    if !(pct > 0.0 && pct <= 100.0) {
        bail!("--pct must lie in (0, 100], got {pct}");
    }
    Ok(pct / 100.0)
}

pub fn phantom(args: PhantomArgs) -> Result<()> {
    let mut spec = match &args.spec {
        Some(path) => PhantomSpec::from_manifest(
            &fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?,
        )?,
        None => PhantomSpec::for_kind(args.kind.parse::<PhantomKind>()?),
    };
    for o in &args.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| anyhow!("--set expects KEY=VALUE, got {o:?}"))?;
        spec.set(k.trim(), v.trim())?;
    }
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let protocol = shell_protocol(args.b0, args.dirs, args.bval)?;
    let phantom = make_phantom(&spec)?;
    let dmri = phantom.dmri(&protocol);

    let out = &args.out;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    save(phantom.tensors.grid(), &out.join("tensors.nii.gz"))?;
    save(&phantom.tt.to_grid(), &out.join("5tt.nii.gz"))?;
    save(&phantom.truth.to_grid(), &out.join("truth.nii.gz"))?;
    for (i, cap) in phantom.end_caps.iter().enumerate() {
        save(&cap.to_grid(), &out.join(format!("cap_{i}.nii.gz")))?;
    }
    save(&dmri, &out.join("dwi.nii.gz"))?;
    protocol.write_files(out.join("dwi.bval"), out.join("dwi.bvec"))?;
    fs::write(out.join("manifest.txt"), spec.manifest())?;
    println!(
        "kind={} dims={:?} truth_voxels={} caps={}",
        spec.kind,
        spec.dims,
        phantom.truth.count(),
        phantom.end_caps.len()
    );
    Ok(())
}

pub fn fit(args: FitArgs) -> Result<()> {
    let dwi = load_volume(&args.dwi).with_context(|| format!("reading {}", args.dwi.display()))?;
    let protocol = DiffusionProtocol::from_files(&args.bval, &args.bvec)?;
    let mask = args
        .mask
        .as_ref()
        .map(|p| load_volume(p).with_context(|| format!("reading {}", p.display())))
        .transpose()?;
    let field = fit_wlls(&dwi, &protocol, mask.as_ref())?;
    let maps = derive_scalars(&field);
    let r = *field.report();
    if r.nonfinite > 0 {
        log::warn!("{} voxels held non-finite samples and were left unfitted", r.nonfinite);
    }

    let out = &args.out;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    save(field.grid(), &out.join("tensors.nii.gz"))?;
    save(&maps.fa, &out.join("fa.nii.gz"))?;
    save(&maps.md, &out.join("md.nii.gz"))?;
    save(&maps.v1, &out.join("v1.nii.gz"))?;
    save(&maps.dirmap, &out.join("dirmap.nii.gz"))?;
    println!(
        "fitted={} outside_mask={} nonpositive_s0={} nonfinite={} ols_fallbacks={} clamped={}",
        r.fitted, r.outside_mask, r.nonpositive_s0, r.nonfinite, r.ols_fallbacks, maps.clamped
    );
    Ok(())
}

pub fn odf(args: OdfArgs) -> Result<()> {
    let field = load_tensors(&args.tensors)?;
    let sphere = build_sphere();
    let convention = if args.dodf_literal {
        DodfConvention::Literal
    } else {
        DodfConvention::Inverse
    };

    if let Some(v) = &args.voxel {
        let grid = field.grid();
        let dims = grid.dims();
        if v.len() != 3 {
            bail!("--voxel expects x,y,z");
        }
        if (0..3).any(|i| v[i] >= dims[i]) {
            bail!("voxel {v:?} lies outside the grid {dims:?}");
        }
        let idx = grid.voxel_index(v[0], v[1], v[2]);
        if !field.is_fitted(idx) {
            bail!("voxel {v:?} holds no tensor");
        }
        let pmf = PropagationPmf::from_tensor(&field.tensor(idx), &sphere, args.k, convention)?;
        for (i, (u, p)) in sphere.directions().iter().zip(pmf.probs()).enumerate() {
            println!("{i} {} {} {} {p}", u.x, u.y, u.z);
        }
        return Ok(());
    }

    let out = args.out.as_ref().expect("clap requires --out without --voxel");
    let mask = args.mask.as_deref().map(load_mask).transpose()?;
    if let Some(m) = &mask {
        if m.dims() != field.grid().dims() {
            bail!("mask grid {:?} differs from tensor grid {:?}", m.dims(), field.grid().dims());
        }
    }
    let n = sphere.len();
    let mut grid = field.grid().like(n, DataType::F32);
    let failed: usize = grid
        .data_mut()
        .par_chunks_mut(n)
        .enumerate()
        .map(|(idx, slot)| {
            if !field.is_fitted(idx) || mask.as_ref().is_some_and(|m| !m.get_index(idx)) {
                return 0;
            }
            match PropagationPmf::from_tensor(&field.tensor(idx), &sphere, args.k, convention) {
                Ok(pmf) => {
                    slot.copy_from_slice(pmf.probs());
                    0
                }
                Err(_) => 1,
            }
        })
        .sum();
    if failed > 0 {
        log::warn!("{failed} voxels had tensors without a dODF and were left at zero");
    }
    save(&grid, out)
}

/// Starting config for `track` and `robustness`: the config file if any, then the flags.
fn resolve(config: Option<&Path>, flags: &TrackerFlags) -> Result<RunConfig> {
    let algorithm: Option<Algorithm> = flags.algorithm.as_deref().map(str::parse).transpose()?;
    let fallback = algorithm.unwrap_or(Algorithm::ActProb);
    let mut cfg = match config {
        Some(path) => RunConfig::parse(
            &fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?,
            fallback,
        )?,
        None => RunConfig::new(fallback),
    };
    let t = &mut cfg.tracker;
    if let Some(a) = algorithm {
        t.algorithm = a;
    }
    if let Some(v) = flags.step {
        t.step_mm = v;
    }
    if let Some(v) = flags.angle {
        t.angle_deg = v;
    }
    if let Some(v) = flags.k {
        t.k = v;
    }
    if let Some(v) = flags.count {
        t.target_count = v;
    }
    if let Some(v) = flags.seed {
        t.seed = v;
    }
    if let Some(v) = flags.trials {
        t.trials = v;
    }
    if let Some(v) = flags.fa_stop {
        t.fact_fa_stop = v;
    }
    if flags.fact_nearest {
        t.fact_nearest = true;
    }
    if flags.dodf_literal {
        t.dodf = DodfConvention::Literal;
    }
    if flags.parenchyma_volume {
        t.brain_volume = BrainVolume::ParenchymaOnly;
    }
    t.validate()?;
    Ok(cfg)
}

fn cfg_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".cfg");
    PathBuf::from(s)
}

pub fn track(args: TrackArgs) -> Result<()> {
    let mut cfg = resolve(args.config.as_deref(), &args.tracker)?;
    if args.tensors.is_some() {
        cfg.tensors = args.tensors;
    }
    if args.tt.is_some() {
        cfg.tt = args.tt;
    }
    if args.out.is_some() {
        cfg.output = args.out;
    }
    let tensors = cfg.tensors.clone().ok_or_else(|| anyhow!("no tensor volume given (--tensors)"))?;
    let tt_path = cfg.tt.clone().ok_or_else(|| anyhow!("no 5TT volume given (--tt)"))?;
    let out = cfg.output.clone().ok_or_else(|| anyhow!("no output file given (--out)"))?;

    let field = load_tensors(&tensors)?;
    let tt = load_5tt(&tt_path).with_context(|| format!("reading {}", tt_path.display()))?;
    let tractogram = track_whole_brain(&field, &tt, &cfg.tracker)?;
    write_tck(&out, &tractogram.points(), &cfg.tracker.to_key_values())
        .with_context(|| format!("writing {}", out.display()))?;
    fs::write(cfg_path(&out), cfg.to_text())?;
    println!("{}", tractogram.stats);
    Ok(())
}

pub fn judge(args: JudgeArgs) -> Result<()> {
    let tck = read_tck(&args.tracks).with_context(|| format!("reading {}", args.tracks.display()))?;
    let tt = load_5tt(&args.tt).with_context(|| format!("reading {}", args.tt.display()))?;
    let which = if args.parenchyma_volume {
        BrainVolume::ParenchymaOnly
    } else {
        BrainVolume::AllTissue
    };
    let bounds = length_bounds(tt.brain_volume_with(which))?;
    let mut counts = [0usize; RejectReason::ALL.len()];
    let mut kept = Vec::new();
    for t in &tck.tracks {
        match judge_streamline(t, &tt, &bounds) {
            Verdict::Accept => kept.push(t.as_slice()),
            Verdict::Reject(r) => counts[r as usize] += 1,
        }
    }
    print!("total={} accepted={}", tck.tracks.len(), kept.len());
    for r in RejectReason::ALL {
        print!(" {}={}", r, counts[r as usize]);
    }
    println!();
    if let Some(out) = &args.out {
        write_tck(out, &kept, &tck.properties).with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(())
}

pub fn density(args: DensityArgs) -> Result<()> {
    let tck = read_tck(&args.tracks).with_context(|| format!("reading {}", args.tracks.display()))?;
    let reference = load_volume(&args.reference).with_context(|| format!("reading {}", args.reference.display()))?;
    let map = density_map(&tck.tracks, &reference);
    save(&map, &args.out)
}

pub fn binarize(args: BinarizeArgs) -> Result<()> {
    let density = load_volume(&args.density).with_context(|| format!("reading {}", args.density.display()))?;
    let mask = binarize_percentile(&density, percent_to_fraction(args.pct)?)?;
    save(&mask.to_grid(), &args.out)?;
    println!("voxels={}", mask.count());
    Ok(())
}

fn comparison_json(c: &MaskComparison) -> serde_json::Value {
    json!({ "dsc": c.dsc, "hd95": c.hd95, "assd": c.assd, "voldiff": c.voldiff })
}

pub fn metrics(args: MetricsArgs) -> Result<()> {
    let a = load_mask(&args.a)?;
    let b = load_mask(&args.b)?;
    let c = MaskComparison::new(&a, &b)?;
    if args.json {
        println!("{}", comparison_json(&c));
    } else {
        for (k, v) in c.fields() {
            println!("{k}={v}");
        }
    }
    Ok(())
}

pub fn filter(args: FilterArgs) -> Result<()> {
    let tck = read_tck(&args.tracks).with_context(|| format!("reading {}", args.tracks.display()))?;
    let include = args.include.iter().map(|p| load_mask(p)).collect::<Result<Vec<_>>>()?;
    let exclude = args.exclude.iter().map(|p| load_mask(p)).collect::<Result<Vec<_>>>()?;
    let kept = filter_by_rois(&tck.tracks, &include, &exclude);
    write_tck(&args.out, &kept, &tck.properties).with_context(|| format!("writing {}", args.out.display()))?;
    println!("total={} kept={}", tck.tracks.len(), kept.len());
    Ok(())
}

pub fn robustness(args: RobustnessArgs) -> Result<()> {
    let base = resolve(None, &args.tracker)?.tracker;
    let angles = if args.angles.is_empty() {
        match base.algorithm {
            Algorithm::ActProb => vec![15.0, 20.0, 25.0],
            Algorithm::Fact => vec![25.0, 30.0, 35.0],
        }
    } else {
        args.angles.clone()
    };
    if angles.len() < 2 {
        bail!("at least two angles are needed for pairwise comparison");
    }
    let fraction = percent_to_fraction(args.pct)?;
    let field = load_tensors(&args.tensors)?;
    let tt = load_5tt(&args.tt).with_context(|| format!("reading {}", args.tt.display()))?;
    let include = args.include.iter().map(|p| load_mask(p)).collect::<Result<Vec<_>>>()?;
    if let Some(dir) = &args.out_dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }

    let mut masks = Vec::with_capacity(angles.len());
    for &angle in &angles {
        let mut cfg = base.clone();
        cfg.angle_deg = angle;
        let tractogram = track_whole_brain(&field, &tt, &cfg)?;
        let tracks: Vec<&[Vec3]> = filter_by_rois(&tractogram.points(), &include, &[]);
        log::info!("angle {angle}: {} of {} streamlines kept", tracks.len(), tractogram.len());
        let mask = binarize_percentile(&density_map(&tracks, field.grid()), fraction)
            .with_context(|| format!("angle {angle}"))?;
        if let Some(dir) = &args.out_dir {
            write_tck(dir.join(format!("tracks_{angle}.tck")), &tracks, &cfg.to_key_values())?;
            save(&mask.to_grid(), &dir.join(format!("mask_{angle}.nii.gz")))?;
        }
        masks.push(mask);
    }

    let mut pairs = Vec::new();
    for i in 0..angles.len() {
        for j in i + 1..angles.len() {
            pairs.push((angles[i], angles[j], MaskComparison::new(&masks[i], &masks[j])?));
        }
    }
    let all: Vec<MaskComparison> = pairs.iter().map(|p| p.2).collect();
    let mean = MaskComparison::mean(&all).expect("at least one pair");

    if args.json {
        let pairs: Vec<_> = pairs
            .iter()
            .map(|(a, b, c)| {
                let mut v = comparison_json(c);
                v["angles"] = json!([a, b]);
                v
            })
            .collect();
        let report = json!({
            "algorithm": base.algorithm.as_str(),
            "angles": angles,
            "pairs": pairs,
            "mean": comparison_json(&mean),
        });
        println!("{report}");
    } else {
        let line = |c: &MaskComparison| {
            c.fields()
                .iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        for (a, b, c) in &pairs {
            println!("pair={a},{b} {}", line(c));
        }
        println!("mean {}", line(&mean));
    }
    Ok(())
}
