mod commands;
mod run_config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "acttrack", version, about = "Anatomically constrained tensor tractography")]
struct Cli {
    /// Worker threads; defaults to the number of cores. Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// More log output (repeat for more).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic phantom: tensors, 5TT labels, truth mask, end caps and dMRI.
    Phantom(PhantomArgs),
    /// Fit tensors to dMRI and derive FA, MD, V1 and the direction map.
    Fit(FitArgs),
    /// Dump propagation PMFs of a tensor volume.
    Odf(OdfArgs),
    /// Whole-brain tracking to a TCK file.
    Track(TrackArgs),
    /// Re-judge the streamlines of a TCK file against a 5TT map.
    Judge(JudgeArgs),
    /// Streamline density map.
    Density(DensityArgs),
    /// Binarize a density map at a percentile of its non-zero voxels.
    Binarize(BinarizeArgs),
    /// DSC, HD95, ASSD and VolDiff between two masks.
    Metrics(MetricsArgs),
    /// Keep streamlines that visit every include ROI and no exclude ROI.
    Filter(FilterArgs),
    /// Track across a set of angle thresholds and compare the binarized tracts pairwise.
    Robustness(RobustnessArgs),
}

#[derive(Args)]
pub struct PhantomArgs {
    /// straight, curved or crossing.
    #[arg(long, default_value = "curved")]
    pub kind: String,
    /// Manifest file to start from instead of the preset.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Override a manifest field, e.g. `--set noise_sigma=0.05`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 2)]
    pub b0: usize,
    #[arg(long, default_value_t = 32)]
    pub dirs: usize,
    #[arg(long, default_value_t = 500.0)]
    pub bval: f64,
    /// Output directory.
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct FitArgs {
    #[arg(long)]
    pub dwi: PathBuf,
    #[arg(long)]
    pub bval: PathBuf,
    #[arg(long)]
    pub bvec: PathBuf,
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Output directory.
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct OdfArgs {
    #[arg(long)]
    pub tensors: PathBuf,
    #[arg(long, default_value_t = acttrack_core::odf::DEFAULT_SHARPENING)]
    pub k: f64,
    /// Evaluate uᵀDu instead of uᵀD⁻¹u.
    #[arg(long)]
    pub dodf_literal: bool,
    /// Print the PMF of one voxel, given as x,y,z.
    #[arg(long, value_delimiter = ',', conflicts_with = "out")]
    pub voxel: Option<Vec<usize>>,
    /// Write a 724-channel PMF volume.
    #[arg(long, short, required_unless_present = "voxel")]
    pub out: Option<PathBuf>,
    /// Only fill voxels inside this mask.
    #[arg(long)]
    pub mask: Option<PathBuf>,
}

#[derive(Args)]
pub struct TrackArgs {
    #[arg(long)]
    pub tensors: Option<PathBuf>,
    /// 5TT label volume.
    #[arg(long)]
    pub tt: Option<PathBuf>,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// key=value file, e.g. the `.cfg` written by an earlier run. Flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub tracker: TrackerFlags,
}

#[derive(Args, Default)]
pub struct TrackerFlags {
    /// act_prob or fact.
    #[arg(long)]
    pub algorithm: Option<String>,
    /// Step size in mm.
    #[arg(long)]
    pub step: Option<f64>,
    /// Maximum turning angle per step, in degrees.
    #[arg(long)]
    pub angle: Option<f64>,
    /// dODF sharpening exponent.
    #[arg(long)]
    pub k: Option<f64>,
    /// Streamlines to keep.
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Candidate arcs per probabilistic step.
    #[arg(long)]
    pub trials: Option<usize>,
    /// FACT stops below this FA.
    #[arg(long)]
    pub fa_stop: Option<f64>,
    /// FACT uses the nearest voxel's tensor instead of interpolating.
    #[arg(long)]
    pub fact_nearest: bool,
    /// Evaluate uᵀDu instead of uᵀD⁻¹u.
    #[arg(long)]
    pub dodf_literal: bool,
    /// Count only GM and WM towards the brain volume for length bounds.
    #[arg(long)]
    pub parenchyma_volume: bool,
}

#[derive(Args)]
pub struct JudgeArgs {
    #[arg(long)]
    pub tracks: PathBuf,
    #[arg(long)]
    pub tt: PathBuf,
    #[arg(long)]
    pub parenchyma_volume: bool,
    /// Write the accepted streamlines here.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct DensityArgs {
    #[arg(long)]
    pub tracks: PathBuf,
    /// Volume whose grid the map is drawn on.
    #[arg(long)]
    pub reference: PathBuf,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct BinarizeArgs {
    #[arg(long)]
    pub density: PathBuf,
    /// Percentile of the non-zero densities, in percent.
    #[arg(long, default_value_t = 1.0)]
    pub pct: f64,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct MetricsArgs {
    pub a: PathBuf,
    pub b: PathBuf,
    /// Print one JSON object instead of key=value lines.
    #[arg(long)]
    pub json: bool,
}

#[derive(Args)]
pub struct FilterArgs {
    #[arg(long)]
    pub tracks: PathBuf,
    #[arg(long)]
    pub include: Vec<PathBuf>,
    #[arg(long)]
    pub exclude: Vec<PathBuf>,
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct RobustnessArgs {
    #[arg(long)]
    pub tensors: PathBuf,
    #[arg(long)]
    pub tt: PathBuf,
    /// Angle thresholds; defaults to 15,20,25 for act_prob and 25,30,35 for fact.
    #[arg(long, value_delimiter = ',')]
    pub angles: Vec<f64>,
    /// Only streamlines visiting every include ROI enter the density maps.
    #[arg(long)]
    pub include: Vec<PathBuf>,
    /// Percentile for binarization, in percent.
    #[arg(long, default_value_t = 1.0)]
    pub pct: f64,
    /// Write each run's TCK and mask here.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub json: bool,
    #[command(flatten)]
    pub tracker: TrackerFlags,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();

    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }

    let result = match cli.command {
        Command::Phantom(a) => commands::phantom(a),
        Command::Fit(a) => commands::fit(a),
        Command::Odf(a) => commands::odf(a),
        Command::Track(a) => commands::track(a),
        Command::Judge(a) => commands::judge(a),
        Command::Density(a) => commands::density(a),
        Command::Binarize(a) => commands::binarize(a),
        Command::Metrics(a) => commands::metrics(a),
        Command::Filter(a) => commands::filter(a),
        Command::Robustness(a) => commands::robustness(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
