use std::fmt;
use std::str::FromStr;

use crate::act::BrainVolume;
use crate::error::{Error, Result};
use crate::odf::{DodfConvention, DEFAULT_SHARPENING};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    /// Probabilistic second-order propagation with anatomical rules.
    ActProb,
    /// Deterministic principal-eigenvector following.
    Fact,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::ActProb => "act_prob",
            Self::Fact => "fact",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "act_prob" => Ok(Self::ActProb),
            "fact" => Ok(Self::Fact),
            other => Err(Error::Parameter(format!("unknown algorithm {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    pub algorithm: Algorithm,
    pub step_mm: f64,
    pub angle_deg: f64,
    /// Sharpening exponent applied to the dODF.
    pub k: f64,
    /// Number of streamlines to produce.
    pub target_count: usize,
    pub seed: u64,
    /// FACT stops below this FA; 0 disables the check.
    pub fact_fa_stop: f64,
    /// FACT reads the nearest voxel's tensor instead of interpolating.
    pub fact_nearest: bool,
    /// Candidate arcs tried per step before a probabilistic track stops.
    pub trials: usize,
    pub dodf: DodfConvention,
    pub brain_volume: BrainVolume,
}

impl TrackerConfig {
    pub fn act_prob() -> Self {
        Self {
            algorithm: Algorithm::ActProb,
            step_mm: 0.6,
            angle_deg: 20.0,
            k: DEFAULT_SHARPENING,
            target_count: 1000,
            seed: 0,
            fact_fa_stop: 0.0,
            fact_nearest: false,
            trials: 50,
            dodf: DodfConvention::Inverse,
            brain_volume: BrainVolume::AllTissue,
        }
    }

    pub fn fact() -> Self {
        Self {
            algorithm: Algorithm::Fact,
            angle_deg: 30.0,
            ..Self::act_prob()
        }
    }

    /// Defaults for `algorithm`.
    pub fn for_algorithm(algorithm: Algorithm) -> Self {
        match algorithm {
            Algorithm::ActProb => Self::act_prob(),
            Algorithm::Fact => Self::fact(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_mm > 0.0) || !self.step_mm.is_finite() {
            return Err(Error::Parameter(format!("step must be positive, got {}", self.step_mm)));
        }
        if !(self.angle_deg > 0.0 && self.angle_deg < 90.0) {
            return Err(Error::Parameter(format!(
                "angle must lie in (0, 90) degrees, got {}",
                self.angle_deg
            )));
        }
        if !(self.k > 0.0) || !self.k.is_finite() {
            return Err(Error::Parameter(format!("sharpening exponent must be positive, got {}", self.k)));
        }
        if self.target_count == 0 {
            return Err(Error::Parameter("target count must be at least 1".into()));
        }
        if self.trials == 0 {
            return Err(Error::Parameter("at least one trial per step is needed".into()));
        }
        if !(0.0..=1.0).contains(&self.fact_fa_stop) {
            return Err(Error::Parameter(format!("FA stop must lie in [0, 1], got {}", self.fact_fa_stop)));
        }
        Ok(())
    }

    /// Every field as a `(key, value)` pair, in declaration order.
    pub fn to_key_values(&self) -> Vec<(String, String)> {
        let dodf = match self.dodf {
            DodfConvention::Inverse => "inverse",
            DodfConvention::Literal => "literal",
        };
        let volume = match self.brain_volume {
            BrainVolume::AllTissue => "all_tissue",
            BrainVolume::ParenchymaOnly => "parenchyma_only",
        };
        [
            ("algorithm", self.algorithm.to_string()),
            ("step_mm", self.step_mm.to_string()),
            ("angle_deg", self.angle_deg.to_string()),
            ("k", self.k.to_string()),
            ("target_count", self.target_count.to_string()),
            ("seed", self.seed.to_string()),
            ("fact_fa_stop", self.fact_fa_stop.to_string()),
            ("fact_nearest", self.fact_nearest.to_string()),
            ("trials", self.trials.to_string()),
            ("dodf", dodf.to_string()),
            ("brain_volume", volume.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }

    /// Sets one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| Error::Parameter(format!("invalid value {value:?} for {key}")))
        }
        match key {
            "algorithm" => self.algorithm = value.parse()?,
            "step_mm" => self.step_mm = parse(key, value)?,
            "angle_deg" => self.angle_deg = parse(key, value)?,
            "k" => self.k = parse(key, value)?,
            "target_count" => self.target_count = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "fact_fa_stop" => self.fact_fa_stop = parse(key, value)?,
            "fact_nearest" => self.fact_nearest = parse(key, value)?,
            "trials" => self.trials = parse(key, value)?,
            "dodf" => {
                self.dodf = match value {
                    "inverse" => DodfConvention::Inverse,
                    "literal" => DodfConvention::Literal,
                    _ => return Err(Error::Parameter(format!("unknown dODF convention {value:?}"))),
                }
            }
            "brain_volume" => {
                self.brain_volume = match value {
                    "all_tissue" => BrainVolume::AllTissue,
                    "parenchyma_only" => BrainVolume::ParenchymaOnly,
                    _ => return Err(Error::Parameter(format!("unknown brain volume {value:?}"))),
                }
            }
            _ => return Err(Error::Parameter(format!("unknown configuration key {key:?}"))),
        }
        Ok(())
    }

    /// Applies `key=value` lines; blank lines and `#` comments are skipped.
    pub fn apply_key_values(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parameter(format!("line {}: expected key=value, got {line:?}", n + 1)))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    /// `key=value` lines that [`apply_key_values`](Self::apply_key_values) reads back.
    pub fn to_text(&self) -> String {
        self.to_key_values().into_iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }
}
