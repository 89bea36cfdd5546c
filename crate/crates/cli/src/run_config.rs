//! Resolved settings of a `track` run, stored next to its output as `key=value` lines.

use std::path::PathBuf;

use acttrack_core::tracker::{Algorithm, TrackerConfig};
use anyhow::{bail, Context, Result};

const PATH_KEYS: [&str; 3] = ["tensors", "tt", "output"];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub tracker: TrackerConfig,
    pub tensors: Option<PathBuf>,
    pub tt: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(algorithm: Algorithm) -> Self {
        Self {
            tracker: TrackerConfig::for_algorithm(algorithm),
            tensors: None,
            tt: None,
            output: None,
        }
    }

    /// Parses a config file. The tracker starts from the defaults of the algorithm named in
    /// the file, or of `fallback` when it names none.
    pub fn parse(text: &str, fallback: Algorithm) -> Result<Self> {
        let mut pairs = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                bail!("config line {}: expected key=value, got {line:?}", n + 1);
            };
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        let algorithm = match pairs.iter().find(|(k, _)| k == "algorithm") {
            Some((_, v)) => v.parse()?,
            None => fallback,
        };
        let mut cfg = Self::new(algorithm);
        for (k, v) in pairs {
            match k.as_str() {
                "tensors" => cfg.tensors = Some(v.into()),
                "tt" => cfg.tt = Some(v.into()),
                "output" => cfg.output = Some(v.into()),
                _ => cfg
                    .tracker
                    .set(&k, &v)
                    .with_context(|| format!("config key {k:?}"))?,
            }
        }
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        let mut s = self.tracker.to_text();
        for (key, path) in PATH_KEYS.iter().zip([&self.tensors, &self.tt, &self.output]) {
            if let Some(p) = path {
                s.push_str(&format!("{key}={}\n", p.display()));
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut cfg = RunConfig::new(Algorithm::Fact);
        cfg.tracker.angle_deg = 35.0;
        cfg.tensors = Some("a/tensors.nii.gz".into());
        cfg.output = Some("out.tck".into());
        let back = RunConfig::parse(&cfg.to_text(), Algorithm::ActProb).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn algorithm_in_file_picks_its_defaults() {
        let cfg = RunConfig::parse("algorithm=fact\n", Algorithm::ActProb).unwrap();
        assert_eq!(cfg.tracker, TrackerConfig::fact());
        let cfg = RunConfig::parse("# nothing\n\nseed=4\n", Algorithm::ActProb).unwrap();
        assert_eq!(cfg.tracker.seed, 4);
        assert_eq!(cfg.tracker.algorithm, Algorithm::ActProb);
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(RunConfig::parse("colour=red", Algorithm::ActProb).is_err());
        assert!(RunConfig::parse("seed 4", Algorithm::ActProb).is_err());
    }
}
