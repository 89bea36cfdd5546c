use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::volume::Vec3;

/// Acquisitions with a b-value at or below this (s/mm²) count as unweighted.
pub const B0_THRESHOLD: f64 = 10.0;

/// Gradient table: one b-value (s/mm²) and unit direction per dMRI channel.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionProtocol {
    bvals: Vec<f64>,
    bvecs: Vec<Vec3>,
}

impl DiffusionProtocol {
    pub fn new(bvals: Vec<f64>, bvecs: Vec<Vec3>) -> Result<Self> {
        if bvals.len() != bvecs.len() {
            return Err(Error::Protocol(format!(
                "{} b-values but {} b-vectors",
                bvals.len(),
                bvecs.len()
            )));
        }
        if bvals.iter().any(|b| !b.is_finite() || *b < 0.0) {
            return Err(Error::Protocol("b-values must be finite and non-negative".into()));
        }
        if !bvals.iter().any(|&b| b <= B0_THRESHOLD) {
            return Err(Error::Protocol("no b=0 acquisition".into()));
        }
        for (i, (b, g)) in bvals.iter().zip(&bvecs).enumerate() {
            if *b > B0_THRESHOLD && (g.norm() - 1.0).abs() > 1e-6 {
                return Err(Error::Protocol(format!(
                    "b-vector {i} has norm {} (expected unit)",
                    g.norm()
                )));
            }
        }
        let weighted: Vec<&Vec3> = bvals
            .iter()
            .zip(&bvecs)
            .filter(|(b, _)| **b > B0_THRESHOLD)
            .map(|(_, g)| g)
            .collect();
        if distinct_axes(&weighted) < 6 {
            return Err(Error::Protocol(
                "need at least 6 non-collinear diffusion-weighted directions".into(),
            ));
        }
        Ok(Self { bvals, bvecs })
    }

    /// `n_b0` unweighted volumes followed by one volume per direction at `bval`.
    pub fn single_shell(n_b0: usize, bval: f64, directions: &[Vec3]) -> Result<Self> {
        let mut bvals = vec![0.0; n_b0];
        let mut bvecs = vec![Vec3::zeros(); n_b0];
        for d in directions {
            bvals.push(bval);
            bvecs.push(d.normalize());
        }
        Self::new(bvals, bvecs)
    }

    pub fn len(&self) -> usize {
        self.bvals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bvals.is_empty()
    }

    pub fn bvals(&self) -> &[f64] {
        &self.bvals
    }

    pub fn bvecs(&self) -> &[Vec3] {
        &self.bvecs
    }

    pub fn is_b0(&self, i: usize) -> bool {
        self.bvals[i] <= B0_THRESHOLD
    }

    /// Reads a b-value file and a b-vector file.
    ///
    /// b-values may be one per line or whitespace separated. b-vectors may be one
    /// `x y z` triple per line, or FSL's three rows of N values.
    pub fn from_files(bvals: impl AsRef<Path>, bvecs: impl AsRef<Path>) -> Result<Self> {
        let bval_text = fs::read_to_string(bvals)?;
        let bvec_text = fs::read_to_string(bvecs)?;
        let bvals = parse_numbers(&bval_text)?;
        let rows: Vec<Vec<f64>> = bvec_text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(parse_numbers)
            .collect::<Result<_>>()?;
        let n = bvals.len();
        let bvecs = if rows.len() == n && rows.iter().all(|r| r.len() == 3) {
            rows.iter().map(|r| Vec3::new(r[0], r[1], r[2])).collect()
        } else if rows.len() == 3 && rows.iter().all(|r| r.len() == n) {
            (0..n)
                .map(|i| Vec3::new(rows[0][i], rows[1][i], rows[2][i]))
                .collect()
        } else {
            return Err(Error::Format(format!(
                "b-vector table is {} rows, cannot match {n} b-values",
                rows.len()
            )));
        };
        Self::new(bvals, bvecs)
    }

    /// Writes b-values one per line and b-vectors as one triple per line.
    pub fn write_files(&self, bvals: impl AsRef<Path>, bvecs: impl AsRef<Path>) -> Result<()> {
        let mut bv = String::new();
        let mut bg = String::new();
        for (b, g) in self.bvals.iter().zip(&self.bvecs) {
            bv.push_str(&format!("{b}\n"));
            bg.push_str(&format!("{} {} {}\n", g.x, g.y, g.z));
        }
        fs::write(bvals, bv)?;
        fs::write(bvecs, bg)?;
        Ok(())
    }
}

fn parse_numbers(text: &str) -> Result<Vec<f64>> {
    text.split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Error::Format(format!("not a number: {t:?}")))
        })
        .collect()
}

fn distinct_axes(dirs: &[&Vec3]) -> usize {
    let mut axes: Vec<Vec3> = Vec::new();
    for d in dirs {
        let n = d.normalize();
        if !axes.iter().any(|a| a.dot(&n).abs() > 1.0 - 1e-9) {
            axes.push(n);
        }
    }
    axes.len()
}
