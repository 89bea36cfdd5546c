use std::fmt;

use super::{FiveTissueTypeMap, Tissue};
use crate::error::{Error, Result};
use crate::volume::Vec3;

/// Admissible streamline arc lengths in mm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LengthBounds {
    pub min_mm: f64,
    pub max_mm: f64,
}

impl LengthBounds {
    pub fn new(min_mm: f64, max_mm: f64) -> Result<Self> {
        if !(min_mm > 0.0 && max_mm > min_mm && max_mm.is_finite()) {
            return Err(Error::Parameter(format!(
                "length bounds need 0 < min < max, got [{min_mm}, {max_mm}]"
            )));
        }
        Ok(Self { min_mm, max_mm })
    }

    pub fn contains(&self, length: f64) -> bool {
        (self.min_mm..=self.max_mm).contains(&length)
    }
}

/// Bounds that scale with the cube root of the brain volume (mm³):
/// `∛V / 1.6` and `∛V / 0.55`.
pub fn length_bounds(volume_mm3: f64) -> Result<LengthBounds> {
    if !(volume_mm3 > 0.0) || !volume_mm3.is_finite() {
        return Err(Error::Parameter(format!("brain volume must be positive, got {volume_mm3}")));
    }
    let c = volume_mm3.cbrt();
    LengthBounds::new(c / 1.6, c / 0.55)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RejectReason {
    TooShort,
    TooLong,
    EndpointNotGm,
    EnteredCsf,
    ExitedBrain,
    InvalidInterior,
}

impl RejectReason {
    pub const ALL: [RejectReason; 6] = [
        Self::TooShort,
        Self::TooLong,
        Self::EndpointNotGm,
        Self::EnteredCsf,
        Self::ExitedBrain,
        Self::InvalidInterior,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::TooShort => "too_short",
            Self::TooLong => "too_long",
            Self::EndpointNotGm => "endpoint_not_gm",
            Self::EnteredCsf => "entered_csf",
            Self::ExitedBrain => "exited_brain",
            Self::InvalidInterior => "invalid_interior",
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Accept,
    Reject(RejectReason),
}

impl Verdict {
    pub fn is_accept(self) -> bool {
        self == Verdict::Accept
    }
}

/// Polyline length in mm.
pub fn arc_length(points: &[Vec3]) -> f64 {
    points.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

/// Checks a streamline against the anatomical rules.
///
/// Tissue is looked up at every point. CSF anywhere rejects first, then background,
/// then interior points outside WM and sub-cortical GM, then endpoints outside GM, and
/// finally the length bounds. Fewer than two points counts as too short.
pub fn judge_streamline(points: &[Vec3], tt: &FiveTissueTypeMap, bounds: &LengthBounds) -> Verdict {
    if points.len() < 2 {
        return Verdict::Reject(RejectReason::TooShort);
    }
    let labels: Vec<Tissue> = points.iter().map(|p| tt.classify(p)).collect();
    if labels.contains(&Tissue::Csf) {
        return Verdict::Reject(RejectReason::EnteredCsf);
    }
    if labels.contains(&Tissue::Background) {
        return Verdict::Reject(RejectReason::ExitedBrain);
    }
    let n = labels.len();
    if labels[1..n - 1]
        .iter()
        .any(|t| !matches!(t, Tissue::WhiteMatter | Tissue::SubcorticalGm))
    {
        return Verdict::Reject(RejectReason::InvalidInterior);
    }
    if !labels[0].is_gm() || !labels[n - 1].is_gm() {
        return Verdict::Reject(RejectReason::EndpointNotGm);
    }
    let len = arc_length(points);
    if len < bounds.min_mm {
        Verdict::Reject(RejectReason::TooShort)
    } else if len > bounds.max_mm {
        Verdict::Reject(RejectReason::TooLong)
    } else {
        Verdict::Accept
    }
}
