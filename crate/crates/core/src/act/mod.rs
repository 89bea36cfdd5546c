//! Five-tissue-type anatomy: seeding interface, length bounds and streamline validity.

mod judge;
mod tissue;

pub use judge::{arc_length, judge_streamline, length_bounds, LengthBounds, RejectReason, Verdict};
pub use tissue::{gmwmi_extract, load_5tt, BrainVolume, FiveTissueTypeMap, InterfaceMask, Tissue};
