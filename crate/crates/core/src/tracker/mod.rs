//! Whole-brain tractography: anatomically constrained probabilistic tracking and FACT.

mod config;
mod fact;
mod prob;
mod whole_brain;

pub use config::{Algorithm, TrackerConfig};
pub use fact::FactPropagator;
pub use prob::{HalfTrack, ProbPropagator, Termination};
pub use whole_brain::{track_whole_brain, RejectionStats, Streamline, Tractogram};
