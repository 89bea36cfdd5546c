pub mod act;
pub mod dti;
pub mod error;
pub mod metrics;
pub mod odf;
pub mod phantom;
pub mod tck;
pub mod tracker;
pub mod volume;

pub use error::{Error, Result};
