//! Frechet Audio Distance over precomputed embedding frames.
//!
//! The crate covers the frame file format and set directories, streaming Gaussian fits and the
//! Frechet distance, the sample-size extrapolated FAD-infinity, per-song scoring, and the label
//! and listening-test analyses built on per-song scores.

pub mod embedding;
pub mod error;
pub mod estimators;
pub mod eval;
pub mod format;
pub mod stats;

pub use error::{FadError, Result};
