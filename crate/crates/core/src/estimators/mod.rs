//! Set-level FAD, the sample-size extrapolated FAD-infinity, and per-song scoring.

pub mod infinity;
pub mod per_song;
pub mod set_fad;

pub use infinity::{
    bootstrap_curve, bootstrap_scores, default_sizes, fad_infinity, fit_inverse_size,
    resolve_sizes, BootstrapPool, BootstrapUnit, FadInfConfig, FadInfEstimate, LinearFit,
    RegressionPoint, DEFAULT_REPEATS, DEFAULT_SEED,
};
pub use per_song::{
    extreme_count, outlier_report, per_song_scores, select_extremes, Extremes, OutlierEntry,
    OutlierReport, SongFlag, SongRow, SongScoreTable,
};
pub use set_fad::{fad_set, SetFad};
