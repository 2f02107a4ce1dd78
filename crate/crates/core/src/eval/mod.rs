//! Analyses built on per-song scores: label prediction, listening-test correlation and effect
//! sensitivity.

pub mod labels;
pub mod mos;
pub mod sensitivity;

pub use labels::{
    align_truth, binarize_labels, predict_labels, prf, read_labels_csv, LabelRecord, PrfResult,
    QualityLabel, Truth,
};
pub use mos::{pearson, pearson_by_testset, read_mos_csv, MosRecord, QualityTarget, TestsetPcc};
pub use sensitivity::{canonical_effect, sensitivity_normalize, SensitivityReport, EFFECTS};
