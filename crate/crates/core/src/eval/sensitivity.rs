//! FAD under audio effects, relative to the unprocessed score.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{FadError, Result};
use crate::stats::FadScore;

/// Canonical effect names.
pub const EFFECTS: [&str; 5] = ["distortion", "low-pass", "reverb", "pitch-down", "pitch-up"];

/// Maps accepted spellings onto [`EFFECTS`].
pub fn canonical_effect(name: &str) -> Result<&'static str> {
    let key: String = name
        .trim()
        .to_ascii_lowercase()
        .chars()
        .map(|c| if c == '_' || c == ' ' { '-' } else { c })
        .collect();
    Ok(match key.as_str() {
        "distortion" => "distortion",
        "low-pass" | "lowpass" | "low-pass-filter" | "low-pass-filtering" => "low-pass",
        "reverb" | "reverberation" => "reverb",
        "pitch-down" => "pitch-down",
        "pitch-up" => "pitch-up",
        _ => return Err(FadError::UnknownEffect(name.to_string())),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub clean: f64,
    /// False when the clean score is zero: `values` then holds absolute scores.
    pub normalized: bool,
    pub values: BTreeMap<String, f64>,
}

/// Divides each effect's FAD by the unprocessed FAD.
pub fn sensitivity_normalize(
    clean: &FadScore,
    effected: &BTreeMap<String, FadScore>,
) -> Result<SensitivityReport> {
    let mut values = BTreeMap::new();
    let normalized = clean.value > 0.0;
    for (name, score) in effected {
        let key = canonical_effect(name)?;
        let v = if normalized {
            score.value / clean.value
        } else {
            score.value
        };
        if values.insert(key.to_string(), v).is_some() {
            return Err(FadError::InvalidMetadata(format!(
                "effect {key} given twice"
            )));
        }
    }
    Ok(SensitivityReport {
        clean: clean.value,
        normalized,
        values,
    })
}
