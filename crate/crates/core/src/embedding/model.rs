//! Embedding model metadata and the registry of known models.

use std::fmt;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{FadError, Result};

/// Length of the audio window a model sees per frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ContextSec {
    Seconds(f64),
    /// The model has no fixed window (e.g. a streaming codec encoder).
    Unbounded,
}

impl ContextSec {
    pub fn is_finite(&self) -> bool {
        matches!(self, ContextSec::Seconds(_))
    }
}

impl Serialize for ContextSec {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ContextSec::Seconds(s) => serializer.serialize_f64(*s),
            ContextSec::Unbounded => serializer.serialize_str("unbounded"),
        }
    }
}

impl<'de> Deserialize<'de> for ContextSec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct ContextVisitor;

        impl Visitor<'_> for ContextVisitor {
            type Value = ContextSec;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number of seconds or the string \"unbounded\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<ContextSec, E> {
                Ok(ContextSec::Seconds(v))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<ContextSec, E> {
                Ok(ContextSec::Seconds(v as f64))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<ContextSec, E> {
                Ok(ContextSec::Seconds(v as f64))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<ContextSec, E> {
                match v {
                    "unbounded" | "-" => Ok(ContextSec::Unbounded),
                    other => Err(E::invalid_value(de::Unexpected::Str(other), &self)),
                }
            }
        }

        deserializer.deserialize_any(ContextVisitor)
    }
}

/// Static description of an embedding model: channel layout, rate, frame size and timing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingModelInfo {
    pub name: String,
    pub input_channels: u32,
    pub sample_rate_hz: u32,
    pub dim: usize,
    pub context_sec: ContextSec,
    pub hop_sec: f64,
}

impl EmbeddingModelInfo {
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(FadError::InvalidModel("empty model name".into()));
        }
        if self.dim < 1 {
            return Err(FadError::InvalidModel("dim must be >= 1".into()));
        }
        if self.sample_rate_hz < 1 {
            return Err(FadError::InvalidModel("sample_rate_hz must be >= 1".into()));
        }
        if self.input_channels < 1 {
            return Err(FadError::InvalidModel("input_channels must be >= 1".into()));
        }
        if !self.hop_sec.is_finite() || self.hop_sec < 0.0 {
            return Err(FadError::InvalidModel(format!(
                "hop_sec must be finite and non-negative, got {}",
                self.hop_sec
            )));
        }
        if let ContextSec::Seconds(ctx) = self.context_sec {
            if !ctx.is_finite() || ctx <= 0.0 {
                return Err(FadError::InvalidModel(format!(
                    "context_sec must be positive, got {ctx}"
                )));
            }
            if self.hop_sec <= 0.0 {
                return Err(FadError::InvalidModel(
                    "hop_sec must be > 0 for a finite context".into(),
                ));
            }
        }
        Ok(())
    }

    /// Placeholder metadata for generated data.
    pub fn synthetic(dim: usize) -> Self {
        EmbeddingModelInfo {
            name: "synthetic".to_string(),
            input_channels: 1,
            sample_rate_hz: 16_000,
            dim,
            context_sec: ContextSec::Unbounded,
            hop_sec: 1.0,
        }
    }
}

struct RegistryRow {
    name: &'static str,
    channels: u32,
    rate: u32,
    dim: usize,
    context: Option<f64>,
    hop: f64,
}

const REGISTRY: &[RegistryRow] = &[
    RegistryRow {
        name: "vggish",
        channels: 1,
        rate: 16_000,
        dim: 128,
        context: Some(0.96),
        hop: 0.96,
    },
    RegistryRow {
        name: "clap",
        channels: 1,
        rate: 44_100,
        dim: 1024,
        context: Some(7.0),
        hop: 1.0,
    },
    RegistryRow {
        name: "l-clap",
        channels: 1,
        rate: 48_000,
        dim: 512,
        context: Some(10.0),
        hop: 1.0,
    },
    RegistryRow {
        name: "mert",
        channels: 1,
        rate: 24_000,
        dim: 768,
        context: Some(5.0),
        hop: 0.013,
    },
    RegistryRow {
        name: "cdpam",
        channels: 1,
        rate: 22_050,
        dim: 512,
        context: Some(5.0),
        hop: 1.0,
    },
    RegistryRow {
        name: "encodec",
        channels: 1,
        rate: 24_000,
        dim: 128,
        context: None,
        hop: 0.013,
    },
    RegistryRow {
        name: "encodec-48k",
        channels: 2,
        rate: 48_000,
        dim: 128,
        context: Some(1.0),
        hop: 0.99,
    },
    RegistryRow {
        name: "dac",
        channels: 2,
        rate: 44_100,
        dim: 1024,
        context: Some(5.0),
        hop: 0.012,
    },
];

/// All known embedding models.
pub fn registry() -> Vec<EmbeddingModelInfo> {
    REGISTRY
        .iter()
        .map(|row| EmbeddingModelInfo {
            name: row.name.to_string(),
            input_channels: row.channels,
            sample_rate_hz: row.rate,
            dim: row.dim,
            context_sec: row
                .context
                .map_or(ContextSec::Unbounded, ContextSec::Seconds),
            hop_sec: row.hop,
        })
        .collect()
}

/// Case-insensitive registry lookup. Layer-tagged variants such as `mert-l4` resolve to
/// their base model.
pub fn lookup(name: &str) -> Option<EmbeddingModelInfo> {
    let lower = name.to_ascii_lowercase();
    let base = match lower.rsplit_once("-l") {
        Some((base, layer)) if !layer.is_empty() && layer.bytes().all(|b| b.is_ascii_digit()) => {
            base.to_string()
        }
        _ => lower,
    };
    registry().into_iter().find(|m| m.name == base)
}
