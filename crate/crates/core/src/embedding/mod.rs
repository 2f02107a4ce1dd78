//! Embedding frame sets: model metadata, the binary frame file, set directories and the
//! synthetic generator.

pub mod frames;
pub mod model;
pub mod set;
pub mod synthetic;

pub use frames::{read_frames, read_frameset, write_frameset, EmbeddingFrameSet, Frames};
pub use model::{ContextSec, EmbeddingModelInfo};
pub use set::{listing_hash, read_set, write_set, EmbeddingSet, SetMetadata, SongEntry};
pub use synthetic::{generate_frames, generate_synthetic, SyntheticSpec};
