//! Frame matrices and the binary frame file.
//!
//! Layout (little-endian): magic `FADE`, version `u32`, dim `u32`, n_frames `u64`, then
//! `n_frames * dim` binary32 values in row-major order.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::embedding::model::EmbeddingModelInfo;
use crate::error::{FadError, Result};

pub const FRAME_MAGIC: [u8; 4] = *b"FADE";
pub const FRAME_VERSION: u32 = 1;
pub const FRAME_HEADER_LEN: usize = 20;

/// Row-major `n_frames x dim` matrix of embedding frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Frames {
    dim: usize,
    data: Vec<f32>,
}

impl Frames {
    pub fn new(dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(FadError::InvalidMetadata("frame dim must be >= 1".into()));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(FadError::DimMismatch {
                expected: dim,
                found: data.len() % dim,
            });
        }
        Ok(Frames { dim, data })
    }

    pub fn from_rows<R: AsRef<[f32]>>(dim: usize, rows: &[R]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(FadError::DimMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Frames::new(dim, data)
    }

    pub fn zeros(n_frames: usize, dim: usize) -> Self {
        Frames {
            dim,
            data: vec![0.0; n_frames * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_frames(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f32] {
        &mut self.data
    }

    /// Location of the first NaN or infinite value.
    pub fn first_non_finite(&self) -> Option<(usize, usize)> {
        self.data
            .iter()
            .position(|v| !v.is_finite())
            .map(|i| (i / self.dim, i % self.dim))
    }

    fn check_finite(&self) -> Result<()> {
        match self.first_non_finite() {
            Some((row, col)) => Err(FadError::NonFiniteFrame { row, col }),
            None => Ok(()),
        }
    }
}

/// One song's frames together with the model that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingFrameSet {
    pub model: EmbeddingModelInfo,
    pub song_id: String,
    pub frames: Frames,
}

impl EmbeddingFrameSet {
    pub fn new(
        model: EmbeddingModelInfo,
        song_id: impl Into<String>,
        frames: Frames,
    ) -> Result<Self> {
        let set = EmbeddingFrameSet {
            model,
            song_id: song_id.into(),
            frames,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.frames.dim() != self.model.dim {
            return Err(FadError::DimMismatch {
                expected: self.model.dim,
                found: self.frames.dim(),
            });
        }
        if self.frames.is_empty() {
            return Err(FadError::EmptyFrameSet);
        }
        self.frames.check_finite()
    }

    pub fn dim(&self) -> usize {
        self.frames.dim()
    }

    pub fn n_frames(&self) -> usize {
        self.frames.n_frames()
    }
}

/// Serializes frames into the on-disk byte layout.
pub fn encode_frames(frames: &Frames) -> Result<Vec<u8>> {
    frames.check_finite()?;
    if frames.is_empty() {
        return Err(FadError::EmptyFrameSet);
    }
    let dim = u32::try_from(frames.dim())
        .map_err(|_| FadError::InvalidMetadata("dim exceeds u32".into()))?;
    let mut out = Vec::with_capacity(FRAME_HEADER_LEN + frames.as_slice().len() * 4);
    out.extend_from_slice(&FRAME_MAGIC);
    out.extend_from_slice(&FRAME_VERSION.to_le_bytes());
    out.extend_from_slice(&dim.to_le_bytes());
    out.extend_from_slice(&(frames.n_frames() as u64).to_le_bytes());
    for v in frames.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

/// Parses and validates a frame file image.
pub fn decode_frames(bytes: &[u8]) -> Result<Frames> {
    if bytes.len() < FRAME_HEADER_LEN {
        if bytes.len() >= 4 && bytes[..4] != FRAME_MAGIC {
            return Err(FadError::BadMagic {
                expected: FRAME_MAGIC,
                found: bytes[..4].try_into().unwrap(),
            });
        }
        return Err(FadError::TruncatedPayload {
            expected: FRAME_HEADER_LEN as u64,
            found: bytes.len() as u64,
        });
    }
    let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
    if magic != FRAME_MAGIC {
        return Err(FadError::BadMagic {
            expected: FRAME_MAGIC,
            found: magic,
        });
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != FRAME_VERSION {
        return Err(FadError::UnsupportedVersion(version));
    }
    let dim = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let n_frames = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
    if dim == 0 {
        return Err(FadError::InvalidMetadata(
            "frame file declares dim 0".into(),
        ));
    }
    if n_frames == 0 {
        return Err(FadError::EmptyFrameSet);
    }
    let payload = &bytes[FRAME_HEADER_LEN..];
    let expected = n_frames
        .checked_mul(dim as u64)
        .and_then(|v| v.checked_mul(4))
        .ok_or_else(|| FadError::InvalidMetadata("frame count overflows".into()))?;
    let found = payload.len() as u64;
    if found < expected {
        return Err(FadError::TruncatedPayload { expected, found });
    }
    if found > expected {
        return Err(FadError::TrailingBytes(found - expected));
    }
    let data: Vec<f32> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let frames = Frames { dim, data };
    frames.check_finite()?;
    Ok(frames)
}

/// Writes a song's frames to `path`. Model metadata lives in the set directory's `set.json`.
pub fn write_frameset(set: &EmbeddingFrameSet, path: &Path) -> Result<()> {
    set.validate()?;
    let bytes = encode_frames(&set.frames)?;
    let file = File::create(path).map_err(|e| FadError::io(path, e))?;
    let mut writer = BufWriter::new(file);
    writer
        .write_all(&bytes)
        .map_err(|e| FadError::io(path, e))?;
    writer.flush().map_err(|e| FadError::io(path, e))
}

/// Reads a raw frame file without model metadata.
pub fn read_frames(path: &Path) -> Result<Frames> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| FadError::io(path, e))?;
    decode_frames(&bytes).map_err(|e| FadError::in_file(path, e))
}

/// Reads a frame file and attaches `model` metadata, rejecting a header/metadata dim mismatch.
pub fn read_frameset(
    path: &Path,
    model: &EmbeddingModelInfo,
    song_id: &str,
) -> Result<EmbeddingFrameSet> {
    let frames = read_frames(path)?;
    if frames.dim() != model.dim {
        return Err(FadError::DimMismatch {
            expected: model.dim,
            found: frames.dim(),
        });
    }
    EmbeddingFrameSet::new(model.clone(), song_id, frames)
}
