//! Set directories: one frame file per song plus a `set.json` metadata file.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::embedding::frames::{read_frameset, write_frameset, EmbeddingFrameSet};
use crate::embedding::model::EmbeddingModelInfo;
use crate::error::{FadError, Result};

pub const SET_METADATA_FILE: &str = "set.json";
pub const FRAME_FILE_EXT: &str = "fade";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SongEntry {
    pub id: String,
    pub file: String,
}

/// Contents of `set.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetMetadata {
    pub model: EmbeddingModelInfo,
    pub songs: Vec<SongEntry>,
}

impl SetMetadata {
    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(SET_METADATA_FILE);
        let text = fs::read_to_string(&path).map_err(|e| FadError::io(&path, e))?;
        let meta: SetMetadata =
            serde_json::from_str(&text).map_err(|e| FadError::in_file(&path, e.into()))?;
        meta.validate().map_err(|e| FadError::in_file(&path, e))?;
        Ok(meta)
    }

    fn validate(&self) -> Result<()> {
        self.model.validate()?;
        let mut ids = BTreeSet::new();
        let mut files = BTreeSet::new();
        for song in &self.songs {
            if song.id.is_empty() {
                return Err(FadError::InvalidMetadata("empty song id".into()));
            }
            if !ids.insert(song.id.as_str()) {
                return Err(FadError::DuplicateSong(song.id.clone()));
            }
            let file = Path::new(&song.file);
            if song.file.is_empty()
                || file.is_absolute()
                || file.components().count() != 1
                || song.file == SET_METADATA_FILE
            {
                return Err(FadError::InvalidMetadata(format!(
                    "song {:?} has invalid file name {:?}",
                    song.id, song.file
                )));
            }
            if !files.insert(song.file.as_str()) {
                return Err(FadError::InvalidMetadata(format!(
                    "file {:?} listed twice",
                    song.file
                )));
            }
        }
        Ok(())
    }

    /// Entries ordered by song id.
    pub fn sorted_songs(&self) -> Vec<&SongEntry> {
        let mut songs: Vec<&SongEntry> = self.songs.iter().collect();
        songs.sort_by(|a, b| a.id.cmp(&b.id));
        songs
    }
}

/// A fully loaded set directory. Songs are held in ascending song-id order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    pub model: EmbeddingModelInfo,
    pub songs: Vec<EmbeddingFrameSet>,
}

impl EmbeddingSet {
    pub fn dim(&self) -> usize {
        self.model.dim
    }

    pub fn total_frames(&self) -> usize {
        self.songs.iter().map(|s| s.n_frames()).sum()
    }
}

fn file_name_for(id: &str, taken: &mut BTreeSet<String>) -> String {
    let stem: String = id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') {
                c
            } else {
                '_'
            }
        })
        .collect();
    let stem = stem.trim_start_matches('.');
    let stem = if stem.is_empty() { "song" } else { stem };
    let mut name = format!("{stem}.{FRAME_FILE_EXT}");
    let mut n = 1;
    while taken.contains(&name) {
        name = format!("{stem}-{n}.{FRAME_FILE_EXT}");
        n += 1;
    }
    taken.insert(name.clone());
    name
}

/// Writes `songs` as a set directory, creating `dir` if needed. Every song must carry `model`.
pub fn write_set(
    dir: &Path,
    model: &EmbeddingModelInfo,
    songs: &[EmbeddingFrameSet],
) -> Result<()> {
    model.validate()?;
    fs::create_dir_all(dir).map_err(|e| FadError::io(dir, e))?;
    let mut ids = BTreeSet::new();
    let mut taken = BTreeSet::new();
    let mut entries = Vec::with_capacity(songs.len());
    let mut ordered: Vec<&EmbeddingFrameSet> = songs.iter().collect();
    ordered.sort_by(|a, b| a.song_id.cmp(&b.song_id));
    for song in ordered {
        if &song.model != model {
            return Err(FadError::InvalidMetadata(format!(
                "song {:?} was produced by a different model",
                song.song_id
            )));
        }
        if !ids.insert(song.song_id.clone()) {
            return Err(FadError::DuplicateSong(song.song_id.clone()));
        }
        let file = file_name_for(&song.song_id, &mut taken);
        write_frameset(song, &dir.join(&file))?;
        entries.push(SongEntry {
            id: song.song_id.clone(),
            file,
        });
    }
    let meta = SetMetadata {
        model: model.clone(),
        songs: entries,
    };
    let path = dir.join(SET_METADATA_FILE);
    let mut json = serde_json::to_string_pretty(&meta)?;
    json.push('\n');
    fs::write(&path, json).map_err(|e| FadError::io(&path, e))
}

/// Loads a set directory. Songs come back sorted by id; any unreadable song file is an error
/// naming that file.
pub fn read_set(dir: &Path) -> Result<EmbeddingSet> {
    let meta = SetMetadata::read(dir)?;
    if meta.songs.is_empty() {
        return Err(FadError::NoSongs(dir.to_path_buf()));
    }
    let songs = meta
        .sorted_songs()
        .into_iter()
        .map(|entry| {
            let path = dir.join(&entry.file);
            read_frameset(&path, &meta.model, &entry.id).map_err(|e| FadError::in_file(&path, e))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EmbeddingSet {
        model: meta.model,
        songs,
    })
}

/// SHA-256 over the directory listing: the raw `set.json` bytes, then for each song in id order
/// its id, file name and file size.
pub fn listing_hash(dir: &Path) -> Result<[u8; 32]> {
    let meta_path = dir.join(SET_METADATA_FILE);
    let meta_bytes = fs::read(&meta_path).map_err(|e| FadError::io(&meta_path, e))?;
    let meta = SetMetadata::read(dir)?;
    let mut hasher = Sha256::new();
    hasher.update((meta_bytes.len() as u64).to_le_bytes());
    hasher.update(&meta_bytes);
    for entry in meta.sorted_songs() {
        let path: PathBuf = dir.join(&entry.file);
        let len = fs::metadata(&path)
            .map_err(|e| FadError::io(&path, e))?
            .len();
        for field in [entry.id.as_bytes(), entry.file.as_bytes()] {
            hasher.update((field.len() as u64).to_le_bytes());
            hasher.update(field);
        }
        hasher.update(len.to_le_bytes());
    }
    Ok(hasher.finalize().into())
}
