//! Stats cache file.
//!
//! Layout (little-endian): magic `FADS`, version `u32`, dim `u32`, count `u64`, mean as
//! `dim` binary64, covariance lower triangle row by row as `dim (dim + 1) / 2` binary64, then the
//! 32-byte listing hash of the source set directory.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::embedding::listing_hash;
use crate::error::{FadError, Result};
use crate::stats::gaussian::GaussianStats;

pub const STATS_MAGIC: [u8; 4] = *b"FADS";
pub const STATS_VERSION: u32 = 1;
const HEADER_LEN: usize = 20;
const HASH_LEN: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct StatsCache {
    pub stats: GaussianStats,
    pub source_hash: [u8; 32],
}

impl StatsCache {
    pub fn encode(&self) -> Result<Vec<u8>> {
        let stats = &self.stats;
        let cov = stats.covariance()?;
        let dim = stats.dim();
        let dim32 =
            u32::try_from(dim).map_err(|_| FadError::InvalidMetadata("dim exceeds u32".into()))?;
        let tri = dim * (dim + 1) / 2;
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * (dim + tri) + HASH_LEN);
        out.extend_from_slice(&STATS_MAGIC);
        out.extend_from_slice(&STATS_VERSION.to_le_bytes());
        out.extend_from_slice(&dim32.to_le_bytes());
        out.extend_from_slice(&stats.count().to_le_bytes());
        for v in stats.mean().iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for i in 0..dim {
            for j in 0..=i {
                out.extend_from_slice(&cov[(i, j)].to_le_bytes());
            }
        }
        out.extend_from_slice(&self.source_hash);
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(FadError::TruncatedPayload {
                expected: HEADER_LEN as u64,
                found: bytes.len() as u64,
            });
        }
        let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
        if magic != STATS_MAGIC {
            return Err(FadError::BadMagic {
                expected: STATS_MAGIC,
                found: magic,
            });
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != STATS_VERSION {
            return Err(FadError::UnsupportedVersion(version));
        }
        let dim = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let count = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
        if dim == 0 {
            return Err(FadError::InvalidMetadata(
                "stats cache declares dim 0".into(),
            ));
        }
        let tri = dim * (dim + 1) / 2;
        let expected = HEADER_LEN + 8 * (dim + tri) + HASH_LEN;
        if bytes.len() < expected {
            return Err(FadError::TruncatedPayload {
                expected: expected as u64,
                found: bytes.len() as u64,
            });
        }
        if bytes.len() > expected {
            return Err(FadError::TrailingBytes((bytes.len() - expected) as u64));
        }
        let mut values = bytes[HEADER_LEN..expected - HASH_LEN]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let mean = DVector::from_iterator(dim, values.by_ref().take(dim));
        let mut cov = DMatrix::zeros(dim, dim);
        for i in 0..dim {
            for j in 0..=i {
                let v = values.next().unwrap();
                cov[(i, j)] = v;
                cov[(j, i)] = v;
            }
        }
        let source_hash: [u8; 32] = bytes[expected - HASH_LEN..].try_into().unwrap();
        let stats = GaussianStats::from_moments(mean, cov, count)?;
        Ok(StatsCache { stats, source_hash })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let bytes = self.encode()?;
        fs::write(path, bytes).map_err(|e| FadError::io(path, e))
    }

    /// Loads a cache file. With `verify_against` set, the stored hash must match the current
    /// listing hash of that set directory.
    pub fn load(path: &Path, verify_against: Option<&Path>) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| FadError::io(path, e))?;
        let cache = StatsCache::decode(&bytes).map_err(|e| FadError::in_file(path, e))?;
        if let Some(dir) = verify_against {
            if listing_hash(dir)? != cache.source_hash {
                return Err(FadError::in_file(path, FadError::HashMismatch));
            }
        }
        Ok(cache)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> StatsCache {
        let mut stats = GaussianStats::new(3);
        for x in [
            [1.0, 2.0, 3.0],
            [0.1, -0.7, 2.5],
            [4.0, 0.0, -1.0],
            [0.3, 0.3, 0.3],
        ] {
            stats.accumulate(&x).unwrap();
        }
        StatsCache {
            stats,
            source_hash: [7; 32],
        }
    }

    #[test]
    fn layout_and_round_trip() {
        let cache = sample();
        let bytes = cache.encode().unwrap();
        assert_eq!(bytes.len(), 20 + 8 * (3 + 6) + 32);
        assert_eq!(&bytes[..4], b"FADS");
        let back = StatsCache::decode(&bytes).unwrap();
        assert_eq!(back, cache);
    }

    #[test]
    fn rejects_corruption() {
        let bytes = sample().encode().unwrap();
        let mut bad = bytes.clone();
        bad[1] = b'x';
        assert!(matches!(
            StatsCache::decode(&bad),
            Err(FadError::BadMagic { .. })
        ));
        assert!(matches!(
            StatsCache::decode(&bytes[..bytes.len() - 1]),
            Err(FadError::TruncatedPayload { .. })
        ));
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(matches!(
            StatsCache::decode(&bad),
            Err(FadError::UnsupportedVersion(9))
        ));
    }

    #[test]
    fn single_frame_stats_cannot_be_cached() {
        let mut stats = GaussianStats::new(2);
        stats.accumulate(&[1.0, 1.0]).unwrap();
        let cache = StatsCache {
            stats,
            source_hash: [0; 32],
        };
        assert!(matches!(cache.encode(), Err(FadError::CovarianceUndefined)));
    }
}
