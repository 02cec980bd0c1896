//! Per-sample seed derivation.
//!
//! Seeds are XXH64 (seed 0) digests of a fixed little-endian encoding, so
//! they are identical on every platform and independent of worker count.

use xxhash_rust::xxh64::xxh64;

/// `xxh64(global_seed | len(video_id) as u32 | video_id | sample_index | epoch)`,
/// integers little-endian, `sample_index` and `epoch` as `u64`.
pub fn derive_seed(global_seed: u64, video_id: &str, sample_index: u64, epoch: u64) -> u64 {
    let mut buf = Vec::with_capacity(8 + 4 + video_id.len() + 16);
    buf.extend_from_slice(&global_seed.to_le_bytes());
    buf.extend_from_slice(&(video_id.len() as u32).to_le_bytes());
    buf.extend_from_slice(video_id.as_bytes());
    buf.extend_from_slice(&sample_index.to_le_bytes());
    buf.extend_from_slice(&epoch.to_le_bytes());
    xxh64(&buf, 0)
}

/// Independent stream for one stage of sample construction.
pub fn stream_seed(seed: u64, stage: &str) -> u64 {
    let mut buf = Vec::with_capacity(8 + stage.len());
    buf.extend_from_slice(&seed.to_le_bytes());
    buf.extend_from_slice(stage.as_bytes());
    xxh64(&buf, 0)
}
