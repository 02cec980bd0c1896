//! Shard audits: masking ratios, provenance counts, background histogram.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::masking::round_half_up;
use crate::pipeline::sample::{MaskKind, SampleHeader, TrainingSample};
use crate::pipeline::shard::open_shards;

/// Masked-token count a sample must carry given how it was masked:
/// `round(m N)` for trajectory masking, `round(m S) * T/p_t` for tubes.
pub fn expected_masked_count(header: &SampleHeader) -> usize {
    let g = &header.geometry;
    match header.mask_kind {
        MaskKind::Trajectory => round_half_up(header.mask_ratio * g.token_count() as f64),
        MaskKind::Tube => round_half_up(header.mask_ratio * g.spatial_count() as f64) * g.grid_frames(),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ShardStats {
    pub file: String,
    pub samples: usize,
    /// `"masked/N"` -> number of samples.
    pub ratios: BTreeMap<String, usize>,
    pub mean_ratio: f64,
    pub trajectory_tokens: usize,
    pub tube_tokens: usize,
    pub variants: BTreeMap<String, usize>,
    pub backgrounds: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub config_hash: String,
    pub total_samples: usize,
    pub effective_epochs: u64,
    pub shards: Vec<ShardStats>,
    pub trajectory_tokens: usize,
    pub tube_tokens: usize,
    pub backgrounds: BTreeMap<String, usize>,
    pub variants: BTreeMap<String, usize>,
    /// Samples whose contents disagree with their header or masking rule.
    pub violations: Vec<String>,
}

impl DatasetStats {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

fn check_sample(s: &TrainingSample) -> Option<String> {
    let h = &s.header;
    let want = expected_masked_count(h);
    if s.masked.len() != want {
        return Some(format!("{}: {} masked tokens, expected {want}", h.sample_id, s.masked.len()));
    }
    if let Err(e) = s.mask_set() {
        return Some(format!("{}: {e}", h.sample_id));
    }
    None
}

/// Reads every record under `dir` and tallies masking statistics.
pub fn audit(dir: &Path) -> Result<DatasetStats> {
    let (manifest, mut reader) = open_shards(dir)?;
    let mut out = DatasetStats {
        config_hash: manifest.config_hash.clone(),
        total_samples: manifest.total_samples,
        effective_epochs: manifest.effective_epochs,
        ..DatasetStats::default()
    };
    let cfg = &manifest.config;
    let want = super::effective_epochs(cfg.schedule.epochs.into(), cfg.samples_per_video.into());
    if manifest.effective_epochs != want {
        out.violations.push(format!("manifest reports {} effective epochs, config implies {want}", manifest.effective_epochs));
    }
    for entry in &manifest.shards {
        let mut shard = ShardStats { file: entry.file.clone(), samples: entry.samples, ..ShardStats::default() };
        let mut ratio_sum = 0.0;
        for _ in 0..entry.samples {
            let sample = match reader.next() {
                Some(s) => s?,
                None => break,
            };
            let h = &sample.header;
            let trajectory = h.trajectory_indices.len();
            shard.trajectory_tokens += trajectory;
            shard.tube_tokens += sample.masked.len().saturating_sub(trajectory);
            *shard.ratios.entry(format!("{}/{}", sample.masked.len(), h.token_count)).or_default() += 1;
            ratio_sum += sample.masked.len() as f64 / h.token_count as f64;
            *shard.variants.entry(h.variant.name().to_string()).or_default() += 1;
            *shard.backgrounds.entry(h.background.name().to_string()).or_default() += 1;
            if let Some(v) = check_sample(&sample) {
                out.violations.push(v);
            }
        }
        if shard.samples > 0 {
            shard.mean_ratio = ratio_sum / shard.samples as f64;
        }
        out.trajectory_tokens += shard.trajectory_tokens;
        out.tube_tokens += shard.tube_tokens;
        for (k, v) in &shard.backgrounds {
            *out.backgrounds.entry(k.clone()).or_default() += v;
        }
        for (k, v) in &shard.variants {
            *out.variants.entry(k.clone()).or_default() += v;
        }
        out.shards.push(shard);
    }
    Ok(out)
}
