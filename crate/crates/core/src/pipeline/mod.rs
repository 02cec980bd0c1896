//! End-to-end sample generation.
//!
//! Work is enumerated in a fixed order (epoch, video, sample index, variant)
//! and built in parallel chunks; results are written back in enumeration
//! order, so shard bytes never depend on the worker count.

pub mod config;
pub mod sample;
pub mod seed;
pub mod shard;
pub mod stats;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use config::{MaskSettings, ObjectSettings, PipelineConfig, ScheduleKind, ScheduleSettings, SourceSpec, TeacherSpec};
pub use sample::{build_sample, build_sample_with_artifacts, sample_id, MaskKind, SampleArtifacts, SampleEnv, SampleHeader, SampleRequest, TrainingSample, Variant};
pub use seed::{derive_seed, stream_seed};
pub use shard::{open_shards, read_shards, write_shards, ShardManifest, ShardReader, ShardWriter};

use crate::compositor::Clip;
use crate::error::Result;
use crate::io::ClipManifest;
use crate::synth::synthetic_clip;

/// Environment variable overriding the worker count.
pub const WORKERS_ENV: &str = "MOTION_PREP_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Emission {
    AugmentedOnly,
    OriginalOnly,
    Both,
}

impl Emission {
    pub fn variants(self) -> &'static [Variant] {
        match self {
            Emission::AugmentedOnly => &[Variant::Augmented],
            Emission::OriginalOnly => &[Variant::Original],
            Emission::Both => &[Variant::Augmented, Variant::Original],
        }
    }
}

/// Which clip variants an epoch emits.
pub fn schedule_variant(schedule: &ScheduleSettings, epoch: u32) -> Emission {
    match schedule.kind {
        ScheduleKind::Single => Emission::AugmentedOnly,
        ScheduleKind::Mixed => Emission::Both,
        ScheduleKind::Progressive => {
            let first_stage = schedule.stage_split.map_or(schedule.epochs, |[a, _]| a);
            if epoch < first_stage {
                Emission::AugmentedOnly
            } else {
                Emission::OriginalOnly
            }
        }
    }
}

/// Epochs counted as passes over each video: `epochs * samples_per_video`.
pub fn effective_epochs(epochs: u64, samples_per_video: u64) -> u64 {
    epochs * samples_per_video
}

/// Where the pipeline's input clips come from.
pub enum ClipSource {
    Synthetic { ids: Vec<String>, seed: u64, frames: usize, height: usize, width: usize },
    Manifest { manifest: ClipManifest, frames: usize, height: usize, width: usize },
}

impl ClipSource {
    pub fn from_config(cfg: &PipelineConfig) -> Result<Self> {
        let g = &cfg.geometry;
        Ok(match &cfg.source {
            SourceSpec::Synthetic { count } => ClipSource::Synthetic {
                ids: (0..*count).map(|i| format!("synthetic-{i:05}")).collect(),
                seed: cfg.seed,
                frames: g.frames,
                height: g.height,
                width: g.width,
            },
            SourceSpec::Manifest { path } => ClipSource::Manifest {
                manifest: ClipManifest::open(path)?,
                frames: g.frames,
                height: g.height,
                width: g.width,
            },
        })
    }

    pub fn len(&self) -> usize {
        match self {
            ClipSource::Synthetic { ids, .. } => ids.len(),
            ClipSource::Manifest { manifest, .. } => manifest.clips.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn load(&self, i: usize) -> Result<Clip> {
        match self {
            ClipSource::Synthetic { ids, seed, frames, height, width } => {
                let clip_seed = stream_seed(*seed, &format!("clip/{}", ids[i]));
                Ok(synthetic_clip(clip_seed, *frames, *height, *width, ids[i].clone()))
            }
            ClipSource::Manifest { manifest, frames, height, width } => manifest.load(i, *frames, *height, *width),
        }
    }

    pub fn id(&self, i: usize) -> &str {
        match self {
            ClipSource::Synthetic { ids, .. } => &ids[i],
            ClipSource::Manifest { manifest, .. } => &manifest.clips[i].id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkItem {
    pub video: usize,
    pub request: SampleRequest,
}

/// Every sample the schedule emits, in output order.
pub fn work_items<'a>(cfg: &'a PipelineConfig, source: &'a ClipSource) -> impl Iterator<Item = WorkItem> + 'a {
    let spv = cfg.samples_per_video;
    (0..cfg.schedule.epochs).flat_map(move |epoch| {
        let emission = schedule_variant(&cfg.schedule, epoch);
        (0..source.len()).flat_map(move |video| {
            (0..spv).flat_map(move |sample_index| {
                emission.variants().iter().map(move |&variant| {
                    let pair = (emission == Emission::Both).then(|| {
                        let other = if variant == Variant::Augmented { Variant::Original } else { Variant::Augmented };
                        sample_id(source.id(video), epoch, sample_index, other)
                    });
                    WorkItem { video, request: SampleRequest { epoch, sample_index, variant, pair } }
                })
            })
        })
    })
}

pub fn build_item(env: &SampleEnv, source: &ClipSource, item: &WorkItem) -> Result<TrainingSample> {
    let clip = source.load(item.video)?;
    build_sample(env, &clip, &item.request)
}

/// Worker count from an explicit value, `MOTION_PREP_WORKERS`, or the
/// machine's parallelism, in that order.
pub fn resolve_workers(explicit: Option<usize>) -> usize {
    explicit
        .or_else(|| std::env::var(WORKERS_ENV).ok().and_then(|v| v.parse().ok()))
        .or_else(|| std::thread::available_parallelism().ok().map(usize::from))
        .unwrap_or(1)
        .max(1)
}

#[cfg(feature = "parallel")]
fn build_chunk(env: &SampleEnv, source: &ClipSource, chunk: &[WorkItem], pool: Option<&rayon::ThreadPool>) -> Vec<Result<TrainingSample>> {
    use rayon::prelude::*;
    match pool {
        Some(pool) => pool.install(|| chunk.par_iter().map(|item| build_item(env, source, item)).collect()),
        None => chunk.iter().map(|item| build_item(env, source, item)).collect(),
    }
}

/// Runs the whole schedule and writes shards plus `manifest.json` to `out`.
pub fn generate(env: &SampleEnv, source: &ClipSource, out: &Path, shard_size: usize, workers: usize) -> Result<ShardManifest> {
    let cfg = &env.config;
    let mut writer = ShardWriter::create(out, shard_size)?;
    let chunk_len = (4 * workers).max(1);

    #[cfg(feature = "parallel")]
    let pool = if workers > 1 {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map_err(|e| crate::Error::Config(format!("worker pool: {e}")))?,
        )
    } else {
        None
    };

    let mut items = work_items(cfg, source);
    loop {
        let chunk: Vec<WorkItem> = items.by_ref().take(chunk_len).collect();
        if chunk.is_empty() {
            break;
        }
        #[cfg(feature = "parallel")]
        let built = build_chunk(env, source, &chunk, pool.as_ref());
        #[cfg(not(feature = "parallel"))]
        let built: Vec<Result<TrainingSample>> = chunk.iter().map(|item| build_item(env, source, item)).collect();
        for sample in built {
            writer.push(&sample?)?;
        }
    }
    writer.finish(cfg, effective_epochs(cfg.schedule.epochs.into(), cfg.samples_per_video.into()))
}
