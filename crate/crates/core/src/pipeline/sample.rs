use serde::{Deserialize, Serialize};

use crate::compositor::{composite_many, make_background, BackgroundKind, BackgroundSource, Clip, ClipDims, Footprint, MotionPlan, SegmentedObject};
use crate::error::{config_err, shape_err, Result};
use crate::geometry::{generate_trajectory, sample_keyframe_transforms, TrajectoryConfig};
use crate::io::load_object_library;
use crate::masking::{mask_apply, object_token_set, trajectory_mask, tube_mask, MaskSet};
use crate::pipeline::config::{PipelineConfig, TeacherSpec};
use crate::pipeline::seed::{derive_seed, stream_seed};
use crate::rng::{seeded, uniform_index};
use crate::synth::procedural_library;
use crate::targets::{align_features, pixel_targets, FileTeacher, MockTeacher, TargetKind, TeacherFeatureProvider};
use crate::tokenizer::{tokenize, TokenGeometry};

/// Native side length of procedural sprites.
const PROCEDURAL_SIZE: usize = 96;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Augmented,
    Original,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Augmented => "augmented",
            Variant::Original => "original",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskKind {
    Trajectory,
    Tube,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectRecord {
    pub object_id: String,
    pub size: (usize, usize),
}

/// Metadata stored as the JSON header of each shard record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleHeader {
    pub sample_id: String,
    pub video_id: String,
    pub epoch: u32,
    pub sample_index: u32,
    pub variant: Variant,
    /// Derived per-sample seed; background, objects and mask use streams of it.
    pub seed: u64,
    pub background: BackgroundKind,
    pub mask_kind: MaskKind,
    pub mask_ratio: f64,
    pub geometry: TokenGeometry,
    pub target_kind: TargetKind,
    pub target_dim: usize,
    pub token_count: usize,
    pub masked_count: usize,
    /// Masked tokens with trajectory provenance; all other masked tokens are tube-masked.
    pub trajectory_indices: Vec<u32>,
    pub objects: Vec<ObjectRecord>,
    /// Sample id of the paired variant (mixed schedule).
    #[serde(default)]
    pub pair: Option<String>,
}

impl SampleHeader {
    pub fn unmasked_count(&self) -> usize {
        self.token_count - self.masked_count
    }

    pub fn block_len(&self) -> usize {
        self.geometry.block_len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub header: SampleHeader,
    /// Unmasked token blocks, ascending token order.
    pub unmasked: Vec<f32>,
    /// Ascending.
    pub masked: Vec<u32>,
    /// One target vector per masked index, same order.
    pub targets: Vec<f32>,
}

impl TrainingSample {
    pub fn mask_set(&self) -> Result<MaskSet> {
        MaskSet::from_parts(self.header.token_count, self.masked.clone(), &self.header.trajectory_indices)
    }
}

/// Intermediate products of [`build_sample`], kept for previews.
#[derive(Debug, Clone)]
pub struct SampleArtifacts {
    pub clip: Clip,
    pub footprint: Footprint,
    pub mask: MaskSet,
    pub plans: Vec<MotionPlan>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleRequest {
    pub epoch: u32,
    pub sample_index: u32,
    pub variant: Variant,
    pub pair: Option<String>,
}

pub fn sample_id(video_id: &str, epoch: u32, sample_index: u32, variant: Variant) -> String {
    format!("{video_id}/e{epoch:05}/s{sample_index:03}/{}", variant.name())
}

/// Everything needed to build samples: config, object library, teacher.
pub struct SampleEnv {
    pub config: PipelineConfig,
    pub objects: Vec<SegmentedObject>,
    pub teacher: Option<Box<dyn TeacherFeatureProvider>>,
}

impl SampleEnv {
    pub fn new(config: PipelineConfig) -> Result<Self> {
        config.validate()?;
        let objects = match &config.objects.library {
            Some(path) => load_object_library(path)?,
            None => procedural_library(
                stream_seed(config.seed, "procedural-objects"),
                config.objects.procedural_count,
                PROCEDURAL_SIZE,
            ),
        };
        if config.objects.count > 0 && objects.is_empty() {
            return Err(config_err("object library is empty"));
        }
        let teacher: Option<Box<dyn TeacherFeatureProvider>> = match config.target {
            TargetKind::Pixels => None,
            TargetKind::Features => Some(match &config.teacher {
                TeacherSpec::Mock { dim, seed } => Box::new(MockTeacher::new(*seed, *dim, config.geometry.spatial_patch)?),
                TeacherSpec::File { index } => Box::new(FileTeacher::open(index)?),
            }),
        };
        Ok(Self { config, objects, teacher })
    }

    pub fn with_parts(config: PipelineConfig, objects: Vec<SegmentedObject>, teacher: Option<Box<dyn TeacherFeatureProvider>>) -> Result<Self> {
        config.validate()?;
        if config.target == TargetKind::Features && teacher.is_none() {
            return Err(config_err("feature targets need a teacher"));
        }
        Ok(Self { config, objects, teacher })
    }

    fn background(&self, source: &Clip, rng: &mut crate::rng::SampleRng) -> Result<Clip> {
        let g = &self.config.geometry;
        let dims = ClipDims { frames: g.frames, height: g.height, width: g.width };
        let kind = self.config.background;
        let src = kind.needs_source().then_some(BackgroundSource::Clip(source));
        make_background(kind, src, dims, rng, &source.source_id)
    }

    fn plan_objects(&self, rng: &mut crate::rng::SampleRng) -> Result<Vec<(MotionPlan, SegmentedObject)>> {
        let g = &self.config.geometry;
        let o = &self.config.objects;
        let mut plans = Vec::with_capacity(o.count);
        for _ in 0..o.count {
            let obj = &self.objects[uniform_index(rng, 0, self.objects.len() - 1)];
            let side = uniform_index(rng, o.size_min, o.size_max);
            let traj_cfg = TrajectoryConfig {
                frame_count: g.frames,
                frame_height: g.height,
                frame_width: g.width,
                raw_point_count: o.raw_point_factor * g.frames,
                smoothing: o.smoothing,
                seed: 0,
            };
            let trajectory = generate_trajectory(&traj_cfg, rng)?;
            let transforms = sample_keyframe_transforms(rng, o.angle_range, o.scale_range, g.frames)?;
            let plan = MotionPlan { trajectory, transforms, base_size: (side, side), object_id: obj.object_id.clone() };
            plans.push((plan, obj.clone()));
        }
        Ok(plans)
    }
}

pub fn build_sample(env: &SampleEnv, clip: &Clip, req: &SampleRequest) -> Result<TrainingSample> {
    build_sample_with_artifacts(env, clip, req).map(|(s, _)| s)
}

pub fn build_sample_with_artifacts(env: &SampleEnv, clip: &Clip, req: &SampleRequest) -> Result<(TrainingSample, SampleArtifacts)> {
    let cfg = &env.config;
    let geom = &cfg.geometry;
    if (clip.height, clip.width) != (geom.height, geom.width) {
        return Err(shape_err(format!(
            "clip {} is {}x{}, geometry expects {}x{}",
            clip.source_id, clip.height, clip.width, geom.height, geom.width
        )));
    }
    let seed = derive_seed(cfg.seed, &clip.source_id, req.sample_index.into(), req.epoch.into());

    let background = env.background(clip, &mut seeded(stream_seed(seed, "background")))?;

    let augment = req.variant == Variant::Augmented && cfg.objects.count > 0;
    let plans = if augment { env.plan_objects(&mut seeded(stream_seed(seed, "objects")))? } else { Vec::new() };
    let (composited, footprint) = composite_many(&background, &plans)?;

    let tokens = tokenize(&composited, geom)?;
    let mut mask_rng = seeded(stream_seed(seed, "mask"));
    let use_trajectory = augment && cfg.mask.use_trajectory;
    let mask = if use_trajectory {
        let object_tokens = object_token_set(&footprint, geom)?;
        trajectory_mask(geom, cfg.mask.ratio, &object_tokens, &mut mask_rng)?
    } else {
        tube_mask(geom, cfg.mask.ratio, &mut mask_rng)?
    };

    let all_targets = match cfg.target {
        TargetKind::Pixels => pixel_targets(&tokens),
        TargetKind::Features => {
            let teacher = env.teacher.as_ref().ok_or_else(|| config_err("feature targets need a teacher"))?;
            align_features(&teacher.features(&composited)?, geom)?
        }
    };
    let (unmasked, masked) = mask_apply(&tokens, &mask)?;
    let targets = all_targets.gather(&masked);

    let header = SampleHeader {
        sample_id: sample_id(&clip.source_id, req.epoch, req.sample_index, req.variant),
        video_id: clip.source_id.clone(),
        epoch: req.epoch,
        sample_index: req.sample_index,
        variant: req.variant,
        seed,
        background: cfg.background,
        mask_kind: if use_trajectory { MaskKind::Trajectory } else { MaskKind::Tube },
        mask_ratio: cfg.mask.ratio,
        geometry: *geom,
        target_kind: cfg.target,
        target_dim: all_targets.dim,
        token_count: geom.token_count(),
        masked_count: masked.len(),
        trajectory_indices: mask.trajectory_indices(),
        objects: plans
            .iter()
            .map(|(p, _)| ObjectRecord { object_id: p.object_id.clone(), size: p.base_size })
            .collect(),
        pair: req.pair.clone(),
    };
    let sample = TrainingSample { header, unmasked: unmasked.data, masked, targets };
    let artifacts = SampleArtifacts {
        clip: composited,
        footprint,
        mask,
        plans: plans.into_iter().map(|(p, _)| p).collect(),
    };
    Ok((sample, artifacts))
}
