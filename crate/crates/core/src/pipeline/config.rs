use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::compositor::BackgroundKind;
use crate::error::{config_err, Result};
use crate::geometry::{Range, DEFAULT_ANGLE_RANGE, DEFAULT_SCALE_RANGE};
use crate::masking::MaskConfig;
use crate::targets::TargetKind;
use crate::tokenizer::TokenGeometry;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaskSettings {
    pub ratio: f64,
    pub use_trajectory: bool,
}

impl Default for MaskSettings {
    fn default() -> Self {
        Self { ratio: 0.8, use_trajectory: true }
    }
}

impl MaskSettings {
    pub fn with_seed(&self, seed: u64) -> MaskConfig {
        MaskConfig { ratio: self.ratio, use_trajectory: self.use_trajectory, seed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObjectSettings {
    /// Objects composited per augmented clip.
    pub count: usize,
    /// Square sprite side is drawn uniformly from `size_min..=size_max`.
    pub size_min: usize,
    pub size_max: usize,
    /// Degrees.
    pub angle_range: Range,
    pub scale_range: Range,
    /// Raw path points per frame (`M / T`).
    pub raw_point_factor: usize,
    pub smoothing: f64,
    /// Object index JSON; procedural sprites are used when absent.
    pub library: Option<PathBuf>,
    pub procedural_count: usize,
}

impl Default for ObjectSettings {
    fn default() -> Self {
        Self {
            count: 2,
            size_min: 32,
            size_max: 128,
            angle_range: DEFAULT_ANGLE_RANGE,
            scale_range: DEFAULT_SCALE_RANGE,
            raw_point_factor: 10,
            smoothing: 8.0,
            library: None,
            procedural_count: 16,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    /// Augmented clips every epoch.
    Single,
    /// Original and augmented clip every epoch, emitted as adjacent pairs.
    Mixed,
    /// Augmented clips for the first stage, original clips afterwards.
    Progressive,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSettings {
    pub kind: ScheduleKind,
    pub epochs: u32,
    /// Stage lengths for the progressive schedule.
    #[serde(default)]
    pub stage_split: Option<[u32; 2]>,
}

impl Default for ScheduleSettings {
    fn default() -> Self {
        Self { kind: ScheduleKind::Progressive, epochs: 600, stage_split: Some([300, 300]) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TeacherSpec {
    Mock { dim: usize, seed: u64 },
    File { index: PathBuf },
}

impl Default for TeacherSpec {
    fn default() -> Self {
        TeacherSpec::Mock { dim: 768, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SourceSpec {
    /// Procedurally generated moving-texture clips.
    Synthetic { count: usize },
    /// Clip manifest JSON.
    Manifest { path: PathBuf },
}

impl Default for SourceSpec {
    fn default() -> Self {
        SourceSpec::Synthetic { count: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub geometry: TokenGeometry,
    pub mask: MaskSettings,
    pub objects: ObjectSettings,
    pub background: BackgroundKind,
    pub schedule: ScheduleSettings,
    pub samples_per_video: u32,
    pub seed: u64,
    pub target: TargetKind,
    pub teacher: TeacherSpec,
    pub source: SourceSpec,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            geometry: TokenGeometry::default(),
            mask: MaskSettings::default(),
            objects: ObjectSettings::default(),
            background: BackgroundKind::NaturalClip,
            schedule: ScheduleSettings::default(),
            samples_per_video: 2,
            seed: 0,
            target: TargetKind::Features,
            teacher: TeacherSpec::default(),
            source: SourceSpec::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.mask.with_seed(0).validate()?;
        let o = &self.objects;
        if o.size_min == 0 || o.size_min > o.size_max {
            return Err(config_err(format!("object size range [{}, {}] is invalid", o.size_min, o.size_max)));
        }
        if !(o.scale_range.lo > 0.0 && o.scale_range.lo <= o.scale_range.hi) {
            return Err(config_err("scale range must be positive and ordered"));
        }
        if !(o.angle_range.lo <= o.angle_range.hi) {
            return Err(config_err("angle range must be ordered"));
        }
        if o.count > 0 {
            if self.geometry.frames < 3 {
                return Err(config_err("object motion needs at least 3 frames"));
            }
            if o.raw_point_factor < 2 {
                return Err(config_err("raw_point_factor must be at least 2"));
            }
            if !(o.smoothing > 0.0) {
                return Err(config_err("smoothing must be positive"));
            }
            if o.library.is_none() && o.procedural_count == 0 {
                return Err(config_err("procedural_count must be positive without an object library"));
            }
        }
        if self.samples_per_video == 0 {
            return Err(config_err("samples_per_video must be positive"));
        }
        if let TeacherSpec::Mock { dim: 0, .. } = self.teacher {
            return Err(config_err("mock teacher dim must be positive"));
        }
        let s = &self.schedule;
        if s.kind == ScheduleKind::Progressive {
            match s.stage_split {
                Some([a, b]) if a > 0 && b > 0 && a + b == s.epochs => {}
                _ => {
                    return Err(config_err(format!(
                        "progressive schedule needs two positive stages summing to {} epochs",
                        s.epochs
                    )))
                }
            }
        }
        Ok(())
    }

    /// Canonical JSON (field declaration order).
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_json().as_bytes());
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        format!("sha256:{hex}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let cfg = PipelineConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.objects.count, 2);
        assert_eq!(cfg.samples_per_video, 2);
        assert_eq!(cfg.schedule.stage_split, Some([300, 300]));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(PipelineConfig::from_json(r#"{"seed": 1, "bogus": 2}"#).is_err());
        assert!(PipelineConfig::from_json(r#"{"mask": {"ratio": 0.9, "extra": true}}"#).is_err());
        let cfg = PipelineConfig::from_json(r#"{"mask": {"ratio": 0.9}}"#).unwrap();
        assert_eq!(cfg.mask.ratio, 0.9);
        assert!(cfg.mask.use_trajectory);
    }

    #[test]
    fn progressive_split_checked() {
        let bad = r#"{"schedule": {"kind": "progressive", "epochs": 4, "stage_split": [2, 1]}}"#;
        assert!(PipelineConfig::from_json(bad).is_err());
        let zero = r#"{"schedule": {"kind": "progressive", "epochs": 4, "stage_split": [4, 0]}}"#;
        assert!(PipelineConfig::from_json(zero).is_err());
        let ok = r#"{"schedule": {"kind": "mixed", "epochs": 4}}"#;
        assert!(PipelineConfig::from_json(ok).is_ok());
    }

    #[test]
    fn hash_tracks_content() {
        let a = PipelineConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
    }
}
