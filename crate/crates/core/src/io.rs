//! File ingestion: RGBA object libraries, clip manifests and PNG output.
//!
//! Object index (`objects.json`):
//! ```json
//! { "objects": { "cat-001": { "path": "cat-001.png", "category": "cat", "size": [96, 80] } } }
//! ```
//! Clip manifest (`clips.json`); `raw` files hold `T*H*W*3` interleaved
//! RGB bytes, `frames` lists one image per frame, `image` is a single still:
//! ```json
//! { "clips": [ { "id": "v0", "raw": "v0.rgb" },
//!              { "id": "v1", "frames": ["v1/000.png", "v1/001.png"] },
//!              { "id": "p0", "image": "places/p0.png" } ] }
//! ```
//! Relative paths resolve against the directory of the JSON file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::compositor::{Clip, SegmentedObject};
use crate::error::{shape_err, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectEntry {
    pub path: PathBuf,
    #[serde(default)]
    pub category: String,
    /// Native `(height, width)`.
    pub size: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectIndex {
    pub objects: BTreeMap<String, ObjectEntry>,
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

pub fn load_rgba_png(path: &Path, object_id: impl Into<String>) -> Result<SegmentedObject> {
    let img = image::open(path)?.to_rgba8();
    let (w, h) = img.dimensions();
    SegmentedObject::from_rgba8(h as usize, w as usize, img.as_raw(), object_id)
}

/// Loads every object in the index, sorted by id.
pub fn load_object_library(index_path: &Path) -> Result<Vec<SegmentedObject>> {
    let index: ObjectIndex = serde_json::from_slice(&fs::read(index_path)?)?;
    let base = base_dir(index_path);
    index
        .objects
        .iter()
        .map(|(id, entry)| {
            let obj = load_rgba_png(&base.join(&entry.path), id.clone())?;
            if (obj.height, obj.width) != entry.size {
                return Err(shape_err(format!(
                    "object {id} is {}x{}, index says {}x{}",
                    obj.height, obj.width, entry.size.0, entry.size.1
                )));
            }
            Ok(obj)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ClipData {
    Raw { raw: PathBuf },
    Frames { frames: Vec<PathBuf> },
    Image { image: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipEntry {
    pub id: String,
    #[serde(flatten)]
    pub data: ClipData,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClipManifest {
    pub clips: Vec<ClipEntry>,
    #[serde(skip)]
    pub base: PathBuf,
}

impl ClipManifest {
    pub fn open(path: &Path) -> Result<Self> {
        let mut manifest: ClipManifest = serde_json::from_slice(&fs::read(path)?)?;
        manifest.base = base_dir(path);
        Ok(manifest)
    }

    /// Loads clip `i`; `raw` clips take their shape from `(frames, height, width)`.
    pub fn load(&self, i: usize, frames: usize, height: usize, width: usize) -> Result<Clip> {
        let entry = &self.clips[i];
        match &entry.data {
            ClipData::Raw { raw } => {
                let bytes = fs::read(self.base.join(raw))?;
                Clip::from_rgb8(frames, height, width, &bytes, entry.id.clone())
            }
            ClipData::Frames { frames: paths } => {
                let mut bytes = Vec::new();
                let mut dims = None;
                for p in paths {
                    let img = image::open(self.base.join(p))?.to_rgb8();
                    let d = (img.height() as usize, img.width() as usize);
                    if *dims.get_or_insert(d) != d {
                        return Err(shape_err(format!("frame {} has a different size", p.display())));
                    }
                    bytes.extend_from_slice(img.as_raw());
                }
                let (h, w) = dims.unwrap_or((height, width));
                Clip::from_rgb8(paths.len(), h, w, &bytes, entry.id.clone())
            }
            ClipData::Image { image: p } => {
                let img = image::open(self.base.join(p))?.to_rgb8();
                Clip::from_rgb8(1, img.height() as usize, img.width() as usize, img.as_raw(), entry.id.clone())
            }
        }
    }
}

fn to_byte(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Writes an `H x W x 3` float image as an 8-bit PNG.
pub fn write_rgb_png(path: &Path, height: usize, width: usize, rgb: &[f32]) -> Result<()> {
    let bytes: Vec<u8> = rgb.iter().map(|&v| to_byte(v)).collect();
    image::save_buffer(path, &bytes, width as u32, height as u32, image::ColorType::Rgb8)?;
    Ok(())
}
