//! Reconstruction targets and masked reconstruction losses.
//!
//! Feature targets come from a [`TeacherFeatureProvider`], which yields one
//! feature grid per frame. Each space-time token takes the feature of its
//! spatial cell in the first frame it covers.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::compositor::Clip;
use crate::error::{shape_err, Error, Result};
use crate::masking::MaskSet;
use crate::rng::seeded;
use crate::tokenizer::{GridPos, TokenGeometry, Tokens};

/// Per-frame feature grids, `T x rows x cols x dim`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrid {
    pub frames: usize,
    pub rows: usize,
    pub cols: usize,
    pub dim: usize,
    pub data: Vec<f32>,
}

impl FeatureGrid {
    pub fn new(frames: usize, rows: usize, cols: usize, dim: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != frames * rows * cols * dim {
            return Err(shape_err(format!(
                "feature grid {frames}x{rows}x{cols}x{dim} needs {} values, got {}",
                frames * rows * cols * dim,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("teacher features"));
        }
        Ok(Self { frames, rows, cols, dim, data })
    }

    pub fn vector(&self, t: usize, row: usize, col: usize) -> &[f32] {
        let start = ((t * self.rows + row) * self.cols + col) * self.dim;
        &self.data[start..start + self.dim]
    }
}

/// Source of per-frame patch-grid teacher features (class token excluded).
pub trait TeacherFeatureProvider: Send + Sync {
    fn dim(&self) -> usize;
    fn features(&self, clip: &Clip) -> Result<FeatureGrid>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetKind {
    Pixels,
    Features,
}

/// One target vector per token, in flat token order.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenTargets {
    pub kind: TargetKind,
    pub dim: usize,
    pub data: Vec<f32>,
}

impl TokenTargets {
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn vector(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Concatenated target vectors for the given token indices.
    pub fn gather(&self, indices: &[u32]) -> Vec<f32> {
        let mut out = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            out.extend_from_slice(self.vector(i as usize));
        }
        out
    }
}

/// Token `(tau, r, c)` gets `grid[tau * p_t][r][c]`.
pub fn align_features(grid: &FeatureGrid, geom: &TokenGeometry) -> Result<TokenTargets> {
    geom.validate()?;
    if (grid.frames, grid.rows, grid.cols) != (geom.frames, geom.grid_rows(), geom.grid_cols()) {
        return Err(shape_err(format!(
            "teacher grid {}x{}x{} does not match token grid {}x{}x{}",
            grid.frames,
            grid.rows,
            grid.cols,
            geom.frames,
            geom.grid_rows(),
            geom.grid_cols()
        )));
    }
    let mut data = Vec::with_capacity(geom.token_count() * grid.dim);
    for i in 0..geom.token_count() {
        let GridPos { tau, row, col } = geom.grid_pos(i);
        data.extend_from_slice(grid.vector(tau * geom.temporal_patch, row, col));
    }
    Ok(TokenTargets { kind: TargetKind::Features, dim: grid.dim, data })
}

pub fn pixel_targets(tokens: &Tokens) -> TokenTargets {
    TokenTargets { kind: TargetKind::Pixels, dim: tokens.block_len, data: tokens.data.clone() }
}

/// Mean over masked tokens of the squared L2 distance between target and
/// prediction. `predictions` holds one `dim`-vector per entry of `indices`;
/// the indices must be exactly the masked set, in any order.
pub fn masked_loss(targets: &TokenTargets, indices: &[u32], predictions: &[f32], mask: &MaskSet) -> Result<f64> {
    if targets.len() != mask.token_count {
        return Err(shape_err(format!("{} targets for a mask over {} tokens", targets.len(), mask.token_count)));
    }
    if predictions.len() != indices.len() * targets.dim {
        return Err(shape_err(format!(
            "{} prediction values for {} indices of dim {}",
            predictions.len(),
            indices.len(),
            targets.dim
        )));
    }
    let mut sorted = indices.to_vec();
    sorted.sort_unstable();
    if sorted != mask.masked {
        return Err(shape_err("prediction indices differ from the masked set"));
    }
    if mask.masked.is_empty() {
        return Err(shape_err("loss over an empty masked set"));
    }
    if predictions.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("predictions"));
    }
    let mut total = 0.0f64;
    for (&i, pred) in indices.iter().zip(predictions.chunks_exact(targets.dim)) {
        let target = targets.vector(i as usize);
        total += target
            .iter()
            .zip(pred)
            .map(|(&a, &b)| {
                let d = f64::from(a) - f64::from(b);
                d * d
            })
            .sum::<f64>();
    }
    if !total.is_finite() {
        return Err(Error::NonFinite("targets"));
    }
    Ok(total / mask.masked.len() as f64)
}

fn expect_kind(targets: &TokenTargets, kind: TargetKind) -> Result<()> {
    if targets.kind != kind {
        return Err(shape_err(format!("expected {kind:?} targets, got {:?}", targets.kind)));
    }
    Ok(())
}

pub fn feature_loss(targets: &TokenTargets, indices: &[u32], predictions: &[f32], mask: &MaskSet) -> Result<f64> {
    expect_kind(targets, TargetKind::Features)?;
    masked_loss(targets, indices, predictions, mask)
}

pub fn pixel_loss(targets: &TokenTargets, indices: &[u32], predictions: &[f32], mask: &MaskSet) -> Result<f64> {
    expect_kind(targets, TargetKind::Pixels)?;
    masked_loss(targets, indices, predictions, mask)
}

/// Deterministic stand-in teacher: a fixed random linear map (no bias) of
/// each patch's mean color.
#[derive(Debug, Clone)]
pub struct MockTeacher {
    dim: usize,
    patch: usize,
    projection: Vec<f32>,
}

impl MockTeacher {
    pub fn new(seed: u64, dim: usize, patch: usize) -> Result<Self> {
        if dim == 0 || patch == 0 {
            return Err(shape_err("mock teacher needs positive dim and patch size"));
        }
        let mut rng = seeded(seed);
        let projection = (0..dim * 3).map(|_| rng.random_range(-1.0f32..1.0)).collect();
        Ok(Self { dim, patch, projection })
    }
}

impl TeacherFeatureProvider for MockTeacher {
    fn dim(&self) -> usize {
        self.dim
    }

    fn features(&self, clip: &Clip) -> Result<FeatureGrid> {
        let p = self.patch;
        if !clip.height.is_multiple_of(p) || !clip.width.is_multiple_of(p) {
            return Err(shape_err(format!("patch {p} does not divide {}x{}", clip.height, clip.width)));
        }
        let (rows, cols) = (clip.height / p, clip.width / p);
        let mut data = Vec::with_capacity(clip.frames * rows * cols * self.dim);
        let inv = 1.0 / (p * p) as f64;
        for t in 0..clip.frames {
            let frame = clip.frame(t);
            for r in 0..rows {
                for c in 0..cols {
                    let mut mean = [0.0f64; 3];
                    for h in r * p..(r + 1) * p {
                        let line = &frame[(h * clip.width + c * p) * 3..][..p * 3];
                        for px in line.chunks_exact(3) {
                            for ch in 0..3 {
                                mean[ch] += f64::from(px[ch]);
                            }
                        }
                    }
                    let mean = mean.map(|v| (v * inv) as f32);
                    for w in self.projection.chunks_exact(3) {
                        data.push(w[0] * mean[0] + w[1] * mean[1] + w[2] * mean[2]);
                    }
                }
            }
        }
        FeatureGrid::new(clip.frames, rows, cols, self.dim, data)
    }
}

pub const ARCHIVE_MAGIC: &[u8; 4] = b"SMTF";
pub const ARCHIVE_VERSION: u16 = 1;
const ARCHIVE_HEADER_LEN: usize = 4 + 2 + 4 * 4;

/// Writes a feature archive: magic, `u16` version, `u32` T/rows/cols/dim,
/// then row-major `f32`, all little-endian.
pub fn write_feature_archive(path: &Path, grid: &FeatureGrid) -> Result<()> {
    let mut buf = Vec::with_capacity(ARCHIVE_HEADER_LEN + grid.data.len() * 4);
    buf.extend_from_slice(ARCHIVE_MAGIC);
    buf.extend_from_slice(&ARCHIVE_VERSION.to_le_bytes());
    for d in [grid.frames, grid.rows, grid.cols, grid.dim] {
        buf.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in &grid.data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

pub fn read_feature_archive(path: &Path) -> Result<FeatureGrid> {
    let bytes = fs::read(path)?;
    let corrupt = |reason: String| Error::Archive { path: path.display().to_string(), reason };
    if bytes.len() < ARCHIVE_HEADER_LEN || &bytes[..4] != ARCHIVE_MAGIC {
        return Err(corrupt("missing SMTF header".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != ARCHIVE_VERSION {
        return Err(Error::Version { found: version.into(), expected: ARCHIVE_VERSION.into() });
    }
    let dim_at = |k: usize| {
        let o = 6 + 4 * k;
        u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes")) as usize
    };
    let (frames, rows, cols, dim) = (dim_at(0), dim_at(1), dim_at(2), dim_at(3));
    let count = frames
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .and_then(|v| v.checked_mul(dim))
        .ok_or_else(|| corrupt("header dimensions overflow".into()))?;
    let body = &bytes[ARCHIVE_HEADER_LEN..];
    if body.len() != count * 4 {
        return Err(corrupt(format!("expected {} payload bytes, found {}", count * 4, body.len())));
    }
    let data = body.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes"))).collect();
    FeatureGrid::new(frames, rows, cols, dim, data).map_err(|e| match e {
        Error::NonFinite(_) => corrupt("non-finite feature value".into()),
        other => other,
    })
}

/// Precomputed features stored as one archive per clip, located through a
/// JSON index mapping `source_id` to a file path (relative to the index).
#[derive(Debug, Clone)]
pub struct FileTeacher {
    root: PathBuf,
    index: BTreeMap<String, PathBuf>,
    dim: usize,
}

impl FileTeacher {
    pub fn open(index_path: &Path) -> Result<Self> {
        let index: BTreeMap<String, PathBuf> = serde_json::from_slice(&fs::read(index_path)?)?;
        let root = index_path.parent().map(Path::to_path_buf).unwrap_or_default();
        let first = index.values().next().ok_or_else(|| Error::Archive {
            path: index_path.display().to_string(),
            reason: "feature index is empty".into(),
        })?;
        let dim = read_feature_archive(&root.join(first))?.dim;
        Ok(Self { root, index, dim })
    }

    pub fn sources(&self) -> impl Iterator<Item = &str> {
        self.index.keys().map(String::as_str)
    }
}

impl TeacherFeatureProvider for FileTeacher {
    fn dim(&self) -> usize {
        self.dim
    }

    fn features(&self, clip: &Clip) -> Result<FeatureGrid> {
        let rel = self
            .index
            .get(&clip.source_id)
            .ok_or_else(|| Error::MissingFeatures(clip.source_id.clone()))?;
        let path = self.root.join(rel);
        let grid = read_feature_archive(&path)?;
        if grid.dim != self.dim || grid.frames != clip.frames {
            return Err(Error::Archive {
                path: path.display().to_string(),
                reason: format!(
                    "archive is {} frames of dim {}, expected {} frames of dim {}",
                    grid.frames, grid.dim, clip.frames, self.dim
                ),
            });
        }
        Ok(grid)
    }
}
