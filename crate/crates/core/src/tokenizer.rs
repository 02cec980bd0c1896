//! Space-time tokenization.
//!
//! A clip is cut into non-overlapping `p_t x p_s x p_s` cubes. Tokens are
//! numbered row-major over the grid `(tau, row, col)`:
//! `i = tau * (H/p_s) * (W/p_s) + row * (W/p_s) + col`.
//! Inside a token block pixels are laid out `(dt, dy, dx, channel)`,
//! row-major. Both orders are part of the shard format.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::compositor::Clip;
use crate::error::{config_err, shape_err, Error, Result};

pub const CHANNELS: usize = 3;

/// Declared in shard manifests; identifies the two orders above.
pub const FLATTENING_ORDER: &str = "tokens: row-major (tau, row, col); block: row-major (dt, dy, dx, channel)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenGeometry {
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub temporal_patch: usize,
    pub spatial_patch: usize,
}

impl Default for TokenGeometry {
    fn default() -> Self {
        Self { frames: 16, height: 224, width: 224, temporal_patch: 2, spatial_patch: 16 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GridPos {
    pub tau: usize,
    pub row: usize,
    pub col: usize,
}

/// Pixel ranges covered by one token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cube {
    pub frames: Range<usize>,
    pub rows: Range<usize>,
    pub cols: Range<usize>,
}

impl TokenGeometry {
    pub fn new(frames: usize, height: usize, width: usize, temporal_patch: usize, spatial_patch: usize) -> Result<Self> {
        let g = Self { frames, height, width, temporal_patch, spatial_patch };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.temporal_patch == 0 || self.spatial_patch == 0 {
            return Err(config_err("patch sizes must be positive"));
        }
        if self.frames == 0 || self.height == 0 || self.width == 0 {
            return Err(config_err("clip dimensions must be positive"));
        }
        if !self.frames.is_multiple_of(self.temporal_patch) {
            return Err(config_err(format!(
                "temporal patch {} does not divide {} frames",
                self.temporal_patch, self.frames
            )));
        }
        if !self.height.is_multiple_of(self.spatial_patch) || !self.width.is_multiple_of(self.spatial_patch) {
            return Err(config_err(format!(
                "spatial patch {} does not divide {}x{}",
                self.spatial_patch, self.height, self.width
            )));
        }
        Ok(())
    }

    pub fn grid_frames(&self) -> usize {
        self.frames / self.temporal_patch
    }

    pub fn grid_rows(&self) -> usize {
        self.height / self.spatial_patch
    }

    pub fn grid_cols(&self) -> usize {
        self.width / self.spatial_patch
    }

    /// Number of spatial grid cells (tube positions).
    pub fn spatial_count(&self) -> usize {
        self.grid_rows() * self.grid_cols()
    }

    pub fn token_count(&self) -> usize {
        self.grid_frames() * self.spatial_count()
    }

    pub fn block_len(&self) -> usize {
        self.temporal_patch * self.spatial_patch * self.spatial_patch * CHANNELS
    }

    pub fn flat_index(&self, pos: GridPos) -> usize {
        pos.tau * self.spatial_count() + pos.row * self.grid_cols() + pos.col
    }

    pub fn grid_pos(&self, index: usize) -> GridPos {
        let s = self.spatial_count();
        let rem = index % s;
        GridPos { tau: index / s, row: rem / self.grid_cols(), col: rem % self.grid_cols() }
    }

    /// Token containing pixel `(t, h, w)`.
    pub fn token_of_pixel(&self, t: usize, h: usize, w: usize) -> Result<usize> {
        if t >= self.frames || h >= self.height || w >= self.width {
            return Err(shape_err(format!(
                "pixel ({t}, {h}, {w}) outside {}x{}x{}",
                self.frames, self.height, self.width
            )));
        }
        Ok(self.flat_index(GridPos {
            tau: t / self.temporal_patch,
            row: h / self.spatial_patch,
            col: w / self.spatial_patch,
        }))
    }

    pub fn cube_of_token(&self, index: usize) -> Result<Cube> {
        let n = self.token_count();
        if index >= n {
            return Err(Error::OutOfRange { index, len: n });
        }
        let GridPos { tau, row, col } = self.grid_pos(index);
        let (pt, ps) = (self.temporal_patch, self.spatial_patch);
        Ok(Cube {
            frames: tau * pt..(tau + 1) * pt,
            rows: row * ps..(row + 1) * ps,
            cols: col * ps..(col + 1) * ps,
        })
    }

    pub fn check_clip(&self, clip: &Clip) -> Result<()> {
        if (clip.frames, clip.height, clip.width) != (self.frames, self.height, self.width) {
            return Err(shape_err(format!(
                "clip is {}x{}x{}, geometry expects {}x{}x{}",
                clip.frames, clip.height, clip.width, self.frames, self.height, self.width
            )));
        }
        Ok(())
    }
}

/// `count` fixed-size token blocks stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct Tokens {
    pub block_len: usize,
    pub data: Vec<f32>,
}

impl Tokens {
    pub fn new(block_len: usize, data: Vec<f32>) -> Result<Self> {
        if block_len == 0 || !data.len().is_multiple_of(block_len) {
            return Err(shape_err(format!("{} values is not a multiple of block length {block_len}", data.len())));
        }
        Ok(Self { block_len, data })
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.block_len
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn block(&self, i: usize) -> &[f32] {
        &self.data[i * self.block_len..(i + 1) * self.block_len]
    }

    pub fn blocks(&self) -> std::slice::ChunksExact<'_, f32> {
        self.data.chunks_exact(self.block_len)
    }
}

pub fn tokenize(clip: &Clip, geom: &TokenGeometry) -> Result<Tokens> {
    geom.validate()?;
    geom.check_clip(clip)?;
    let (pt, ps) = (geom.temporal_patch, geom.spatial_patch);
    let run = ps * CHANNELS;
    let mut data = Vec::with_capacity(clip.data.len());
    for index in 0..geom.token_count() {
        let GridPos { tau, row, col } = geom.grid_pos(index);
        for t in tau * pt..(tau + 1) * pt {
            for h in row * ps..(row + 1) * ps {
                let start = ((t * geom.height + h) * geom.width + col * ps) * CHANNELS;
                data.extend_from_slice(&clip.data[start..start + run]);
            }
        }
    }
    Ok(Tokens { block_len: geom.block_len(), data })
}

pub fn untokenize(tokens: &Tokens, geom: &TokenGeometry, source_id: impl Into<String>) -> Result<Clip> {
    geom.validate()?;
    if tokens.block_len != geom.block_len() || tokens.len() != geom.token_count() {
        return Err(shape_err(format!(
            "{} tokens of length {} do not match geometry ({} of {})",
            tokens.len(),
            tokens.block_len,
            geom.token_count(),
            geom.block_len()
        )));
    }
    let (pt, ps) = (geom.temporal_patch, geom.spatial_patch);
    let run = ps * CHANNELS;
    let mut data = vec![0.0f32; geom.frames * geom.height * geom.width * CHANNELS];
    for (index, block) in tokens.blocks().enumerate() {
        let GridPos { tau, row, col } = geom.grid_pos(index);
        let mut src = block.chunks_exact(run);
        for t in tau * pt..(tau + 1) * pt {
            for h in row * ps..(row + 1) * ps {
                let start = ((t * geom.height + h) * geom.width + col * ps) * CHANNELS;
                data[start..start + run].copy_from_slice(src.next().expect("block sized by geometry"));
            }
        }
    }
    Ok(Clip { frames: geom.frames, height: geom.height, width: geom.width, data, source_id: source_id.into() })
}
