//! Offline preview images: composited frames and mask overlays.

use std::path::{Path, PathBuf};

use crate::compositor::Clip;
use crate::error::Result;
use crate::io::write_rgb_png;
use crate::masking::{MaskSet, Provenance};
use crate::tokenizer::TokenGeometry;

const SHADE: [f32; 3] = [0.5, 0.5, 0.5];
const TRAJECTORY_TINT: [f32; 3] = [0.9, 0.1, 0.1];
const OVERLAY_WEIGHT: f32 = 0.65;

/// Frame `t` with masked tokens shaded gray (tube) or red (trajectory).
pub fn mask_overlay(clip: &Clip, mask: &MaskSet, geom: &TokenGeometry, t: usize) -> Vec<f32> {
    let mut out = clip.frame(t).to_vec();
    let (ps, cols, s) = (geom.spatial_patch, geom.grid_cols(), geom.spatial_count());
    let tau = t / geom.temporal_patch;
    for h in 0..clip.height {
        for w in 0..clip.width {
            let index = (tau * s + (h / ps) * cols + w / ps) as u32;
            let tint = match mask.provenance_of(index) {
                Some(Provenance::Tube) => SHADE,
                Some(Provenance::Trajectory) => TRAJECTORY_TINT,
                None => continue,
            };
            let k = (h * clip.width + w) * 3;
            for ch in 0..3 {
                out[k + ch] = (1.0 - OVERLAY_WEIGHT) * out[k + ch] + OVERLAY_WEIGHT * tint[ch];
            }
        }
    }
    out
}

/// Writes `frame_TTT.png` and `mask_TTT.png` for every frame; returns the
/// paths in that order per frame.
pub fn write_preview(clip: &Clip, mask: &MaskSet, geom: &TokenGeometry, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::with_capacity(2 * clip.frames);
    for t in 0..clip.frames {
        let frame = dir.join(format!("frame_{t:03}.png"));
        write_rgb_png(&frame, clip.height, clip.width, clip.frame(t))?;
        let overlay = dir.join(format!("mask_{t:03}.png"));
        write_rgb_png(&overlay, clip.height, clip.width, &mask_overlay(clip, mask, geom, t))?;
        written.push(frame);
        written.push(overlay);
    }
    Ok(written)
}
