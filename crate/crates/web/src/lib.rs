//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Three operations are exposed: a trajectory explorer (raw, smoothed and
//! per-frame centers), a sample renderer returning RGBA frames with the
//! mask overlay, and the masking statistics of that sample.

use motion_prep::compositor::{BackgroundKind, Clip};
use motion_prep::geometry::{downsample_path, gaussian_smooth, generate_raw_path, Point, TrajectoryConfig};
use motion_prep::masking::{MaskSet, Provenance};
use motion_prep::pipeline::{build_sample_with_artifacts, PipelineConfig, SampleEnv, SampleRequest, SourceSpec, Variant};
use motion_prep::preview::mask_overlay;
use motion_prep::rng::seeded;
use motion_prep::synth::synthetic_clip;
use motion_prep::targets::TargetKind;
use motion_prep::tokenizer::TokenGeometry;
use wasm_bindgen::prelude::*;

fn js_err(e: motion_prep::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn flatten(points: &[Point]) -> Vec<f64> {
    points.iter().flat_map(|p| [p.x, p.y]).collect()
}

/// Path stages as flat `[x0, y0, x1, y1, ...]` arrays (x = row, y = col).
#[wasm_bindgen]
pub struct TrajectoryView {
    raw: Vec<f64>,
    smooth: Vec<f64>,
    centers: Vec<f64>,
}

#[wasm_bindgen]
impl TrajectoryView {
    pub fn raw(&self) -> Vec<f64> {
        self.raw.clone()
    }

    pub fn smooth(&self) -> Vec<f64> {
        self.smooth.clone()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.centers.clone()
    }
}

#[wasm_bindgen]
pub fn explore_trajectory(seed: u64, frames: usize, size: usize, points_per_frame: usize, kappa: f64) -> Result<TrajectoryView, JsError> {
    let cfg = TrajectoryConfig {
        frame_count: frames,
        frame_height: size,
        frame_width: size,
        raw_point_count: points_per_frame * frames,
        smoothing: kappa,
        seed,
    };
    let raw = generate_raw_path(&cfg, &mut seeded(seed)).map_err(js_err)?;
    let limit = size as f64;
    let smooth: Vec<Point> = gaussian_smooth(&raw, kappa)
        .map_err(js_err)?
        .into_iter()
        .map(|p| Point::new(p.x.clamp(0.0, limit), p.y.clamp(0.0, limit)))
        .collect();
    let centers = downsample_path(&smooth, frames).map_err(js_err)?;
    Ok(TrajectoryView { raw: flatten(&raw), smooth: flatten(&smooth), centers: flatten(&centers.centers) })
}

/// One built sample: composited clip, mask and counts.
#[wasm_bindgen]
pub struct SampleView {
    clip: Clip,
    mask: MaskSet,
    geometry: TokenGeometry,
    object_tokens: usize,
}

#[wasm_bindgen]
impl SampleView {
    pub fn frames(&self) -> usize {
        self.clip.frames
    }

    pub fn height(&self) -> usize {
        self.clip.height
    }

    pub fn width(&self) -> usize {
        self.clip.width
    }

    /// RGBA bytes of frame `t`, optionally with masked tokens shaded.
    pub fn frame_rgba(&self, t: usize, overlay: bool) -> Vec<u8> {
        let rgb = if overlay { mask_overlay(&self.clip, &self.mask, &self.geometry, t) } else { self.clip.frame(t).to_vec() };
        rgb.chunks_exact(3)
            .flat_map(|px| [to_byte(px[0]), to_byte(px[1]), to_byte(px[2]), 255])
            .collect()
    }

    pub fn token_count(&self) -> usize {
        self.mask.token_count
    }

    pub fn masked_count(&self) -> usize {
        self.mask.masked.len()
    }

    pub fn trajectory_count(&self) -> usize {
        self.mask.count(Provenance::Trajectory)
    }

    pub fn tube_count(&self) -> usize {
        self.mask.count(Provenance::Tube)
    }

    /// Tokens touched by any composited object.
    pub fn object_token_count(&self) -> usize {
        self.object_tokens
    }
}

fn to_byte(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Builds one augmented sample on a procedural clip. `background` is one of
/// `natural-clip`, `repeated-frame`, `still-image`, `black`, `noise`.
#[wasm_bindgen]
pub fn render_sample(seed: u64, objects: usize, ratio: f64, background: &str, use_trajectory: bool, size: usize) -> Result<SampleView, JsError> {
    let background: BackgroundKind =
        background_kind(background).ok_or_else(|| JsError::new(&format!("unknown background `{background}`")))?;
    let geometry = TokenGeometry::new(16, size, size, 2, 16).map_err(js_err)?;
    let mut cfg = PipelineConfig {
        geometry,
        background,
        seed,
        target: TargetKind::Pixels,
        source: SourceSpec::Synthetic { count: 1 },
        ..PipelineConfig::default()
    };
    cfg.mask.ratio = ratio;
    cfg.mask.use_trajectory = use_trajectory;
    cfg.objects.count = objects;
    cfg.objects.size_min = size / 7;
    cfg.objects.size_max = size * 4 / 7;
    cfg.objects.procedural_count = 8;
    let env = SampleEnv::new(cfg).map_err(js_err)?;
    let clip = synthetic_clip(seed, 16, size, size, "demo");
    let req = SampleRequest { epoch: 0, sample_index: 0, variant: Variant::Augmented, pair: None };
    let (_, art) = build_sample_with_artifacts(&env, &clip, &req).map_err(js_err)?;
    let object_tokens = motion_prep::masking::object_token_set(&art.footprint, &geometry).map_err(js_err)?.len();
    Ok(SampleView { clip: art.clip, mask: art.mask, geometry, object_tokens })
}

fn background_kind(name: &str) -> Option<BackgroundKind> {
    [
        BackgroundKind::NaturalClip,
        BackgroundKind::RepeatedFrame,
        BackgroundKind::StillImage,
        BackgroundKind::Black,
        BackgroundKind::Noise,
    ]
    .into_iter()
    .find(|k| k.name() == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trajectory_stages_have_expected_lengths() {
        let view = explore_trajectory(3, 16, 112, 10, 8.0).unwrap();
        assert_eq!(view.raw().len(), 2 * 160);
        assert_eq!(view.smooth().len(), 2 * 160);
        assert_eq!(view.centers().len(), 2 * 16);
        assert!(view.centers().iter().all(|v| (0.0..=112.0).contains(v)));
    }

    #[test]
    fn rendered_sample_counts() {
        let view = render_sample(1, 2, 0.8, "black", true, 112).unwrap();
        assert_eq!(view.token_count(), 8 * 49);
        assert_eq!(view.masked_count(), 314);
        assert_eq!(view.frame_rgba(3, true).len(), 112 * 112 * 4);
        assert!(view.trajectory_count() > 0);
        assert_eq!(view.trajectory_count() + view.tube_count(), 314);
    }
}
