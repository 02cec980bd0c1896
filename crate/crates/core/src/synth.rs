//! Procedural clips and sprites, used when no real footage or object
//! library is configured (demos, tests, benchmarks).

use rand::Rng;

use crate::compositor::{Clip, SegmentedObject};
use crate::rng::{seeded, uniform_index};

/// A drifting two-tone wave texture; every frame differs from the last.
pub fn synthetic_clip(seed: u64, frames: usize, height: usize, width: usize, source_id: impl Into<String>) -> Clip {
    let mut rng = seeded(seed);
    let base: [f32; 3] = std::array::from_fn(|_| rng.random_range(0.15f32..0.85));
    let tint: [f32; 3] = std::array::from_fn(|_| rng.random_range(-0.15f32..0.15));
    let freq_r = rng.random_range(1.0f32..4.0) * std::f32::consts::TAU / height as f32;
    let freq_c = rng.random_range(1.0f32..4.0) * std::f32::consts::TAU / width as f32;
    let speed = rng.random_range(0.1f32..0.4);

    let mut data = Vec::with_capacity(frames * height * width * 3);
    for t in 0..frames {
        let phase = t as f32 * speed;
        for r in 0..height {
            for c in 0..width {
                let wave = (r as f32 * freq_r + c as f32 * freq_c + phase).sin();
                for ch in 0..3 {
                    data.push((base[ch] + tint[ch] * wave).clamp(0.0, 1.0));
                }
            }
        }
    }
    Clip { frames, height, width, data, source_id: source_id.into() }
}

/// Solid-colored blob (ellipse, rounded box or star) with an anti-aliased
/// alpha edge, on a `size x size` canvas.
pub fn procedural_object(seed: u64, size: usize, object_id: impl Into<String>) -> SegmentedObject {
    let mut rng = seeded(seed);
    let shape = uniform_index(&mut rng, 0, 2);
    let color: [f32; 3] = std::array::from_fn(|_| rng.random_range(0.0f32..1.0));
    let shade = rng.random_range(0.2f32..0.6);
    let aspect = rng.random_range(0.55f64..1.0);
    let spikes = uniform_index(&mut rng, 4, 7) as f64;

    let half = size as f64 / 2.0;
    let mut rgba = Vec::with_capacity(size * size * 4);
    for i in 0..size {
        for j in 0..size {
            let y = (i as f64 + 0.5 - half) / half;
            let x = (j as f64 + 0.5 - half) / (half * aspect);
            let r = x.hypot(y);
            // signed distance proxy: < 0 inside, in units of the half size
            let d = match shape {
                0 => r - 0.95,
                1 => (x.abs().powi(4) + y.abs().powi(4)).powf(0.25) - 0.9,
                _ => {
                    let theta = y.atan2(x);
                    r - (0.6 + 0.35 * (spikes * theta).cos())
                }
            };
            let alpha = (0.5 - d * half).clamp(0.0, 1.0) as f32;
            let light = 1.0 - shade * (r as f32).min(1.0);
            for c in color {
                rgba.push((c * light).clamp(0.0, 1.0));
            }
            rgba.push(alpha);
        }
    }
    // a centered blob always has opaque interior pixels for size >= 2
    SegmentedObject { height: size, width: size, rgba, object_id: object_id.into() }
}

pub fn procedural_library(seed: u64, count: usize, size: usize) -> Vec<SegmentedObject> {
    (0..count)
        .map(|k| procedural_object(seed.wrapping_add(k as u64), size, format!("procedural-{k:03}")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_clip_is_valid_and_moving() {
        let c = synthetic_clip(4, 4, 16, 24, "s");
        Clip::new(c.frames, c.height, c.width, c.data.clone(), "s").unwrap();
        assert!(!c.is_static());
        assert_eq!(c, synthetic_clip(4, 4, 16, 24, "s"));
    }

    #[test]
    fn procedural_objects_are_valid() {
        for obj in procedural_library(9, 12, 64) {
            SegmentedObject::new(obj.height, obj.width, obj.rgba.clone(), obj.object_id.clone()).unwrap();
            // corners stay transparent
            assert_eq!(obj.texel(0, 0)[3], 0.0);
        }
    }
}
