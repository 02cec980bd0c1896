//! Alpha compositing of transformed sprites onto clips, plus the static
//! background constructions (repeated frame, still image, black, noise).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, shape_err, Error, Result};
use crate::geometry::{placement_at, AffinePlacement, TransformTrack, Trajectory};
use crate::rng::{uniform_index, SampleRng};

/// A single RGB image, `H x W x 3`, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

impl Frame {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != height * width * 3 {
            return Err(shape_err(format!(
                "frame {height}x{width} needs {} values, got {}",
                height * width * 3,
                data.len()
            )));
        }
        check_unit_range(&data, "frame")?;
        Ok(Self { height, width, data })
    }

    pub fn from_rgb8(height: usize, width: usize, bytes: &[u8]) -> Result<Self> {
        Self::new(height, width, bytes.iter().map(|&b| f32::from(b) / 255.0).collect())
    }
}

/// A `T x H x W x 3` pixel volume, frame-major, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Clip {
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
    pub source_id: String,
}

impl Clip {
    pub fn new(frames: usize, height: usize, width: usize, data: Vec<f32>, source_id: impl Into<String>) -> Result<Self> {
        let want = frames * height * width * 3;
        if data.len() != want {
            return Err(shape_err(format!(
                "clip {frames}x{height}x{width} needs {want} values, got {}",
                data.len()
            )));
        }
        check_unit_range(&data, "clip")?;
        Ok(Self { frames, height, width, data, source_id: source_id.into() })
    }

    pub fn black(frames: usize, height: usize, width: usize, source_id: impl Into<String>) -> Self {
        Self {
            frames,
            height,
            width,
            data: vec![0.0; frames * height * width * 3],
            source_id: source_id.into(),
        }
    }

    pub fn from_rgb8(frames: usize, height: usize, width: usize, bytes: &[u8], source_id: impl Into<String>) -> Result<Self> {
        let data = bytes.iter().map(|&b| f32::from(b) / 255.0).collect();
        Self::new(frames, height, width, data, source_id)
    }

    /// `frame` duplicated `frames` times.
    pub fn repeat_frame(frame: &Frame, frames: usize, source_id: impl Into<String>) -> Self {
        let mut data = Vec::with_capacity(frame.data.len() * frames);
        for _ in 0..frames {
            data.extend_from_slice(&frame.data);
        }
        Self { frames, height: frame.height, width: frame.width, data, source_id: source_id.into() }
    }

    pub fn frame_len(&self) -> usize {
        self.height * self.width * 3
    }

    pub fn frame(&self, t: usize) -> &[f32] {
        let n = self.frame_len();
        &self.data[t * n..(t + 1) * n]
    }

    pub fn frame_mut(&mut self, t: usize) -> &mut [f32] {
        let n = self.frame_len();
        &mut self.data[t * n..(t + 1) * n]
    }

    pub fn to_frame(&self, t: usize) -> Frame {
        Frame { height: self.height, width: self.width, data: self.frame(t).to_vec() }
    }

    pub fn pixel(&self, t: usize, row: usize, col: usize) -> [f32; 3] {
        let i = ((t * self.height + row) * self.width + col) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// True when every frame is bit-identical to the first.
    pub fn is_static(&self) -> bool {
        let first = self.frame(0);
        (1..self.frames).all(|t| self.frame(t) == first)
    }
}

fn check_unit_range(data: &[f32], what: &'static str) -> Result<()> {
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(what));
    }
    if data.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
        return Err(shape_err(format!("{what} values must lie in [0, 1]")));
    }
    Ok(())
}

/// RGBA sprite, `P x Q x 4`; the alpha channel is the segmentation.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentedObject {
    pub height: usize,
    pub width: usize,
    pub rgba: Vec<f32>,
    pub object_id: String,
}

impl SegmentedObject {
    pub fn new(height: usize, width: usize, rgba: Vec<f32>, object_id: impl Into<String>) -> Result<Self> {
        if height == 0 || width == 0 || rgba.len() != height * width * 4 {
            return Err(shape_err(format!(
                "sprite {height}x{width} needs {} values, got {}",
                height * width * 4,
                rgba.len()
            )));
        }
        check_unit_range(&rgba, "sprite")?;
        if !rgba.chunks_exact(4).any(|px| px[3] > 0.0) {
            return Err(shape_err("sprite has no pixel with positive alpha"));
        }
        Ok(Self { height, width, rgba, object_id: object_id.into() })
    }

    pub fn from_rgba8(height: usize, width: usize, bytes: &[u8], object_id: impl Into<String>) -> Result<Self> {
        Self::new(height, width, bytes.iter().map(|&b| f32::from(b) / 255.0).collect(), object_id)
    }

    pub fn texel(&self, row: usize, col: usize) -> [f32; 4] {
        let i = (row * self.width + col) * 4;
        [self.rgba[i], self.rgba[i + 1], self.rgba[i + 2], self.rgba[i + 3]]
    }
}

/// Bilinear sample at pixel-index coordinates, clamped to the edge texels.
fn sample_bilinear(rgba: &[f32], height: usize, width: usize, row: f64, col: f64) -> [f32; 4] {
    let row = row.clamp(0.0, (height - 1) as f64);
    let col = col.clamp(0.0, (width - 1) as f64);
    let (r0, c0) = (row.floor() as usize, col.floor() as usize);
    let (r1, c1) = ((r0 + 1).min(height - 1), (c0 + 1).min(width - 1));
    let (fr, fc) = ((row - r0 as f64) as f32, (col - c0 as f64) as f32);
    let at = |r: usize, c: usize, ch: usize| rgba[(r * width + c) * 4 + ch];
    let lerp = |a: f32, b: f32, f: f32| a + (b - a) * f;
    let mut out = [0.0; 4];
    for (ch, o) in out.iter_mut().enumerate() {
        let top = lerp(at(r0, c0, ch), at(r0, c1, ch), fc);
        let bottom = lerp(at(r1, c0, ch), at(r1, c1, ch), fc);
        *o = lerp(top, bottom, fr).clamp(0.0, 1.0);
    }
    out
}

/// Bilinear resize of all four channels (pixel-center aligned).
pub fn resize_object(obj: &SegmentedObject, target: (usize, usize)) -> Result<SegmentedObject> {
    let (p, q) = target;
    if p == 0 || q == 0 {
        return Err(config_err(format!("cannot resize sprite to {p}x{q}")));
    }
    if (p, q) == (obj.height, obj.width) {
        return Ok(obj.clone());
    }
    let sr = obj.height as f64 / p as f64;
    let sc = obj.width as f64 / q as f64;
    let mut rgba = Vec::with_capacity(p * q * 4);
    for i in 0..p {
        let row = (i as f64 + 0.5) * sr - 0.5;
        for j in 0..q {
            let col = (j as f64 + 0.5) * sc - 0.5;
            rgba.extend_from_slice(&sample_bilinear(&obj.rgba, obj.height, obj.width, row, col));
        }
    }
    Ok(SegmentedObject { height: p, width: q, rgba, object_id: obj.object_id.clone() })
}

/// A transformed sprite patch positioned in frame coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionedSprite {
    pub height: usize,
    pub width: usize,
    pub rgba: Vec<f32>,
    /// Frame row of the patch's top-left pixel (may be negative).
    pub top: i64,
    /// Frame column of the patch's top-left pixel (may be negative).
    pub left: i64,
}

impl PositionedSprite {
    pub fn texel(&self, row: usize, col: usize) -> [f32; 4] {
        let i = (row * self.width + col) * 4;
        [self.rgba[i], self.rgba[i + 1], self.rgba[i + 2], self.rgba[i + 3]]
    }
}

// Extents within this distance of an integer do not grow the patch.
const EXTENT_SLACK: f64 = 1e-6;

fn round_half_up(v: f64) -> i64 {
    (v + 0.5).floor() as i64
}

/// Scales then rotates the sprite about its center by inverse mapping.
/// Samples falling outside the sprite area are transparent.
pub fn transform_sprite(obj: &SegmentedObject, placement: &AffinePlacement) -> PositionedSprite {
    let (cos, sin) = (placement.rotation[0][0], placement.rotation[1][0]);
    let scale = placement.scale_factor();
    let (p, q) = (obj.height as f64, obj.width as f64);

    let extent_rows = scale * (p * cos.abs() + q * sin.abs());
    let extent_cols = scale * (q * cos.abs() + p * sin.abs());
    let height = ((extent_rows - EXTENT_SLACK).ceil() as usize).max(1);
    let width = ((extent_cols - EXTENT_SLACK).ceil() as usize).max(1);
    let (half_h, half_w) = (height as f64 / 2.0, width as f64 / 2.0);

    let mut rgba = vec![0.0f32; height * width * 4];
    for i in 0..height {
        let dr = i as f64 + 0.5 - half_h;
        for j in 0..width {
            let dc = j as f64 + 0.5 - half_w;
            // inverse of rotate(scale(v)) on (column, row) offsets
            let src_c = (cos * dc + sin * dr) / scale + q / 2.0;
            let src_r = (-sin * dc + cos * dr) / scale + p / 2.0;
            if src_r < -EXTENT_SLACK || src_r > p + EXTENT_SLACK || src_c < -EXTENT_SLACK || src_c > q + EXTENT_SLACK {
                continue;
            }
            let texel = sample_bilinear(&obj.rgba, obj.height, obj.width, src_r - 0.5, src_c - 0.5);
            let k = (i * width + j) * 4;
            rgba[k..k + 4].copy_from_slice(&texel);
        }
    }

    PositionedSprite {
        height,
        width,
        rgba,
        top: round_half_up(placement.center.x - half_h),
        left: round_half_up(placement.center.y - half_w),
    }
}

/// Per-frame `H x W` map of pixels covered by composited alpha > 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Footprint {
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub mask: Vec<bool>,
}

impl Footprint {
    pub fn empty(frames: usize, height: usize, width: usize) -> Self {
        Self { frames, height, width, mask: vec![false; frames * height * width] }
    }

    pub fn get(&self, t: usize, row: usize, col: usize) -> bool {
        self.mask[(t * self.height + row) * self.width + col]
    }

    pub fn set(&mut self, t: usize, row: usize, col: usize) {
        self.mask[(t * self.height + row) * self.width + col] = true;
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn union_with(&mut self, other: &Footprint) {
        for (a, &b) in self.mask.iter_mut().zip(&other.mask) {
            *a |= b;
        }
    }
}

/// Where and how one object moves through a clip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionPlan {
    pub trajectory: Trajectory,
    pub transforms: TransformTrack,
    /// Sprite size `(P, Q)` before per-frame scaling.
    pub base_size: (usize, usize),
    pub object_id: String,
}

/// Blends a positioned sprite into frame `t` of `clip` in place, marking
/// covered pixels in `footprint`.
pub fn blend_into(clip: &mut Clip, t: usize, sprite: &PositionedSprite, footprint: &mut Footprint) {
    let (h, w) = (clip.height as i64, clip.width as i64);
    let row_lo = sprite.top.max(0);
    let row_hi = (sprite.top + sprite.height as i64).min(h);
    let col_lo = sprite.left.max(0);
    let col_hi = (sprite.left + sprite.width as i64).min(w);
    let width = clip.width;
    let frame = clip.frame_mut(t);
    for r in row_lo..row_hi {
        for c in col_lo..col_hi {
            let texel = sprite.texel((r - sprite.top) as usize, (c - sprite.left) as usize);
            let alpha = texel[3];
            if alpha <= 0.0 {
                continue;
            }
            let k = (r as usize * width + c as usize) * 3;
            for ch in 0..3 {
                let bg = frame[k + ch];
                frame[k + ch] = (alpha * texel[ch] + (1.0 - alpha) * bg).clamp(0.0, 1.0);
            }
            footprint.set(t, r as usize, c as usize);
        }
    }
}

fn check_plan(clip: &Clip, plan: &MotionPlan) -> Result<()> {
    if plan.trajectory.len() != clip.frames || plan.transforms.len() != clip.frames {
        return Err(shape_err(format!(
            "motion plan covers {} / {} frames, clip has {}",
            plan.trajectory.len(),
            plan.transforms.len(),
            clip.frames
        )));
    }
    Ok(())
}

fn composite_in_place(clip: &mut Clip, plan: &MotionPlan, obj: &SegmentedObject, footprint: &mut Footprint) -> Result<()> {
    check_plan(clip, plan)?;
    let sprite = resize_object(obj, plan.base_size)?;
    for t in 0..clip.frames {
        let placement = placement_at(&plan.trajectory, &plan.transforms, t)?;
        let patch = transform_sprite(&sprite, &placement);
        blend_into(clip, t, &patch, footprint);
    }
    Ok(())
}

pub fn composite(clip: &Clip, plan: &MotionPlan, obj: &SegmentedObject) -> Result<(Clip, Footprint)> {
    let mut out = clip.clone();
    let mut footprint = Footprint::empty(clip.frames, clip.height, clip.width);
    composite_in_place(&mut out, plan, obj, &mut footprint)?;
    Ok((out, footprint))
}

/// Composites objects in list order (later ones occlude earlier ones); the
/// footprint is the union over all objects.
pub fn composite_many(clip: &Clip, plans: &[(MotionPlan, SegmentedObject)]) -> Result<(Clip, Footprint)> {
    for (plan, _) in plans {
        check_plan(clip, plan)?;
    }
    let mut out = clip.clone();
    let mut footprint = Footprint::empty(clip.frames, clip.height, clip.width);
    for (plan, obj) in plans {
        composite_in_place(&mut out, plan, obj, &mut footprint)?;
    }
    Ok((out, footprint))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackgroundKind {
    NaturalClip,
    RepeatedFrame,
    StillImage,
    Black,
    Noise,
}

impl BackgroundKind {
    pub const ALL: [BackgroundKind; 5] = [
        BackgroundKind::NaturalClip,
        BackgroundKind::RepeatedFrame,
        BackgroundKind::StillImage,
        BackgroundKind::Black,
        BackgroundKind::Noise,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BackgroundKind::NaturalClip => "natural-clip",
            BackgroundKind::RepeatedFrame => "repeated-frame",
            BackgroundKind::StillImage => "still-image",
            BackgroundKind::Black => "black",
            BackgroundKind::Noise => "noise",
        }
    }

    pub fn needs_source(self) -> bool {
        matches!(self, BackgroundKind::NaturalClip | BackgroundKind::RepeatedFrame | BackgroundKind::StillImage)
    }
}

#[derive(Debug, Clone, Copy)]
pub enum BackgroundSource<'a> {
    Clip(&'a Clip),
    Image(&'a Frame),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClipDims {
    pub frames: usize,
    pub height: usize,
    pub width: usize,
}

fn check_frame_dims(height: usize, width: usize, dims: ClipDims) -> Result<()> {
    if (height, width) != (dims.height, dims.width) {
        return Err(shape_err(format!(
            "background source is {height}x{width}, expected {}x{}",
            dims.height, dims.width
        )));
    }
    Ok(())
}

pub fn make_background(
    kind: BackgroundKind,
    source: Option<BackgroundSource<'_>>,
    dims: ClipDims,
    rng: &mut SampleRng,
    source_id: &str,
) -> Result<Clip> {
    let ClipDims { frames, height, width } = dims;
    match kind {
        BackgroundKind::NaturalClip => match source {
            Some(BackgroundSource::Clip(c)) => {
                check_frame_dims(c.height, c.width, dims)?;
                if c.frames != frames {
                    return Err(shape_err(format!("source clip has {} frames, expected {frames}", c.frames)));
                }
                Ok(c.clone())
            }
            _ => Err(Error::MissingSource(kind.name())),
        },
        BackgroundKind::RepeatedFrame => match source {
            Some(BackgroundSource::Clip(c)) if c.frames > 0 => {
                check_frame_dims(c.height, c.width, dims)?;
                let t = uniform_index(rng, 0, c.frames - 1);
                Ok(Clip::repeat_frame(&c.to_frame(t), frames, source_id))
            }
            _ => Err(Error::MissingSource(kind.name())),
        },
        BackgroundKind::StillImage => {
            let image = match source {
                Some(BackgroundSource::Image(f)) => f.clone(),
                Some(BackgroundSource::Clip(c)) if c.frames > 0 => c.to_frame(0),
                _ => return Err(Error::MissingSource(kind.name())),
            };
            check_frame_dims(image.height, image.width, dims)?;
            Ok(Clip::repeat_frame(&image, frames, source_id))
        }
        BackgroundKind::Black => Ok(Clip::black(frames, height, width, source_id)),
        BackgroundKind::Noise => {
            let data: Vec<f32> = (0..height * width * 3).map(|_| rng.random::<f32>()).collect();
            let image = Frame { height, width, data };
            Ok(Clip::repeat_frame(&image, frames, source_id))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Point, Trajectory};
    use crate::rng::seeded;

    fn sprite_2x2() -> SegmentedObject {
        #[rustfmt::skip]
        let rgba = vec![
            0.0, 0.0, 0.0, 1.0,   1.0, 1.0, 1.0, 1.0,
            1.0, 1.0, 1.0, 1.0,   0.0, 0.0, 0.0, 1.0,
        ];
        SegmentedObject::new(2, 2, rgba, "checker").unwrap()
    }

    fn gradient_sprite(p: usize, q: usize, alpha: f32) -> SegmentedObject {
        let mut rgba = Vec::new();
        for i in 0..p {
            for j in 0..q {
                rgba.extend_from_slice(&[i as f32 / p as f32, j as f32 / q as f32, 0.25, alpha]);
            }
        }
        SegmentedObject::new(p, q, rgba, "grad").unwrap()
    }

    fn still_plan(frames: usize, center: Point, size: (usize, usize)) -> MotionPlan {
        MotionPlan {
            trajectory: Trajectory { centers: vec![center; frames] },
            transforms: TransformTrack::identity(frames),
            base_size: size,
            object_id: "o".into(),
        }
    }

    #[test]
    fn resize_identity_is_exact() {
        let s = gradient_sprite(5, 7, 1.0);
        assert_eq!(resize_object(&s, (5, 7)).unwrap(), s);
        assert!(resize_object(&s, (0, 3)).is_err());
    }

    #[test]
    fn resize_2x2_to_3x3_center() {
        let out = resize_object(&sprite_2x2(), (3, 3)).unwrap();
        let c = out.texel(1, 1);
        for ch in 0..3 {
            assert!((c[ch] - 0.5).abs() < 1e-6);
        }
        assert_eq!(c[3], 1.0);
    }

    #[test]
    fn transform_identity_returns_sprite() {
        let s = gradient_sprite(6, 4, 1.0);
        let placement = AffinePlacement::new(0.0, 1.0, Point::new(10.0, 20.0));
        let out = transform_sprite(&s, &placement);
        assert_eq!((out.height, out.width), (6, 4));
        assert_eq!(out.rgba, s.rgba);
        assert_eq!((out.top, out.left), (7, 18));
    }

    #[test]
    fn transform_scale_two_keeps_corners() {
        let s = sprite_2x2();
        let out = transform_sprite(&s, &AffinePlacement::new(0.0, 2.0, Point::new(8.0, 8.0)));
        assert_eq!((out.height, out.width), (4, 4));
        assert_eq!(out.texel(0, 0), s.texel(0, 0));
        assert_eq!(out.texel(0, 3), s.texel(0, 1));
        assert_eq!(out.texel(3, 0), s.texel(1, 0));
        assert_eq!(out.texel(3, 3), s.texel(1, 1));
    }

    #[test]
    fn transparent_sprite_is_noop() {
        let clip = Clip::new(2, 8, 8, vec![0.3; 2 * 8 * 8 * 3], "c").unwrap();
        let mut obj = gradient_sprite(4, 4, 1.0);
        obj.rgba.chunks_exact_mut(4).for_each(|px| px[3] = 0.0);
        let (out, fp) = composite(&clip, &still_plan(2, Point::new(4.0, 4.0), (4, 4)), &obj).unwrap();
        assert_eq!(out, clip);
        assert_eq!(fp.count(), 0);
    }

    #[test]
    fn corner_center_clips_to_frame() {
        let clip = Clip::black(1, 8, 8, "c");
        let obj = gradient_sprite(4, 4, 1.0);
        let (out, fp) = composite(&clip, &still_plan(1, Point::new(0.0, 0.0), (4, 4)), &obj).unwrap();
        assert_eq!(fp.count(), 4);
        assert!(fp.get(0, 0, 0) && fp.get(0, 1, 1) && !fp.get(0, 2, 2));
        // in-frame quadrant is the sprite's bottom-right 2x2
        let t = obj.texel(2, 3);
        assert_eq!(out.pixel(0, 0, 1), [t[0], t[1], t[2]]);
    }

    #[test]
    fn plan_length_mismatch() {
        let clip = Clip::black(3, 8, 8, "c");
        let obj = gradient_sprite(2, 2, 1.0);
        assert!(composite(&clip, &still_plan(2, Point::new(4.0, 4.0), (2, 2)), &obj).is_err());
    }

    #[test]
    fn empty_plan_list_is_identity() {
        let clip = Clip::new(2, 4, 4, vec![0.7; 96], "c").unwrap();
        let (out, fp) = composite_many(&clip, &[]).unwrap();
        assert_eq!(out, clip);
        assert_eq!(fp.count(), 0);
    }

    #[test]
    fn sprite_validation() {
        assert!(SegmentedObject::new(1, 1, vec![1.0, 1.0, 1.0, 0.0], "x").is_err());
        assert!(SegmentedObject::new(1, 1, vec![1.0, 1.0, 1.0], "x").is_err());
        assert!(SegmentedObject::new(1, 1, vec![2.0, 1.0, 1.0, 1.0], "x").is_err());
        assert!(Clip::new(1, 1, 1, vec![0.0, f32::NAN, 0.0], "x").is_err());
    }

    #[test]
    fn backgrounds() {
        let dims = ClipDims { frames: 16, height: 224, width: 224 };
        let mut rng = seeded(1);
        let black = make_background(BackgroundKind::Black, None, dims, &mut rng, "b").unwrap();
        assert!(black.data.iter().all(|&v| v == 0.0));
        assert_eq!(black.data.len(), 16 * 224 * 224 * 3);

        let small = ClipDims { frames: 4, height: 6, width: 5 };
        let a = make_background(BackgroundKind::Noise, None, small, &mut seeded(2), "n").unwrap();
        let b = make_background(BackgroundKind::Noise, None, small, &mut seeded(2), "n").unwrap();
        assert_eq!(a, b);
        assert!(a.is_static());

        let mut data = Vec::new();
        for t in 0..4 {
            data.extend(std::iter::repeat_n(t as f32 / 4.0, 6 * 5 * 3));
        }
        let src = Clip::new(4, 6, 5, data, "src").unwrap();
        let rep = make_background(BackgroundKind::RepeatedFrame, Some(BackgroundSource::Clip(&src)), small, &mut rng, "r").unwrap();
        assert!(rep.is_static());
        assert!(src.data.chunks(90).any(|f| f == rep.frame(0)));

        assert!(matches!(
            make_background(BackgroundKind::StillImage, None, small, &mut rng, "s"),
            Err(Error::MissingSource(_))
        ));
        assert!(make_background(BackgroundKind::NaturalClip, None, small, &mut rng, "s").is_err());
    }
}
