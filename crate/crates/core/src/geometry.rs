//! Object motion: smoothed random center paths and keyframed rotation/scale
//! tracks.
//!
//! Coordinates are `(x, y)` with `x` along the frame height (row axis,
//! `[0, H]`) and `y` along the width (column axis, `[0, W]`).

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::rng::{uniform_index, uniform_real, SampleRng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryConfig {
    pub frame_count: usize,
    pub frame_height: usize,
    pub frame_width: usize,
    pub raw_point_count: usize,
    /// Gaussian standard deviation, in raw-sample units.
    pub smoothing: f64,
    pub seed: u64,
}

impl TrajectoryConfig {
    pub const DEFAULT_SMOOTHING: f64 = 8.0;
    pub const DEFAULT_RAW_FACTOR: usize = 10;

    /// Config with `M = 10 T` raw points and the default smoothing.
    pub fn with_defaults(frame_count: usize, frame_height: usize, frame_width: usize, seed: u64) -> Self {
        Self {
            frame_count,
            frame_height,
            frame_width,
            raw_point_count: Self::DEFAULT_RAW_FACTOR * frame_count,
            smoothing: Self::DEFAULT_SMOOTHING,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.frame_count < 2 {
            return Err(config_err(format!("frame_count must be >= 2, got {}", self.frame_count)));
        }
        if self.raw_point_count <= self.frame_count {
            return Err(config_err(format!(
                "raw_point_count ({}) must exceed frame_count ({})",
                self.raw_point_count, self.frame_count
            )));
        }
        if !(self.smoothing > 0.0 && self.smoothing.is_finite()) {
            return Err(config_err(format!("smoothing must be positive, got {}", self.smoothing)));
        }
        Ok(())
    }
}

/// Object center per frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub centers: Vec<Point>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keyframe {
    pub frame: usize,
    pub angle: f64,
    pub scale: f64,
}

/// Per-frame rotation (degrees) and isotropic scale, linear between the
/// first, a middle and the last keyframe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformTrack {
    pub angles: Vec<f64>,
    pub scales: Vec<f64>,
    pub keyframes: [Keyframe; 3],
}

impl TransformTrack {
    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    /// Constant identity track (no rotation, unit scale).
    pub fn identity(frames: usize) -> Self {
        let last = frames.saturating_sub(1);
        let key = |frame| Keyframe { frame, angle: 0.0, scale: 1.0 };
        Self {
            angles: vec![0.0; frames],
            scales: vec![1.0; frames],
            keyframes: [key(0), key(last / 2), key(last)],
        }
    }

    /// Builds a track from explicit keyframes; frames `first.frame` and
    /// `last.frame` bound the track, which has `last.frame + 1` entries.
    pub fn from_keyframes(keyframes: [Keyframe; 3]) -> Result<Self> {
        let [a, m, b] = keyframes;
        if a.frame != 0 || !(a.frame < m.frame && m.frame < b.frame) {
            return Err(config_err("keyframes must satisfy 0 = first < middle < last"));
        }
        let frames = b.frame + 1;
        let mut angles = vec![0.0; frames];
        let mut scales = vec![0.0; frames];
        for (lo, hi) in [(a, m), (m, b)] {
            for t in lo.frame..=hi.frame {
                angles[t] = interpolate(lo.frame, lo.angle, hi.frame, hi.angle, t);
                scales[t] = interpolate(lo.frame, lo.scale, hi.frame, hi.scale, t);
            }
        }
        Ok(Self { angles, scales, keyframes })
    }
}

/// Linear interpolation that is exact at both ends and never leaves the
/// hull of the two endpoint values.
fn interpolate(t0: usize, v0: f64, t1: usize, v1: f64, t: usize) -> f64 {
    if t == t0 {
        return v0;
    }
    if t == t1 {
        return v1;
    }
    let f = (t - t0) as f64 / (t1 - t0) as f64;
    let v = v0 + (v1 - v0) * f;
    v.clamp(v0.min(v1), v0.max(v1))
}

/// Rotation and scale of the sprite about its center, placed at `center`.
///
/// The matrices act on sprite offsets written as (horizontal, vertical)
/// pixel components, i.e. (column, row).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffinePlacement {
    pub rotation: [[f64; 2]; 2],
    pub scale: [[f64; 2]; 2],
    pub center: Point,
}

impl AffinePlacement {
    pub fn new(angle_degrees: f64, scale: f64, center: Point) -> Self {
        let (s, c) = angle_degrees.to_radians().sin_cos();
        Self {
            rotation: [[c, -s], [s, c]],
            scale: [[scale, 0.0], [0.0, scale]],
            center,
        }
    }

    /// Combined matrix: scale first, then rotate.
    pub fn matrix(&self) -> [[f64; 2]; 2] {
        let r = self.rotation;
        let s = self.scale;
        [
            [r[0][0] * s[0][0] + r[0][1] * s[1][0], r[0][0] * s[0][1] + r[0][1] * s[1][1]],
            [r[1][0] * s[0][0] + r[1][1] * s[1][0], r[1][0] * s[0][1] + r[1][1] * s[1][1]],
        ]
    }

    pub fn scale_factor(&self) -> f64 {
        self.scale[0][0]
    }
}

/// `M` independent uniform points over `[0, H] x [0, W]`.
pub fn generate_raw_path(cfg: &TrajectoryConfig, rng: &mut SampleRng) -> Result<Vec<Point>> {
    cfg.validate()?;
    let (h, w) = (cfg.frame_height as f64, cfg.frame_width as f64);
    Ok((0..cfg.raw_point_count)
        .map(|_| {
            let x = uniform_real(rng, 0.0, h);
            let y = uniform_real(rng, 0.0, w);
            Point::new(x, y)
        })
        .collect())
}

/// Discrete Gaussian taps at offsets `-R..=R`, `R = ceil(4 kappa)`,
/// normalized to unit sum.
pub fn gaussian_kernel(kappa: f64) -> Vec<f64> {
    let radius = (4.0 * kappa).ceil() as i64;
    let norm = 1.0 / ((2.0 * std::f64::consts::PI).sqrt() * kappa);
    let mut taps: Vec<f64> = (-radius..=radius)
        .map(|z| {
            let z = z as f64;
            norm * (-z * z / (2.0 * kappa * kappa)).exp()
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    taps
}

/// Maps any integer position onto `0..len` by half-sample symmetric
/// reflection (`c b a | a b c | c b a`).
fn reflect(i: i64, len: usize) -> usize {
    let n = len as i64;
    let period = 2 * n;
    let k = i.rem_euclid(period);
    if k < n {
        k as usize
    } else {
        (period - 1 - k) as usize
    }
}

pub fn smooth_signal(signal: &[f64], kernel: &[f64]) -> Vec<f64> {
    let radius = (kernel.len() / 2) as i64;
    (0..signal.len() as i64)
        .map(|i| {
            kernel
                .iter()
                .zip(-radius..=radius)
                .map(|(&k, z)| k * signal[reflect(i + z, signal.len())])
                .sum()
        })
        .collect()
}

/// Smooths both coordinate axes independently with the truncated Gaussian.
pub fn gaussian_smooth(path: &[Point], kappa: f64) -> Result<Vec<Point>> {
    if path.is_empty() {
        return Err(config_err("cannot smooth an empty path"));
    }
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(config_err(format!("smoothing must be positive, got {kappa}")));
    }
    let kernel = gaussian_kernel(kappa);
    let xs: Vec<f64> = path.iter().map(|p| p.x).collect();
    let ys: Vec<f64> = path.iter().map(|p| p.y).collect();
    let xs = smooth_signal(&xs, &kernel);
    let ys = smooth_signal(&ys, &kernel);
    Ok(xs.into_iter().zip(ys).map(|(x, y)| Point::new(x, y)).collect())
}

/// Keeps input index `round(t (M-1) / (T-1))` for each output `t`.
pub fn downsample_path(path: &[Point], frames: usize) -> Result<Trajectory> {
    let m = path.len();
    if frames < 2 {
        return Err(config_err(format!("need at least 2 frames, got {frames}")));
    }
    if m < frames {
        return Err(config_err(format!("cannot downsample {m} points to {frames} frames")));
    }
    let (num, den) = (m - 1, frames - 1);
    let centers = (0..frames)
        // floor(t * num / den + 1/2) in exact integer arithmetic
        .map(|t| path[(2 * t * num + den) / (2 * den)])
        .collect();
    Ok(Trajectory { centers })
}

/// Full path pipeline: raw samples, smoothing, clamping, downsampling.
pub fn generate_trajectory(cfg: &TrajectoryConfig, rng: &mut SampleRng) -> Result<Trajectory> {
    let raw = generate_raw_path(cfg, rng)?;
    let (h, w) = (cfg.frame_height as f64, cfg.frame_width as f64);
    let smooth: Vec<Point> = gaussian_smooth(&raw, cfg.smoothing)?
        .into_iter()
        .map(|p| Point::new(p.x.clamp(0.0, h), p.y.clamp(0.0, w)))
        .collect();
    downsample_path(&smooth, cfg.frame_count)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }
}

pub const DEFAULT_ANGLE_RANGE: Range = Range::new(-90.0, 90.0);
pub const DEFAULT_SCALE_RANGE: Range = Range::new(0.5, 1.5);

pub fn sample_keyframe_transforms(
    rng: &mut SampleRng,
    angle_range: Range,
    scale_range: Range,
    frames: usize,
) -> Result<TransformTrack> {
    if frames < 3 {
        return Err(config_err(format!("keyframed transforms need >= 3 frames, got {frames}")));
    }
    for (name, r) in [("angle", angle_range), ("scale", scale_range)] {
        if !(r.lo <= r.hi) || !r.lo.is_finite() || !r.hi.is_finite() {
            return Err(config_err(format!("{name} range [{}, {}] is invalid", r.lo, r.hi)));
        }
    }
    let middle = uniform_index(rng, 1, frames - 2);
    let mut key = |frame| Keyframe {
        frame,
        angle: uniform_real(rng, angle_range.lo, angle_range.hi),
        scale: 0.0,
    };
    let mut keys = [key(0), key(middle), key(frames - 1)];
    for k in &mut keys {
        k.scale = uniform_real(rng, scale_range.lo, scale_range.hi);
    }
    TransformTrack::from_keyframes(keys)
}

pub fn placement_at(traj: &Trajectory, track: &TransformTrack, t: usize) -> Result<AffinePlacement> {
    let len = traj.len().min(track.len());
    if t >= len {
        return Err(Error::OutOfRange { index: t, len });
    }
    Ok(AffinePlacement::new(track.angles[t], track.scales[t], traj.centers[t]))
}
