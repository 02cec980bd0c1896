use motion_prep::compositor::{
    composite, composite_many, make_background, transform_sprite, BackgroundKind, BackgroundSource, Clip, ClipDims,
    MotionPlan, SegmentedObject,
};
use motion_prep::geometry::{AffinePlacement, Point, TransformTrack, Trajectory};
use motion_prep::rng::seeded;
use proptest::prelude::*;
use rand::Rng;

fn random_clip(rng: &mut impl Rng, frames: usize, h: usize, w: usize) -> Clip {
    let data = (0..frames * h * w * 3).map(|_| rng.random::<f32>()).collect();
    Clip::new(frames, h, w, data, "bg").unwrap()
}

fn random_sprite(rng: &mut impl Rng, p: usize, q: usize, opaque: bool) -> SegmentedObject {
    let mut rgba = Vec::with_capacity(p * q * 4);
    for _ in 0..p * q {
        rgba.extend_from_slice(&[rng.random::<f32>(), rng.random::<f32>(), rng.random::<f32>()]);
        rgba.push(if opaque { 1.0 } else { rng.random_range(0.0f32..=1.0) });
    }
    rgba[3] = 1.0;
    SegmentedObject::new(p, q, rgba, "obj").unwrap()
}

fn static_plan(frames: usize, center: Point, size: (usize, usize)) -> MotionPlan {
    MotionPlan {
        trajectory: Trajectory { centers: vec![center; frames] },
        transforms: TransformTrack::identity(frames),
        base_size: size,
        object_id: "obj".into(),
    }
}

/// Copies the sprite into the clip by plain array indexing.
fn direct_paste(clip: &Clip, sprite: &SegmentedObject, top: i64, left: i64) -> Clip {
    let mut out = clip.clone();
    for t in 0..clip.frames {
        for i in 0..sprite.height {
            for j in 0..sprite.width {
                let (r, c) = (top + i as i64, left + j as i64);
                if r < 0 || c < 0 || r >= clip.height as i64 || c >= clip.width as i64 {
                    continue;
                }
                let k = ((t * clip.height + r as usize) * clip.width + c as usize) * 3;
                let src = (i * sprite.width + j) * 4;
                out.data[k..k + 3].copy_from_slice(&sprite.rgba[src..src + 3]);
            }
        }
    }
    out
}

#[test]
fn identity_composite_equals_direct_paste() {
    let mut rng = seeded(31);
    for case in 0..200 {
        let (h, w) = (rng.random_range(8..48), rng.random_range(8..48));
        let frames = rng.random_range(1..4);
        let clip = random_clip(&mut rng, frames, h, w);
        // even sides keep center - size/2 integral
        let p = 2 * rng.random_range(1..=h / 2);
        let q = 2 * rng.random_range(1..=w / 2);
        let sprite = random_sprite(&mut rng, p, q, true);
        let cx = rng.random_range(0..=h) as f64;
        let cy = rng.random_range(0..=w) as f64;
        let (out, footprint) = composite(&clip, &static_plan(frames, Point::new(cx, cy), (p, q)), &sprite).unwrap();
        let want = direct_paste(&clip, &sprite, cx as i64 - (p / 2) as i64, cy as i64 - (q / 2) as i64);
        assert_eq!(out, want, "case {case}");
        for t in 0..frames {
            for r in 0..h {
                for c in 0..w {
                    let inside = (r as f64) >= cx - (p / 2) as f64
                        && (r as f64) < cx + (p / 2) as f64
                        && (c as f64) >= cy - (q / 2) as f64
                        && (c as f64) < cy + (q / 2) as f64;
                    assert_eq!(footprint.get(t, r, c), inside);
                }
            }
        }
    }
}

#[test]
fn quarter_turn_permutes_pixels() {
    let mut rng = seeded(5);
    for p in [1usize, 2, 5, 8, 13] {
        let sprite = random_sprite(&mut rng, p, p, false);
        let out = transform_sprite(&sprite, &AffinePlacement::new(90.0, 1.0, Point::new(50.0, 50.0)));
        assert_eq!((out.height, out.width), (p, p));
        for i in 0..p {
            for j in 0..p {
                let src = sprite.texel(i, j);
                let dst = out.texel(j, p - 1 - i);
                for ch in 0..4 {
                    assert!((src[ch] - dst[ch]).abs() <= 1e-6, "p {p} pixel ({i},{j}) channel {ch}");
                }
            }
        }
    }
}

#[test]
fn disjoint_objects_commute() {
    let mut rng = seeded(8);
    let clip = random_clip(&mut rng, 3, 40, 40);
    let a = random_sprite(&mut rng, 8, 8, false);
    let b = random_sprite(&mut rng, 6, 10, false);
    let pa = (static_plan(3, Point::new(8.0, 8.0), (8, 8)), a);
    let pb = (static_plan(3, Point::new(30.0, 28.0), (6, 10)), b);
    let ab = composite_many(&clip, &[pa.clone(), pb.clone()]).unwrap();
    let ba = composite_many(&clip, &[pb, pa]).unwrap();
    assert_eq!(ab, ba);
}

#[test]
fn later_objects_occlude_earlier() {
    let mut rng = seeded(9);
    let clip = random_clip(&mut rng, 1, 16, 16);
    let a = random_sprite(&mut rng, 4, 4, true);
    let b = random_sprite(&mut rng, 4, 4, true);
    let plan = static_plan(1, Point::new(8.0, 8.0), (4, 4));
    let (out, _) = composite_many(&clip, &[(plan.clone(), a), (plan, b.clone())]).unwrap();
    let t = b.texel(0, 0);
    assert_eq!(out.pixel(0, 6, 6), [t[0], t[1], t[2]]);
}

#[test]
fn static_backgrounds_composite() {
    let dims = ClipDims { frames: 4, height: 32, width: 32 };
    let mut rng = seeded(12);
    let natural = random_clip(&mut rng, 4, 32, 32);
    let image = natural.to_frame(2);
    let sprite = random_sprite(&mut rng, 8, 8, true);
    for (kind, src) in [
        (BackgroundKind::RepeatedFrame, Some(BackgroundSource::Clip(&natural))),
        (BackgroundKind::StillImage, Some(BackgroundSource::Image(&image))),
        (BackgroundKind::Black, None),
        (BackgroundKind::Noise, None),
    ] {
        let bg = make_background(kind, src, dims, &mut seeded(3), "v").unwrap();
        assert!(bg.is_static(), "{kind:?}");
        let plan = MotionPlan {
            trajectory: Trajectory { centers: (0..4).map(|t| Point::new(8.0 + 4.0 * t as f64, 16.0)).collect() },
            transforms: TransformTrack::identity(4),
            base_size: (8, 8),
            object_id: "obj".into(),
        };
        let (out, fp) = composite(&bg, &plan, &sprite).unwrap();
        assert!(!out.is_static());
        assert_eq!(fp.count(), 4 * 64);
        for (i, &covered) in fp.mask.iter().enumerate() {
            if !covered {
                assert_eq!(out.data[3 * i..3 * i + 3], bg.data[3 * i..3 * i + 3]);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn locality_and_range(
        seed in any::<u64>(),
        cx in -10.0f64..50.0,
        cy in -10.0f64..50.0,
        angle in -180.0f64..180.0,
        scale in 0.3f64..2.0,
        p in 1usize..20,
        q in 1usize..20,
    ) {
        let mut rng = seeded(seed);
        let clip = random_clip(&mut rng, 2, 40, 40);
        let sprite = random_sprite(&mut rng, p, q, false);
        let mut track = TransformTrack::identity(2);
        track.angles = vec![angle, -angle];
        track.scales = vec![scale, scale];
        let plan = MotionPlan {
            trajectory: Trajectory { centers: vec![Point::new(cx, cy), Point::new(cy, cx)] },
            transforms: track,
            base_size: (p, q),
            object_id: "obj".into(),
        };
        let (out, fp) = composite(&clip, &plan, &sprite).unwrap();
        for (i, &covered) in fp.mask.iter().enumerate() {
            let (o, b) = (&out.data[3 * i..3 * i + 3], &clip.data[3 * i..3 * i + 3]);
            if !covered {
                prop_assert_eq!(o, b);
            }
        }
        prop_assert!(out.data.iter().all(|v| (0.0..=1.0).contains(v)));
        let again = composite(&clip, &plan, &sprite).unwrap();
        prop_assert_eq!(again.0, out);
        prop_assert_eq!(again.1, fp);
    }
}
