use motion_prep::compositor::Clip;
use motion_prep::masking::{trajectory_mask, MaskSet};
use motion_prep::rng::seeded;
use motion_prep::targets::{
    align_features, feature_loss, pixel_loss, pixel_targets, read_feature_archive, write_feature_archive, FeatureGrid,
    FileTeacher, MockTeacher, TargetKind, TeacherFeatureProvider, TokenTargets,
};
use motion_prep::tokenizer::{tokenize, TokenGeometry};
use motion_prep::Error;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

/// Provider returning whatever grid it was built with.
struct Fixed(FeatureGrid);

impl TeacherFeatureProvider for Fixed {
    fn dim(&self) -> usize {
        self.0.dim
    }

    fn features(&self, _: &Clip) -> motion_prep::Result<FeatureGrid> {
        Ok(self.0.clone())
    }
}

fn random_grid(rng: &mut impl Rng, frames: usize, rows: usize, cols: usize, dim: usize) -> FeatureGrid {
    let data = (0..frames * rows * cols * dim).map(|_| rng.random_range(-5.0f32..5.0)).collect();
    FeatureGrid::new(frames, rows, cols, dim, data).unwrap()
}

#[test]
fn first_slice_rule_on_random_providers() {
    let mut rng = seeded(17);
    for case in 0..100 {
        let pt = rng.random_range(1..=4);
        let ps = rng.random_range(1..=4);
        let geom = TokenGeometry::new(pt * rng.random_range(1..=4), ps * rng.random_range(1..=5), ps * rng.random_range(1..=5), pt, ps).unwrap();
        let dim = rng.random_range(1..=6);
        let grid = random_grid(&mut rng, geom.frames, geom.grid_rows(), geom.grid_cols(), dim);
        let provider = Fixed(grid.clone());
        let clip = Clip::black(geom.frames, geom.height, geom.width, "c");
        let targets = align_features(&provider.features(&clip).unwrap(), &geom).unwrap();
        assert_eq!(targets.len(), geom.token_count());
        let mut i = 0;
        for tau in 0..geom.grid_frames() {
            for r in 0..geom.grid_rows() {
                for c in 0..geom.grid_cols() {
                    let off = ((tau * pt * grid.rows + r) * grid.cols + c) * dim;
                    assert_eq!(targets.vector(i), &grid.data[off..off + dim], "case {case} token {i}");
                    i += 1;
                }
            }
        }
        // other frames in each slice never reach the targets
        let mut perturbed = grid.clone();
        for t in (0..geom.frames).filter(|t| t % pt != 0) {
            let span = grid.rows * grid.cols * dim;
            for v in &mut perturbed.data[t * span..(t + 1) * span] {
                *v += 1.0;
            }
        }
        assert_eq!(align_features(&perturbed, &geom).unwrap(), targets);
    }
}

#[test]
fn default_geometry_has_1568_targets() {
    let geom = TokenGeometry::default();
    let teacher = MockTeacher::new(0, 8, 16).unwrap();
    let clip = Clip::black(16, 224, 224, "c");
    let targets = align_features(&teacher.features(&clip).unwrap(), &geom).unwrap();
    assert_eq!(targets.len(), 1568);
    assert!(targets.data.iter().all(|&v| v == 0.0));
}

#[test]
fn mismatched_teacher_grid_is_rejected() {
    let geom = TokenGeometry::default();
    let grid = FeatureGrid::new(16, 7, 7, 2, vec![0.0; 16 * 49 * 2]).unwrap();
    assert!(matches!(align_features(&grid, &geom), Err(Error::Shape(_))));
}

/// Plain double loop over the masked tokens, then the mean.
fn naive_loss(targets: &[Vec<f64>], predictions: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    for k in 0..targets.len() {
        for d in 0..targets[k].len() {
            total += (targets[k][d] - predictions[k][d]).powi(2);
        }
    }
    total / targets.len() as f64
}

#[test]
fn loss_matches_naive_reference() {
    let mut rng = seeded(99);
    for case in 0..500 {
        let geom = TokenGeometry::new(4, 8, 8, 2, 4).unwrap();
        let n = geom.token_count();
        let dim = rng.random_range(1..=12);
        let pixels = case % 2 == 0;
        let kind = if pixels { TargetKind::Pixels } else { TargetKind::Features };
        let targets = TokenTargets { kind, dim, data: (0..n * dim).map(|_| rng.random_range(-3.0f32..3.0)).collect() };
        let objects: Vec<u32> = (0..n as u32).filter(|_| rng.random_bool(0.2)).collect();
        let mask = trajectory_mask(&geom, rng.random_range(0.1..0.95), &objects, &mut seeded(case)).unwrap();
        let preds: Vec<f32> = (0..mask.masked.len() * dim).map(|_| rng.random_range(-3.0f32..3.0)).collect();
        let got = if pixels {
            pixel_loss(&targets, &mask.masked, &preds, &mask).unwrap()
        } else {
            feature_loss(&targets, &mask.masked, &preds, &mask).unwrap()
        };
        let t: Vec<Vec<f64>> = mask.masked.iter().map(|&i| targets.vector(i as usize).iter().map(|&v| v as f64).collect()).collect();
        let p: Vec<Vec<f64>> = preds.chunks(dim).map(|c| c.iter().map(|&v| v as f64).collect()).collect();
        let want = naive_loss(&t, &p);
        assert!((got - want).abs() <= 1e-9 * want.abs().max(1e-300), "case {case}: {got} vs {want}");

        // zero iff predictions equal targets
        let exact = targets.gather(&mask.masked);
        assert_eq!(feature_or_pixel(&targets, &mask, &exact), 0.0);
    }
}

fn feature_or_pixel(targets: &TokenTargets, mask: &MaskSet, preds: &[f32]) -> f64 {
    match targets.kind {
        TargetKind::Pixels => pixel_loss(targets, &mask.masked, preds, mask).unwrap(),
        TargetKind::Features => feature_loss(targets, &mask.masked, preds, mask).unwrap(),
    }
}

#[test]
fn hand_case() {
    let targets = TokenTargets { kind: TargetKind::Features, dim: 2, data: vec![1.0, 0.0, 0.0, 1.0] };
    let mask = MaskSet::from_parts(2, vec![0, 1], &[]).unwrap();
    assert_eq!(feature_loss(&targets, &[0, 1], &[0.0; 4], &mask).unwrap(), 1.0);
    assert!(pixel_loss(&targets, &[0, 1], &[0.0; 4], &mask).is_err());
}

#[test]
fn pixel_targets_are_raw_cubes() {
    let geom = TokenGeometry::new(2, 4, 4, 2, 2).unwrap();
    let data: Vec<f32> = (0..2 * 4 * 4 * 3).map(|i| i as f32 / 96.0).collect();
    let clip = Clip::new(2, 4, 4, data, "c").unwrap();
    let tokens = tokenize(&clip, &geom).unwrap();
    let targets = pixel_targets(&tokens);
    assert_eq!((targets.len(), targets.dim), (4, 24));
    assert_eq!(targets.data, tokens.data);
}

#[test]
fn archive_round_trip_and_file_teacher() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = seeded(3);
    let grid = random_grid(&mut rng, 4, 2, 3, 5);
    write_feature_archive(&dir.path().join("a.smtf"), &grid).unwrap();
    assert_eq!(read_feature_archive(&dir.path().join("a.smtf")).unwrap(), grid);
    std::fs::write(dir.path().join("index.json"), r#"{"clip-a": "a.smtf"}"#).unwrap();
    let teacher = FileTeacher::open(&dir.path().join("index.json")).unwrap();
    assert_eq!(teacher.dim(), 5);
    assert_eq!(teacher.features(&Clip::black(4, 4, 6, "clip-a")).unwrap(), grid);
    assert!(matches!(teacher.features(&Clip::black(4, 4, 6, "clip-b")), Err(Error::MissingFeatures(_))));

    let mut bytes = std::fs::read(dir.path().join("a.smtf")).unwrap();
    bytes.truncate(bytes.len() - 3);
    std::fs::write(dir.path().join("a.smtf"), &bytes).unwrap();
    assert!(matches!(teacher.features(&Clip::black(4, 4, 6, "clip-a")), Err(Error::Archive { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn loss_is_order_invariant_and_nonnegative(seed in any::<u64>(), dim in 1usize..8) {
        let mut rng = seeded(seed);
        let geom = TokenGeometry::new(2, 8, 8, 2, 4).unwrap();
        let n = geom.token_count();
        let targets = TokenTargets { kind: TargetKind::Features, dim, data: (0..n * dim).map(|_| rng.random::<f32>()).collect() };
        let mask = MaskSet::from_parts(n, vec![0, 2, 3], &[2]).unwrap();
        let preds: Vec<f32> = (0..3 * dim).map(|_| rng.random::<f32>()).collect();
        let base = feature_loss(&targets, &mask.masked, &preds, &mask).unwrap();
        prop_assert!(base >= 0.0);

        let mut order: Vec<usize> = (0..3).collect();
        order.shuffle(&mut rng);
        let indices: Vec<u32> = order.iter().map(|&k| mask.masked[k]).collect();
        let shuffled: Vec<f32> = order.iter().flat_map(|&k| preds[k * dim..(k + 1) * dim].to_vec()).collect();
        let again = feature_loss(&targets, &indices, &shuffled, &mask).unwrap();
        prop_assert!((base - again).abs() <= 1e-12 * base.max(1.0));
    }
}
