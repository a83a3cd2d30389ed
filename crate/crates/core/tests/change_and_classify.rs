use landchange::cart::{train, CartParams};
use landchange::change::{change_stats, detect_change};
use landchange::classify::classify_raster;
use landchange::metrics::confusion;
use landchange::samples::{sample_raster, SampleGeometry};
use landchange::synth::{generate_change_pair, ClassLayout, TransitionPlan};
use landchange::{
    ByteMap, Geotransform, LabeledFeature, LandCover, MapKind, SceneSpec, SplitMix64, Window,
};
use proptest::prelude::*;

fn classmap(w: usize, h: usize, codes: Vec<u8>) -> ByteMap {
    ByteMap::new(w, h, Geotransform::IDENTITY, MapKind::ClassMap, codes).unwrap()
}

fn class_codes(n: usize) -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(prop::sample::select(vec![0u8, 1, 255]), n)
}

#[test]
fn truth_table_is_exhaustive() {
    let values = [0u8, 1, 255];
    for o in values {
        for n in values {
            let m = detect_change(&classmap(1, 1, vec![o]), &classmap(1, 1, vec![n])).unwrap();
            let expected = if o == 255 || n == 255 { 255 } else { 2 * o + n };
            assert_eq!(m.codes()[0], expected, "old {o} new {n}");
        }
    }
}

proptest! {
    #[test]
    fn time_reversal_swaps_growth_and_loss((w, h, a, b) in (1usize..10, 1usize..10).prop_flat_map(|(w, h)| (Just(w), Just(h), class_codes(w * h), class_codes(w * h)))) {
        let old = classmap(w, h, a);
        let new = classmap(w, h, b);
        let forward = detect_change(&old, &new).unwrap();
        let backward = detect_change(&new, &old).unwrap();
        for (&f, &r) in forward.codes().iter().zip(backward.codes()) {
            let swapped = match f { 1 => 2, 2 => 1, c => c };
            prop_assert_eq!(r, swapped);
        }
    }

    #[test]
    fn stats_are_additive((w, h, codes, split) in (1usize..12, 2usize..12).prop_flat_map(|(w, h)| (Just(w), Just(h), prop::collection::vec(prop::sample::select(vec![0u8, 1, 2, 3, 255]), w * h), 1..h))) {
        let m = ByteMap::new(w, h, Geotransform::IDENTITY, MapKind::ChangeMap, codes).unwrap();
        let whole = change_stats(&m);
        prop_assert_eq!(whole.total(), (w * h) as u64);
        let top = change_stats(&m.crop(&Window::new(0, 0, split, w)).unwrap());
        let bottom = change_stats(&m.crop(&Window::new(split, 0, h - split, w)).unwrap());
        prop_assert_eq!(top + bottom, whole);
    }

    #[test]
    fn confusion_ignores_pixel_order((codes, perm_seed) in (2usize..40).prop_flat_map(|n| (prop::collection::vec((prop::sample::select(vec![0u8, 1, 255]), prop::sample::select(vec![0u8, 1])), n), any::<u64>()))) {
        let n = codes.len();
        let (p, t): (Vec<u8>, Vec<u8>) = codes.iter().copied().unzip();
        prop_assume!(p.iter().any(|&c| c != 255));
        let base = confusion(&classmap(n, 1, p.clone()), &classmap(n, 1, t.clone())).unwrap();
        let mut order: Vec<usize> = (0..n).collect();
        SplitMix64::new(perm_seed).shuffle(&mut order);
        let p2 = order.iter().map(|&i| p[i]).collect();
        let t2 = order.iter().map(|&i| t[i]).collect();
        prop_assert_eq!(confusion(&classmap(n, 1, p2), &classmap(n, 1, t2)).unwrap(), base);
        let k = base.kappa().unwrap().value;
        prop_assert!((-1.0..=1.0).contains(&k));
        if base.kappa().unwrap().value == 1.0 {
            prop_assert_eq!(base.cells[0][1] + base.cells[1][0], 0);
        }
    }
}

fn pair_spec(width: usize, height: usize, seed: u64) -> SceneSpec {
    SceneSpec {
        width,
        height,
        band_count: 4,
        class_means: vec![vec![0.10, 0.20, 0.30, 0.25], vec![0.30, 0.45, 0.60, 0.55]],
        class_sigma: vec![0.02; 4],
        layout: ClassLayout::default(),
        seed,
        geotransform: Geotransform([300000.0, 30.0, 0.0, 3350000.0, 0.0, -30.0]),
    }
}

fn train_points(truth: &ByteMap, per_class: usize, seed: u64) -> Vec<LabeledFeature> {
    let gt = truth.geotransform();
    let mut rng = SplitMix64::new(seed);
    let mut out = Vec::new();
    for class in [0u8, 1] {
        let mut picked = 0;
        while picked < per_class {
            let idx = rng.below(truth.codes().len());
            if truth.codes()[idx] != class {
                continue;
            }
            let (x, y) = gt.pixel_to_world(
                (idx % truth.width()) as f64 + 0.5,
                (idx / truth.width()) as f64 + 0.5,
            );
            out.push(LabeledFeature {
                geometry: SampleGeometry::Point { x, y },
                label: LandCover::from_code(class).unwrap(),
            });
            picked += 1;
        }
    }
    out
}

#[test]
fn planted_change_is_recovered() {
    let spec = pair_spec(96, 80, 2024);
    let plan = TransitionPlan::Annulus {
        center_row: 40.0,
        center_col: 48.0,
        inner_radius: 12.0,
        outer_radius: 22.0,
        core: 3,
        ring: 1,
        background: 0,
    };
    let (old, new, planted) = generate_change_pair::<f32>(&spec, &plan).unwrap();
    let old_truth = ByteMap::new(
        96,
        80,
        *planted.geotransform(),
        MapKind::ClassMap,
        planted.codes().iter().map(|c| c / 2).collect(),
    )
    .unwrap();
    let features = train_points(&old_truth, 60, 5);
    let table = sample_raster(&old, &features).unwrap();
    let tree = train(&table, &CartParams::default()).unwrap();
    let a = classify_raster(&tree, &old).unwrap();
    let b = classify_raster(&tree, &new).unwrap();
    let change = detect_change(&a, &b).unwrap();
    let agree = change
        .codes()
        .iter()
        .zip(planted.codes())
        .filter(|(x, y)| x == y)
        .count();
    assert!(
        agree as f64 / planted.codes().len() as f64 >= 0.99,
        "agreement {agree}"
    );
}

#[test]
fn classification_is_pixel_local_and_schedule_free() {
    let spec = pair_spec(70, 50, 9);
    let plan = TransitionPlan::Annulus {
        center_row: 25.0,
        center_col: 35.0,
        inner_radius: 8.0,
        outer_radius: 15.0,
        core: 3,
        ring: 1,
        background: 0,
    };
    let (old, _, planted) = generate_change_pair::<f32>(&spec, &plan).unwrap();
    let old_truth = ByteMap::new(
        70,
        50,
        *planted.geotransform(),
        MapKind::ClassMap,
        planted.codes().iter().map(|c| c / 2).collect(),
    )
    .unwrap();
    let table = sample_raster(&old, &train_points(&old_truth, 30, 1)).unwrap();
    let tree = train(&table, &CartParams::default()).unwrap();
    let full = classify_raster(&tree, &old).unwrap();
    for w in [
        Window::new(0, 0, 50, 70),
        Window::new(3, 7, 20, 30),
        Window::new(49, 69, 1, 1),
        Window::new(10, 0, 40, 70),
    ] {
        let part = classify_raster(&tree, &old.crop(&w).unwrap()).unwrap();
        assert_eq!(part, full.crop(&w).unwrap());
    }
    for threads in [1, 2, 5] {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        let m = pool.install(|| classify_raster(&tree, &old).unwrap());
        assert_eq!(m, full);
    }
    assert!(full.codes().iter().all(|&c| c <= 1));
}
