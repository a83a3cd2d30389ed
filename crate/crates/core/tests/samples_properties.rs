use landchange::samples::{
    parse_feature_collection, sample_raster, split_table, to_feature_collection, SampleGeometry,
};
use landchange::{Geotransform, LabeledFeature, LandCover, Raster, TrainingTable};
use proptest::prelude::*;

/// Plain even-odd ray cast written independently of the library, with
/// pixel centres nudged off vertex rows by generating vertices on a
/// quarter-pixel lattice (centres sit at half-pixels).
fn brute_inside(ring: &[(f64, f64)], px: f64, py: f64) -> bool {
    let mut crossings = 0;
    for k in 0..ring.len() - 1 {
        let (x1, y1) = ring[k];
        let (x2, y2) = ring[k + 1];
        if y1 == y2 {
            continue;
        }
        let (lo, hi) = if y1 < y2 { (y1, y2) } else { (y2, y1) };
        if py < lo || py >= hi {
            continue;
        }
        let x_at = x1 + (py - y1) / (y2 - y1) * (x2 - x1);
        if x_at > px {
            crossings += 1;
        }
    }
    crossings % 2 == 1
}

fn ring() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0i32..49, 0i32..49), 3..7).prop_map(|pts| {
        let mut ring: Vec<(f64, f64)> = pts
            .into_iter()
            .map(|(x, y)| (f64::from(x) * 0.25 + 0.125, f64::from(y) * 0.25 + 0.125))
            .collect();
        ring.push(ring[0]);
        ring
    })
}

fn scene(nodata_every: usize) -> Raster<f32> {
    let (w, h) = (12, 12);
    let mut data: Vec<f32> = (0..w * h).map(|v| v as f32).collect();
    for (i, v) in data.iter_mut().enumerate() {
        if nodata_every > 0 && i % nodata_every == 0 {
            *v = -1.0;
        }
    }
    Raster::new(w, h, 1, Geotransform::IDENTITY, Some(-1.0), data).unwrap()
}

proptest! {
    #[test]
    fn polygon_rows_match_brute_force(ring in ring(), every in 0usize..7) {
        let r = scene(every);
        let mut expected = Vec::new();
        for row in 0..r.height() {
            for col in 0..r.width() {
                if brute_inside(&ring, col as f64 + 0.5, row as f64 + 0.5) {
                    expected.push((row, col));
                }
            }
        }
        let features = [LabeledFeature { geometry: SampleGeometry::Polygon(ring), label: LandCover::Urban }];
        match sample_raster(&r, &features) {
            Ok(t) => {
                let unmasked: Vec<f32> = expected
                    .iter()
                    .filter(|&&(row, col)| !r.is_masked(row, col).unwrap())
                    .map(|&(row, col)| r.get_pixel(row, col, 0).unwrap())
                    .collect();
                let got: Vec<f32> = t.rows().iter().map(|s| s.values[0]).collect();
                prop_assert_eq!(got, unmasked);
            }
            Err(_) => prop_assert!(expected.is_empty()),
        }
    }

    #[test]
    fn geojson_reserialization(points in prop::collection::vec((-1e6f64..1e6, -1e6f64..1e6, any::<bool>()), 0..6), ring in ring()) {
        let mut features: Vec<LabeledFeature> = points
            .into_iter()
            .map(|(x, y, u)| LabeledFeature {
                geometry: SampleGeometry::Point { x, y },
                label: if u { LandCover::Urban } else { LandCover::NonUrban },
            })
            .collect();
        features.push(LabeledFeature { geometry: SampleGeometry::Polygon(ring), label: LandCover::NonUrban });
        let text = to_feature_collection(&features);
        prop_assert_eq!(parse_feature_collection(&text).unwrap(), features);
    }

    #[test]
    fn split_partitions_rows(n0 in 2usize..30, n1 in 2usize..30, frac in 0.05f64..0.95, seed in any::<u64>()) {
        let mut t = TrainingTable::<f32>::new(1);
        for i in 0..n0 {
            t.push(vec![i as f32], LandCover::NonUrban).unwrap();
        }
        for i in 0..n1 {
            t.push(vec![1000.0 + i as f32], LandCover::Urban).unwrap();
        }
        let (a, b) = split_table(&t, frac, seed).unwrap();
        let mut all: Vec<u32> = a.rows().iter().chain(b.rows()).map(|s| s.values[0].to_bits()).collect();
        all.sort_unstable();
        let mut input: Vec<u32> = t.rows().iter().map(|s| s.values[0].to_bits()).collect();
        input.sort_unstable();
        prop_assert_eq!(all, input);
        for (label, n) in [(0, n0), (1, n1)] {
            let k = ((frac * n as f64).round() as usize).clamp(1, n - 1);
            prop_assert_eq!(a.label_counts()[label], k);
        }
    }
}
