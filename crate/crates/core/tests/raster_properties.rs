use landchange::raster::{read_bytemap, read_scene, write_bytemap, write_scene};
use landchange::{ByteMap, Geotransform, MapKind, Raster, Window};
use proptest::prelude::*;

fn dyadic() -> impl Strategy<Value = f64> {
    (-4000i32..4000).prop_map(|v| f64::from(v) * 0.5)
}

fn geotransform() -> impl Strategy<Value = Geotransform> {
    (
        dyadic(),
        1u8..40,
        dyadic(),
        prop_oneof![(-40i8..-1), (1i8..40)],
    )
        .prop_map(|(x, pw, y, ph)| Geotransform([x, f64::from(pw), 0.0, y, 0.0, f64::from(ph)]))
}

fn raster() -> impl Strategy<Value = Raster<f32>> {
    (
        1usize..9,
        1usize..9,
        1usize..5,
        geotransform(),
        prop::option::of(-100i16..100),
    )
        .prop_flat_map(|(w, h, b, gt, nd)| {
            prop::collection::vec(any::<f32>(), w * h * b)
                .prop_map(move |data| Raster::new(w, h, b, gt, nd.map(f32::from), data).unwrap())
        })
}

fn bits(r: &Raster<f32>) -> Vec<u32> {
    r.data().iter().map(|v| v.to_bits()).collect()
}

/// Maps arbitrary numbers onto a valid window of a `w` x `h` grid.
fn fit_window(v: [u16; 4], w: usize, h: usize) -> Window {
    let row0 = usize::from(v[0]) % h;
    let col0 = usize::from(v[1]) % w;
    let rows = 1 + usize::from(v[2]) % (h - row0);
    let cols = 1 + usize::from(v[3]) % (w - col0);
    Window::new(row0, col0, rows, cols)
}

proptest! {
    #[test]
    fn layout_is_band_sequential(r in raster()) {
        let (w, h) = (r.width(), r.height());
        for b in 0..r.band_count() {
            for row in 0..h {
                for col in 0..w {
                    let got = r.get_pixel(row, col, b).unwrap();
                    prop_assert_eq!(got.to_bits(), r.data()[b * w * h + row * w + col].to_bits());
                }
            }
        }
    }

    #[test]
    fn crop_composes(r in raster(), a in any::<[u16; 4]>(), b in any::<[u16; 4]>()) {
        let outer = fit_window(a, r.width(), r.height());
        let inner = fit_window(b, outer.cols, outer.rows);
        let twice = r.crop(&outer).unwrap().crop(&inner).unwrap();
        let once = r.crop(&outer.compose(&inner)).unwrap();
        prop_assert_eq!(twice.geotransform(), once.geotransform());
        prop_assert_eq!((twice.width(), twice.height()), (once.width(), once.height()));
        prop_assert_eq!(bits(&twice), bits(&once));
    }

    #[test]
    fn scene_round_trip(r in raster()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scene.json");
        write_scene(&r, &path).unwrap();
        let back: Raster<f32> = read_scene(&path).unwrap();
        prop_assert_eq!(back.geotransform(), r.geotransform());
        prop_assert_eq!(back.nodata(), r.nodata());
        prop_assert_eq!((back.width(), back.height(), back.band_count()), (r.width(), r.height(), r.band_count()));
        prop_assert_eq!(bits(&back), bits(&r));
    }

    #[test]
    fn bytemap_round_trip(w in 1usize..12, h in 1usize..12, gt in geotransform(), seed in any::<u64>(), change in any::<bool>()) {
        let (kind, legal): (MapKind, &[u8]) = if change {
            (MapKind::ChangeMap, &[0, 1, 2, 3, 255])
        } else {
            (MapKind::ClassMap, &[0, 1, 255])
        };
        let mut rng = landchange::SplitMix64::new(seed);
        let codes = (0..w * h).map(|_| legal[rng.below(legal.len())]).collect();
        let m = ByteMap::new(w, h, gt, kind, codes).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("map.json");
        write_bytemap(&m, &path).unwrap();
        prop_assert_eq!(read_bytemap(&path).unwrap(), m);
    }
}
