use proptest::prelude::*;
use salience_core::emphasis::{emergent_feature_map, emphasis_proportion, BBox};
use salience_core::Heatmap;

fn map_and_box() -> impl Strategy<Value = (Heatmap, BBox)> {
    (2usize..40, 2usize..40).prop_flat_map(|(w, h)| {
        (
            prop::collection::vec(0.0f64..255.0, w * h),
            0.0..w as f64,
            0.0..h as f64,
            1.0..w as f64 + 1.0,
            1.0..h as f64 + 1.0,
        )
            .prop_map(move |(v, x, y, bw, bh)| {
                let mut v = v;
                v[0] += 1.0;
                (Heatmap::new(w, h, v).unwrap(), BBox::new(x, y, bw, bh))
            })
    })
}

/// Mass outside the box, counted by testing every pixel centre.
fn outside_mass(hm: &Heatmap, b: &BBox) -> f64 {
    let mut s = 0.0;
    for y in 0..hm.height() {
        for x in 0..hm.width() {
            let (cx, cy) = (x as f64 + 0.5, y as f64 + 0.5);
            let inside = b.x <= cx && cx < b.x + b.w && b.y <= cy && cy < b.y + b.h;
            if !inside {
                s += hm.get(x, y);
            }
        }
    }
    s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn inside_plus_outside_is_one((hm, b) in map_and_box()) {
        if let Ok(p) = emphasis_proportion(&hm, &b) {
            prop_assert!((p + outside_mass(&hm, &b) / hm.sum() - 1.0).abs() < 1e-9);
        }
    }
}

proptest! {
    #[test]
    fn emergent_map_is_bounded(
        a in prop::collection::vec(0.0f64..255.0, 64),
        b in prop::collection::vec(0.0f64..255.0, 64),
    ) {
        let a = Heatmap::new(8, 8, a).unwrap();
        let b = Heatmap::new(8, 8, b).unwrap();
        let e = emergent_feature_map(&a, &b).unwrap();
        prop_assert!(e.min() >= 0.0);
        prop_assert!(e.max() <= 100.0);
    }
}
