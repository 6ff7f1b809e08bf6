use explain_core::classifier::synthetic::PatchThreshold;
use explain_core::classifier::ClassifierHandle;
use explain_core::explanation::{drain, extract, sdc, Explanation, Provenance};
use explain_core::{apply_mask, Image, MaskingColour, PixelSet, SaliencyLandscape};
use proptest::prelude::*;

const W: usize = 8;
const H: usize = 8;

fn reference() -> Image {
    Image::from_fn(W, H, |x, y| [(x * 29) as u8 + 3, (y * 31) as u8 + 3, 140])
}

fn pixel_set() -> impl Strategy<Value = PixelSet> {
    proptest::collection::vec(any::<bool>(), W * H)
        .prop_map(|bits| PixelSet::from_indices(W, H, (0..W * H).filter(|&i| bits[i])))
}

fn candidate(pixels: PixelSet) -> Explanation {
    Explanation { pixels, label: 1, confidence: 1.0, source: Provenance::degenerate() }
}

fn patch() -> impl Strategy<Value = PixelSet> {
    (0..W - 1, 0..H - 1, 1usize..3, 1usize..3)
        .prop_map(|(x, y, pw, ph)| PixelSet::rect(W, H, x, y, (x + pw - 1).min(W - 1), (y + ph - 1).min(H - 1)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    /// Bisection finds the same water level as trying every level from the top.
    #[test]
    fn drain_matches_linear_scan(
        patches in proptest::collection::vec(patch(), 1..4),
        threshold_pick in 0usize..3,
        tenths in proptest::collection::vec(0u8..=10, W * H),
    ) {
        prop_assume!(patches.iter().enumerate().all(|(i, p)| patches[..i].iter().all(|q| q.is_disjoint(p))));
        let img = reference();
        let threshold = 1 + threshold_pick % patches.len();
        let clf = ClassifierHandle::new(PatchThreshold::new(patches, img.clone(), threshold).unwrap());
        let colour = MaskingColour::default();
        let values: Vec<f64> = tenths.iter().map(|&t| f64::from(t) / 10.0).collect();
        let landscape = SaliencyLandscape::from_values(W, H, values.clone(), 1);
        let full = Explanation::certify(&img, &clf, 1, colour, PixelSet::full(W, H), Provenance::degenerate()).unwrap();

        let drained = drain(&img, &full, 1, &clf, &landscape, colour).unwrap();
        prop_assert!(drained.pixels.is_subset(&full.pixels));
        prop_assert_eq!(clf.classify(&apply_mask(&img, &drained.pixels, colour).unwrap()).unwrap().label, 1);

        let mut levels = tenths.clone();
        levels.sort_unstable_by(|a, b| b.cmp(a));
        levels.dedup();
        let scan = levels
            .iter()
            .map(|&t| PixelSet::from_indices(W, H, (0..W * H).filter(|&i| tenths[i] >= t)))
            .find(|s| clf.classify(&apply_mask(&img, s, colour).unwrap()).unwrap().label == 1)
            .unwrap();
        prop_assert_eq!(drained.pixels, scan);
    }

    #[test]
    fn extract_keeps_overlap_bounded(
        sets in proptest::collection::vec(pixel_set(), 0..8),
        delta_pick in 0usize..5,
    ) {
        let delta = [0.0, 0.1, 0.25, 0.5, 1.0][delta_pick];
        let sets: Vec<PixelSet> = sets.into_iter().filter(|s| !s.is_empty()).collect();
        let out = extract(sets.iter().cloned().map(candidate).collect(), delta);
        prop_assert!(out.len() <= sets.len());
        prop_assert!(sets.is_empty() || !out.is_empty());
        for (i, a) in out.iter().enumerate() {
            prop_assert!(sets.contains(&a.pixels));
            for b in &out[..i] {
                prop_assert!(a.pixels != b.pixels);
                prop_assert!(sdc(&a.pixels, &b.pixels).unwrap() <= delta);
                if delta == 0.0 {
                    prop_assert!(a.pixels.is_disjoint(&b.pixels));
                }
            }
        }
    }

    #[test]
    fn sdc_is_symmetric_and_bounded(a in pixel_set(), b in pixel_set()) {
        prop_assume!(!(a.is_empty() && b.is_empty()));
        let ab = sdc(&a, &b).unwrap();
        prop_assert_eq!(ab, sdc(&b, &a).unwrap());
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(ab == 0.0, a.is_disjoint(&b));
    }
}

#[test]
fn sdc_examples() {
    let a = PixelSet::from_indices(W, H, [0, 1, 2]);
    let b = PixelSet::from_indices(W, H, [1, 2, 3, 4, 5]);
    assert_eq!(sdc(&a, &b).unwrap(), 0.5);
    assert_eq!(sdc(&a, &a).unwrap(), 1.0);
    assert_eq!(sdc(&a, &PixelSet::from_indices(W, H, [9])).unwrap(), 0.0);
    assert!(sdc(&PixelSet::empty(W, H), &PixelSet::empty(W, H)).is_err());
}

#[test]
fn extract_examples() {
    let rect = |x0, x1| PixelSet::rect(W, H, x0, 0, x1, 0);
    let disjoint = vec![candidate(rect(0, 1)), candidate(rect(3, 4)), candidate(rect(6, 7))];
    assert_eq!(extract(disjoint.clone(), 0.0), disjoint);

    let twins = vec![candidate(rect(2, 5)), candidate(rect(2, 5))];
    assert_eq!(extract(twins, 0.0).len(), 1);

    // |e1| = |e2| = 5, |e1 ∩ e2| = 3: overlap 0.6
    let e1 = PixelSet::from_indices(W, H, 0..5);
    let e2 = PixelSet::from_indices(W, H, 2..7);
    assert_eq!(sdc(&e1, &e2).unwrap(), 0.6);
    let e3 = PixelSet::rect(W, H, 0, 4, 3, 5);
    let out = extract(vec![candidate(e1.clone()), candidate(e2.clone()), candidate(e3.clone())], 0.5);
    assert_eq!(out.len(), 2);
    assert!(out.iter().any(|e| e.pixels == e3));
    assert!(out.iter().any(|e| e.pixels == e1 || e.pixels == e2));
}
