use explain_core::classifier::synthetic;
use explain_core::floodlight::{floodlight_search, SearchParams};
use explain_core::responsibility::{rank, RankParams};
use explain_core::rng::stream;
use explain_core::{apply_mask, Image, MaskingColour, PixelSet, SaliencyLandscape};
use proptest::prelude::*;

fn reference(w: usize, h: usize) -> Image {
    Image::from_fn(w, h, |x, y| [(x * 5 % 200) as u8 + 20, (y * 3 % 200) as u8 + 20, 60])
}

#[test]
fn search_covers_a_single_patch() {
    let (w, h) = (64, 64);
    let img = reference(w, h);
    let patch = PixelSet::rect(w, h, 37, 18, 44, 25);
    let clf = synthetic::patch_or(vec![patch.clone()], img.clone()).unwrap();
    let landscape = rank::<f64>(&img, &clf, 1, &RankParams::for_image(w, h)).unwrap().landscape;
    let params = SearchParams::for_image(w, h);
    let colour = MaskingColour::default();
    let covered = (0..50u64)
        .filter(|&seed| {
            let hit = floodlight_search(&img, &clf, 1, &landscape, &params, colour, &mut stream(seed, &[]))
                .unwrap();
            hit.is_some_and(|h| {
                let kept = clf.classify(&apply_mask(&img, &h.pixels, colour).unwrap()).unwrap();
                assert_eq!(kept.label, 1);
                patch.is_subset(&h.pixels)
            })
        })
        .count();
    assert!(covered >= 48, "{covered}/50");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn search_respects_budget_and_is_reproducible(
        seed in any::<u64>(),
        x0 in 0usize..20,
        y0 in 0usize..20,
        side in 1usize..8,
        steps in 1usize..8,
        expansions in 1usize..4,
        radius in 0.5f64..4.0,
    ) {
        let (w, h) = (28, 28);
        let img = reference(w, h);
        let patch = PixelSet::rect(w, h, x0, y0, x0 + side - 1, y0 + side - 1);
        let clf = synthetic::patch_or(vec![patch], img.clone()).unwrap();
        let values: Vec<f64> = (0..w * h).map(|i| ((i * 37) % 11) as f64 / 10.0).collect();
        let landscape = SaliencyLandscape::from_values(w, h, values, 1);
        let params = SearchParams { steps, expansions, expansion_coeff: 1.4, radius };
        let colour = MaskingColour::default();
        let run = || floodlight_search(&img, &clf, 1, &landscape, &params, colour, &mut stream(seed, &[])).unwrap();
        let before = clf.call_count();
        let a = run();
        prop_assert!(clf.call_count() - before <= (steps * expansions) as u64);
        let b = run();
        prop_assert_eq!(a.as_ref().map(|h| (&h.pixels, h.floodlight)), b.as_ref().map(|h| (&h.pixels, h.floodlight)));
        if let Some(hit) = a {
            let v = clf.classify(&apply_mask(&img, &hit.pixels, colour).unwrap()).unwrap();
            prop_assert_eq!(v.label, 1);
            let j = (hit.floodlight.radius / radius).ln() / 1.4f64.ln();
            prop_assert!((j - j.round()).abs() < 1e-9 && (j.round() as usize) < expansions);
            prop_assert!(hit.floodlight.center.x >= 0.0 && hit.floodlight.center.x <= w as f64);
            prop_assert!(hit.floodlight.center.y >= 0.0 && hit.floodlight.center.y <= h as f64);
        }
    }
}
