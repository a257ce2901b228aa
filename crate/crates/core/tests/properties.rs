use std::num::NonZeroUsize;

use oitlab::blend::{hybrid_transparency, wavg, wboit, wsum, WeightFn};
use oitlab::dfaoit::{extract_features, render_dfaoit};
use oitlab::mlp::{backward, forward, numeric_gradients, relative_error, MlpWeights, DFAOIT_DIMS};
use oitlab::{composite_exact, sort_by_depth, transmittance_product, Fragment, FrameFragmentBuffer, PixelFragments, Rgb};
use proptest::prelude::*;

fn rgb() -> impl Strategy<Value = Rgb> {
    (0.0f32..=1.0, 0.0f32..=1.0, 0.0f32..=1.0).prop_map(|(r, g, b)| Rgb::new(r, g, b))
}

fn fragments(max: usize) -> impl Strategy<Value = Vec<Fragment>> {
    prop::collection::vec((0.0f32..1.0, rgb(), 0.0f32..=1.0), 0..max).prop_map(|v| {
        v.into_iter().enumerate().map(|(i, (z, c, a))| Fragment::new(z, c, a, i as u32)).collect()
    })
}

proptest! {
    #[test]
    fn alpha_zero_insertion_is_invisible(list in fragments(12), z in 0.0f32..1.0, c in rgb(), bg in rgb()) {
        let before = composite_exact(&sort_by_depth(PixelFragments::from_fragments(list.clone())), bg);
        let mut with = list;
        let seq = with.len() as u32;
        with.push(Fragment::new(z, c, 0.0, seq));
        let after = composite_exact(&sort_by_depth(PixelFragments::from_fragments(with)), bg);
        prop_assert!(before.max_abs_diff(after) <= 1e-6);
    }

    #[test]
    fn background_enters_linearly(list in fragments(12), bg in rgb()) {
        let sorted = sort_by_depth(PixelFragments::from_fragments(list));
        let split = composite_exact(&sorted, Rgb::BLACK) + bg * transmittance_product(&sorted);
        prop_assert!(composite_exact(&sorted, bg).max_abs_diff(split) <= 1e-5);
    }

    #[test]
    fn opaque_front_fragment_dominates(list in fragments(8), c in rgb(), bg in rgb()) {
        let mut with = list;
        let seq = with.len() as u32;
        // strictly in front of every generated depth
        with.push(Fragment::new(-0.5, c, 1.0, seq));
        prop_assert_eq!(composite_exact(&sort_by_depth(PixelFragments::from_fragments(with)), bg), c);
    }

    #[test]
    fn blended_operators_ignore_order(list in fragments(16), bg in rgb(), rot in 0usize..16) {
        let a = PixelFragments::from_fragments(list.clone());
        let mut shuffled = list;
        let len = shuffled.len().max(1);
        shuffled.rotate_left(rot % len);
        shuffled.reverse();
        let b = PixelFragments::from_fragments(shuffled);
        prop_assert!(wsum(&a, bg).max_abs_diff(wsum(&b, bg)) <= 1e-5);
        prop_assert!(wavg(&a, bg).max_abs_diff(wavg(&b, bg)) <= 1e-5);
        prop_assert!(wboit(&a, bg, WeightFn::DEFAULT).max_abs_diff(wboit(&b, bg, WeightFn::DEFAULT)) <= 1e-5);
    }

    #[test]
    fn ht_with_large_k_is_exact(list in fragments(6), bg in rgb()) {
        let p = PixelFragments::from_fragments(list);
        let exact = composite_exact(&sort_by_depth(p.clone()), bg);
        prop_assert!(hybrid_transparency(&p, bg, NonZeroUsize::new(6).unwrap()).max_abs_diff(exact) <= 1e-6);
    }

    #[test]
    fn feature_invariants(list in fragments(20)) {
        let p = sort_by_depth(PixelFragments::from_fragments(list));
        let n = p.len();
        let rec = extract_features(&p);
        let f = rec.features;
        prop_assert!(f.g_front.in_unit_range());
        prop_assert!(f.c_avg_tail.in_unit_range());
        prop_assert!(f.a_avg_tail >= 0.0 && f.a_avg_tail <= (n.saturating_sub(2)) as f32 / n.max(1) as f32 + 1e-6);
        prop_assert_eq!(rec.bg_product.to_bits(), transmittance_product(&p).to_bits());
    }
}

#[test]
fn bypass_pixels_equal_exact() {
    let mut frame = FrameFragmentBuffer::new(3, 1);
    frame.pixel_mut(1, 0).push(Fragment::new(0.3, Rgb::new(0.9, 0.2, 0.1), 0.35, 0));
    frame.pixel_mut(2, 0).push(Fragment::new(0.7, Rgb::new(0.1, 0.3, 0.8), 0.6, 0));
    frame.pixel_mut(2, 0).push(Fragment::new(0.2, Rgb::new(0.5, 0.5, 0.1), 0.45, 1));
    let bg = Rgb::new(0.2, 0.6, 0.9);
    let img = render_dfaoit(&frame, &MlpWeights::he_uniform(&DFAOIT_DIMS, 4), bg).unwrap();
    for (x, px) in frame.pixels().iter().enumerate() {
        let exact = composite_exact(&sort_by_depth(px.clone()), bg).clamp01();
        assert_eq!(img.get(x, 0), exact, "pixel {x}");
    }
}

#[test]
fn backprop_matches_finite_differences() {
    let mut worst = 0.0f64;
    for seed in 0..10u64 {
        let net = MlpWeights::he_uniform(&DFAOIT_DIMS, seed);
        let x: Vec<f64> = (0..10).map(|i| ((seed * 31 + i * 7) % 13) as f64 / 13.0).collect();
        let t = [0.3, 0.6, 0.1];
        let analytic = backward(&net, &forward(&net, &x).unwrap(), &t).unwrap().flat();
        let numeric = numeric_gradients(&net, &x, &t, 1e-6).unwrap().flat();
        for (a, n) in analytic.iter().zip(&numeric) {
            worst = worst.max(relative_error(*a, *n));
        }
    }
    eprintln!("worst relative error {worst:e}");
    assert!(worst <= 1e-6, "{worst:e}");
}
