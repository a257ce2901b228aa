//! Order-independent blending approximations: weighted sum, weighted average,
//! weighted-blended OIT and hybrid transparency.
//!
//! The commutative operators only read per-pixel accumulators, so they never
//! need the list sorted. None of them clamp; clamping happens when an image is
//! assembled.

use std::borrow::Cow;
use std::num::NonZeroUsize;

use crate::color::Rgb;
use crate::fragment::{over_composite, sort_by_depth, Fragment, PixelFragments};

/// A depth/opacity weighting `w(z, a)` for weighted-blended OIT.
#[derive(Clone, Copy, Debug)]
pub struct WeightFn {
    pub name: &'static str,
    pub weight: fn(f32, f32) -> f32,
}

impl WeightFn {
    pub const DEFAULT: WeightFn = WeightFn { name: "cubic-depth", weight: weight_default };

    #[inline]
    pub fn eval(&self, z: f32, a: f32) -> f32 {
        (self.weight)(z, a)
    }
}

impl Default for WeightFn {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// `a * max(1e-2, 3e3 * (1 - z)^3)`.
pub fn weight_default(z: f32, a: f32) -> f32 {
    let near = 1.0 - z;
    a * (3.0e3 * near * near * near).max(1.0e-2)
}

/// Order-free per-pixel sums shared by the blended operators.
///
/// Sums are kept in `f64` and rounded to `f32` once per result, so the
/// output does not depend on the order fragments were added in, even for
/// long lists where unclamped weighted sums grow well past 1.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BlendAccumulators {
    /// `sum a_i C_i`.
    pub sum_premult: [f64; 3],
    /// `sum a_i`.
    pub sum_alpha: f64,
    pub count: usize,
    /// `prod (1 - a_i)`.
    pub product: f64,
    /// `sum C_i a_i w(z_i, a_i)`.
    pub sum_weighted_premult: [f64; 3],
    /// `sum a_i w(z_i, a_i)`.
    pub sum_weighted_alpha: f64,
}

fn to_rgb(c: [f64; 3]) -> Rgb {
    Rgb::new(c[0] as f32, c[1] as f32, c[2] as f32)
}

fn widen(c: Rgb) -> [f64; 3] {
    c.to_array().map(f64::from)
}

impl BlendAccumulators {
    pub fn from_fragments(fragments: &[Fragment], w: WeightFn) -> Self {
        let mut acc = BlendAccumulators { product: 1.0, ..Default::default() };
        for f in fragments {
            acc.add(f, w);
        }
        acc
    }

    #[inline]
    pub fn add(&mut self, f: &Fragment, w: WeightFn) {
        let a = f64::from(f.alpha);
        let aw = a * f64::from(w.eval(f.z, f.alpha));
        let c = widen(f.color);
        for k in 0..3 {
            self.sum_premult[k] += a * c[k];
            self.sum_weighted_premult[k] += aw * c[k];
        }
        self.sum_alpha += a;
        self.count += 1;
        self.product *= 1.0 - a;
        self.sum_weighted_alpha += aw;
    }

    pub fn wsum(&self, background: Rgb) -> Rgb {
        let b = widen(background);
        to_rgb(std::array::from_fn(|k| self.sum_premult[k] + b[k] * (1.0 - self.sum_alpha)))
    }

    pub fn wavg(&self, background: Rgb) -> Rgb {
        if self.count == 0 || self.sum_alpha == 0.0 {
            // C_avg = 0 and a_avg = 0
            return background;
        }
        let a_avg = self.sum_alpha / self.count as f64;
        let transmit = (1.0 - a_avg).powi(self.count as i32);
        let b = widen(background);
        to_rgb(std::array::from_fn(|k| self.sum_premult[k] / self.sum_alpha * (1.0 - transmit) + b[k] * transmit))
    }

    pub fn wboit(&self, background: Rgb) -> Rgb {
        let a_net = 1.0 - self.product;
        let b = widen(background);
        to_rgb(std::array::from_fn(|k| {
            let c_wavg = if self.sum_weighted_alpha > 0.0 {
                self.sum_weighted_premult[k] / self.sum_weighted_alpha
            } else {
                0.0
            };
            c_wavg * a_net + b[k] * (1.0 - a_net)
        }))
    }
}

/// Weighted sum: `sum C_i a_i + C_b (1 - sum a_i)`. May leave `[0, 1]`.
pub fn wsum(list: &PixelFragments, background: Rgb) -> Rgb {
    BlendAccumulators::from_fragments(list.fragments(), WeightFn::DEFAULT).wsum(background)
}

/// Weighted average: the transmittance is spread equally over all fragments.
pub fn wavg(list: &PixelFragments, background: Rgb) -> Rgb {
    BlendAccumulators::from_fragments(list.fragments(), WeightFn::DEFAULT).wavg(background)
}

/// Weighted-blended OIT with exact background coverage.
pub fn wboit(list: &PixelFragments, background: Rgb, w: WeightFn) -> Rgb {
    BlendAccumulators::from_fragments(list.fragments(), w).wboit(background)
}

/// Exact compositing of the `k` closest fragments over a weighted-average tail.
///
/// The tail (all but the `k` closest) is resolved with [`wavg`] against the
/// background, then the core list is over-composited onto that tail color.
/// With `k >= n` this is exactly the sorted over operator.
pub fn hybrid_transparency(list: &PixelFragments, background: Rgb, k: NonZeroUsize) -> Rgb {
    let sorted = if list.is_sorted() { Cow::Borrowed(list) } else { Cow::Owned(sort_by_depth(list.clone())) };
    let frags = sorted.fragments();
    let split = frags.len().saturating_sub(k.get());
    let (tail, core) = frags.split_at(split);
    let tail_color = BlendAccumulators::from_fragments(tail, WeightFn::DEFAULT).wavg(background);
    over_composite(core, tail_color)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fragment::composite_exact;

    fn two_fragments() -> PixelFragments {
        PixelFragments::from_fragments(vec![
            Fragment::new(0.5, Rgb::new(1.0, 0.0, 0.0), 0.5, 0),
            Fragment::new(0.5, Rgb::new(0.0, 0.0, 1.0), 0.5, 1),
        ])
    }

    fn close(a: Rgb, b: Rgb, tol: f32) -> bool {
        a.max_abs_diff(b) <= tol
    }

    #[test]
    fn wsum_hand_value() {
        assert!(close(wsum(&two_fragments(), Rgb::BLACK), Rgb::new(0.5, 0.0, 0.5), 1e-6));
    }

    #[test]
    fn wsum_overshoots_below_zero() {
        let list = PixelFragments::from_fragments(
            (0..3).map(|i| Fragment::new(0.5, Rgb::new(0.2, 0.2, 0.2), 0.5, i)).collect(),
        );
        let acc = BlendAccumulators::from_fragments(list.fragments(), WeightFn::DEFAULT);
        assert_eq!(1.0 - acc.sum_alpha, -0.5);
        // 3 * 0.1 + 1 * (-0.5)
        let c = wsum(&list, Rgb::WHITE);
        assert!(close(c, Rgb::splat(-0.2), 1e-6), "{c:?}");
    }

    #[test]
    fn wavg_hand_value() {
        assert!(close(wavg(&two_fragments(), Rgb::BLACK), Rgb::new(0.375, 0.0, 0.375), 1e-6));
    }

    #[test]
    fn wavg_zero_alpha_guard() {
        let bg = Rgb::new(0.3, 0.4, 0.5);
        let list = PixelFragments::from_fragments(vec![Fragment::new(0.5, Rgb::WHITE, 0.0, 0); 3]);
        assert_eq!(wavg(&list, bg), bg);
        assert_eq!(wavg(&PixelFragments::new(), bg), bg);
        assert_eq!(wsum(&PixelFragments::new(), bg), bg);
        assert_eq!(wboit(&PixelFragments::new(), bg, WeightFn::DEFAULT), bg);
    }

    #[test]
    fn wboit_hand_value() {
        assert_eq!(weight_default(0.5, 0.5), 187.5);
        let c = wboit(&two_fragments(), Rgb::BLACK, WeightFn::DEFAULT);
        assert!(close(c, Rgb::new(0.375, 0.0, 0.375), 1e-6), "{c:?}");
    }

    #[test]
    fn default_weight_values() {
        assert_eq!(weight_default(0.0, 1.0), 3000.0);
        assert_eq!(weight_default(1.0, 1.0), 0.01);
        for z in [0.0, 0.3, 1.0] {
            assert_eq!(weight_default(z, 0.0), 0.0);
        }
    }

    #[test]
    fn default_weight_increases_when_nearer() {
        let mut prev = weight_default(0.98, 0.4);
        for i in (0..98).rev() {
            let w = weight_default(i as f32 / 100.0, 0.4);
            assert!(w > prev, "z={}", i as f32 / 100.0);
            prev = w;
        }
    }

    #[test]
    fn wboit_zero_weight_guard() {
        let zero_w = WeightFn { name: "zero", weight: |_, _| 0.0 };
        let list = PixelFragments::from_fragments(vec![Fragment::new(0.5, Rgb::WHITE, 0.5, 0)]);
        // C_wavg falls back to black; the background term is still exact
        assert!(close(wboit(&list, Rgb::WHITE, zero_w), Rgb::splat(0.5), 1e-6));
    }

    #[test]
    fn ht_matches_exact_when_k_covers_list() {
        let k = NonZeroUsize::new(2).unwrap();
        let sorted = sort_by_depth(PixelFragments::from_fragments(vec![
            Fragment::new(0.2, Rgb::new(1.0, 0.0, 0.0), 0.5, 0),
            Fragment::new(0.6, Rgb::new(0.0, 0.0, 1.0), 0.5, 1),
        ]));
        let exact = composite_exact(&sorted, Rgb::BLACK);
        assert_eq!(hybrid_transparency(&sorted, Rgb::BLACK, k), exact);
        assert!(close(exact, Rgb::new(0.5, 0.0, 0.25), 1e-6));
        assert_eq!(hybrid_transparency(&PixelFragments::new(), Rgb::WHITE, k), Rgb::WHITE);
    }

    #[test]
    fn ht_homogeneous_tail_is_exact() {
        let c = Rgb::new(0.7, 0.2, 0.4);
        let list = PixelFragments::from_fragments((0..4).map(|i| Fragment::new(0.1 * i as f32, c, 0.35, i)).collect());
        let bg = Rgb::new(0.1, 0.9, 0.5);
        let exact = composite_exact(&sort_by_depth(list.clone()), bg);
        let ht = hybrid_transparency(&list, bg, NonZeroUsize::new(2).unwrap());
        assert!(close(ht, exact, 1e-6), "{ht:?} vs {exact:?}");
    }

    #[test]
    fn ht_splits_core_and_tail() {
        // tail = farthest fragment only; HT = core over (wavg of tail over bg)
        let list = PixelFragments::from_fragments(vec![
            Fragment::new(0.9, Rgb::new(0.0, 1.0, 0.0), 0.6, 0),
            Fragment::new(0.1, Rgb::new(1.0, 0.0, 0.0), 0.5, 1),
            Fragment::new(0.5, Rgb::new(0.0, 0.0, 1.0), 0.5, 2),
        ]);
        // n=1 tail: wavg is exact, so HT equals the exact composite
        let exact = composite_exact(&sort_by_depth(list.clone()), Rgb::WHITE);
        assert!(close(hybrid_transparency(&list, Rgb::WHITE, NonZeroUsize::new(2).unwrap()), exact, 1e-6));
    }
}
