//! Fragments, per-pixel fragment lists and the exact compositing reference.
//!
//! Sorted lists are ordered far-to-near: index 0 is the farthest fragment and
//! the last element is the closest one. Every other resolver in the crate is
//! measured against [`composite_exact`].

use std::cmp::Ordering;

use crate::color::Rgb;

/// One rasterized surface sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Fragment {
    /// Normalized depth in `[0, 1]`, 0 at the near plane.
    pub z: f32,
    pub color: Rgb,
    pub alpha: f32,
    /// Submission ordinal, unique within a pixel.
    pub seq: u32,
}

impl Fragment {
    pub fn new(z: f32, color: Rgb, alpha: f32, seq: u32) -> Self {
        Self { z, color, alpha, seq }
    }

    pub fn is_valid(&self) -> bool {
        (0.0..=1.0).contains(&self.z) && self.color.in_unit_range() && (0.0..=1.0).contains(&self.alpha)
    }

    /// Premultiplied color `a * C`.
    #[inline]
    pub fn premultiplied(&self) -> Rgb {
        self.color * self.alpha
    }
}

/// Far-to-near ordering with the submission ordinal as tie-break.
pub fn depth_order(a: &Fragment, b: &Fragment) -> Ordering {
    b.z.total_cmp(&a.z).then(a.seq.cmp(&b.seq))
}

/// The fragment list of a single pixel.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PixelFragments {
    fragments: Vec<Fragment>,
    sorted: bool,
}

impl PixelFragments {
    pub fn new() -> Self {
        Self::default()
    }

    /// Wraps an arbitrary (unsorted) list.
    pub fn from_fragments(fragments: Vec<Fragment>) -> Self {
        Self { fragments, sorted: false }
    }

    pub fn push(&mut self, f: Fragment) {
        self.fragments.push(f);
        self.sorted = false;
    }

    pub fn len(&self) -> usize {
        self.fragments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fragments.is_empty()
    }

    pub fn is_sorted(&self) -> bool {
        self.sorted
    }

    pub fn fragments(&self) -> &[Fragment] {
        &self.fragments
    }

    pub fn into_fragments(self) -> Vec<Fragment> {
        self.fragments
    }

    /// Sorts in place far-to-near. Idempotent.
    pub fn sort_in_place(&mut self) {
        if !self.sorted {
            self.fragments.sort_by(depth_order);
            self.sorted = true;
        }
    }
}

/// Returns the list ordered far-to-near (z non-increasing, ties by ascending seq).
pub fn sort_by_depth(mut list: PixelFragments) -> PixelFragments {
    list.sort_in_place();
    list
}

/// Over-composites an already far-to-near ordered slice onto `background`.
pub fn over_composite(sorted: &[Fragment], background: Rgb) -> Rgb {
    sorted.iter().fold(background, |behind, f| {
        f.color * f.alpha + behind * (1.0 - f.alpha)
    })
}

/// Exact OIT color of a sorted pixel list.
///
/// # Panics
///
/// Panics if `sorted` has not been through [`sort_by_depth`].
pub fn composite_exact(sorted: &PixelFragments, background: Rgb) -> Rgb {
    assert!(sorted.is_sorted(), "composite_exact requires a depth-sorted list");
    over_composite(sorted.fragments(), background)
}

/// `prod(1 - a_i)` over the list, in list order. 1 for an empty list.
pub fn transmittance_product(list: &PixelFragments) -> f32 {
    transmittance_of(list.fragments())
}

pub(crate) fn transmittance_of(fragments: &[Fragment]) -> f32 {
    fragments.iter().map(|f| 1.0 - f.alpha).product()
}

/// Per-pixel fragment lists for a whole frame, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameFragmentBuffer {
    width: usize,
    height: usize,
    pixels: Vec<PixelFragments>,
}

impl FrameFragmentBuffer {
    /// # Panics
    ///
    /// Panics on a zero dimension.
    pub fn new(width: usize, height: usize) -> Self {
        assert!(width >= 1 && height >= 1, "frame dimensions must be at least 1x1");
        Self { width, height, pixels: vec![PixelFragments::new(); width * height] }
    }

    pub(crate) fn from_pixels(width: usize, height: usize, pixels: Vec<PixelFragments>) -> Self {
        assert_eq!(pixels.len(), width * height);
        Self { width, height, pixels }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[PixelFragments] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [PixelFragments] {
        &mut self.pixels
    }

    pub fn pixel(&self, x: usize, y: usize) -> &PixelFragments {
        &self.pixels[y * self.width + x]
    }

    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut PixelFragments {
        &mut self.pixels[y * self.width + x]
    }

    /// Total number of fragments stored.
    pub fn fragment_count(&self) -> usize {
        self.pixels.iter().map(PixelFragments::len).sum()
    }

    /// Largest per-pixel list length.
    pub fn max_depth_complexity(&self) -> usize {
        self.pixels.iter().map(PixelFragments::len).max().unwrap_or(0)
    }

    pub fn sort_all(&mut self) {
        use rayon::prelude::*;
        self.pixels.par_iter_mut().for_each(PixelFragments::sort_in_place);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frag(z: f32, c: Rgb, a: f32, seq: u32) -> Fragment {
        Fragment::new(z, c, a, seq)
    }

    #[test]
    fn two_element_sort_puts_closest_last() {
        let list = PixelFragments::from_fragments(vec![
            frag(0.2, Rgb::BLACK, 0.5, 0),
            frag(0.8, Rgb::BLACK, 0.5, 1),
        ]);
        let sorted = sort_by_depth(list);
        assert!(sorted.is_sorted());
        let zs: Vec<f32> = sorted.fragments().iter().map(|f| f.z).collect();
        assert_eq!(zs, vec![0.8, 0.2]);
    }

    #[test]
    fn empty_list_sorts_and_composites_to_background() {
        let sorted = sort_by_depth(PixelFragments::new());
        assert!(sorted.is_sorted() && sorted.is_empty());
        let bg = Rgb::new(0.1, 0.2, 0.3);
        assert_eq!(composite_exact(&sorted, bg), bg);
        assert_eq!(transmittance_product(&sorted), 1.0);
    }

    #[test]
    fn equal_depth_tie_broken_by_seq() {
        let list = PixelFragments::from_fragments(vec![
            frag(0.5, Rgb::WHITE, 0.5, 3),
            frag(0.5, Rgb::BLACK, 0.5, 1),
            frag(0.5, Rgb::BLACK, 0.5, 2),
        ]);
        let seqs: Vec<u32> = sort_by_depth(list).fragments().iter().map(|f| f.seq).collect();
        assert_eq!(seqs, vec![1, 2, 3]);
    }

    #[test]
    fn single_fragment_over_black() {
        let sorted = sort_by_depth(PixelFragments::from_fragments(vec![frag(0.3, Rgb::WHITE, 0.5, 0)]));
        assert_eq!(composite_exact(&sorted, Rgb::BLACK), Rgb::splat(0.5));
    }

    #[test]
    fn two_fragment_hand_value() {
        // closest red at z=0.2, farther blue at z=0.6
        let sorted = sort_by_depth(PixelFragments::from_fragments(vec![
            frag(0.2, Rgb::new(1.0, 0.0, 0.0), 0.5, 0),
            frag(0.6, Rgb::new(0.0, 0.0, 1.0), 0.5, 1),
        ]));
        let c = composite_exact(&sorted, Rgb::BLACK);
        assert!(c.max_abs_diff(Rgb::new(0.5, 0.0, 0.25)) <= 1e-6, "{c:?}");
    }

    #[test]
    fn opaque_closest_dominates() {
        let sorted = sort_by_depth(PixelFragments::from_fragments(vec![
            frag(0.9, Rgb::new(0.2, 0.9, 0.4), 0.7, 0),
            frag(0.1, Rgb::new(0.3, 0.6, 0.1), 1.0, 1),
            frag(0.5, Rgb::new(1.0, 1.0, 1.0), 0.4, 2),
        ]));
        assert_eq!(composite_exact(&sorted, Rgb::WHITE), Rgb::new(0.3, 0.6, 0.1));
    }

    #[test]
    fn transmittance_values() {
        let half = |seq| frag(0.5, Rgb::BLACK, 0.5, seq);
        let four = PixelFragments::from_fragments((0..4).map(half).collect());
        assert_eq!(transmittance_product(&four), 0.0625);

        let with_opaque = PixelFragments::from_fragments(vec![half(0), frag(0.1, Rgb::BLACK, 1.0, 1)]);
        assert_eq!(transmittance_product(&with_opaque), 0.0);
    }

    #[test]
    #[should_panic(expected = "depth-sorted")]
    fn composite_rejects_unsorted() {
        let list = PixelFragments::from_fragments(vec![frag(0.5, Rgb::BLACK, 0.5, 0)]);
        composite_exact(&list, Rgb::BLACK);
    }

    #[test]
    fn push_clears_sorted_flag() {
        let mut list = sort_by_depth(PixelFragments::new());
        list.push(frag(0.5, Rgb::BLACK, 0.5, 0));
        assert!(!list.is_sorted());
    }
}
