//! Neural approximate OIT in two passes.
//!
//! The first pass reduces each pixel's fragments to ten features: the exact
//! over-composite of the two closest fragments, the mean opacity and color of
//! the remaining tail, and the accumulated premultiplied color. The second
//! pass feeds the features through the trained network to get the color of
//! the transparent surfaces alone and adds the background analytically,
//! weighted by the exact transmittance product.
//!
//! Pixels with two or fewer fragments are composited exactly instead.

use rayon::prelude::*;

use crate::color::Rgb;
use crate::fragment::{depth_order, over_composite, transmittance_of, Fragment, FrameFragmentBuffer, PixelFragments};
use crate::image::ImageRgb;
use crate::mlp::{forward_into, ForwardCache, MlpError, MlpWeights, DFAOIT_DIMS};

pub const FEATURE_COUNT: usize = 10;

/// The network input for one pixel.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FeatureVector {
    /// Over-composite of the two closest fragments onto black.
    pub g_front: Rgb,
    /// `sum_{i <= n-2} a_i / n`, farthest `n - 2` fragments.
    pub a_avg_tail: f32,
    /// `sum_{i <= n-2} C_i / n`, farthest `n - 2` fragments.
    pub c_avg_tail: Rgb,
    /// `sum a_i C_i` over all fragments; not bounded by 1.
    pub c_acc: Rgb,
}

impl FeatureVector {
    pub fn to_array(&self) -> [f32; FEATURE_COUNT] {
        let (g, c, acc) = (self.g_front, self.c_avg_tail, self.c_acc);
        [g.r, g.g, g.b, self.a_avg_tail, c.r, c.g, c.b, acc.r, acc.g, acc.b]
    }

    pub fn from_array(v: [f32; FEATURE_COUNT]) -> Self {
        Self {
            g_front: Rgb::new(v[0], v[1], v[2]),
            a_avg_tail: v[3],
            c_avg_tail: Rgb::new(v[4], v[5], v[6]),
            c_acc: Rgb::new(v[7], v[8], v[9]),
        }
    }
}

/// Everything the second pass needs for one pixel.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PixelFeatureRecord {
    pub features: FeatureVector,
    pub n: u32,
    /// `prod (1 - a_i)`.
    pub bg_product: f32,
    /// Closest fragment first.
    pub front2: [Option<Fragment>; 2],
}

/// Feature records for a whole frame, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DfaoitFrame {
    pub width: usize,
    pub height: usize,
    pub records: Vec<PixelFeatureRecord>,
}

/// Features of an already far-to-near sorted fragment slice.
pub fn features_of_sorted(sorted: &[Fragment]) -> PixelFeatureRecord {
    let n = sorted.len();
    let mut c_acc = Rgb::BLACK;
    for f in sorted {
        c_acc += f.premultiplied();
    }
    let bg_product = transmittance_of(sorted);
    let split = n.saturating_sub(2);
    let (tail, front) = sorted.split_at(split);
    let g_front = over_composite(front, Rgb::BLACK);

    let (mut a_sum, mut c_sum) = (0.0f32, Rgb::BLACK);
    for f in tail {
        a_sum += f.alpha;
        c_sum += f.color;
    }
    let (a_avg_tail, c_avg_tail) = if n > 0 {
        let inv_n = 1.0 / n as f32;
        (a_sum * inv_n, c_sum * inv_n)
    } else {
        (0.0, Rgb::BLACK)
    };

    PixelFeatureRecord {
        features: FeatureVector { g_front, a_avg_tail, c_avg_tail, c_acc },
        n: n as u32,
        bg_product,
        front2: [front.last().copied(), if front.len() == 2 { Some(front[0]) } else { None }],
    }
}

/// First pass for one pixel. Sorting happens internally on a copy.
pub fn extract_features(list: &PixelFragments) -> PixelFeatureRecord {
    if list.is_sorted() {
        features_of_sorted(list.fragments())
    } else {
        let mut sorted = list.fragments().to_vec();
        sorted.sort_by(depth_order);
        features_of_sorted(&sorted)
    }
}

pub fn extract_frame(frame: &FrameFragmentBuffer) -> DfaoitFrame {
    DfaoitFrame {
        width: frame.width(),
        height: frame.height(),
        records: frame.pixels().par_iter().map(extract_features).collect(),
    }
}

/// Runs a network already known to have the 10-32-16-3 shape.
fn infer_with(net: &MlpWeights, features: &FeatureVector, cache: &mut ForwardCache) -> Rgb {
    let x = features.to_array().map(f64::from);
    forward_into(net, &x, cache);
    let y = cache.output();
    Rgb::new(y[0] as f32, y[1] as f32, y[2] as f32)
}

/// Color of the transparent surfaces without the background, in `(0, 1)^3`.
pub fn infer_transparent_color(rec: &PixelFeatureRecord, net: &MlpWeights) -> Result<Rgb, MlpError> {
    net.check_dims(&DFAOIT_DIMS)?;
    Ok(infer_with(net, &rec.features, &mut ForwardCache::for_net(net)))
}

/// `C_t + C_b * prod(1 - a_i)`, unclamped.
pub fn compose_final(transparent: Rgb, background: Rgb, bg_product: f32) -> Rgb {
    transparent + background * bg_product
}

/// Second pass over a frame of records, clamped to `[0, 1]`. Pixels with
/// `n <= 2` are composited exactly from their stored front fragments.
pub fn resolve_records(
    records: &[PixelFeatureRecord],
    net: &MlpWeights,
    background: Rgb,
) -> Result<Vec<Rgb>, MlpError> {
    net.check_dims(&DFAOIT_DIMS)?;
    Ok(records
        .par_iter()
        .map_init(
            || ForwardCache::for_net(net),
            |cache, rec| {
                let c = if rec.n <= 2 {
                    exact_from_front(rec, background)
                } else {
                    compose_final(infer_with(net, &rec.features, cache), background, rec.bg_product)
                };
                c.clamp01()
            },
        )
        .collect())
}

/// Exact composite of a pixel with at most two fragments, from its record.
fn exact_from_front(rec: &PixelFeatureRecord, background: Rgb) -> Rgb {
    let mut c = background;
    // farthest first
    for f in rec.front2.iter().rev().flatten() {
        c = f.color * f.alpha + c * (1.0 - f.alpha);
    }
    c
}

/// Full two-pass render of a fragment buffer.
pub fn render_dfaoit(frame: &FrameFragmentBuffer, net: &MlpWeights, background: Rgb) -> Result<ImageRgb, MlpError> {
    let features = extract_frame(frame);
    let data = resolve_records(&features.records, net, background)?;
    Ok(ImageRgb::from_data(frame.width(), frame.height(), data))
}
