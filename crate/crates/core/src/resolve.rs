//! Resolver selection and whole-frame rendering.

use std::fmt;
use std::num::NonZeroUsize;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::blend::{hybrid_transparency, BlendAccumulators, WeightFn};
use crate::color::Rgb;
use crate::dfaoit::render_dfaoit;
use crate::fragment::{depth_order, over_composite, FrameFragmentBuffer, PixelFragments};
use crate::image::ImageRgb;
use crate::mlp::{MlpError, MlpWeights};

/// Number of exactly composited layers used by hybrid transparency by default.
pub const DEFAULT_HT_K: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Resolver {
    Exact,
    Wsum,
    Wavg,
    Wboit,
    Ht { k: NonZeroUsize },
    Dfaoit,
}

impl Resolver {
    pub fn ht(k: usize) -> Option<Resolver> {
        NonZeroUsize::new(k).map(|k| Resolver::Ht { k })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Resolver::Exact => "exact",
            Resolver::Wsum => "wsum",
            Resolver::Wavg => "wavg",
            Resolver::Wboit => "wboit",
            Resolver::Ht { .. } => "ht",
            Resolver::Dfaoit => "dfaoit",
        }
    }

    pub fn needs_weights(&self) -> bool {
        matches!(self, Resolver::Dfaoit)
    }
}

impl fmt::Display for Resolver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown resolver `{0}` (expected exact, wsum, wavg, wboit, ht or dfaoit)")]
pub struct UnknownResolver(pub String);

impl FromStr for Resolver {
    type Err = UnknownResolver;

    /// Parses a resolver name; `ht` uses [`DEFAULT_HT_K`].
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "exact" => Ok(Resolver::Exact),
            "wsum" => Ok(Resolver::Wsum),
            "wavg" => Ok(Resolver::Wavg),
            "wboit" => Ok(Resolver::Wboit),
            "ht" => Ok(Resolver::ht(DEFAULT_HT_K).unwrap()),
            "dfaoit" => Ok(Resolver::Dfaoit),
            _ => Err(UnknownResolver(s.to_string())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RenderConfig {
    pub background: Rgb,
    pub resolver: Resolver,
}

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("the dfaoit resolver needs network weights")]
    MissingWeights,
    #[error(transparent)]
    Network(#[from] MlpError),
}

/// Unclamped color of one pixel under a non-neural resolver.
pub fn resolve_pixel(list: &PixelFragments, resolver: Resolver, background: Rgb) -> Rgb {
    match resolver {
        Resolver::Exact => {
            if list.is_sorted() {
                over_composite(list.fragments(), background)
            } else {
                let mut sorted = list.fragments().to_vec();
                sorted.sort_by(depth_order);
                over_composite(&sorted, background)
            }
        }
        Resolver::Wsum => BlendAccumulators::from_fragments(list.fragments(), WeightFn::DEFAULT).wsum(background),
        Resolver::Wavg => BlendAccumulators::from_fragments(list.fragments(), WeightFn::DEFAULT).wavg(background),
        Resolver::Wboit => BlendAccumulators::from_fragments(list.fragments(), WeightFn::DEFAULT).wboit(background),
        Resolver::Ht { k } => hybrid_transparency(list, background, k),
        Resolver::Dfaoit => panic!("dfaoit is resolved per frame, see render_frame"),
    }
}

/// Resolves every pixel of `frame`; the image is clamped to `[0, 1]`.
pub fn render_frame(
    frame: &FrameFragmentBuffer,
    config: &RenderConfig,
    net: Option<&MlpWeights>,
) -> Result<ImageRgb, RenderError> {
    if config.resolver == Resolver::Dfaoit {
        let net = net.ok_or(RenderError::MissingWeights)?;
        return Ok(render_dfaoit(frame, net, config.background)?);
    }
    let data = frame
        .pixels()
        .par_iter()
        .map(|px| resolve_pixel(px, config.resolver, config.background).clamp01())
        .collect();
    Ok(ImageRgb::from_data(frame.width(), frame.height(), data))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_names() {
        for name in ["exact", "wsum", "wavg", "wboit", "ht", "dfaoit"] {
            assert_eq!(name.parse::<Resolver>().unwrap().name(), name);
        }
        assert_eq!("HT".parse::<Resolver>().unwrap(), Resolver::ht(2).unwrap());
        assert!("mboit".parse::<Resolver>().is_err());
        assert!(Resolver::ht(0).is_none());
    }

    #[test]
    fn dfaoit_without_weights() {
        let cfg = RenderConfig { background: Rgb::BLACK, resolver: Resolver::Dfaoit };
        assert!(matches!(render_frame(&FrameFragmentBuffer::new(1, 1), &cfg, None), Err(RenderError::MissingWeights)));
    }

    #[test]
    fn wsum_is_clamped_in_image() {
        let mut frame = FrameFragmentBuffer::new(1, 1);
        for i in 0..4 {
            frame.pixel_mut(0, 0).push(crate::Fragment::new(0.5, Rgb::WHITE, 0.9, i));
        }
        let cfg = RenderConfig { background: Rgb::BLACK, resolver: Resolver::Wsum };
        let raw = resolve_pixel(frame.pixel(0, 0), Resolver::Wsum, Rgb::BLACK);
        assert!(raw.r > 1.0);
        assert_eq!(render_frame(&frame, &cfg, None).unwrap().get(0, 0), Rgb::WHITE);
    }
}
