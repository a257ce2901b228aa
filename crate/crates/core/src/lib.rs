//! A CPU laboratory for order-independent transparency.
//!
//! Scenes are rasterized into per-pixel fragment lists (an A-buffer). Those
//! lists are then resolved either exactly, by sorting and over-compositing,
//! or by one of the approximate resolvers in [`blend`] and [`dfaoit`]. The
//! neural resolver uses a small network trained with [`mlp`] on examples from
//! [`dataset`]; [`metrics`] compares the results against the exact image.
//!
//! ```
//! use oitlab::{gen_layered_scene, rasterize_scene, render_frame, RenderConfig, Resolver, Rgb};
//!
//! let scene = gen_layered_scene(1, 12, 0.1, 0.6, 2).unwrap();
//! let frame = rasterize_scene(&scene, 32, 24);
//! let cfg = RenderConfig { background: Rgb::WHITE, resolver: Resolver::Wavg };
//! let image = render_frame(&frame, &cfg, None).unwrap();
//! assert_eq!(image.width(), 32);
//! ```

pub mod blend;
pub mod color;
pub mod dataset;
pub mod dfaoit;
pub mod fragment;
pub mod image;
pub mod metrics;
pub mod mlp;
pub mod raster;
pub mod resolve;

pub use color::Rgb;
pub use fragment::{composite_exact, sort_by_depth, transmittance_product, Fragment, FrameFragmentBuffer, PixelFragments};
pub use image::ImageRgb;
pub use raster::{gen_layered_scene, rasterize_scene, Scene};
pub use resolve::{render_frame, RenderConfig, RenderError, Resolver};
