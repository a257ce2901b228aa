//! Image quality against a reference: MSE and grayscale error maps.

use thiserror::Error;

use crate::color::Rgb;
use crate::image::ImageRgb;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("image sizes differ: {a:?} vs {b:?}")]
pub struct DimensionMismatch {
    pub a: (usize, usize),
    pub b: (usize, usize),
}

fn check_dims(a: &ImageRgb, b: &ImageRgb) -> Result<(), DimensionMismatch> {
    if a.same_size(b) {
        Ok(())
    } else {
        Err(DimensionMismatch { a: (a.width(), a.height()), b: (b.width(), b.height()) })
    }
}

/// Mean squared channel difference over `width * height * 3` values.
///
/// Both images are clamped to `[0, 1]` first. Accumulates in `f64` in pixel
/// order so the value does not depend on the thread count.
pub fn mse(a: &ImageRgb, b: &ImageRgb) -> Result<f64, DimensionMismatch> {
    check_dims(a, b)?;
    let count = a.data().len() * 3;
    if count == 0 {
        return Ok(0.0);
    }
    let mut sum = 0.0f64;
    for (&pa, &pb) in a.data().iter().zip(b.data()) {
        let (pa, pb) = (pa.clamp01().to_array(), pb.clamp01().to_array());
        for c in 0..3 {
            let d = f64::from(pa[c]) - f64::from(pb[c]);
            sum += d * d;
        }
    }
    Ok(sum / count as f64)
}

/// Per-pixel mean absolute channel difference as a gray image.
pub fn error_map(a: &ImageRgb, b: &ImageRgb) -> Result<ImageRgb, DimensionMismatch> {
    check_dims(a, b)?;
    let data = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&pa, &pb)| {
            let d = pa.clamp01() - pb.clamp01();
            Rgb::splat(((d.r.abs() + d.g.abs() + d.b.abs()) / 3.0).clamp(0.0, 1.0))
        })
        .collect();
    Ok(ImageRgb::from_data(a.width(), a.height(), data))
}

#[derive(Clone, Debug, PartialEq)]
pub struct QualityReport {
    pub resolver: String,
    pub width: usize,
    pub height: usize,
    pub mse: f64,
    pub rmse: f64,
}

impl QualityReport {
    pub const CSV_HEADER: &'static str = "resolver,width,height,mse,rmse";

    pub fn measure(resolver: impl Into<String>, image: &ImageRgb, reference: &ImageRgb) -> Result<Self, DimensionMismatch> {
        let mse = mse(image, reference)?;
        Ok(Self { resolver: resolver.into(), width: image.width(), height: image.height(), mse, rmse: mse.sqrt() })
    }

    pub fn csv_row(&self) -> String {
        format!("{},{},{},{:.9e},{:.9e}", self.resolver, self.width, self.height, self.mse, self.rmse)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_images() {
        let img = ImageRgb::filled(4, 3, Rgb::new(0.1, 0.5, 0.9));
        assert_eq!(mse(&img, &img).unwrap(), 0.0);
        assert!(error_map(&img, &img).unwrap().data().iter().all(|&c| c == Rgb::BLACK));
    }

    #[test]
    fn hand_value_and_symmetry() {
        let a = ImageRgb::filled(2, 1, Rgb::BLACK);
        let mut b = a.clone();
        b.set(1, 0, Rgb::new(0.0, 0.5, 0.0));
        let m = mse(&a, &b).unwrap();
        assert!((m - 0.25 / 6.0).abs() < 1e-12, "{m}");
        assert_eq!(m, mse(&b, &a).unwrap());
    }

    #[test]
    fn error_map_gray_level() {
        let a = ImageRgb::filled(3, 3, Rgb::splat(0.5));
        let mut b = a.clone();
        b.set(1, 2, Rgb::splat(0.8));
        let map = error_map(&a, &b).unwrap();
        assert!((map.get(1, 2).r - 0.3).abs() < 1e-6);
        assert_eq!(map.get(0, 0), Rgb::BLACK);
    }

    #[test]
    fn clamps_before_comparing() {
        let a = ImageRgb::filled(1, 1, Rgb::splat(1.7));
        let b = ImageRgb::filled(1, 1, Rgb::WHITE);
        assert_eq!(mse(&a, &b).unwrap(), 0.0);
        let c = ImageRgb::filled(1, 1, Rgb::splat(-3.0));
        assert!(error_map(&c, &a).unwrap().data().iter().all(|p| p.in_unit_range()));
    }

    #[test]
    fn tiny_perturbation_detected() {
        let a = ImageRgb::filled(8, 8, Rgb::splat(0.5));
        let mut b = a.clone();
        b.set(3, 3, Rgb::new(0.5, 0.5 + 2e-7, 0.5));
        assert!(mse(&a, &b).unwrap() > 0.0);
    }

    #[test]
    fn size_mismatch() {
        let a = ImageRgb::filled(2, 2, Rgb::BLACK);
        let b = ImageRgb::filled(2, 3, Rgb::BLACK);
        assert!(mse(&a, &b).is_err());
        assert!(error_map(&a, &b).is_err());
    }

    #[test]
    fn report_row() {
        let a = ImageRgb::filled(2, 1, Rgb::BLACK);
        let b = ImageRgb::filled(2, 1, Rgb::splat(0.5));
        let r = QualityReport::measure("wavg", &a, &b).unwrap();
        assert_eq!(r.rmse, r.mse.sqrt());
        assert_eq!(r.csv_row(), "wavg,2,1,2.500000000e-1,5.000000000e-1");
    }
}
