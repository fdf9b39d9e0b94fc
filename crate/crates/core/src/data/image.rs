//! Image ingestion and preprocessing.
//!
//! Every image goes through the same pipeline regardless of source:
//! center crop to a square, isotropic resize to the target size, rescale to
//! [0, 1], replicate the gray channel to the configured channel count, and
//! standardize with the configured per-channel constants.

use std::path::Path;

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A raw single-channel image with its intensity scale. `pixels` holds
/// values in `[0, scale]`; rescaling divides by `scale` (255 for 8-bit
/// files, 1.0 for in-memory float images).
#[derive(Debug, Clone)]
pub struct RawGray {
    pub pixels: Array2<f64>,
    pub scale: f64,
    pub provenance: String,
}

/// Standardized image ready for tokenization: channels x S x S.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    pub data: Array3<f64>,
    pub provenance: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    Bilinear,
    Nearest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreprocessConfig {
    pub target_size: usize,
    pub channels: usize,
    /// Per-channel standardization constants, length == channels.
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub interpolation: Interpolation,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        // canonical 3-channel constants, overridable in the run config
        Self {
            target_size: 224,
            channels: 3,
            mean: vec![0.485, 0.456, 0.406],
            std: vec![0.229, 0.224, 0.225],
            interpolation: Interpolation::Bilinear,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.target_size == 0 || self.channels == 0 {
            return Err(Error::Config("target_size and channels must be positive".into()));
        }
        if self.mean.len() != self.channels || self.std.len() != self.channels {
            return Err(Error::Config(format!(
                "mean/std must have {} entries (got {} / {})",
                self.channels,
                self.mean.len(),
                self.std.len()
            )));
        }
        if self.std.iter().any(|&s| s <= 0.0) {
            return Err(Error::Config("std entries must be positive".into()));
        }
        Ok(())
    }
}

fn center_crop(src: &Array2<f64>) -> Array2<f64> {
    let (h, w) = src.dim();
    let s = h.min(w);
    let top = (h - s) / 2;
    let left = (w - s) / 2;
    src.slice(ndarray::s![top..top + s, left..left + s]).to_owned()
}

/// Isotropic square resize with pixel centers at half-integer coordinates.
fn resize_square(src: &Array2<f64>, target: usize, mode: Interpolation) -> Array2<f64> {
    let s = src.dim().0;
    debug_assert_eq!(src.dim().0, src.dim().1);
    if s == target {
        return src.clone();
    }
    let scale = s as f64 / target as f64;
    let mut out = Array2::zeros((target, target));
    match mode {
        Interpolation::Nearest => {
            for y in 0..target {
                let sy = (((y as f64 + 0.5) * scale).floor() as usize).min(s - 1);
                for x in 0..target {
                    let sx = (((x as f64 + 0.5) * scale).floor() as usize).min(s - 1);
                    out[[y, x]] = src[[sy, sx]];
                }
            }
        }
        Interpolation::Bilinear => {
            for y in 0..target {
                let fy = ((y as f64 + 0.5) * scale - 0.5).clamp(0.0, (s - 1) as f64);
                let y0 = fy.floor() as usize;
                let y1 = (y0 + 1).min(s - 1);
                let wy = fy - y0 as f64;
                for x in 0..target {
                    let fx = ((x as f64 + 0.5) * scale - 0.5).clamp(0.0, (s - 1) as f64);
                    let x0 = fx.floor() as usize;
                    let x1 = (x0 + 1).min(s - 1);
                    let wx = fx - x0 as f64;
                    let top = src[[y0, x0]] * (1.0 - wx) + src[[y0, x1]] * wx;
                    let bot = src[[y1, x0]] * (1.0 - wx) + src[[y1, x1]] * wx;
                    out[[y, x]] = top * (1.0 - wy) + bot * wy;
                }
            }
        }
    }
    out
}

/// Full preprocessing pipeline; see the module docs for the exact steps.
pub fn preprocess_image(raw: &RawGray, cfg: &PreprocessConfig) -> Result<ImageTensor> {
    cfg.validate()?;
    let (h, w) = raw.pixels.dim();
    if h == 0 || w == 0 {
        return Err(Error::Ingestion {
            path: raw.provenance.clone().into(),
            message: "empty image".into(),
        });
    }
    let cropped = center_crop(&raw.pixels);
    let resized = resize_square(&cropped, cfg.target_size, cfg.interpolation);
    let rescaled = resized.mapv(|v| v / raw.scale);
    let s = cfg.target_size;
    let mut data = Array3::zeros((cfg.channels, s, s));
    for c in 0..cfg.channels {
        let standardized = rescaled.mapv(|v| (v - cfg.mean[c]) / cfg.std[c]);
        data.index_axis_mut(ndarray::Axis(0), c).assign(&standardized);
    }
    if !data.iter().all(|v| v.is_finite()) {
        return Err(Error::Ingestion {
            path: raw.provenance.clone().into(),
            message: "non-finite pixel values after preprocessing".into(),
        });
    }
    Ok(ImageTensor {
        data,
        provenance: raw.provenance.clone(),
    })
}

/// Read an 8-bit grayscale image file (PNG or JPEG paths only).
pub fn load_grayscale(path: &Path) -> Result<RawGray> {
    let img = image::open(path).map_err(|e| Error::Ingestion {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let gray = img.to_luma8();
    let (w, h) = gray.dimensions();
    let pixels = Array2::from_shape_fn((h as usize, w as usize), |(y, x)| {
        gray.get_pixel(x as u32, y as u32).0[0] as f64
    });
    Ok(RawGray {
        pixels,
        scale: 255.0,
        provenance: path.display().to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gray(pixels: Array2<f64>, scale: f64) -> RawGray {
        RawGray {
            pixels,
            scale,
            provenance: "test".into(),
        }
    }

    #[test]
    fn output_shape_is_exactly_channels_by_target() {
        let cfg = PreprocessConfig::default();
        let raw = gray(Array2::from_elem((512, 640), 100.0), 255.0);
        let t = preprocess_image(&raw, &cfg).unwrap();
        assert_eq!(t.data.dim(), (3, 224, 224));
        assert!(t.data.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn non_square_input_is_center_cropped() {
        // 4x6 image; crop keeps columns 1..5
        let src = Array2::from_shape_fn((4, 6), |(y, x)| (y * 10 + x) as f64);
        let cropped = center_crop(&src);
        assert_eq!(cropped.dim(), (4, 4));
        assert_eq!(cropped[[0, 0]], 1.0);
        assert_eq!(cropped[[3, 3]], 34.0);
    }

    #[test]
    fn constant_zero_image_standardizes_to_neg_mean_over_std() {
        let cfg = PreprocessConfig::default();
        let raw = gray(Array2::zeros((300, 300)), 255.0);
        let t = preprocess_image(&raw, &cfg).unwrap();
        for c in 0..3 {
            let want = (0.0 - cfg.mean[c]) / cfg.std[c];
            for &v in t.data.index_axis(ndarray::Axis(0), c).iter() {
                assert!((v - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn checkerboard_downsample_matches_nearest_neighbor_oracle() {
        // 448x448 with 2x2 cells resized to 224 under nearest-neighbor must
        // equal the 224x224 checkerboard with 1x1 cells.
        let src = Array2::from_shape_fn((448, 448), |(y, x)| ((y / 2 + x / 2) % 2) as f64);
        let cfg = PreprocessConfig {
            target_size: 224,
            channels: 1,
            mean: vec![0.0],
            std: vec![1.0],
            interpolation: Interpolation::Nearest,
        };
        let t = preprocess_image(&gray(src, 1.0), &cfg).unwrap();
        let expected = Array2::from_shape_fn((224, 224), |(y, x)| ((y + x) % 2) as f64);
        assert_eq!(t.data.index_axis(ndarray::Axis(0), 0), expected);
    }

    #[test]
    fn bilinear_identity_when_size_matches() {
        let src = Array2::from_shape_fn((32, 32), |(y, x)| (y * 32 + x) as f64);
        let cfg = PreprocessConfig {
            target_size: 32,
            channels: 1,
            mean: vec![0.0],
            std: vec![1.0],
            interpolation: Interpolation::Bilinear,
        };
        let t = preprocess_image(&gray(src.clone(), 1.0), &cfg).unwrap();
        assert_eq!(t.data.index_axis(ndarray::Axis(0), 0), src);
    }

    #[test]
    fn replication_fills_all_channels_identically_before_standardization() {
        let src = Array2::from_shape_fn((10, 10), |(y, _)| y as f64);
        let cfg = PreprocessConfig {
            target_size: 10,
            channels: 3,
            mean: vec![0.0; 3],
            std: vec![1.0; 3],
            interpolation: Interpolation::Bilinear,
        };
        let t = preprocess_image(&gray(src, 10.0), &cfg).unwrap();
        let c0 = t.data.index_axis(ndarray::Axis(0), 0).to_owned();
        for c in 1..3 {
            assert_eq!(t.data.index_axis(ndarray::Axis(0), c), c0);
        }
    }

    #[test]
    fn unreadable_file_is_an_ingestion_error() {
        let err = load_grayscale(Path::new("/nonexistent/image.png")).unwrap_err();
        match err {
            Error::Ingestion { path, .. } => {
                assert!(path.to_string_lossy().contains("nonexistent"))
            }
            other => panic!("expected ingestion error, got {other:?}"),
        }
    }

    #[test]
    fn mismatched_constants_are_config_errors() {
        let cfg = PreprocessConfig {
            channels: 3,
            mean: vec![0.5],
            std: vec![0.5],
            ..PreprocessConfig::default()
        };
        let raw = gray(Array2::zeros((8, 8)), 1.0);
        assert!(matches!(preprocess_image(&raw, &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn png_roundtrip_through_loader() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.png");
        let buf = image::GrayImage::from_fn(6, 4, |x, y| image::Luma([(x * 10 + y) as u8]));
        buf.save(&path).unwrap();
        let raw = load_grayscale(&path).unwrap();
        assert_eq!(raw.pixels.dim(), (4, 6));
        assert_eq!(raw.pixels[[2, 3]], 32.0);
        assert_eq!(raw.scale, 255.0);
    }
}
