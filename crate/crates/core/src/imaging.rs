//! Rasters, foreground masks, HSV conversion and the multiplicative
//! brightness/contrast transform used to synthesize illumination variants.

use std::path::Path;

use image::{ImageFormat, Luma, Rgb};
use serde::{Deserialize, Serialize};

use crate::error::{McmError, Result};

/// Upper end of the channel range.
pub const CHANNEL_MAX: u8 = 255;

/// Default saturation threshold for coefficient adjustment.
pub const DEFAULT_SATURATION_THRESHOLD: f64 = 240.0;

/// Default illumination coefficients.
pub const DEFAULT_COEFFICIENTS: [f64; 5] = [1.4, 1.2, 1.0, 0.8, 0.6];

/// Row-major RGB image of a person crop.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageRaster {
    width: usize,
    height: usize,
    pixels: Vec<[u8; 3]>,
}

impl ImageRaster {
    pub fn new(width: usize, height: usize, pixels: Vec<[u8; 3]>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(McmError::EmptyImage);
        }
        if pixels.len() != width * height {
            return Err(McmError::PixelCount {
                expected: width * height,
                actual: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Result<Self> {
        Self::new(width, height, vec![rgb; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        self.pixels[y * self.width + x] = rgb;
    }

    pub fn row(&self, y: usize) -> &[[u8; 3]] {
        &self.pixels[y * self.width..(y + 1) * self.width]
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let mut buf = image::RgbImage::new(self.width as u32, self.height as u32);
        for (i, px) in buf.pixels_mut().enumerate() {
            *px = Rgb(self.pixels[i]);
        }
        buf.save_with_format(path, ImageFormat::Png)
            .map_err(|e| encode_error(path, e))
    }
}

/// Per-pixel foreground flags aligned with an [`ImageRaster`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlobMask {
    width: usize,
    height: usize,
    flags: Vec<bool>,
}

impl BlobMask {
    pub fn new(width: usize, height: usize, flags: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(McmError::EmptyImage);
        }
        if flags.len() != width * height {
            return Err(McmError::PixelCount {
                expected: width * height,
                actual: flags.len(),
            });
        }
        Ok(Self {
            width,
            height,
            flags,
        })
    }

    /// Mask with every pixel in the foreground.
    pub fn full(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![true; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    pub fn is_foreground(&self, x: usize, y: usize) -> bool {
        self.flags[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, fg: bool) {
        self.flags[y * self.width + x] = fg;
    }

    pub fn foreground_count(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    pub fn rows_foreground_count(&self, y_top: usize, y_bottom: usize) -> usize {
        self.flags[y_top * self.width..y_bottom * self.width]
            .iter()
            .filter(|&&f| f)
            .count()
    }

    /// Errors unless the mask annotates `raster`.
    pub fn check_aligned(&self, raster: &ImageRaster) -> Result<()> {
        if self.width != raster.width || self.height != raster.height {
            return Err(McmError::DimensionMismatch {
                raster_width: raster.width,
                raster_height: raster.height,
                mask_width: self.width,
                mask_height: self.height,
            });
        }
        Ok(())
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let mut buf = image::GrayImage::new(self.width as u32, self.height as u32);
        for (i, px) in buf.pixels_mut().enumerate() {
            *px = Luma([if self.flags[i] { 255 } else { 0 }]);
        }
        buf.save_with_format(path, ImageFormat::Png)
            .map_err(|e| encode_error(path, e))
    }
}

fn encode_error(path: &Path, e: image::ImageError) -> McmError {
    match e {
        image::ImageError::IoError(source) => McmError::io(path, source),
        other => McmError::Decode {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    }
}

/// Hexcone HSV value: hue in degrees, saturation and value in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HsvPixel {
    pub h: f64,
    pub s: f64,
    pub v: f64,
}

/// Standard hexcone conversion. Hue is 0 for achromatic pixels.
pub fn rgb_to_hsv([r, g, b]: [u8; 3]) -> HsvPixel {
    let (rf, gf, bf) = (r as f64, g as f64, b as f64);
    let max = rf.max(gf).max(bf);
    let min = rf.min(gf).min(bf);
    let delta = max - min;
    let v = max / CHANNEL_MAX as f64;
    if delta == 0.0 {
        return HsvPixel { h: 0.0, s: 0.0, v };
    }
    let s = delta / max;
    let sector = if max == rf {
        ((gf - bf) / delta).rem_euclid(6.0)
    } else if max == gf {
        (bf - rf) / delta + 2.0
    } else {
        (rf - gf) / delta + 4.0
    };
    let mut h = 60.0 * sector;
    if h >= 360.0 {
        h -= 360.0;
    }
    HsvPixel { h, s, v }
}

/// Ordered, strictly positive illumination multipliers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct CoefficientVector(Vec<f64>);

impl CoefficientVector {
    pub fn new(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(McmError::InvalidArgument(
                "coefficient vector must not be empty".into(),
            ));
        }
        if let Some(bad) = coefficients.iter().find(|&&k| !(k.is_finite() && k > 0.0)) {
            return Err(McmError::InvalidArgument(format!(
                "illumination coefficients must be positive, got {bad}"
            )));
        }
        Ok(Self(coefficients))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::MIN, f64::max)
    }
}

impl Default for CoefficientVector {
    fn default() -> Self {
        Self(DEFAULT_COEFFICIENTS.to_vec())
    }
}

impl TryFrom<Vec<f64>> for CoefficientVector {
    type Error = McmError;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<CoefficientVector> for Vec<f64> {
    fn from(v: CoefficientVector) -> Self {
        v.0
    }
}

/// Mean of all R, G and B values over foreground pixels.
pub fn foreground_channel_mean(raster: &ImageRaster, mask: &BlobMask) -> Result<f64> {
    mask.check_aligned(raster)?;
    let mut sum = 0u64;
    let mut count = 0u64;
    for (px, &fg) in raster.pixels.iter().zip(&mask.flags) {
        if fg {
            sum += px.iter().map(|&c| c as u64).sum::<u64>();
            count += 3;
        }
    }
    if count == 0 {
        return Err(McmError::EmptyMask { region: None });
    }
    Ok(sum as f64 / count as f64)
}

/// Scales `k` down uniformly so that the foreground channel mean multiplied by
/// the largest coefficient does not exceed `threshold`.
pub fn adjust_coefficients(
    k: &CoefficientVector,
    raster: &ImageRaster,
    mask: &BlobMask,
    threshold: f64,
) -> Result<CoefficientVector> {
    if !(threshold > 0.0 && threshold <= CHANNEL_MAX as f64) {
        return Err(McmError::InvalidArgument(format!(
            "saturation threshold must lie in (0, 255], got {threshold}"
        )));
    }
    let mean = foreground_channel_mean(raster, mask)?;
    Ok(adjust_for_mean(k, mean, threshold))
}

/// Adjustment rule for a precomputed foreground mean.
pub fn adjust_for_mean(k: &CoefficientVector, mean: f64, threshold: f64) -> CoefficientVector {
    let peak = mean * k.max();
    if peak <= threshold {
        return k.clone();
    }
    let scale = threshold / peak;
    CoefficientVector(k.0.iter().map(|c| c * scale).collect())
}

/// `clamp(round_half_up(value * coefficient), 0, 255)`.
#[inline]
pub fn scale_channel(value: u8, coefficient: f64) -> u8 {
    let scaled = (value as f64 * coefficient + 0.5).floor();
    scaled.clamp(0.0, CHANNEL_MAX as f64) as u8
}

/// Multiplies every channel of every foreground pixel by `coefficient`.
/// Background pixels are left untouched.
pub fn apply_brightness_contrast(
    raster: &ImageRaster,
    mask: &BlobMask,
    coefficient: f64,
) -> Result<ImageRaster> {
    if !(coefficient.is_finite() && coefficient > 0.0) {
        return Err(McmError::InvalidArgument(format!(
            "brightness coefficient must be positive, got {coefficient}"
        )));
    }
    mask.check_aligned(raster)?;
    // 256-entry lookup; the transform depends only on the channel value.
    let lut: Vec<u8> = (0..=255u8).map(|v| scale_channel(v, coefficient)).collect();
    let pixels = raster
        .pixels
        .iter()
        .zip(&mask.flags)
        .map(|(px, &fg)| {
            if fg {
                [
                    lut[px[0] as usize],
                    lut[px[1] as usize],
                    lut[px[2] as usize],
                ]
            } else {
                *px
            }
        })
        .collect();
    Ok(ImageRaster {
        width: raster.width,
        height: raster.height,
        pixels,
    })
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| McmError::io(path, e))
}

fn sniff_format(path: &Path, bytes: &[u8]) -> Result<ImageFormat> {
    if bytes.starts_with(b"\x89PNG\r\n\x1a\n") {
        Ok(ImageFormat::Png)
    } else if bytes.starts_with(b"P6") {
        Ok(ImageFormat::Pnm)
    } else {
        Err(McmError::UnsupportedFormat {
            path: path.to_path_buf(),
        })
    }
}

fn decode(path: &Path, bytes: &[u8], format: ImageFormat) -> Result<image::DynamicImage> {
    let img = image::load_from_memory_with_format(bytes, format).map_err(|e| McmError::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    if img.width() == 0 || img.height() == 0 {
        return Err(McmError::EmptyImage);
    }
    Ok(img)
}

/// Loads a PNG or binary PPM (P6) image as 8-bit RGB.
pub fn load_image(path: &Path) -> Result<ImageRaster> {
    let bytes = read_bytes(path)?;
    let format = sniff_format(path, &bytes)?;
    let rgb = decode(path, &bytes, format)?.to_rgb8();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    ImageRaster::new(w, h, rgb.pixels().map(|p| p.0).collect())
}

/// Loads a mask PNG; values above 127 are foreground. Colour PNGs are
/// reduced to luma first.
pub fn load_mask(path: &Path) -> Result<BlobMask> {
    let bytes = read_bytes(path)?;
    if sniff_format(path, &bytes)? != ImageFormat::Png {
        return Err(McmError::UnsupportedFormat {
            path: path.to_path_buf(),
        });
    }
    let luma = decode(path, &bytes, ImageFormat::Png)?.to_luma8();
    let (w, h) = (luma.width() as usize, luma.height() as usize);
    BlobMask::new(w, h, luma.pixels().map(|p| p.0[0] > 127).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn hsv_pure_red() {
        let p = rgb_to_hsv([255, 0, 0]);
        assert_eq!((p.h, p.s, p.v), (0.0, 1.0, 1.0));
    }

    #[test]
    fn hsv_gray_has_zero_hue() {
        let p = rgb_to_hsv([128, 128, 128]);
        assert_eq!(p.h, 0.0);
        assert_eq!(p.s, 0.0);
        assert!(close(p.v, 128.0 / 255.0));
    }

    #[test]
    fn hsv_hand_evaluated() {
        let p = rgb_to_hsv([64, 128, 192]);
        assert!(close(p.h, 210.0));
        assert!(close(p.s, 2.0 / 3.0));
        assert!(close(p.v, 192.0 / 255.0));
    }

    #[test]
    fn hsv_black_and_magenta() {
        let black = rgb_to_hsv([0, 0, 0]);
        assert_eq!((black.h, black.s, black.v), (0.0, 0.0, 0.0));
        let magenta = rgb_to_hsv([255, 0, 255]);
        assert!(close(magenta.h, 300.0));
    }

    fn raster_with_mean(mean: u8) -> (ImageRaster, BlobMask) {
        (
            ImageRaster::filled(4, 4, [mean; 3]).unwrap(),
            BlobMask::full(4, 4).unwrap(),
        )
    }

    #[test]
    fn coefficients_unchanged_below_threshold() {
        let (r, m) = raster_with_mean(100);
        let k = CoefficientVector::default();
        assert_eq!(adjust_coefficients(&k, &r, &m, 240.0).unwrap(), k);
    }

    #[test]
    fn coefficients_rescaled_above_threshold() {
        let (r, m) = raster_with_mean(180);
        let k = CoefficientVector::default();
        let adjusted = adjust_coefficients(&k, &r, &m, 240.0).unwrap();
        let expected = [1.3333, 1.1429, 0.9524, 0.7619, 0.5714];
        for (a, e) in adjusted.as_slice().iter().zip(expected) {
            assert!((a - e).abs() < 1e-4, "{a} vs {e}");
        }
        assert!((180.0 * adjusted.max() - 240.0).abs() < 1e-9);
    }

    #[test]
    fn unit_coefficient_identity() {
        let (r, m) = raster_with_mean(200);
        let k = CoefficientVector::new(vec![1.0]).unwrap();
        assert_eq!(adjust_coefficients(&k, &r, &m, 240.0).unwrap(), k);
    }

    #[test]
    fn background_ignored_in_mean() {
        let mut r = ImageRaster::filled(2, 1, [250, 250, 250]).unwrap();
        r.set(0, 0, [10, 20, 30]);
        let m = BlobMask::new(2, 1, vec![true, false]).unwrap();
        assert!(close(foreground_channel_mean(&r, &m).unwrap(), 20.0));
    }

    #[test]
    fn empty_mask_rejected() {
        let r = ImageRaster::filled(2, 2, [1, 2, 3]).unwrap();
        let m = BlobMask::new(2, 2, vec![false; 4]).unwrap();
        let err = adjust_coefficients(&CoefficientVector::default(), &r, &m, 240.0);
        assert!(matches!(err, Err(McmError::EmptyMask { .. })));
    }

    #[test]
    fn invalid_coefficients_rejected() {
        assert!(CoefficientVector::new(vec![]).is_err());
        assert!(CoefficientVector::new(vec![1.0, 0.0]).is_err());
        assert!(CoefficientVector::new(vec![-0.5]).is_err());
    }

    #[test]
    fn channel_scaling_examples() {
        assert_eq!(scale_channel(100, 0.6), 60);
        assert_eq!(scale_channel(200, 1.4), 255);
        assert_eq!(scale_channel(77, 1.0), 77);
    }

    #[test]
    fn transform_leaves_background() {
        let r = ImageRaster::new(2, 1, vec![[100, 100, 100], [200, 10, 0]]).unwrap();
        let m = BlobMask::new(2, 1, vec![true, false]).unwrap();
        let out = apply_brightness_contrast(&r, &m, 0.6).unwrap();
        assert_eq!(out.get(0, 0), [60, 60, 60]);
        assert_eq!(out.get(1, 0), [200, 10, 0]);
    }

    #[test]
    fn load_rejects_missing_and_truncated() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("nope.png");
        assert!(matches!(load_image(&missing), Err(McmError::Io { .. })));

        let r = ImageRaster::filled(3, 5, [1, 2, 3]).unwrap();
        let good = dir.path().join("good.png");
        r.save_png(&good).unwrap();
        assert_eq!(load_image(&good).unwrap(), r);

        let bytes = std::fs::read(&good).unwrap();
        let truncated = dir.path().join("trunc.png");
        std::fs::write(&truncated, &bytes[..bytes.len() / 2]).unwrap();
        assert!(matches!(
            load_image(&truncated),
            Err(McmError::Decode { .. })
        ));

        let junk = dir.path().join("junk.bmp");
        std::fs::write(&junk, b"BM not an image").unwrap();
        assert!(matches!(
            load_image(&junk),
            Err(McmError::UnsupportedFormat { .. })
        ));
    }

    #[test]
    fn load_single_black_pixel_ppm() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("one.ppm");
        let mut bytes = b"P6\n1 1\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 0, 0]);
        std::fs::write(&path, bytes).unwrap();
        let r = load_image(&path).unwrap();
        assert_eq!(r, ImageRaster::new(1, 1, vec![[0, 0, 0]]).unwrap());
    }

    #[test]
    fn load_ppm_and_mask_threshold() {
        let dir = tempfile::tempdir().unwrap();
        let ppm = dir.path().join("a.ppm");
        let mut bytes = b"P6\n2 1\n255\n".to_vec();
        bytes.extend_from_slice(&[255, 0, 0, 0, 0, 255]);
        std::fs::write(&ppm, bytes).unwrap();
        let r = load_image(&ppm).unwrap();
        assert_eq!(r.pixels(), &[[255, 0, 0], [0, 0, 255]]);

        let mask_path = dir.path().join("m.png");
        let gray = image::GrayImage::from_raw(3, 1, vec![127, 128, 0]).unwrap();
        gray.save(&mask_path).unwrap();
        let m = load_mask(&mask_path).unwrap();
        assert_eq!(m.flags(), &[false, true, false]);
    }

    // Inverse hexcone, used only to check the round trip.
    fn hsv_to_rgb(p: HsvPixel) -> [f64; 3] {
        let c = p.v * p.s;
        let hp = p.h / 60.0;
        let x = c * (1.0 - (hp.rem_euclid(2.0) - 1.0).abs());
        let (r, g, b) = match hp as u32 {
            0 => (c, x, 0.0),
            1 => (x, c, 0.0),
            2 => (0.0, c, x),
            3 => (0.0, x, c),
            4 => (x, 0.0, c),
            _ => (c, 0.0, x),
        };
        let m = p.v - c;
        [(r + m) * 255.0, (g + m) * 255.0, (b + m) * 255.0]
    }

    proptest! {
        #[test]
        fn hsv_ranges_and_round_trip(r: u8, g: u8, b: u8) {
            let p = rgb_to_hsv([r, g, b]);
            prop_assert!((0.0..360.0).contains(&p.h));
            prop_assert!((0.0..=1.0).contains(&p.s));
            prop_assert!((0.0..=1.0).contains(&p.v));
            let back = hsv_to_rgb(p);
            for (orig, rec) in [r, g, b].iter().zip(back) {
                prop_assert!((*orig as f64 - rec).abs() <= 1.0);
            }
        }

        #[test]
        fn transform_is_monotone(a: u8, b: u8, k in 0.01f64..4.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(scale_channel(lo, k) <= scale_channel(hi, k));
        }

        #[test]
        fn unit_transform_is_identity(px in proptest::collection::vec(any::<[u8; 3]>(), 6)) {
            let r = ImageRaster::new(3, 2, px).unwrap();
            let m = BlobMask::full(3, 2).unwrap();
            prop_assert_eq!(apply_brightness_contrast(&r, &m, 1.0).unwrap(), r);
        }

        #[test]
        fn adjusted_coefficients_respect_threshold(
            mean in 1.0f64..255.0,
            ks in proptest::collection::vec(0.05f64..3.0, 1..8),
            threshold in 1.0f64..255.0,
        ) {
            let k = CoefficientVector::new(ks).unwrap();
            let adjusted = adjust_for_mean(&k, mean, threshold);
            prop_assert!(mean * adjusted.max() <= threshold + 0.5);
            let ratio = adjusted.as_slice()[0] / k.as_slice()[0];
            for (a, o) in adjusted.as_slice().iter().zip(k.as_slice()) {
                prop_assert!((a / o - ratio).abs() < 1e-9);
            }
        }
    }
}
