//! Patch-based HSV descriptors.
//!
//! Each body part is covered by `P` random rectangles. A rectangle is
//! described by a 40-bin HSV histogram (24 hue, 12 saturation, 4 value bins)
//! of its foreground pixels together with the relative vertical position of
//! its centre inside the part band. Templates can be expanded with
//! brightness/contrast variants of every rectangle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{McmError, Result};
use crate::imaging::{
    adjust_coefficients, apply_brightness_contrast, BlobMask, CoefficientVector, ImageRaster,
    DEFAULT_SATURATION_THRESHOLD,
};
use crate::partition::{BodyPartition, PartRegion, PART_COUNT};

pub const HUE_BINS: usize = 24;
pub const SATURATION_BINS: usize = 12;
pub const VALUE_BINS: usize = 4;
pub const HISTOGRAM_BINS: usize = HUE_BINS + SATURATION_BINS + VALUE_BINS;

/// Rejection-sampling attempts per patch.
pub const SAMPLING_RETRY_BUDGET: usize = 1000;

const SUM_TOLERANCE: f64 = 1e-9;
const GEOMETRY_EPS: f64 = 1e-12;

/// Histogram bin indices (hue, 24 + saturation, 36 + value) of an RGB pixel.
///
/// Binning is done in integer arithmetic on the hexcone formulas so that
/// bin edges are exact; hue of achromatic pixels falls in bin 0.
#[inline]
pub fn hsv_bins([r, g, b]: [u8; 3]) -> [u8; 3] {
    let (r, g, b) = (r as i32, g as i32, b as i32);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let v_bin = ((VALUE_BINS as i32 * max) / 255).min(VALUE_BINS as i32 - 1);
    if delta == 0 {
        return [
            0,
            HUE_BINS as u8,
            (HUE_BINS + SATURATION_BINS) as u8 + v_bin as u8,
        ];
    }
    let s_bin = ((SATURATION_BINS as i32 * delta) / max).min(SATURATION_BINS as i32 - 1);
    // hue / 15 degrees = 4 * sector, sector = base + num / delta
    let (base, num) = if max == r {
        (0, g - b)
    } else if max == g {
        (2, b - r)
    } else {
        (4, r - g)
    };
    let h_bin = (4 * (base * delta + num))
        .div_euclid(delta)
        .rem_euclid(HUE_BINS as i32);
    [
        h_bin as u8,
        (HUE_BINS as i32 + s_bin) as u8,
        (HUE_BINS + SATURATION_BINS) as u8 + v_bin as u8,
    ]
}

/// Normalized 40-bin HSV histogram.
///
/// Each of the H, S and V sub-histograms sums to 1/3, so the whole vector is
/// a distribution. Square roots are cached for the Bhattacharyya kernel.
#[derive(Debug, Clone)]
pub struct HsvHistogram {
    bins: [f64; HISTOGRAM_BINS],
    root: [f64; HISTOGRAM_BINS],
    inv_sqrt_mass: f64,
    fingerprint: u64,
}

impl PartialEq for HsvHistogram {
    fn eq(&self, other: &Self) -> bool {
        self.bins == other.bins
    }
}

impl HsvHistogram {
    pub fn new(bins: [f64; HISTOGRAM_BINS]) -> Result<Self> {
        if bins.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
            return Err(McmError::Format(
                "histogram bins must be finite and non-negative".into(),
            ));
        }
        let mass: f64 = bins.iter().sum();
        if (mass - 1.0).abs() > SUM_TOLERANCE {
            return Err(McmError::Format(format!(
                "histogram must sum to 1, sums to {mass}"
            )));
        }
        let mut root = [0.0; HISTOGRAM_BINS];
        let mut fingerprint = 0xcbf2_9ce4_8422_2325u64;
        for (r, b) in root.iter_mut().zip(&bins) {
            *r = b.sqrt();
            fingerprint = (fingerprint ^ b.to_bits()).wrapping_mul(0x0100_0000_01b3);
        }
        Ok(Self {
            bins,
            root,
            inv_sqrt_mass: 1.0 / mass.sqrt(),
            fingerprint,
        })
    }

    fn from_counts(counts: &[u32; HISTOGRAM_BINS], pixels: u32) -> Option<Self> {
        if pixels == 0 {
            return None;
        }
        let scale = 1.0 / (3.0 * pixels as f64);
        let mut bins = [0.0; HISTOGRAM_BINS];
        for (b, &c) in bins.iter_mut().zip(counts) {
            *b = c as f64 * scale;
        }
        Self::new(bins).ok()
    }

    /// Histogram of the foreground pixels in rows `[y_top, y_bottom)`.
    pub fn from_rows(
        raster: &ImageRaster,
        mask: &BlobMask,
        y_top: usize,
        y_bottom: usize,
    ) -> Option<Self> {
        let rect = Rect {
            x: 0,
            y: y_top,
            width: raster.width(),
            height: y_bottom.saturating_sub(y_top),
        };
        Self::from_rect(raster, mask, &rect)
    }

    /// Histogram of the foreground pixels inside `rect`.
    pub fn from_rect(raster: &ImageRaster, mask: &BlobMask, rect: &Rect) -> Option<Self> {
        let mut counts = [0u32; HISTOGRAM_BINS];
        let mut n = 0;
        for y in rect.y..rect.y + rect.height {
            for x in rect.x..rect.x + rect.width {
                if mask.is_foreground(x, y) {
                    for bin in hsv_bins(raster.get(x, y)) {
                        counts[bin as usize] += 1;
                    }
                    n += 1;
                }
            }
        }
        Self::from_counts(&counts, n)
    }

    pub fn bins(&self) -> &[f64; HISTOGRAM_BINS] {
        &self.bins
    }

    /// `sqrt(1 - BC)` with `BC = sum(sqrt(p_i q_i)) / sqrt(sum(p) sum(q))`,
    /// clamped to `[0, 1]`. Exactly 0 for identical histograms.
    #[inline]
    pub fn bhattacharyya(&self, other: &Self) -> f64 {
        if self.fingerprint == other.fingerprint && self.bins == other.bins {
            return 0.0;
        }
        let mut dot = 0.0;
        for i in 0..HISTOGRAM_BINS {
            dot += self.root[i] * other.root[i];
        }
        let bc = (dot * (self.inv_sqrt_mass * other.inv_sqrt_mass)).clamp(0.0, 1.0);
        (1.0 - bc).sqrt()
    }
}

impl Serialize for HsvHistogram {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.bins.as_slice().serialize(s)
    }
}

impl<'de> Deserialize<'de> for HsvHistogram {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        let bins: [f64; HISTOGRAM_BINS] = v.try_into().map_err(|v: Vec<f64>| {
            serde::de::Error::custom(format!(
                "expected {HISTOGRAM_BINS} histogram bins, got {}",
                v.len()
            ))
        })?;
        HsvHistogram::new(bins).map_err(serde::de::Error::custom)
    }
}

/// One component of a part set: the pair (HSV histogram, relative y).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PatchRecord")]
pub struct PatchDescriptor {
    pub hsv: HsvHistogram,
    pub y_pos: f64,
}

#[derive(Deserialize)]
struct PatchRecord {
    hsv: HsvHistogram,
    y_pos: f64,
}

impl TryFrom<PatchRecord> for PatchDescriptor {
    type Error = McmError;

    fn try_from(r: PatchRecord) -> Result<Self> {
        PatchDescriptor::new(r.hsv, r.y_pos)
    }
}

impl PatchDescriptor {
    pub fn new(hsv: HsvHistogram, y_pos: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&y_pos) {
            return Err(McmError::Format(format!("y_pos {y_pos} outside [0, 1]")));
        }
        Ok(Self { hsv, y_pos })
    }
}

/// Unordered collection of patch descriptors for one body part.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PartSet {
    pub patches: Vec<PatchDescriptor>,
}

impl PartSet {
    pub fn new(patches: Vec<PatchDescriptor>) -> Self {
        Self { patches }
    }

    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Template,
    Probe,
}

/// Ordered sequence of part sets describing one image (or several merged
/// images) of a person.
#[derive(Debug, Clone, PartialEq)]
pub struct PersonDescriptor {
    pub person_id: String,
    pub provenance: Provenance,
    pub seed: u64,
    pub parts: Vec<PartSet>,
}

impl PersonDescriptor {
    pub fn patch_count(&self) -> usize {
        self.parts.iter().map(PartSet::len).sum()
    }
}

/// Axis-aligned rectangle in image coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub width: usize,
    pub height: usize,
}

impl Rect {
    pub fn area(&self) -> usize {
        self.width * self.height
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingConfig {
    pub patches: usize,
    pub area_min: f64,
    pub area_max: f64,
    pub aspect_min: f64,
    pub aspect_max: f64,
    pub min_mask_coverage: f64,
    pub seed: u64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            patches: 80,
            area_min: 0.125,
            area_max: 0.25,
            aspect_min: 0.5,
            aspect_max: 2.0,
            min_mask_coverage: 0.5,
            seed: 0,
        }
    }
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(McmError::InvalidArgument(msg));
        if self.patches == 0 {
            return bad("patch count must be at least 1".into());
        }
        if !(0.0 < self.area_min && self.area_min <= self.area_max && self.area_max < 1.0) {
            return bad(format!(
                "patch area range must satisfy 0 < min <= max < 1, got [{}, {}]",
                self.area_min, self.area_max
            ));
        }
        if !(0.0 < self.aspect_min && self.aspect_min <= self.aspect_max) {
            return bad(format!(
                "aspect range must satisfy 0 < min <= max, got [{}, {}]",
                self.aspect_min, self.aspect_max
            ));
        }
        if !(0.0..=1.0).contains(&self.min_mask_coverage) {
            return bad(format!(
                "mask coverage must lie in [0, 1], got {}",
                self.min_mask_coverage
            ));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }
}

/// Illumination simulation settings for templates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Simulation {
    pub coefficients: CoefficientVector,
    pub threshold: f64,
}

impl Default for Simulation {
    fn default() -> Self {
        Self {
            coefficients: CoefficientVector::default(),
            threshold: DEFAULT_SATURATION_THRESHOLD,
        }
    }
}

/// Mixes a base seed with a label (image identifier, part index).
pub fn derive_seed(base: u64, label: &str) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64 ^ base;
    for &b in label.as_bytes() {
        h = (h ^ b as u64).wrapping_mul(0x0100_0000_01b3);
    }
    // splitmix64 finalizer
    h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

/// Summed-area table over a band-local mask.
struct MaskIntegral {
    width: usize,
    sums: Vec<u32>,
}

impl MaskIntegral {
    fn new(mask: &BlobMask) -> Self {
        let (w, h) = (mask.width(), mask.height());
        let mut sums = vec![0u32; (w + 1) * (h + 1)];
        for y in 0..h {
            let mut row = 0;
            for x in 0..w {
                row += mask.is_foreground(x, y) as u32;
                sums[(y + 1) * (w + 1) + x + 1] = sums[y * (w + 1) + x + 1] + row;
            }
        }
        Self { width: w, sums }
    }

    fn count(&self, x: usize, y: usize, w: usize, h: usize) -> u32 {
        let s = |xx: usize, yy: usize| self.sums[yy * (self.width + 1) + xx];
        s(x + w, y + h) + s(x, y) - s(x + w, y) - s(x, y + h)
    }
}

fn sample_in(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if lo < hi {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

/// Samples `config.patches` admissible rectangles inside the part band,
/// seeded from `config.seed` and the part index.
pub fn sample_patches(region: &PartRegion, config: &SamplingConfig) -> Result<Vec<Rect>> {
    config.validate()?;
    let mut rng =
        ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &format!("part/{}", region.index)));
    let band_w = region.width();
    let band_h = region.height();
    let band_area = region.area() as f64;
    let integral = MaskIntegral::new(region.mask());
    let mut rects = Vec::with_capacity(config.patches);
    for patch in 0..config.patches {
        let mut placed = None;
        for _ in 0..SAMPLING_RETRY_BUDGET {
            let target = sample_in(&mut rng, config.area_min, config.area_max) * band_area;
            let aspect = sample_in(&mut rng, config.aspect_min, config.aspect_max);
            let w = ((target * aspect).sqrt().round() as usize).clamp(1, band_w);
            let h = ((target / w as f64).round() as usize).clamp(1, band_h);
            let frac = (w * h) as f64 / band_area;
            let ratio = w as f64 / h as f64;
            if frac < config.area_min - GEOMETRY_EPS
                || frac > config.area_max + GEOMETRY_EPS
                || ratio < config.aspect_min - GEOMETRY_EPS
                || ratio > config.aspect_max + GEOMETRY_EPS
            {
                continue;
            }
            let x = rng.random_range(0..=band_w - w);
            let y = rng.random_range(0..=band_h - h);
            let covered = integral.count(x, y, w, h) as f64 / (w * h) as f64;
            if covered + GEOMETRY_EPS < config.min_mask_coverage || covered == 0.0 {
                continue;
            }
            placed = Some(Rect {
                x,
                y: region.y_top + y,
                width: w,
                height: h,
            });
            break;
        }
        rects.push(placed.ok_or(McmError::Sampling {
            patch,
            requested: config.patches,
            attempts: SAMPLING_RETRY_BUDGET,
            y_top: region.y_top,
            y_bottom: region.y_bottom,
        })?);
    }
    Ok(rects)
}

/// Relative vertical position of the rectangle centre within the band,
/// clamped to `[0, 1]`.
pub fn relative_center_y(rect: &Rect, y_top: usize, y_bottom: usize) -> f64 {
    let center = rect.y as f64 + rect.height as f64 / 2.0;
    ((center - y_top as f64) / (y_bottom - y_top) as f64).clamp(0.0, 1.0)
}

/// Describes the foreground pixels of `rect` within the part band.
pub fn describe_patch(
    raster: &ImageRaster,
    mask: &BlobMask,
    rect: &Rect,
    band: &PartRegion,
) -> Result<PatchDescriptor> {
    mask.check_aligned(raster)?;
    if rect.x + rect.width > raster.width() || rect.y + rect.height > raster.height() {
        return Err(McmError::InvalidArgument(format!(
            "rectangle {rect:?} exceeds the image"
        )));
    }
    let hsv = HsvHistogram::from_rect(raster, mask, rect).ok_or(McmError::EmptyMask {
        region: Some(format!("patch {rect:?}")),
    })?;
    PatchDescriptor::new(hsv, relative_center_y(rect, band.y_top, band.y_bottom))
}

/// Precomputed histogram bins for every pixel of a raster.
struct BinnedRaster {
    width: usize,
    bins: Vec<[u8; 3]>,
}

impl BinnedRaster {
    fn new(raster: &ImageRaster) -> Self {
        Self {
            width: raster.width(),
            bins: raster.pixels().iter().map(|&p| hsv_bins(p)).collect(),
        }
    }

    fn histogram(&self, mask: &BlobMask, rect: &Rect) -> Option<HsvHistogram> {
        let mut counts = [0u32; HISTOGRAM_BINS];
        let mut n = 0;
        for y in rect.y..rect.y + rect.height {
            let row = y * self.width;
            for x in rect.x..rect.x + rect.width {
                if mask.flags()[row + x] {
                    for bin in self.bins[row + x] {
                        counts[bin as usize] += 1;
                    }
                    n += 1;
                }
            }
        }
        HsvHistogram::from_counts(&counts, n)
    }
}

/// Builds the part sets of one image.
///
/// Rectangles are sampled once per part. With simulation the coefficients
/// are first adjusted to the image, and each part set holds `P * S`
/// descriptors laid out coefficient-major; without it each holds `P`.
pub fn build_descriptor(
    raster: &ImageRaster,
    mask: &BlobMask,
    partition: &BodyPartition,
    config: &SamplingConfig,
    simulation: Option<&Simulation>,
    person_id: &str,
    provenance: Provenance,
) -> Result<PersonDescriptor> {
    mask.check_aligned(raster)?;
    let rects = partition
        .parts()
        .iter()
        .map(|part| sample_patches(part, config))
        .collect::<Result<Vec<_>>>()?;

    let coefficients = match simulation {
        Some(sim) => adjust_coefficients(&sim.coefficients, raster, mask, sim.threshold)?
            .as_slice()
            .to_vec(),
        None => vec![1.0],
    };

    let mut parts: Vec<PartSet> = rects
        .iter()
        .map(|r| PartSet::new(Vec::with_capacity(r.len() * coefficients.len())))
        .collect();
    for &k in &coefficients {
        let binned = if k == 1.0 {
            BinnedRaster::new(raster)
        } else {
            BinnedRaster::new(&apply_brightness_contrast(raster, mask, k)?)
        };
        for ((part, region), part_rects) in parts.iter_mut().zip(partition.parts()).zip(&rects) {
            for rect in part_rects {
                let hsv = binned.histogram(mask, rect).ok_or(McmError::EmptyMask {
                    region: Some(format!("patch {rect:?}")),
                })?;
                let y_pos = relative_center_y(rect, region.y_top, region.y_bottom);
                part.patches.push(PatchDescriptor::new(hsv, y_pos)?);
            }
        }
    }

    Ok(PersonDescriptor {
        person_id: person_id.to_string(),
        provenance,
        seed: config.seed,
        parts,
    })
}

/// Part-wise union of several descriptors of the same person.
pub fn merge_descriptors(descriptors: &[PersonDescriptor]) -> Result<PersonDescriptor> {
    let (first, rest) = descriptors
        .split_first()
        .ok_or_else(|| McmError::InvalidArgument("nothing to merge".into()))?;
    let mut merged = first.clone();
    for d in rest {
        if d.person_id != first.person_id {
            return Err(McmError::PersonMismatch {
                left: first.person_id.clone(),
                right: d.person_id.clone(),
            });
        }
        if d.parts.len() != first.parts.len() {
            return Err(McmError::PartCountMismatch {
                left: first.parts.len(),
                right: d.parts.len(),
            });
        }
        for (m, p) in merged.parts.iter_mut().zip(&d.parts) {
            m.patches.extend(p.patches.iter().cloned());
        }
    }
    Ok(merged)
}

/// Partition plus descriptor construction in one call.
pub fn extract_descriptor(
    raster: &ImageRaster,
    mask: &BlobMask,
    mode: crate::partition::PartitionMode,
    config: &SamplingConfig,
    simulation: Option<&Simulation>,
    person_id: &str,
    provenance: Provenance,
) -> Result<PersonDescriptor> {
    let partition = crate::partition::find_partition(raster, mask, mode)?;
    debug_assert_eq!(partition.parts().len(), PART_COUNT);
    build_descriptor(
        raster, mask, &partition, config, simulation, person_id, provenance,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::rgb_to_hsv;
    use crate::partition::{find_partition, PartitionMode};
    use proptest::prelude::*;
    use rand::Rng;

    fn float_bins(px: [u8; 3]) -> [usize; 3] {
        let p = rgb_to_hsv(px);
        [
            ((p.h / 360.0 * 24.0) as usize).min(23),
            24 + ((p.s * 12.0) as usize).min(11),
            36 + ((p.v * 4.0) as usize).min(3),
        ]
    }

    fn near_edge(px: [u8; 3]) -> bool {
        let p = rgb_to_hsv(px);
        let frac = |x: f64| (x - x.round()).abs() < 1e-9;
        frac(p.h / 15.0) || frac(p.s * 12.0) || frac(p.v * 4.0)
    }

    proptest! {
        #[test]
        fn integer_bins_match_float_hsv(r: u8, g: u8, b: u8) {
            let px = [r, g, b];
            prop_assume!(!near_edge(px));
            let ib = hsv_bins(px);
            prop_assert_eq!([ib[0] as usize, ib[1] as usize, ib[2] as usize], float_bins(px));
        }
    }

    #[test]
    fn integer_bins_at_exact_edges() {
        // (64,128,192): hue 210 = 14 * 15, s = 8/12, v = 3.01/4
        assert_eq!(hsv_bins([64, 128, 192]), [14, 24 + 8, 36 + 3]);
        assert_eq!(hsv_bins([255, 0, 0]), [0, 35, 39]);
        assert_eq!(hsv_bins([0, 0, 0]), [0, 24, 36]);
        assert_eq!(hsv_bins([255, 0, 1]), [23, 35, 39]);
    }

    fn red_blob(w: usize, h: usize) -> (ImageRaster, BlobMask) {
        (
            ImageRaster::filled(w, h, [255, 0, 0]).unwrap(),
            BlobMask::full(w, h).unwrap(),
        )
    }

    #[test]
    fn pure_red_patch() {
        let (r, m) = red_blob(20, 40);
        let p = find_partition(&r, &m, PartitionMode::Fixed).unwrap();
        let band = p.part(0).unwrap();
        let rect = Rect {
            x: 2,
            y: band.y_top,
            width: 5,
            height: 4,
        };
        let d = describe_patch(&r, &m, &rect, band).unwrap();
        let bins = d.hsv.bins();
        assert_eq!(bins[0], 1.0 / 3.0);
        assert_eq!(bins[24 + 11], 1.0 / 3.0);
        assert_eq!(bins[36 + 3], 1.0 / 3.0);
        assert_eq!(bins.iter().filter(|&&b| b == 0.0).count(), 37);
        assert!((bins.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn patch_without_foreground_is_an_error() {
        let (r, mut m) = red_blob(10, 40);
        for y in 10..14 {
            for x in 0..4 {
                m.set(x, y, false);
            }
        }
        let p = find_partition(&r, &m, PartitionMode::Fixed).unwrap();
        let rect = Rect {
            x: 0,
            y: 10,
            width: 4,
            height: 4,
        };
        assert!(describe_patch(&r, &m, &rect, p.part(0).unwrap()).is_err());
    }

    #[test]
    fn y_pos_boundaries() {
        let at_top = Rect {
            x: 0,
            y: 10,
            width: 3,
            height: 0,
        };
        assert_eq!(relative_center_y(&at_top, 10, 30), 0.0);
        let mid = Rect {
            x: 0,
            y: 15,
            width: 3,
            height: 10,
        };
        assert_eq!(relative_center_y(&mid, 10, 30), 0.5);
    }

    #[test]
    fn forced_square_geometry() {
        // 40x40 fully foreground band: rows 10..50 of a 40x60 blob
        let (r, m) = red_blob(40, 60);
        let partition = BodyPartition::from_axes(&m, 10, 50).unwrap();
        let band = partition.part(0).unwrap();
        let config = SamplingConfig {
            patches: 1,
            area_min: 0.25,
            area_max: 0.25,
            aspect_min: 1.0,
            aspect_max: 1.0,
            ..SamplingConfig::default()
        };
        let rects = sample_patches(band, &config).unwrap();
        assert_eq!(rects.len(), 1);
        assert_eq!((rects[0].width, rects[0].height), (20, 20));
        assert!(rects[0].y >= 10 && rects[0].y + 20 <= 50);
        assert_eq!(sample_patches(band, &config).unwrap(), rects);
        let _ = r;
    }

    #[test]
    fn sampling_respects_bounds() {
        let (r, m) = red_blob(48, 128);
        let partition = find_partition(&r, &m, PartitionMode::Fixed).unwrap();
        let config = SamplingConfig::default();
        for band in partition.parts() {
            let rects = sample_patches(band, &config).unwrap();
            assert_eq!(rects.len(), 80);
            for rect in rects {
                let frac = rect.area() as f64 / band.area() as f64;
                assert!((0.125..=0.25).contains(&frac), "{frac}");
                let ratio = rect.width as f64 / rect.height as f64;
                assert!((0.5..=2.0).contains(&ratio), "{ratio}");
                assert!(rect.y >= band.y_top && rect.y + rect.height <= band.y_bottom);
                assert!(rect.x + rect.width <= 48);
            }
        }
    }

    #[test]
    fn sparse_region_exhausts_retry_budget() {
        let (r, _) = red_blob(20, 40);
        let mut m = BlobMask::new(20, 40, vec![false; 800]).unwrap();
        m.set(5, 10, true);
        m.set(5, 30, true);
        let partition = find_partition(&r, &m, PartitionMode::Fixed).unwrap();
        let err = sample_patches(partition.part(0).unwrap(), &SamplingConfig::default());
        assert!(matches!(err, Err(McmError::Sampling { .. })));
    }

    fn textured(w: usize, h: usize, seed: u64) -> (ImageRaster, BlobMask) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let px = (0..w * h).map(|_| rng.random::<[u8; 3]>()).collect();
        let mut m = BlobMask::full(w, h).unwrap();
        for y in 0..h {
            m.set(0, y, false);
        }
        (ImageRaster::new(w, h, px).unwrap(), m)
    }

    #[test]
    fn set_sizes_with_and_without_simulation() {
        let (r, m) = textured(48, 128, 3);
        let p = find_partition(&r, &m, PartitionMode::Fixed).unwrap();
        let config = SamplingConfig::default();
        let plain = build_descriptor(&r, &m, &p, &config, None, "a", Provenance::Probe).unwrap();
        assert!(plain.parts.iter().all(|s| s.len() == 80));
        let sim = Simulation::default();
        let tpl =
            build_descriptor(&r, &m, &p, &config, Some(&sim), "a", Provenance::Template).unwrap();
        assert!(tpl.parts.iter().all(|s| s.len() == 400));
        // mean channel ~127 keeps the default vector unadjusted: the third
        // block is the k = 1.0 variant
        for (t, p) in tpl.parts.iter().zip(&plain.parts) {
            assert_eq!(&t.patches[160..240], &p.patches[..]);
        }
    }

    #[test]
    fn unit_coefficient_matches_plain_descriptor() {
        let (r, m) = textured(30, 64, 9);
        let p = find_partition(&r, &m, PartitionMode::Search).unwrap();
        let config = SamplingConfig {
            seed: 42,
            ..SamplingConfig::default()
        };
        let plain = build_descriptor(&r, &m, &p, &config, None, "x", Provenance::Probe).unwrap();
        let sim = Simulation {
            coefficients: CoefficientVector::new(vec![1.0]).unwrap(),
            threshold: 240.0,
        };
        let tpl =
            build_descriptor(&r, &m, &p, &config, Some(&sim), "x", Provenance::Template).unwrap();
        assert_eq!(tpl.parts, plain.parts);
    }

    #[test]
    fn merge_cardinality_and_errors() {
        let (r, m) = textured(30, 64, 1);
        let a = extract_descriptor(
            &r,
            &m,
            PartitionMode::Fixed,
            &SamplingConfig::default(),
            None,
            "p1",
            Provenance::Template,
        )
        .unwrap();
        assert_eq!(merge_descriptors(std::slice::from_ref(&a)).unwrap(), a);
        let merged = merge_descriptors(&[a.clone(), a.clone()]).unwrap();
        assert!(merged.parts.iter().all(|s| s.len() == 160));
        let mut other = a.clone();
        other.person_id = "p2".into();
        assert!(matches!(
            merge_descriptors(&[a.clone(), other]),
            Err(McmError::PersonMismatch { .. })
        ));
        let mut short = a.clone();
        short.parts.pop();
        assert!(matches!(
            merge_descriptors(&[a, short]),
            Err(McmError::PartCountMismatch { .. })
        ));
    }

    #[test]
    fn histogram_validation() {
        let mut bins = [0.0; HISTOGRAM_BINS];
        bins[0] = 0.5;
        assert!(HsvHistogram::new(bins).is_err());
        bins[1] = 0.5;
        assert!(HsvHistogram::new(bins).is_ok());
        bins[2] = -0.1;
        bins[1] = 0.6;
        assert!(HsvHistogram::new(bins).is_err());
    }

    #[test]
    fn derived_seeds_differ_by_label() {
        assert_ne!(derive_seed(7, "a/cam_a"), derive_seed(7, "a/cam_b"));
        assert_ne!(derive_seed(7, "a"), derive_seed(8, "a"));
        assert_eq!(derive_seed(7, "a"), derive_seed(7, "a"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn descriptors_satisfy_invariants(seed: u64, w in 12usize..40, h in 16usize..80) {
            let (r, m) = textured(w, h, seed);
            let d = extract_descriptor(
                &r, &m, PartitionMode::Search,
                &SamplingConfig { patches: 10, seed, ..SamplingConfig::default() },
                Some(&Simulation::default()), "p", Provenance::Template,
            ).unwrap();
            prop_assert_eq!(d.parts.len(), PART_COUNT);
            for part in &d.parts {
                prop_assert_eq!(part.len(), 50);
                for patch in &part.patches {
                    prop_assert!((patch.hsv.bins().iter().sum::<f64>() - 1.0).abs() <= 1e-9);
                    prop_assert!((0.0..=1.0).contains(&patch.y_pos));
                }
            }
        }
    }
}
