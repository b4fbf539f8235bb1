//! Horizontal body partition into torso and legs.
//!
//! Two axes split the blob: head/torso and torso/legs. The head band is
//! dropped. In [`PartitionMode::Search`] each axis is placed where the
//! foreground appearance directly above and below it differs the most.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::descriptor::HsvHistogram;
use crate::error::{McmError, Result};
use crate::imaging::{BlobMask, ImageRaster};

/// Number of body parts kept (torso, legs).
pub const PART_COUNT: usize = 2;

/// Smallest image height accepted by [`find_partition`].
pub const MIN_HEIGHT: usize = 8;

const FIXED_HEAD_TORSO: f64 = 0.15;
const FIXED_TORSO_LEGS: f64 = 0.55;
const HEAD_TORSO_WINDOW: (f64, f64) = (0.08, 0.25);
const TORSO_LEGS_WINDOW: (f64, f64) = (0.40, 0.65);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartitionMode {
    Fixed,
    #[default]
    Search,
}

impl fmt::Display for PartitionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PartitionMode::Fixed => "fixed",
            PartitionMode::Search => "search",
        })
    }
}

impl FromStr for PartitionMode {
    type Err = McmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(PartitionMode::Fixed),
            "search" => Ok(PartitionMode::Search),
            other => Err(McmError::InvalidArgument(format!(
                "unknown partition mode {other:?} (expected fixed or search)"
            ))),
        }
    }
}

/// One body part: the row band `[y_top, y_bottom)` and the blob mask
/// restricted to it (band-local coordinates).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartRegion {
    pub index: usize,
    pub y_top: usize,
    pub y_bottom: usize,
    mask: BlobMask,
}

impl PartRegion {
    fn new(index: usize, y_top: usize, y_bottom: usize, mask: &BlobMask) -> Result<Self> {
        let width = mask.width();
        let flags = mask.flags()[y_top * width..y_bottom * width].to_vec();
        let local = BlobMask::new(width, y_bottom - y_top, flags)?;
        if local.foreground_count() == 0 {
            return Err(McmError::EmptyMask {
                region: Some(format!("{} band", part_name(index))),
            });
        }
        Ok(Self {
            index,
            y_top,
            y_bottom,
            mask: local,
        })
    }

    pub fn height(&self) -> usize {
        self.y_bottom - self.y_top
    }

    pub fn width(&self) -> usize {
        self.mask.width()
    }

    pub fn area(&self) -> usize {
        self.width() * self.height()
    }

    /// Band-local mask.
    pub fn mask(&self) -> &BlobMask {
        &self.mask
    }

    /// Foreground pixels of the part in image coordinates.
    pub fn foreground_pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width();
        self.mask
            .flags()
            .iter()
            .enumerate()
            .filter(|(_, &f)| f)
            .map(move |(i, _)| (i % w, self.y_top + i / w))
    }
}

fn part_name(index: usize) -> &'static str {
    match index {
        0 => "torso",
        1 => "legs",
        _ => "part",
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BodyPartition {
    pub head_torso_y: usize,
    pub torso_legs_y: usize,
    pub height: usize,
    parts: Vec<PartRegion>,
}

impl BodyPartition {
    /// Builds the partition from explicit axes.
    pub fn from_axes(mask: &BlobMask, head_torso_y: usize, torso_legs_y: usize) -> Result<Self> {
        let height = mask.height();
        if !(0 < head_torso_y && head_torso_y < torso_legs_y && torso_legs_y < height) {
            return Err(McmError::InvalidArgument(format!(
                "axes must satisfy 0 < {head_torso_y} < {torso_legs_y} < {height}"
            )));
        }
        let parts = vec![
            PartRegion::new(0, head_torso_y, torso_legs_y, mask)?,
            PartRegion::new(1, torso_legs_y, height, mask)?,
        ];
        Ok(Self {
            head_torso_y,
            torso_legs_y,
            height,
            parts,
        })
    }

    pub fn parts(&self) -> &[PartRegion] {
        &self.parts
    }

    /// Band and mask restriction of part `index` (0 = torso, 1 = legs).
    pub fn part(&self, index: usize) -> Result<&PartRegion> {
        self.parts.get(index).ok_or(McmError::PartIndex {
            index,
            parts: self.parts.len(),
        })
    }
}

/// Locates the head/torso and torso/legs axes.
pub fn find_partition(
    raster: &ImageRaster,
    mask: &BlobMask,
    mode: PartitionMode,
) -> Result<BodyPartition> {
    mask.check_aligned(raster)?;
    let height = raster.height();
    if height < MIN_HEIGHT {
        return Err(McmError::InvalidArgument(format!(
            "image height {height} is below the minimum of {MIN_HEIGHT} rows"
        )));
    }
    if mask.foreground_count() == 0 {
        return Err(McmError::EmptyMask { region: None });
    }
    let (head_torso_y, torso_legs_y) = match mode {
        PartitionMode::Fixed => (
            (FIXED_HEAD_TORSO * height as f64).round() as usize,
            (FIXED_TORSO_LEGS * height as f64).round() as usize,
        ),
        PartitionMode::Search => {
            let ht = search_axis(raster, mask, HEAD_TORSO_WINDOW, "head/torso")?;
            let tl = search_axis(raster, mask, TORSO_LEGS_WINDOW, "torso/legs")?;
            (ht, tl)
        }
    };
    BodyPartition::from_axes(mask, head_torso_y, torso_legs_y)
}

/// Inclusive candidate rows for a window given as fractions of the height.
pub fn search_window(height: usize, (lo, hi): (f64, f64)) -> (usize, usize) {
    let first = ((lo * height as f64).ceil() as usize).max(1);
    let last = ((hi * height as f64).floor() as usize).clamp(first, height - 1);
    (first, last)
}

/// Rows compared on each side of a candidate axis.
pub fn comparison_span(height: usize) -> usize {
    ((height as f64 / 8.0).round() as usize).max(2)
}

/// Appearance dissimilarity across the axis at row `y`, or `None` when one
/// side has no foreground.
pub fn axis_objective(raster: &ImageRaster, mask: &BlobMask, y: usize) -> Option<f64> {
    let span = comparison_span(raster.height());
    let above = HsvHistogram::from_rows(raster, mask, y.saturating_sub(span), y)?;
    let below = HsvHistogram::from_rows(raster, mask, y, (y + span).min(raster.height()))?;
    Some(above.bhattacharyya(&below))
}

fn search_axis(
    raster: &ImageRaster,
    mask: &BlobMask,
    window: (f64, f64),
    label: &str,
) -> Result<usize> {
    let (first, last) = search_window(raster.height(), window);
    let mut best: Option<(usize, f64)> = None;
    for y in first..=last {
        if let Some(score) = axis_objective(raster, mask, y) {
            // strict comparison keeps the smallest row on ties
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((y, score));
            }
        }
    }
    best.map(|(y, _)| y).ok_or_else(|| McmError::EmptyMask {
        region: Some(format!("{label} search window")),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_tone(height: usize, boundary: usize) -> (ImageRaster, BlobMask) {
        let w = 12;
        let mut r = ImageRaster::filled(w, height, [255, 0, 0]).unwrap();
        for y in boundary..height {
            for x in 0..w {
                r.set(x, y, [0, 0, 255]);
            }
        }
        (r, BlobMask::full(w, height).unwrap())
    }

    #[test]
    fn fixed_axes_for_128_rows() {
        let (r, m) = two_tone(128, 64);
        let p = find_partition(&r, &m, PartitionMode::Fixed).unwrap();
        assert_eq!((p.head_torso_y, p.torso_legs_y), (19, 70));
        assert_eq!(p.part(0).unwrap().y_top, 19);
        assert_eq!(p.part(0).unwrap().y_bottom, 70);
        assert_eq!(p.part(1).unwrap().y_bottom, 128);
        assert!(matches!(
            p.part(2),
            Err(McmError::PartIndex { index: 2, .. })
        ));
    }

    #[test]
    fn uniform_blob_picks_smallest_rows() {
        let r = ImageRaster::filled(10, 100, [30, 90, 60]).unwrap();
        let m = BlobMask::full(10, 100).unwrap();
        let p = find_partition(&r, &m, PartitionMode::Search).unwrap();
        assert_eq!(p.head_torso_y, search_window(100, HEAD_TORSO_WINDOW).0);
        assert_eq!(p.torso_legs_y, search_window(100, TORSO_LEGS_WINDOW).0);
    }

    #[test]
    fn search_finds_colour_boundary() {
        let (r, m) = two_tone(128, 64);
        let p = find_partition(&r, &m, PartitionMode::Search).unwrap();
        assert_eq!(p.torso_legs_y, 64);
    }

    #[test]
    fn short_images_rejected() {
        let r = ImageRaster::filled(4, 7, [1, 1, 1]).unwrap();
        let m = BlobMask::full(4, 7).unwrap();
        assert!(find_partition(&r, &m, PartitionMode::Fixed).is_err());
    }

    #[test]
    fn empty_leg_band_is_an_error() {
        let (r, mut m) = two_tone(40, 20);
        for y in 20..40 {
            for x in 0..12 {
                m.set(x, y, false);
            }
        }
        let err = find_partition(&r, &m, PartitionMode::Fixed).unwrap_err();
        assert!(matches!(err, McmError::EmptyMask { .. }), "{err}");
    }

    #[test]
    fn bands_cover_rows_below_head() {
        let (r, m) = two_tone(57, 30);
        for mode in [PartitionMode::Fixed, PartitionMode::Search] {
            let p = find_partition(&r, &m, mode).unwrap();
            let torso = p.part(0).unwrap();
            let legs = p.part(1).unwrap();
            assert_eq!(torso.y_top, p.head_torso_y);
            assert_eq!(torso.y_bottom, legs.y_top);
            assert_eq!(legs.y_bottom, 57);
            assert!(torso
                .foreground_pixels()
                .all(|(_, y)| (torso.y_top..torso.y_bottom).contains(&y)));
        }
    }

    #[test]
    fn mode_parsing() {
        assert_eq!(
            "fixed".parse::<PartitionMode>().unwrap(),
            PartitionMode::Fixed
        );
        assert_eq!(
            "search".parse::<PartitionMode>().unwrap(),
            PartitionMode::Search
        );
        assert!("vertical".parse::<PartitionMode>().is_err());
    }
}
