//! Set and sequence distances, and gallery ranking.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::descriptor::{PartSet, PatchDescriptor, PersonDescriptor};
use crate::error::{McmError, Result};
use crate::partition::PART_COUNT;

const WEIGHT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchConfig {
    /// Weight of the vertical position difference.
    pub beta: f64,
    /// Rank used by the k-th Hausdorff distance (1 = classical).
    pub k: usize,
    /// Per-part weights of the sequence distance; must sum to 1.
    pub part_weights: Vec<f64>,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self {
            beta: 0.6,
            k: 10,
            part_weights: vec![1.0 / PART_COUNT as f64; PART_COUNT],
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(McmError::InvalidArgument(format!(
                "beta must be non-negative, got {}",
                self.beta
            )));
        }
        if self.k == 0 {
            return Err(McmError::InvalidArgument("k must be at least 1".into()));
        }
        if self.part_weights.is_empty()
            || self
                .part_weights
                .iter()
                .any(|w| !(w.is_finite() && *w >= 0.0))
        {
            return Err(McmError::InvalidArgument(
                "part weights must be non-negative".into(),
            ));
        }
        let total: f64 = self.part_weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(McmError::InvalidArgument(format!(
                "part weights must sum to 1, sum to {total}"
            )));
        }
        Ok(())
    }
}

/// `b(hsv_a, hsv_b) * (1 + beta * |y_a - y_b|)`.
#[inline]
pub fn patch_distance(a: &PatchDescriptor, b: &PatchDescriptor, beta: f64) -> f64 {
    a.hsv.bhattacharyya(&b.hsv) * (1.0 + beta * (a.y_pos - b.y_pos).abs())
}

/// k-th largest value of `values` with `k` clamped to `1..=len`.
fn kth_largest(values: &mut [f64], k: usize) -> f64 {
    let k = k.clamp(1, values.len());
    let idx = values.len() - k;
    *values.select_nth_unstable_by(idx, f64::total_cmp).1
}

/// Symmetric k-th Hausdorff distance under an arbitrary element metric.
///
/// Both directed distances come from one pass over the `|x| * |y|` pairs:
/// per-row and per-column minima are tracked together.
pub fn kth_hausdorff_by<T, F>(x: &[T], y: &[T], k: usize, dist: F) -> Result<f64>
where
    F: Fn(&T, &T) -> f64,
{
    if x.is_empty() || y.is_empty() {
        return Err(McmError::EmptySet);
    }
    let mut row_min = vec![f64::INFINITY; x.len()];
    let mut col_min = vec![f64::INFINITY; y.len()];
    for (xi, rm) in x.iter().zip(row_min.iter_mut()) {
        for (yj, cm) in y.iter().zip(col_min.iter_mut()) {
            let d = dist(xi, yj);
            if d < *rm {
                *rm = d;
            }
            if d < *cm {
                *cm = d;
            }
        }
    }
    Ok(kth_largest(&mut row_min, k).max(kth_largest(&mut col_min, k)))
}

pub fn kth_hausdorff(x: &PartSet, y: &PartSet, beta: f64, k: usize) -> Result<f64> {
    kth_hausdorff_by(&x.patches, &y.patches, k, |a, b| patch_distance(a, b, beta))
}

/// Weighted combination of per-part k-th Hausdorff distances.
pub fn sequence_distance(
    template: &PersonDescriptor,
    probe: &PersonDescriptor,
    config: &MatchConfig,
) -> Result<f64> {
    let beta = config.beta;
    sequence_distance_with(template, probe, config, |a, b| patch_distance(a, b, beta))
}

/// [`sequence_distance`] with a caller-supplied patch metric.
pub fn sequence_distance_with<F>(
    template: &PersonDescriptor,
    probe: &PersonDescriptor,
    config: &MatchConfig,
    metric: F,
) -> Result<f64>
where
    F: Fn(&PatchDescriptor, &PatchDescriptor) -> f64,
{
    if template.parts.len() != probe.parts.len() {
        return Err(McmError::PartCountMismatch {
            left: template.parts.len(),
            right: probe.parts.len(),
        });
    }
    if config.part_weights.len() != template.parts.len() {
        return Err(McmError::InvalidArgument(format!(
            "{} part weights for {} parts",
            config.part_weights.len(),
            template.parts.len()
        )));
    }
    let mut total = 0.0;
    for ((t, q), w) in template
        .parts
        .iter()
        .zip(&probe.parts)
        .zip(&config.part_weights)
    {
        total += w * kth_hausdorff_by(&t.patches, &q.patches, config.k, &metric)?;
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedMatch {
    pub person_id: String,
    pub distance: f64,
}

/// Gallery templates ordered by ascending distance to one probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedMatchList {
    pub probe_id: String,
    pub matches: Vec<RankedMatch>,
}

impl RankedMatchList {
    /// Sorts ascending by distance; ties go to the smaller person id.
    pub fn from_distances(probe_id: impl Into<String>, mut matches: Vec<RankedMatch>) -> Self {
        matches.sort_by(|a, b| match a.distance.total_cmp(&b.distance) {
            Ordering::Equal => a.person_id.cmp(&b.person_id),
            other => other,
        });
        Self {
            probe_id: probe_id.into(),
            matches,
        }
    }

    /// 1-based rank of `person_id`.
    pub fn rank_of(&self, person_id: &str) -> Option<usize> {
        self.matches
            .iter()
            .position(|m| m.person_id == person_id)
            .map(|i| i + 1)
    }

    pub fn best(&self) -> Option<&RankedMatch> {
        self.matches.first()
    }
}

/// Ranks every gallery template against the probe.
pub fn rank_gallery(
    probe: &PersonDescriptor,
    gallery: &[PersonDescriptor],
    config: &MatchConfig,
) -> Result<RankedMatchList> {
    let beta = config.beta;
    rank_gallery_with(probe, gallery, config, move |a, b| {
        patch_distance(a, b, beta)
    })
}

/// [`rank_gallery`] with a caller-supplied patch metric.
pub fn rank_gallery_with<F>(
    probe: &PersonDescriptor,
    gallery: &[PersonDescriptor],
    config: &MatchConfig,
    metric: F,
) -> Result<RankedMatchList>
where
    F: Fn(&PatchDescriptor, &PatchDescriptor) -> f64 + Sync,
{
    if gallery.is_empty() {
        return Err(McmError::EmptyGallery);
    }
    config.validate()?;
    let matches = gallery
        .par_iter()
        .map(|t| {
            Ok(RankedMatch {
                person_id: t.person_id.clone(),
                distance: sequence_distance_with(t, probe, config, &metric)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RankedMatchList::from_distances(&probe.person_id, matches))
}
