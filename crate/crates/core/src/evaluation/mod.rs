//! Single-shot gallery/probe evaluation with CMC curves.

mod report;
mod synthetic;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use report::{cmc_csv, cmc_svg, CurveSeries};
pub use synthetic::{
    generate_synthetic_dataset, synthetic_person, SYNTHETIC_HEIGHT, SYNTHETIC_WIDTH,
};

use crate::descriptor::{
    derive_seed, extract_descriptor, PersonDescriptor, Provenance, SamplingConfig, Simulation,
};
use crate::error::{McmError, Result};
use crate::imaging::{load_image, load_mask};
use crate::matching::{sequence_distance, MatchConfig, RankedMatch, RankedMatchList};
use crate::partition::PartitionMode;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub person_id: String,
    pub camera_id: String,
    pub image: PathBuf,
    pub mask: PathBuf,
}

impl ManifestEntry {
    /// Identifier used to derive the per-image sampling seed.
    pub fn image_key(&self) -> String {
        format!("{}/{}", self.person_id, self.camera_id)
    }
}

/// Dataset listing: one entry per image.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    /// Reads a JSON-lines manifest. Relative paths are resolved against the
    /// manifest's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| McmError::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut entry: ManifestEntry = serde_json::from_str(line).map_err(|e| {
                McmError::Manifest(format!("{}:{}: {e}", path.display(), lineno + 1))
            })?;
            entry.image = base.join(&entry.image);
            entry.mask = base.join(&entry.mask);
            entries.push(entry);
        }
        Ok(Self { entries })
    }

    /// Writes one JSON object per line; paths are written as stored.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e)?);
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|e| McmError::io(path, e))
    }

    pub fn person_count(&self) -> usize {
        self.entries
            .iter()
            .map(|e| e.person_id.as_str())
            .collect::<BTreeSet<_>>()
            .len()
    }

    /// (gallery, probe) entry per person, sorted by person id. The gallery
    /// camera is the lexicographically first camera id, the probe camera
    /// the second; the first listed image per camera is used.
    pub fn single_shot_pairs(&self) -> Result<Vec<(ManifestEntry, ManifestEntry)>> {
        let cameras: BTreeSet<&str> = self.entries.iter().map(|e| e.camera_id.as_str()).collect();
        let mut cams = cameras.into_iter();
        let (Some(gallery_cam), Some(probe_cam)) = (cams.next(), cams.next()) else {
            return Err(McmError::Manifest(
                "single-shot evaluation needs images from two cameras".into(),
            ));
        };
        let mut by_person: BTreeMap<&str, (Option<&ManifestEntry>, Option<&ManifestEntry>)> =
            BTreeMap::new();
        for e in &self.entries {
            let slot = by_person.entry(e.person_id.as_str()).or_default();
            if e.camera_id == gallery_cam && slot.0.is_none() {
                slot.0 = Some(e);
            } else if e.camera_id == probe_cam && slot.1.is_none() {
                slot.1 = Some(e);
            }
        }
        by_person
            .into_iter()
            .map(|(id, slot)| match slot {
                (Some(g), Some(p)) => Ok((g.clone(), p.clone())),
                _ => Err(McmError::Manifest(format!(
                    "person {id:?} lacks an image from camera {gallery_cam:?} or {probe_cam:?}"
                ))),
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialSpec {
    pub subset_size: usize,
    pub num_trials: usize,
    pub seed: u64,
}

impl Default for TrialSpec {
    fn default() -> Self {
        Self {
            subset_size: 316,
            num_trials: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trial {
    pub gallery: Vec<ManifestEntry>,
    pub probe: Vec<ManifestEntry>,
}

fn trial_indices(persons: usize, spec: &TrialSpec) -> Result<Vec<Vec<usize>>> {
    if spec.subset_size == 0 || spec.subset_size > persons {
        return Err(McmError::InvalidArgument(format!(
            "subset size {} must lie in 1..={persons} (persons in the dataset)",
            spec.subset_size
        )));
    }
    if spec.num_trials == 0 {
        return Err(McmError::InvalidArgument(
            "at least one trial is required".into(),
        ));
    }
    Ok((0..spec.num_trials)
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, &format!("trial/{t}")));
            let mut idx = rand::seq::index::sample(&mut rng, persons, spec.subset_size).into_vec();
            idx.sort_unstable();
            idx
        })
        .collect())
}

/// Draws `num_trials` random person subsets; gallery images come from the
/// first camera and probe images from the second.
pub fn make_trials(manifest: &DatasetManifest, spec: &TrialSpec) -> Result<Vec<Trial>> {
    let pairs = manifest.single_shot_pairs()?;
    Ok(trial_indices(pairs.len(), spec)?
        .into_iter()
        .map(|idx| Trial {
            gallery: idx.iter().map(|&i| pairs[i].0.clone()).collect(),
            probe: idx.iter().map(|&i| pairs[i].1.clone()).collect(),
        })
        .collect())
}

/// Cumulative matching characteristic: `values[n - 1]` is the fraction of
/// probes whose true template ranks within the top `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmcCurve {
    pub values: Vec<f64>,
    pub trials: usize,
}

impl CmcCurve {
    pub fn rank(&self, n: usize) -> f64 {
        self.values[(n.max(1) - 1).min(self.values.len() - 1)]
    }

    /// Pointwise mean over trials.
    pub fn average(curves: &[CmcCurve]) -> Result<CmcCurve> {
        let first = curves
            .first()
            .ok_or_else(|| McmError::InvalidArgument("no curves to average".into()))?;
        if curves.iter().any(|c| c.values.len() != first.values.len()) {
            return Err(McmError::InvalidArgument(
                "curves of different lengths cannot be averaged".into(),
            ));
        }
        let trials: usize = curves.iter().map(|c| c.trials).sum();
        let values = (0..first.values.len())
            .map(|i| {
                let weighted: f64 = curves.iter().map(|c| c.values[i] * c.trials as f64).sum();
                weighted / trials as f64
            })
            .collect();
        Ok(CmcCurve { values, trials })
    }
}

/// CMC of one trial. `ground_truth[i]` is the true template of `lists[i]`.
pub fn compute_cmc(lists: &[RankedMatchList], ground_truth: &[String]) -> Result<CmcCurve> {
    if lists.is_empty() || lists.len() != ground_truth.len() {
        return Err(McmError::InvalidArgument(format!(
            "{} ranked lists for {} ground-truth ids",
            lists.len(),
            ground_truth.len()
        )));
    }
    let len = lists.iter().map(|l| l.matches.len()).max().unwrap_or(0);
    let mut hits = vec![0usize; len];
    for (list, truth) in lists.iter().zip(ground_truth) {
        let rank = list
            .rank_of(truth)
            .ok_or_else(|| McmError::MissingGroundTruth {
                probe: list.probe_id.clone(),
            })?;
        hits[rank - 1] += 1;
    }
    let mut acc = 0;
    let values = hits
        .into_iter()
        .map(|h| {
            acc += h;
            acc as f64 / lists.len() as f64
        })
        .collect();
    Ok(CmcCurve { values, trials: 1 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkOptions {
    pub sampling: SamplingConfig,
    pub matching: MatchConfig,
    pub simulation: Option<Simulation>,
    pub partition: PartitionMode,
}

/// Mean wall times in milliseconds: per frame for descriptor creation,
/// per template/probe pair for matching.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub template_ms: f64,
    pub probe_ms: f64,
    pub match_ms: f64,
    pub templates: usize,
    pub probes: usize,
    pub pairs: usize,
    pub cpu: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub cmc: CmcCurve,
    pub timing: TimingReport,
}

/// CPU model string from `/proc/cpuinfo`, when available.
pub fn cpu_model() -> String {
    std::fs::read_to_string("/proc/cpuinfo")
        .ok()
        .and_then(|s| {
            s.lines()
                .find(|l| l.starts_with("model name"))
                .and_then(|l| l.split(':').nth(1))
                .map(|m| m.trim().to_string())
        })
        .unwrap_or_else(|| std::env::consts::ARCH.to_string())
}

fn extract_entry(
    entry: &ManifestEntry,
    options: &BenchmarkOptions,
    provenance: Provenance,
) -> Result<(PersonDescriptor, f64)> {
    let raster = load_image(&entry.image)?;
    let mask = load_mask(&entry.mask)?;
    let config = options
        .sampling
        .with_seed(derive_seed(options.sampling.seed, &entry.image_key()));
    let simulation = match provenance {
        Provenance::Template => options.simulation.as_ref(),
        Provenance::Probe => None,
    };
    let start = Instant::now();
    let d = extract_descriptor(
        &raster,
        &mask,
        options.partition,
        &config,
        simulation,
        &entry.person_id,
        provenance,
    )?;
    Ok((d, start.elapsed().as_secs_f64() * 1e3))
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Runs the full protocol: per trial, templates (optionally with
/// illumination simulation) from the first camera, probes without
/// simulation from the second, ranking and CMC; curves are averaged over
/// trials. Descriptors and distances are computed once per image/pair and
/// shared by every trial that uses them.
pub fn run_benchmark(
    manifest: &DatasetManifest,
    spec: &TrialSpec,
    options: &BenchmarkOptions,
) -> Result<BenchmarkReport> {
    options.sampling.validate()?;
    options.matching.validate()?;
    let pairs = manifest.single_shot_pairs()?;
    let trials = trial_indices(pairs.len(), spec)?;
    let used: BTreeSet<usize> = trials.iter().flatten().copied().collect();
    let used: Vec<usize> = used.into_iter().collect();
    let slot: BTreeMap<usize, usize> = used.iter().enumerate().map(|(s, &p)| (p, s)).collect();

    let templates = used
        .par_iter()
        .map(|&p| extract_entry(&pairs[p].0, options, Provenance::Template))
        .collect::<Result<Vec<_>>>()?;
    let probes = used
        .par_iter()
        .map(|&p| extract_entry(&pairs[p].1, options, Provenance::Probe))
        .collect::<Result<Vec<_>>>()?;

    // distances[probe slot][template slot], restricted to pairs that
    // co-occur in some trial
    let mut needed = vec![BTreeSet::new(); used.len()];
    for trial in &trials {
        for &p in trial {
            needed[slot[&p]].extend(trial.iter().map(|t| slot[t]));
        }
    }
    let rows = needed
        .par_iter()
        .enumerate()
        .map(|(q, templates_needed)| {
            let mut row = vec![f64::NAN; used.len()];
            let mut times = Vec::with_capacity(templates_needed.len());
            for &t in templates_needed {
                let start = Instant::now();
                row[t] = sequence_distance(&templates[t].0, &probes[q].0, &options.matching)?;
                times.push(start.elapsed().as_secs_f64() * 1e3);
            }
            Ok((row, times))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut curves = Vec::with_capacity(trials.len());
    for trial in &trials {
        let mut lists = Vec::with_capacity(trial.len());
        let mut truth = Vec::with_capacity(trial.len());
        for &p in trial {
            let q = slot[&p];
            let matches = trial
                .iter()
                .map(|&t| RankedMatch {
                    person_id: templates[slot[&t]].0.person_id.clone(),
                    distance: rows[q].0[slot[&t]],
                })
                .collect();
            lists.push(RankedMatchList::from_distances(
                probes[q].0.person_id.clone(),
                matches,
            ));
            truth.push(pairs[p].0.person_id.clone());
        }
        curves.push(compute_cmc(&lists, &truth)?);
    }

    let match_times: Vec<f64> = rows.iter().flat_map(|(_, t)| t.iter().copied()).collect();
    let template_times: Vec<f64> = templates.iter().map(|(_, t)| *t).collect();
    let probe_times: Vec<f64> = probes.iter().map(|(_, t)| *t).collect();
    Ok(BenchmarkReport {
        cmc: CmcCurve::average(&curves)?,
        timing: TimingReport {
            template_ms: mean(&template_times),
            probe_ms: mean(&probe_times),
            match_ms: mean(&match_times),
            templates: template_times.len(),
            probes: probe_times.len(),
            pairs: match_times.len(),
            cpu: cpu_model(),
        },
    })
}
