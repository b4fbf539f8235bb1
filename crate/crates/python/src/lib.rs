//! Python bindings for the `mcm` re-identification library.

use std::path::PathBuf;

use mcm::descriptor::{self, Provenance};
use mcm::evaluation::{self, BenchmarkOptions};
use mcm::store::{self, DescriptorDocument};
use mcm::{CoefficientVector, MatchConfig, PartitionMode, SamplingConfig, Simulation, TrialSpec};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(mcm_reid, McmError, PyException);

fn to_py(e: mcm::McmError) -> PyErr {
    match e {
        mcm::McmError::Io { .. } => PyIOError::new_err(e.to_string()),
        e if e.is_usage() => PyValueError::new_err(e.to_string()),
        e => McmError::new_err(e.to_string()),
    }
}

fn match_config(beta: f64, k: usize, weights: Option<Vec<f64>>) -> PyResult<MatchConfig> {
    let mut c = MatchConfig {
        beta,
        k,
        ..MatchConfig::default()
    };
    if let Some(w) = weights {
        c.part_weights = w;
    }
    c.validate().map_err(to_py)?;
    Ok(c)
}

fn simulation(coefficients: Option<Vec<f64>>, threshold: f64) -> PyResult<Simulation> {
    Ok(Simulation {
        coefficients: match coefficients {
            Some(k) => CoefficientVector::new(k).map_err(to_py)?,
            None => CoefficientVector::default(),
        },
        threshold,
    })
}

/// Part-based descriptor of one person image.
#[pyclass(name = "PersonDescriptor", module = "mcm_reid", frozen, from_py_object)]
#[derive(Clone)]
struct PyPersonDescriptor {
    inner: mcm::PersonDescriptor,
}

#[pymethods]
impl PyPersonDescriptor {
    /// Reads a JSON or binary descriptor file.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let doc = store::read_descriptor(&path).map_err(to_py)?;
        Ok(Self {
            inner: doc.into_descriptor(),
        })
    }

    /// Writes the descriptor; a `.bin` extension selects the binary container.
    #[pyo3(signature = (path, config_json = None))]
    fn save(&self, path: PathBuf, config_json: Option<&str>) -> PyResult<()> {
        let config = match config_json {
            Some(s) => serde_json::from_str(s).map_err(|e| PyValueError::new_err(e.to_string()))?,
            None => serde_json::Value::Null,
        };
        store::write_descriptor(&path, &DescriptorDocument::new(self.inner.clone(), config))
            .map_err(to_py)
    }

    #[getter]
    fn person_id(&self) -> &str {
        &self.inner.person_id
    }

    #[getter]
    fn provenance(&self) -> &'static str {
        match self.inner.provenance {
            Provenance::Template => "template",
            Provenance::Probe => "probe",
        }
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    /// Number of patch descriptors in each part set.
    #[getter]
    fn part_sizes(&self) -> Vec<usize> {
        self.inner.parts.iter().map(|p| p.len()).collect()
    }

    /// `(histogram, y_pos)` pairs of one part.
    fn patches(&self, part: usize) -> PyResult<Vec<(Vec<f64>, f64)>> {
        let set = self.inner.parts.get(part).ok_or_else(|| {
            PyValueError::new_err(format!(
                "part {part} out of range ({} parts)",
                self.inner.parts.len()
            ))
        })?;
        Ok(set
            .patches
            .iter()
            .map(|p| (p.hsv.bins().to_vec(), p.y_pos))
            .collect())
    }

    fn __repr__(&self) -> String {
        format!(
            "PersonDescriptor(person_id={:?}, provenance={:?}, part_sizes={:?})",
            self.inner.person_id,
            self.provenance(),
            self.part_sizes()
        )
    }
}

/// Builds a descriptor from an image file and its mask. Templates carry
/// illumination-simulated variants unless `simulate` is false.
#[pyfunction]
#[pyo3(signature = (
    image, mask, person_id, template = false, seed = 0, patches = 80,
    partition = "search", simulate = true, coefficients = None, threshold = 240.0
))]
#[allow(clippy::too_many_arguments)]
fn extract_descriptor(
    py: Python<'_>,
    image: PathBuf,
    mask: PathBuf,
    person_id: &str,
    template: bool,
    seed: u64,
    patches: usize,
    partition: &str,
    simulate: bool,
    coefficients: Option<Vec<f64>>,
    threshold: f64,
) -> PyResult<PyPersonDescriptor> {
    let mode: PartitionMode = partition.parse().map_err(to_py)?;
    let sampling = SamplingConfig {
        patches,
        seed,
        ..SamplingConfig::default()
    };
    sampling.validate().map_err(to_py)?;
    let sim = simulation(coefficients, threshold)?;
    let sim = (template && simulate).then_some(&sim);
    let provenance = if template {
        Provenance::Template
    } else {
        Provenance::Probe
    };
    let inner = py
        .detach(|| {
            let raster = mcm::load_image(&image)?;
            let blob = mcm::load_mask(&mask)?;
            descriptor::extract_descriptor(
                &raster, &blob, mode, &sampling, sim, person_id, provenance,
            )
        })
        .map_err(to_py)?;
    Ok(PyPersonDescriptor { inner })
}

/// Weighted sum of per-part k-th Hausdorff distances.
#[pyfunction]
#[pyo3(signature = (template, probe, beta = 0.6, k = 10, weights = None))]
fn sequence_distance(
    template: &PyPersonDescriptor,
    probe: &PyPersonDescriptor,
    beta: f64,
    k: usize,
    weights: Option<Vec<f64>>,
) -> PyResult<f64> {
    let config = match_config(beta, k, weights)?;
    mcm::sequence_distance(&template.inner, &probe.inner, &config).map_err(to_py)
}

/// k-th Hausdorff distance between one part of two descriptors.
#[pyfunction]
#[pyo3(signature = (a, b, part, beta = 0.6, k = 10))]
fn part_distance(
    a: &PyPersonDescriptor,
    b: &PyPersonDescriptor,
    part: usize,
    beta: f64,
    k: usize,
) -> PyResult<f64> {
    let (x, y) = match (a.inner.parts.get(part), b.inner.parts.get(part)) {
        (Some(x), Some(y)) => (x, y),
        _ => return Err(PyValueError::new_err(format!("part {part} out of range"))),
    };
    mcm::kth_hausdorff(x, y, beta, k).map_err(to_py)
}

/// Gallery ranked by ascending distance to the probe, as `(person_id, distance)`.
#[pyfunction]
#[pyo3(signature = (probe, gallery, beta = 0.6, k = 10, weights = None))]
fn rank_gallery(
    py: Python<'_>,
    probe: &PyPersonDescriptor,
    gallery: Vec<PyPersonDescriptor>,
    beta: f64,
    k: usize,
    weights: Option<Vec<f64>>,
) -> PyResult<Vec<(String, f64)>> {
    let config = match_config(beta, k, weights)?;
    let gallery: Vec<mcm::PersonDescriptor> = gallery.into_iter().map(|g| g.inner).collect();
    let ranked = py
        .detach(|| mcm::rank_gallery(&probe.inner, &gallery, &config))
        .map_err(to_py)?;
    Ok(ranked
        .matches
        .into_iter()
        .map(|m| (m.person_id, m.distance))
        .collect())
}

/// Bhattacharyya distance between two normalized 40-bin histograms.
#[pyfunction]
fn bhattacharyya(p: Vec<f64>, q: Vec<f64>) -> PyResult<f64> {
    let hist = |v: Vec<f64>| -> PyResult<mcm::HsvHistogram> {
        let bins: [f64; descriptor::HISTOGRAM_BINS] = v.try_into().map_err(|v: Vec<f64>| {
            PyValueError::new_err(format!(
                "expected {} bins, got {}",
                descriptor::HISTOGRAM_BINS,
                v.len()
            ))
        })?;
        mcm::HsvHistogram::new(bins).map_err(|e| PyValueError::new_err(e.to_string()))
    };
    Ok(hist(p)?.bhattacharyya(&hist(q)?))
}

/// `(h, s, v)` with h in degrees and s, v in [0, 1].
#[pyfunction]
fn rgb_to_hsv(r: u8, g: u8, b: u8) -> (f64, f64, f64) {
    let p = mcm::rgb_to_hsv([r, g, b]);
    (p.h, p.s, p.v)
}

/// Writes a synthetic gallery/probe dataset; returns the manifest path.
#[pyfunction]
#[pyo3(signature = (directory, persons, seed = 0, probe_coefficient = 0.7))]
fn generate_synthetic_dataset(
    py: Python<'_>,
    directory: PathBuf,
    persons: usize,
    seed: u64,
    probe_coefficient: f64,
) -> PyResult<PathBuf> {
    py.detach(|| {
        evaluation::generate_synthetic_dataset(&directory, persons, seed, probe_coefficient)
    })
    .map_err(to_py)?;
    Ok(directory.join("manifest.jsonl"))
}

/// Runs the gallery/probe protocol on a JSON-lines manifest. Returns a dict
/// with the averaged `cmc` list and per-frame `timing` in milliseconds.
#[pyfunction]
#[pyo3(signature = (
    manifest, subset = None, trials = 10, seed = 0, simulate = true, patches = 80,
    beta = 0.6, k = 10, partition = "search"
))]
#[allow(clippy::too_many_arguments)]
fn evaluate<'py>(
    py: Python<'py>,
    manifest: PathBuf,
    subset: Option<usize>,
    trials: usize,
    seed: u64,
    simulate: bool,
    patches: usize,
    beta: f64,
    k: usize,
    partition: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let options = BenchmarkOptions {
        sampling: SamplingConfig {
            patches,
            seed,
            ..SamplingConfig::default()
        },
        matching: match_config(beta, k, None)?,
        simulation: simulate.then(Simulation::default),
        partition: partition.parse().map_err(to_py)?,
    };
    let report = py
        .detach(|| {
            let m = mcm::DatasetManifest::load(&manifest)?;
            let spec = TrialSpec {
                subset_size: subset.unwrap_or(m.person_count().min(316)),
                num_trials: trials,
                seed,
            };
            mcm::run_benchmark(&m, &spec, &options)
        })
        .map_err(to_py)?;
    let timing = PyDict::new(py);
    timing.set_item("template_ms", report.timing.template_ms)?;
    timing.set_item("probe_ms", report.timing.probe_ms)?;
    timing.set_item("match_ms", report.timing.match_ms)?;
    timing.set_item("cpu", report.timing.cpu)?;
    let out = PyDict::new(py);
    out.set_item("cmc", report.cmc.values)?;
    out.set_item("trials", report.cmc.trials)?;
    out.set_item("timing", timing)?;
    Ok(out)
}

#[pymodule]
fn mcm_reid(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("McmError", m.py().get_type::<McmError>())?;
    m.add_class::<PyPersonDescriptor>()?;
    m.add_function(wrap_pyfunction!(extract_descriptor, m)?)?;
    m.add_function(wrap_pyfunction!(sequence_distance, m)?)?;
    m.add_function(wrap_pyfunction!(part_distance, m)?)?;
    m.add_function(wrap_pyfunction!(rank_gallery, m)?)?;
    m.add_function(wrap_pyfunction!(bhattacharyya, m)?)?;
    m.add_function(wrap_pyfunction!(rgb_to_hsv, m)?)?;
    m.add_function(wrap_pyfunction!(generate_synthetic_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    Ok(())
}
