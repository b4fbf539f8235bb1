//! `mcm` command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand};
use serde_json::json;

use crate::config::RunConfig;
use crate::descriptor::{derive_seed, extract_descriptor, Provenance};
use crate::error::{McmError, Result};
use crate::evaluation::{
    cmc_csv, cmc_svg, generate_synthetic_dataset, run_benchmark, BenchmarkOptions, CurveSeries,
    DatasetManifest, TrialSpec,
};
use crate::imaging::{load_image, load_mask, CoefficientVector};
use crate::matching::{rank_gallery, sequence_distance};
use crate::store::{read_descriptor, write_descriptor, DescriptorDocument};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "mcm",
    version,
    about = "Part-based multiple-instance person re-identification"
)]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build descriptor files from images and masks.
    Extract(ExtractArgs),
    /// Match two descriptors, or rank a gallery against a probe.
    Match(MatchArgs),
    /// Run the gallery/probe CMC protocol.
    Evaluate(EvaluateArgs),
    /// Generate a synthetic illumination benchmark dataset.
    Synth(SynthArgs),
}

/// Parameters shared by every command; flags override the config file.
#[derive(Debug, Args, Default)]
struct ConfigArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// RNG seed [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Patches per body part [default: 80]
    #[arg(long)]
    patches: Option<usize>,
    /// Body partition mode [default: search]
    #[arg(long, value_parser = ["fixed", "search"])]
    partition: Option<String>,
    /// Spatial weight of the patch metric [default: 0.6]
    #[arg(long)]
    beta: Option<f64>,
    /// Rank of the k-th Hausdorff distance [default: 10]
    #[arg(long)]
    k: Option<usize>,
    /// Comma-separated part weights [default: 0.5,0.5]
    #[arg(long)]
    weights: Option<String>,
    /// Comma-separated illumination coefficients [default: 1.4,1.2,1.0,0.8,0.6]
    #[arg(long)]
    coeffs: Option<String>,
    /// Saturation threshold for coefficient adjustment [default: 240]
    #[arg(long)]
    sat_threshold: Option<f64>,
}

fn parse_list(flag: &str, s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| McmError::InvalidArgument(format!("--{flag}: {t:?} is not a number")))
        })
        .collect()
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            c.sampling.seed = seed;
        }
        if let Some(p) = self.patches {
            c.sampling.patches = p;
        }
        if let Some(mode) = &self.partition {
            c.partition = mode.parse()?;
        }
        if let Some(beta) = self.beta {
            c.matching.beta = beta;
        }
        if let Some(k) = self.k {
            c.matching.k = k;
        }
        if let Some(w) = &self.weights {
            c.matching.part_weights = parse_list("weights", w)?;
        }
        if let Some(k) = &self.coeffs {
            c.simulation.coefficients = CoefficientVector::new(parse_list("coeffs", k)?)?;
        }
        if let Some(t) = self.sat_threshold {
            c.simulation.threshold = t;
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("role").required(true).args(["template", "probe"])))]
#[command(group(ArgGroup::new("input").required(true).args(["image", "manifest"])))]
struct ExtractArgs {
    /// Gallery template: illumination simulation enabled.
    #[arg(long)]
    template: bool,
    /// Probe: no simulation.
    #[arg(long)]
    probe: bool,
    /// Build templates without simulation.
    #[arg(long, requires = "template")]
    no_simulation: bool,
    #[arg(long, requires_all = ["mask", "output"])]
    image: Option<PathBuf>,
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Person identifier [default: image file stem]
    #[arg(long)]
    id: Option<String>,
    /// Output file; a `.bin` extension selects the binary container.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Extract every entry of a JSON-lines manifest.
    #[arg(long, requires = "out_dir")]
    manifest: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Write binary containers in manifest mode.
    #[arg(long)]
    binary: bool,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Debug, Args)]
struct MatchArgs {
    /// Two descriptors, or one probe with --gallery.
    #[arg(required = true, num_args = 1..=2)]
    descriptors: Vec<PathBuf>,
    /// Gallery descriptors to rank against the probe.
    #[arg(long, num_args = 1..)]
    gallery: Vec<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("dataset").required(true).args(["manifest", "synthetic"])))]
struct EvaluateArgs {
    /// JSON-lines dataset manifest.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Generate and evaluate a synthetic dataset with this many persons.
    #[arg(long)]
    synthetic: Option<usize>,
    /// Brightness coefficient applied to synthetic probes.
    #[arg(long, default_value_t = 0.7)]
    probe_coeff: f64,
    /// Where to write the synthetic dataset [default: <out-dir>/synthetic]
    #[arg(long)]
    synth_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    /// Persons per trial [default: min(316, persons)]
    #[arg(long)]
    subset: Option<usize>,
    /// Templates without illumination simulation.
    #[arg(long, conflicts_with = "compare")]
    no_simulation: bool,
    /// Evaluate with and without simulation.
    #[arg(long)]
    compare: bool,
    #[arg(long, default_value = "mcm-eval")]
    out_dir: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    persons: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.7)]
    probe_coeff: f64,
    #[arg(long)]
    out: PathBuf,
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| McmError::io(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| McmError::io(path, e))
}

fn cmd_extract(args: &ExtractArgs) -> Result<()> {
    let config = args.config.resolve()?;
    let provenance = if args.template {
        Provenance::Template
    } else {
        Provenance::Probe
    };
    let simulation = if args.template && !args.no_simulation {
        config.simulation.active()
    } else {
        None
    };
    let extract_one = |image: &Path, mask: &Path, id: &str, seed: u64, out: &Path| -> Result<()> {
        let raster = load_image(image)?;
        let blob = load_mask(mask)?;
        let sampling = config.sampling.with_seed(seed);
        let d = extract_descriptor(
            &raster,
            &blob,
            config.partition,
            &sampling,
            simulation.as_ref(),
            id,
            provenance,
        )?;
        let echo = json!({
            "run": config.to_json(),
            "simulation_applied": simulation.is_some(),
            "image": image.display().to_string(),
            "mask": mask.display().to_string(),
        });
        if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| McmError::io(parent, e))?;
        }
        write_descriptor(out, &DescriptorDocument::new(d, echo))
    };

    if let Some(manifest_path) = &args.manifest {
        let manifest = DatasetManifest::load(manifest_path)?;
        let out_dir = args.out_dir.as_ref().expect("clap enforces --out-dir");
        let ext = if args.binary { "bin" } else { "json" };
        for e in &manifest.entries {
            let out = out_dir.join(format!("{}_{}.desc.{ext}", e.person_id, e.camera_id));
            let seed = derive_seed(config.sampling.seed, &e.image_key());
            extract_one(&e.image, &e.mask, &e.person_id, seed, &out)?;
        }
        println!(
            "wrote {} descriptors to {}",
            manifest.entries.len(),
            out_dir.display()
        );
        return Ok(());
    }

    let image = args.image.as_ref().expect("clap enforces --image");
    let mask = args.mask.as_ref().expect("clap enforces --mask");
    let out = args.output.as_ref().expect("clap enforces --output");
    let id = match &args.id {
        Some(id) => id.clone(),
        None => image
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "person".into()),
    };
    extract_one(image, mask, &id, config.sampling.seed, out)
}

fn cmd_match(args: &MatchArgs) -> Result<()> {
    let config = args.config.resolve()?;
    let load = |p: &PathBuf| read_descriptor(p).map(DescriptorDocument::into_descriptor);
    match (args.descriptors.as_slice(), args.gallery.is_empty()) {
        ([a, b], true) => {
            let d = sequence_distance(&load(a)?, &load(b)?, &config.matching)?;
            println!("{d}");
        }
        ([probe], false) => {
            let probe = load(probe)?;
            let gallery = args.gallery.iter().map(load).collect::<Result<Vec<_>>>()?;
            let ranked = rank_gallery(&probe, &gallery, &config.matching)?;
            println!("rank\tperson_id\tdistance");
            for (i, m) in ranked.matches.iter().enumerate() {
                println!("{}\t{}\t{}", i + 1, m.person_id, m.distance);
            }
        }
        _ => {
            return Err(McmError::InvalidArgument(
                "give two descriptors, or one probe descriptor with --gallery".into(),
            ))
        }
    }
    Ok(())
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<()> {
    let config = args.config.resolve()?;
    let (manifest, dataset) = match (&args.manifest, args.synthetic) {
        (Some(path), _) => (
            DatasetManifest::load(path)?,
            json!({"manifest": path.display().to_string()}),
        ),
        (None, Some(persons)) => {
            let dir = args
                .synth_dir
                .clone()
                .unwrap_or_else(|| args.out_dir.join("synthetic"));
            let m =
                generate_synthetic_dataset(&dir, persons, config.sampling.seed, args.probe_coeff)?;
            (
                m,
                json!({"synthetic": persons, "probe_coeff": args.probe_coeff}),
            )
        }
        (None, None) => unreachable!("clap enforces a dataset"),
    };
    let persons = manifest.person_count();
    let spec = TrialSpec {
        subset_size: args.subset.unwrap_or(persons.min(316)),
        num_trials: args.trials,
        seed: config.sampling.seed,
    };
    let mut runs = Vec::new();
    if !args.no_simulation {
        runs.push(("with_simulation", config.simulation.active()));
    }
    if args.no_simulation || args.compare {
        runs.push(("without_simulation", None));
    }

    let mut series = Vec::new();
    let mut timings = serde_json::Map::new();
    for (name, simulation) in runs {
        let options = BenchmarkOptions {
            sampling: config.sampling.clone(),
            matching: config.matching.clone(),
            simulation,
            partition: config.partition,
        };
        let report = run_benchmark(&manifest, &spec, &options)?;
        println!(
            "{name}: rank-1 {:.4}  rank-5 {:.4}  rank-10 {:.4}  rank-20 {:.4}",
            report.cmc.rank(1),
            report.cmc.rank(5),
            report.cmc.rank(10),
            report.cmc.rank(20)
        );
        timings.insert(name.into(), serde_json::to_value(&report.timing)?);
        series.push(CurveSeries {
            name: name.into(),
            curve: report.cmc,
        });
    }

    let echo = json!({"run": config.to_json(), "trials": spec, "dataset": dataset});
    let out = &args.out_dir;
    write_file(&out.join("cmc.csv"), cmc_csv(&series, &echo).as_bytes())?;
    write_file(&out.join("cmc.svg"), cmc_svg(&series, &echo).as_bytes())?;
    let timing = json!({"config": echo, "timing": timings});
    write_file(
        &out.join("timing.json"),
        serde_json::to_string_pretty(&timing)?.as_bytes(),
    )?;
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let m = generate_synthetic_dataset(&args.out, args.persons, args.seed, args.probe_coeff)?;
    println!(
        "wrote {} images to {}",
        m.entries.len(),
        args.out.join("manifest.jsonl").display()
    );
    Ok(())
}

fn exit_code(e: &McmError) -> i32 {
    if e.is_usage() {
        EXIT_USAGE
    } else {
        EXIT_DATA
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be at least 1");
            return EXIT_USAGE;
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
        {
            eprintln!("error: cannot start worker pool: {e}");
            return EXIT_INTERNAL;
        }
    }
    let result = match &cli.command {
        Command::Extract(a) => cmd_extract(a),
        Command::Match(a) => cmd_match(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Synth(a) => cmd_synth(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
