//! Multiple component matching for person re-identification.
//!
//! A person image is split into body parts (torso, legs); each part becomes
//! a *set* of patch descriptors (HSV histogram plus relative height). Two
//! people are compared part by part with a k-th Hausdorff set distance and
//! the part distances are combined into one score used to rank a gallery.
//! Gallery templates can be enriched with synthetic brightness/contrast
//! variants of every patch to tolerate illumination changes.
//!
//! Modules follow the pipeline:
//! - [`imaging`]: rasters, masks, HSV, illumination transform
//! - [`partition`]: torso/legs split
//! - [`descriptor`]: patch sampling and description
//! - [`matching`]: patch metric, k-th Hausdorff, ranking
//! - [`evaluation`]: trials, CMC, benchmark, synthetic data
//! - [`store`]: descriptor files
//! - [`cli`]: the `mcm` binary

pub mod cli;
pub mod config;
pub mod descriptor;
pub mod error;
pub mod evaluation;
pub mod imaging;
pub mod matching;
pub mod partition;
pub mod store;

pub use config::RunConfig;
pub use descriptor::{
    build_descriptor, describe_patch, extract_descriptor, merge_descriptors, sample_patches,
    HsvHistogram, PartSet, PatchDescriptor, PersonDescriptor, Provenance, Rect, SamplingConfig,
    Simulation,
};
pub use error::{McmError, Result};
pub use evaluation::{
    compute_cmc, make_trials, run_benchmark, CmcCurve, DatasetManifest, TrialSpec,
};
pub use imaging::{
    adjust_coefficients, apply_brightness_contrast, load_image, load_mask, rgb_to_hsv, BlobMask,
    CoefficientVector, HsvPixel, ImageRaster,
};
pub use matching::{
    kth_hausdorff, patch_distance, rank_gallery, sequence_distance, MatchConfig, RankedMatch,
    RankedMatchList,
};
pub use partition::{find_partition, BodyPartition, PartRegion, PartitionMode};
