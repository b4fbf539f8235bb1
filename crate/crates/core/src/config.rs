//! Resolved run configuration.
//!
//! Defaults are overridden by an optional TOML file, which is in turn
//! overridden by command-line flags:
//!
//! ```toml
//! partition = "search"
//!
//! [sampling]
//! patches = 80
//! area_min = 0.125
//! area_max = 0.25
//! seed = 7
//!
//! [matching]
//! beta = 0.6
//! k = 10
//! part_weights = [0.5, 0.5]
//!
//! [simulation]
//! enabled = true
//! coefficients = [1.4, 1.2, 1.0, 0.8, 0.6]
//! threshold = 240.0
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::descriptor::{SamplingConfig, Simulation};
use crate::error::{McmError, Result};
use crate::imaging::{CoefficientVector, DEFAULT_SATURATION_THRESHOLD};
use crate::matching::MatchConfig;
use crate::partition::PartitionMode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub enabled: bool,
    pub coefficients: CoefficientVector,
    pub threshold: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            coefficients: CoefficientVector::default(),
            threshold: DEFAULT_SATURATION_THRESHOLD,
        }
    }
}

impl SimulationConfig {
    pub fn active(&self) -> Option<Simulation> {
        self.enabled.then(|| Simulation {
            coefficients: self.coefficients.clone(),
            threshold: self.threshold,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub partition: PartitionMode,
    pub sampling: SamplingConfig,
    pub matching: MatchConfig,
    pub simulation: SimulationConfig,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| McmError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| McmError::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| McmError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        self.sampling.validate()?;
        self.matching.validate()?;
        if !(self.simulation.threshold > 0.0 && self.simulation.threshold <= 255.0) {
            return Err(McmError::InvalidArgument(format!(
                "saturation threshold must lie in (0, 255], got {}",
                self.simulation.threshold
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("run config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_echo_published_parameters() {
        let c = RunConfig::default();
        assert_eq!(c.sampling.patches, 80);
        assert_eq!(c.matching.beta, 0.6);
        assert_eq!(c.matching.k, 10);
        assert_eq!(
            c.simulation.coefficients.as_slice(),
            &[1.4, 1.2, 1.0, 0.8, 0.6]
        );
        assert_eq!(c.simulation.threshold, 240.0);
        assert_eq!(c.partition, PartitionMode::Search);
        c.validate().unwrap();
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let c = RunConfig::from_toml_str(
            "partition = \"fixed\"\n[matching]\nk = 3\n[simulation]\ncoefficients = [1.0]\n",
        )
        .unwrap();
        assert_eq!(c.partition, PartitionMode::Fixed);
        assert_eq!(c.matching.k, 3);
        assert_eq!(c.matching.beta, 0.6);
        assert_eq!(c.simulation.coefficients.as_slice(), &[1.0]);
        assert_eq!(c.sampling, SamplingConfig::default());
    }

    #[test]
    fn bad_files_rejected() {
        assert!(RunConfig::from_toml_str("[matching]\nbogus = 1\n").is_err());
        assert!(RunConfig::from_toml_str("[simulation]\ncoefficients = [0.0]\n").is_err());
    }
}
