//! Optional TOML run configuration. Every key may be overridden by the
//! matching command-line flag.

use std::path::Path;

use anyhow::Context;
use echoroom::roomsim::GeneratorConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub gen_data: GenDataSection,
    pub train: TrainSection,
    pub design: DesignSection,
    pub evaluate: EvaluateSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenDataSection {
    pub rooms: Option<usize>,
    pub generator: Option<GeneratorConfig>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub est: Option<String>,
    pub mu: Option<f64>,
    pub ks: Option<usize>,
    pub kr: Option<usize>,
    pub feature: Option<String>,
    pub q: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignSection {
    pub shelf_db: Option<f64>,
    pub corner_hz: Option<f64>,
    pub clamp_min_db: Option<f64>,
    pub clamp_max_db: Option<f64>,
    pub fir_length: Option<usize>,
    pub smooth_octave: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSection {
    pub estimators: Option<Vec<String>>,
    pub n_train: Option<usize>,
    pub n_val: Option<usize>,
    pub repeats: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).map_err(|e| {
            anyhow::Error::new(echoroom::Error::InvalidInput(format!("config {}: {e}", path.display())))
        })
    }
}
