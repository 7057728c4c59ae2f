//! Run configuration: a sectioned TOML file covering dataset handling,
//! training, the post-hoc baseline, evaluation, and output paths. Every
//! field has a default, unknown keys are rejected, and values round-trip
//! losslessly (floats serialize in shortest-exact form).

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use gsat::posthoc::PosthocConfig;
use gsat::train::TrainConfig;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    /// Train / validation / test fractions, applied as floor(f * n).
    pub fractions: [f64; 3],
    pub split_seed: u64,
}

impl Default for DatasetSection {
    fn default() -> Self {
        DatasetSection { fractions: [0.8, 0.1, 0.1], split_seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// k for precision@k in explanation reports.
    pub topk: usize,
    /// Cap on the number of explained test graphs; 0 means no cap.
    pub limit: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection { topk: 5, limit: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: PathBuf::from("runs") }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetSection,
    pub train: TrainConfig,
    pub posthoc: PosthocConfig,
    pub eval: EvalSection,
    pub output: OutputSection,
}

impl RunConfig {
    /// Defaults, overlaid with the file when one is given. A parse error
    /// or unknown key is a usage error.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else { return Ok(RunConfig::default()) };
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
    }

    /// GSAT_SEED overrides the file's seeds; explicit --seed flags are
    /// applied after this and win.
    pub fn apply_env(&mut self) -> Result<(), CliError> {
        let Some(raw) = std::env::var_os("GSAT_SEED") else { return Ok(()) };
        let seed = raw
            .to_str()
            .and_then(|s| s.parse::<u64>().ok())
            .ok_or_else(|| CliError::usage(format!("GSAT_SEED {raw:?} is not a valid seed")))?;
        self.train.seed = seed;
        self.posthoc.seed = seed;
        Ok(())
    }
}
