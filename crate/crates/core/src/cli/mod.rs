//! Experiment configuration and the pipeline commands behind the `onbody`
//! binary.
//!
//! Every command reads its inputs from, and writes its outputs to, a fixed
//! layout under the output directory (see [`Layout`]), so the commands chain
//! without extra arguments:
//!
//! ```text
//! simulate -> featurize -> train [--baseline] -> evaluate [--baseline] -> protocol
//! ```
//!
//! All randomness derives from the single config seed through
//! [`derive_seed`](crate::rng::derive_seed) with fixed stream indices
//! ([`SeedStream`]).

mod commands;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adversarial::tabular::TabularTrainConfig;
use crate::adversarial::{Architecture, TrainConfig};
use crate::channel::{DatasetSpec, EnvironmentClass, MotionClass};
use crate::error::{Error, Result};
use crate::io::read_json;
use crate::protocol::ScenarioConfig;
use crate::rng::derive_seed;

pub use commands::{
    cmd_evaluate, cmd_featurize, cmd_protocol, cmd_simulate, cmd_theory_check, cmd_train, split_traces, EvaluateSummary,
    FeaturizeSummary, JointTheoryReport, ProtocolSummary, SimulateSummary, SplitSummary, TheoryReport, TrainSummary,
};

/// Stream indices under the config seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedStream {
    Dataset = 0,
    Split = 1,
    Train = 2,
    Protocol = 3,
    Theory = 4,
}

/// Held-out fraction of controlled traces, applied per `(y, z, v)` cell.
/// Uncontrolled traces always go to the test split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitPolicy {
    pub test_fraction: f64,
}

impl Default for SplitPolicy {
    fn default() -> Self {
        SplitPolicy { test_fraction: 0.2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScriptChoice {
    Handshake,
    Spoofing,
    Deadlock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifierChoice {
    Oracle,
    Threshold,
    /// The trained model under `model/`; requires `train` to have run.
    Learned,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProtocolSettings {
    /// Built-in script, used when `script_file` is absent.
    pub script: ScriptChoice,
    pub script_file: Option<PathBuf>,
    pub verifier: VerifierChoice,
    pub device: String,
    pub attacker: String,
    pub scenario: ScenarioConfig,
}

impl Default for ProtocolSettings {
    fn default() -> Self {
        ProtocolSettings {
            script: ScriptChoice::Spoofing,
            script_file: None,
            verifier: VerifierChoice::Oracle,
            device: "wearable".into(),
            attacker: "attacker".into(),
            scenario: ScenarioConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TheorySettings {
    /// A joint to check in addition to the built-in ones.
    pub joint: Option<PathBuf>,
    /// Also train tiny models on sampled data and compare their losses with
    /// the oracle entropies (slow: seconds per joint).
    pub gradient: bool,
    pub gradient_config: TabularTrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    #[serde(default = "default_dataset")]
    pub dataset: DatasetSpec,
    /// Manifest to featurize; defaults to the one `simulate` writes.
    #[serde(default)]
    pub manifest: Option<PathBuf>,
    #[serde(default)]
    pub split: SplitPolicy,
    #[serde(default)]
    pub architecture: Architecture,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub protocol: ProtocolSettings,
    #[serde(default)]
    pub theory: TheorySettings,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

/// 20 traces per cell over the five controlled motions, five environments
/// and both classes: 1000 traces.
pub fn default_dataset() -> DatasetSpec {
    DatasetSpec::balanced(20, &MotionClass::CONTROLLED, &EnvironmentClass::ALL)
}

impl ExperimentConfig {
    pub fn new(seed: u64) -> Self {
        ExperimentConfig {
            seed,
            out_dir: default_out(),
            dataset: default_dataset(),
            manifest: None,
            split: SplitPolicy::default(),
            architecture: Architecture::default(),
            train: TrainConfig::default(),
            protocol: ProtocolSettings::default(),
            theory: TheorySettings::default(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let c: ExperimentConfig = read_json(path)?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.architecture.lengths()?;
        let f = self.split.test_fraction;
        if !(0.0..1.0).contains(&f) {
            return Err(Error::InvalidParameter(format!("split.test_fraction must lie in [0, 1), got {f}")));
        }
        Ok(())
    }

    pub fn sub_seed(&self, stream: SeedStream) -> u64 {
        derive_seed(self.seed, stream as u64)
    }

    pub fn layout(&self) -> Layout {
        Layout { root: self.out_dir.clone() }
    }
}

/// File layout under the output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn traces(&self) -> PathBuf {
        self.root.join("traces")
    }

    pub fn manifest(&self) -> PathBuf {
        self.traces().join("manifest.json")
    }

    pub fn features(&self) -> PathBuf {
        self.root.join("features")
    }

    pub fn train_profiles(&self) -> PathBuf {
        self.features().join("train.jsonl")
    }

    pub fn test_profiles(&self) -> PathBuf {
        self.features().join("test.jsonl")
    }

    pub fn normalizer(&self) -> PathBuf {
        self.features().join("normalizer.json")
    }

    pub fn split(&self) -> PathBuf {
        self.features().join("split.json")
    }

    pub fn model(&self, baseline: bool) -> PathBuf {
        self.root.join(if baseline { "baseline" } else { "model" })
    }

    pub fn checkpoint(&self, baseline: bool) -> PathBuf {
        self.model(baseline).join("checkpoint.json")
    }

    pub fn history(&self, baseline: bool) -> PathBuf {
        self.model(baseline).join("history.json")
    }

    pub fn eval(&self, baseline: bool) -> PathBuf {
        self.root.join(if baseline { "eval-baseline" } else { "eval" })
    }

    pub fn protocol(&self) -> PathBuf {
        self.root.join("protocol")
    }

    pub fn theory(&self) -> PathBuf {
        self.root.join("theory")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_dataset_has_1000_traces() {
        assert_eq!(ExperimentConfig::new(0).dataset.total(), 1000);
    }

    #[test]
    fn seed_is_mandatory() {
        assert!(serde_json::from_str::<ExperimentConfig>("{}").is_err());
        let c: ExperimentConfig = serde_json::from_str(r#"{"seed": 4}"#).unwrap();
        assert_eq!(c, ExperimentConfig::new(4));
    }

    #[test]
    fn sub_seeds_differ() {
        let c = ExperimentConfig::new(1);
        assert_ne!(c.sub_seed(SeedStream::Dataset), c.sub_seed(SeedStream::Split));
        assert_ne!(c.sub_seed(SeedStream::Train), ExperimentConfig::new(2).sub_seed(SeedStream::Train));
    }

    #[test]
    fn example_config_loads() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs/quick.json");
        let c = ExperimentConfig::load(&path).unwrap();
        assert_eq!(c.protocol.script, ScriptChoice::Deadlock);
        assert_eq!(c.dataset.total(), 26);
    }

    #[test]
    fn bad_split_fraction() {
        let mut c = ExperimentConfig::new(0);
        c.split.test_fraction = 1.0;
        assert!(c.validate().is_err());
    }
}
