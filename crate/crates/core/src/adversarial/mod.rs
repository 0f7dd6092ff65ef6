//! The four-player adversarial model, its training loop and an exact
//! tabular equilibrium oracle.

pub mod losses;
pub mod model;
pub mod tabular;
pub mod train;

pub use losses::{adversary_losses, detached_predictions, gradients, losses, value_function, LossValues, LossWeights};
pub use model::{
    argmax_label, concat, AdversarialModel, Architecture, ConvExtractor, DenseExtractor, Extractor, Head,
    ModelOutputs, ModelParams,
};
pub use train::{read_history, refit_adversaries, tail_mean, train, train_from, write_history, LossRecord, TrainConfig, TrainOutcome};

use std::path::Path;

use crate::error::Result;
use crate::nnet::Checkpoint;

impl ModelParams {
    pub fn save(&self, path: &Path) -> Result<()> {
        let meta = serde_json::to_value(self.architecture()).expect("architecture serializes");
        Checkpoint::capture(self, meta).save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let ck = Checkpoint::load(path)?;
        let arch: Architecture = serde_json::from_value(ck.meta.clone())
            .map_err(|e| crate::Error::Checkpoint(format!("bad architecture metadata: {e}")))?;
        let mut model = ModelParams::new(&arch, 0)?;
        ck.restore_into(&mut model)?;
        Ok(model)
    }
}
