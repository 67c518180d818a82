use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LrModel, RfModel};
use crate::error::{Error, Result};
use crate::features::{Normalization, Vocabulary};
use crate::meta::{read_json, write_json, FORMAT_VERSION};

/// Everything needed to score a feature row later: the vocabulary it was
/// trained against, the feature normalization, and both trained models with
/// their hyperparameters and seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub version: String,
    pub vocab_hash: String,
    pub vocab_size: usize,
    pub normalization: Normalization,
    pub seed: u64,
    pub logistic: Option<LrModel>,
    pub forest: Option<RfModel>,
}

impl ModelArtifact {
    pub fn new(vocab: &Vocabulary, normalization: Normalization, seed: u64) -> Self {
        ModelArtifact {
            version: FORMAT_VERSION.to_string(),
            vocab_hash: vocab.hash(),
            vocab_size: vocab.len(),
            normalization,
            seed,
            logistic: None,
            forest: None,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let a: ModelArtifact = read_json(path)?;
        if a.version != FORMAT_VERSION {
            return Err(Error::invalid(format!(
                "artifact version {:?}, expected {FORMAT_VERSION:?}",
                a.version
            )));
        }
        Ok(a)
    }

    /// Fails unless `vocab` is the vocabulary the models were trained on.
    pub fn check_vocabulary(&self, vocab: &Vocabulary) -> Result<()> {
        if vocab.len() != self.vocab_size || vocab.hash() != self.vocab_hash {
            return Err(Error::invalid(
                "feature vocabulary does not match the model artifact",
            ));
        }
        Ok(())
    }
}
