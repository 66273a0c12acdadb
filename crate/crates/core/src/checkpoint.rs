//! Versioned JSON checkpoints for rankers and classifiers.
//!
//! Parameter arrays are written in decimal at full precision: the shortest
//! representation that round-trips, so reloading reproduces every score
//! bit for bit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::auxiliary::{ClassifierConfig, SequenceClassifier};
use crate::autodiff::ParamStore;
use crate::encoders::{ModelConfig, RankingModel};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::vocab::Vocabulary;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
struct RankerFile<S> {
    version: u32,
    model: String,
    config: ModelConfig,
    vocab: Vocabulary,
    n_predicates: usize,
    params: ParamStore<S>,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
struct ClassifierFile<S> {
    version: u32,
    model: String,
    config: ClassifierConfig,
    labels: Vec<String>,
    vocab: Vocabulary,
    params: ParamStore<S>,
}

fn check_header(version: u32, model: &str, want: &str) -> Result<()> {
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    if model != want {
        return Err(Error::Checkpoint(format!(
            "expected a {want} checkpoint, found {model:?}"
        )));
    }
    Ok(())
}

pub fn save_ranker<S: Scalar>(model: &RankingModel<S>, path: &Path) -> Result<()> {
    let file = RankerFile {
        version: CHECKPOINT_VERSION,
        model: "ranker".to_string(),
        config: model.config().clone(),
        vocab: model.vocab().clone(),
        n_predicates: model.n_predicates(),
        params: model.params().clone(),
    };
    fs::write(path, serde_json::to_string(&file)?)?;
    Ok(())
}

pub fn load_ranker<S: Scalar>(path: &Path) -> Result<RankingModel<S>> {
    let text = fs::read_to_string(path)?;
    let file: RankerFile<S> =
        serde_json::from_str(&text).map_err(|e| Error::Checkpoint(e.to_string()))?;
    check_header(file.version, &file.model, "ranker")?;
    RankingModel::from_parts(file.config, file.vocab, file.n_predicates, file.params)
}

pub fn save_classifier<S: Scalar>(clf: &SequenceClassifier<S>, path: &Path) -> Result<()> {
    let file = ClassifierFile {
        version: CHECKPOINT_VERSION,
        model: "classifier".to_string(),
        config: clf.config().clone(),
        labels: clf.labels().to_vec(),
        vocab: clf.vocab().clone(),
        params: clf.params().clone(),
    };
    fs::write(path, serde_json::to_string(&file)?)?;
    Ok(())
}

pub fn load_classifier<S: Scalar>(path: &Path) -> Result<SequenceClassifier<S>> {
    let text = fs::read_to_string(path)?;
    let file: ClassifierFile<S> =
        serde_json::from_str(&text).map_err(|e| Error::Checkpoint(e.to_string()))?;
    check_header(file.version, &file.model, "classifier")?;
    SequenceClassifier::from_parts(file.config, file.labels, file.vocab, file.params)
}
