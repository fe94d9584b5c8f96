//! Experiment harness: synthetic corpora with a planted topic structure,
//! ablations that switch off behavior neighbors or the progressive chain,
//! and sweeps over neighbor count, kernel and α.

mod experiments;
mod synthetic;

pub use experiments::{
    run_ablations, run_sweeps, ExperimentConfig, ExperimentReport, PlotRow, Sweep, Variant,
};
pub use synthetic::{
    generate_synthetic_corpus, SyntheticConfig, SyntheticCorpus, ATTRIBUTES_FILE, CONFIG_FILE,
    LABELED_FILE, LAST_DAY, LOGS_FILE, LOG_DAYS,
};

use std::path::{Path, PathBuf};

use crate::behavior_index::IndexError;
use crate::evaluation::EvalError;
use crate::model::ModelError;
use crate::training::TrainError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("variant {0:?} requested more than once")]
    DuplicateVariant(String),
    #[error("invalid sweep value {0}")]
    InvalidSweepValue(String),
    #[error("corpus: {0}")]
    Corpus(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl HarnessError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_owned(),
            source,
        }
    }
}
