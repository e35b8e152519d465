//! Dataset generation, head training and evaluation.
//!
//! Records store channel seeds rather than matrices; a [`Testbed`] rebuilds
//! the exact instance (and therefore the features) from a record.

mod dataset;
mod ensemble;
mod eval;
mod head;

pub use dataset::{
    DATASET_FORMAT,
    generate_dataset, generate_dataset_resumable, AntennaSource, Dataset, DatasetConfig, Record, Split,
    SystemKind, Testbed,
};
pub use ensemble::{load_ensemble, EnsembleManifest, HeadEntry, ENSEMBLE_FORMAT};
pub use eval::{evaluate, EvalOptions, EvalReport, HeadReport, RecordEval, TimingReport, TimingStats};
pub use head::{pooled_features, train_head, HeadHyper, HeadModel};
