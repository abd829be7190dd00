//! Fixtures shared by the benchmarks.

use std::path::PathBuf;

use lgin::data::load_tu_dataset;
use lgin::experiment::ExperimentConfig;
use lgin::{GraphDataset, Model};

pub fn data_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub fn mutag() -> GraphDataset {
    load_tu_dataset(&data_root().join("MUTAG"), "MUTAG").expect("bundled MUTAG")
}

/// An untrained model with the default experiment widths for `ds`.
pub fn default_model(ds: &GraphDataset) -> Model {
    let cfg = ExperimentConfig::default();
    Model::new(cfg.model_config(ds.feature_dim, ds.num_classes, 0)).expect("valid default config")
}
