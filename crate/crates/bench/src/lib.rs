//! Fixtures shared by the benchmarks.

use tkg_core::config::SynthPair;
use tkg_core::dataset::{Split, TkgDataset};
use tkg_core::model::{Context, ModelConfig, ModelParams};
use tkg_core::synth::{generate, SynthRole};

/// The default source-side planted-rule dataset, inverse-augmented.
pub fn source_dataset(seed: u64) -> TkgDataset {
    generate(&SynthPair::default().a, SynthRole::Source, seed)
        .expect("default synth config is valid")
        .dataset
        .augment_inverses()
        .expect("fresh dataset is not yet augmented")
}

/// Training context over the dataset's train split.
pub fn train_context(dataset: &TkgDataset, self_loops: bool) -> Context {
    Context::new(
        dataset.entity_count(),
        dataset.relation_count(),
        dataset.split(Split::Train).iter().copied(),
        self_loops,
    )
    .expect("dataset facts are in range")
}

/// Model at hidden size `d` with `layers` relation and entity layers.
pub fn model(d: usize, layers: usize, seed: u64) -> ModelParams {
    let config = ModelConfig {
        d,
        relation_layers: layers,
        entity_layers: layers,
        ..ModelConfig::default()
    };
    ModelParams::init(&config, seed).expect("bench config is valid")
}
