//! Shared fixtures for the benchmarks.

use dgrec::eval::synth_social_data;
use dgrec::ingest::SplitConfig;
use dgrec::{Dataset, ModelConfig, SocialGraph};

/// A small synthetic dataset with its friendship graph.
pub fn synthetic(users: usize, items: usize, sessions: usize, seed: u64) -> (Dataset, SocialGraph) {
    synth_social_data(users, items, sessions, 0.9, seed)
        .prepare(&SplitConfig {
            seed,
            ..SplitConfig::default()
        })
        .expect("synthetic data prepares")
}

/// Paper-sized dimensions with reduced fan-out, for timing one step.
pub fn bench_config(hidden: usize) -> ModelConfig {
    ModelConfig {
        hidden,
        embed: hidden,
        fanouts: vec![5, 5],
        batch: 32,
        max_epochs: 1,
        ..ModelConfig::default()
    }
}
