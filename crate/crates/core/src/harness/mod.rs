//! Diagnostics, reference posteriors and the two experiments.

pub mod diagnostics;
pub mod experiment;
pub mod output;
pub mod programs;
pub mod reference;

pub use experiment::{
    run_gmm, run_heavytail, write_gmm, write_heavytail, ExperimentError, GmmSettings, HeavyTailSettings, RunManifest,
    Scale,
};
pub use reference::{MixtureModel, ReferencePosterior};
