//! Greedy evaluation from every start cell, hidden-state datasets, and
//! linear position probes.

mod activations;
mod confusion;
mod greedy;
mod probe;

pub use activations::{
    collect_activations, decode_dataset, encode_dataset, load_dataset, save_dataset, ActivationConfig,
    ActivationDataset, CollectionMode, DATASET_MAGIC, DATASET_VERSION,
};
pub use confusion::{confusion_outputs, ConfusionOutputs};
pub use greedy::{
    evaluate_greedy, evaluate_policy, rollout, EvalReport, GreedyNetworkPolicy, Policy, ShortestPathPolicy,
    StartOutcome,
};
pub use probe::{
    class_counts, class_weights, fit_probe, stratified_split, train_linear_probe, weighted_accuracy, ProbeConfig,
    ProbeModel, ProbeResult,
};
