//! Anchor projected PCA: globally aligned low-rank subject embeddings from
//! matrices with blockwise missing feature blocks.

pub mod appca;
pub mod baselines;
pub mod chain;
pub mod embedding;
pub mod error;
pub mod io;
pub mod layout;
pub mod linalg;
pub mod metrics;
pub mod simgen;
pub mod sweep;

#[cfg(test)]
mod testutil;

pub use chain::{chain_fit, discover_chain, validate_chain, ChainDiscovery, ChainPlan, ChainViolation};
pub use baselines::{oracle_fit, shared_pca_fit, two_step_fit};
pub use appca::{appca_crossfit, appca_fit, groupwise_subspaces, GroupSubspaces};
pub use embedding::{Embedding, Method};
pub use error::{Error, Result};
pub use metrics::{alignment_error, fit_loglog_slope, rank_select_ic, subspace_distance, ErrorReport, LogLogFit};
pub use simgen::{generate, run_experiment, ExperimentOptions, RunRecord, Scenario, SimConfig, SimInstance};
pub use layout::{validate_layout, BlockLayout, FeatureSet, MaskedMatrix};
