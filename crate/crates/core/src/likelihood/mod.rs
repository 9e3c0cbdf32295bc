//! Measurement likelihoods: scan matching against the scan matrix, tempered
//! softmax, provider interfaces and hierarchical refinement.

mod hierarchy;
mod provider;
mod scoring;

pub use hierarchy::{fine_block, refine_hierarchical, top_indices, FineScanMatchingProvider, HierarchyConfig};
pub use provider::{BlockProvider, BlockQuery, LikelihoodProvider, ScanMatchingProvider};
pub use scoring::{cosine_scores, tempered_softmax, Level, LikelihoodGrid};
