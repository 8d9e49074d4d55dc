//! End-to-end pipeline for labeling short political social-media posts as
//! Problem / Solution / Other, scaling a small expert-annotated set to a
//! large corpus via supervised fine-tuning and iterative pseudo-labeling,
//! with prompt-based LLM classification as a benchmarked alternative.
//!
//! The crate is organized around the pipeline stages:
//!
//! - [`corpus`] — ingestion, fuzzy ID restoration, label validation
//! - [`partition`] — reproducible seeded data splits and k-fold manifests
//! - [`metrics`] — confusion matrices, F1 scores, agreement statistics
//! - [`models`] — classifiers, optimizer math, the trial training loop
//! - [`selftrain`] — iterative pseudo-labeling controller
//! - [`llm`] — prompt construction, response parsing, k-threshold decisions
//! - [`analytics`] — monthly aggregates joined with author metadata
//! - [`config`] — declarative run configuration

pub mod analytics;
pub mod category;
pub mod config;
pub mod corpus;
pub mod llm;
pub mod metrics;
pub mod models;
pub mod partition;
pub mod rng;
pub mod selftrain;

pub use category::Category;
