//! Transfer dataset ranking for culture-loaded classification tasks.
//!
//! Given a low-resource target dataset, the crate extracts pairwise features
//! against every candidate transfer dataset (corpus statistics, Hofstede
//! cultural-dimension ratios, offensive-lexicon embedding similarity,
//! typological and pragmatic distances), trains a LambdaMART-style
//! gradient-boosted tree ranker on the observed zero-shot transfer scores,
//! and evaluates it with MAP@k / NDCG@k under leave-one-target-out.
//!
//! Module map:
//!
//! * [`corpus`] loads datasets and computes vocabulary statistics.
//! * [`features`] builds per-pair feature vectors and feature groups.
//! * [`ranker`] is the boosted regression-tree ranking model.
//! * [`eval`] holds gold rankings, metrics and the experiment protocols.
//! * [`analysis`] exports correlations, the language network and projections.
//! * [`cli`] wires everything to an experiment configuration file.

pub mod analysis;
pub mod cli;
pub mod corpus;
pub mod diag;
pub mod eval;
pub mod exec;
pub mod features;
pub mod io;
pub mod ranker;

mod error;

pub use diag::{Diagnostic, Diagnostics, Severity};
pub use error::{Error, Result};
pub use exec::Exec;
