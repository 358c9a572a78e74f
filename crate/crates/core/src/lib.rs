//! Online stochastic variational inference for multi-category topic models.
//!
//! Documents hold sparse code counts over several fixed vocabularies
//! (diagnoses, medications, procedures, labs, ...). All categories of one
//! document share a single mixture over K topics; each category keeps its own
//! word-topic distributions. Training streams minibatches with a decaying
//! learning rate, so corpora never need to fit in one batch.
//!
//! The crate is organized around the pipeline:
//!
//! * [`corpus`] — vocabularies, documents, JSONL streaming, holdout splits
//! * [`synth`] — generative-process corpora with known ground truth
//! * [`inference`] — the per-document E-step and the evidence bound
//! * [`trainer`] — the online minibatch loop and checkpoints
//! * [`evaluation`] — held-out perplexity and topic-count sweeps
//! * [`analysis`] — topic reports, loadings, cohorts, code similarity
//! * [`cli`] — the `polylda` command-line front end

pub mod analysis;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod inference;
pub mod matrix_io;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};
