//! Reconstructs latent problem-solving pathways from attempt-level logs.
//!
//! The pipeline runs in stages, each usable on its own:
//!
//! - [`ingest`]: parse attempt logs, clean them, and order attempts within a
//!   problem or across a student's whole history.
//! - [`labeling`]: assign each attempt one of twelve pathway labels and a
//!   replay-timing category.
//! - [`markov`]: first-order transition counts, probabilities and mean log
//!   time between labels.
//! - [`hmm`]: categorical HMMs fitted by Baum-Welch, state-count selection by
//!   cross-validated BIC, Viterbi decoding and per-state summaries.
//! - [`stats`]: per-student features, OLS with t-based inference and
//!   Benjamini-Hochberg adjustment.
//! - [`simulate`]: planted-model corpora and synthetic logs with known truth.
//!
//! The `pathtrace` binary exposes the same stages as subcommands; see
//! [`cli`].

pub mod cli;
pub mod error;
pub mod hmm;
pub mod ingest;
pub mod io;
pub mod labeling;
pub mod markov;
pub mod simulate;
pub mod stats;

pub use error::{Error, Result};
