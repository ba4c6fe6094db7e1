//! Predicting symbolic-integration method success.
//!
//! The pipeline, end to end: generate verified (integrand, integral)
//! pairs, attach per-method success labels, tokenize into an abstracted
//! prefix vocabulary, train one binary transformer classifier per
//! method, compare against the hand-written guard heuristics, attribute
//! predictions back to input tokens with integrated gradients, and
//! simulate the dispatch savings.
//!
//! Modules mirror those stages:
//!
//! - [`expr`] — expression trees: differentiation, simplification,
//!   numeric evaluation, prefix (de)serialization, structural profiles.
//! - [`datagen`] — the FWD/BWD/IBP/SUB/LIOUVILLE pair generators.
//! - [`preprocess`] — integer abstraction, dedup, vocabulary, encoding,
//!   splits.
//! - [`labeling`] — method lists, label vectors, synthetic labelers and
//!   label-file ingestion.
//! - [`guards`] — the hand-written per-method guard heuristics.
//! - [`model`] — an encoder-only transformer classifier trained from
//!   scratch, with exact gradients.
//! - [`attribution`] — layer integrated gradients over the embedding.
//! - [`eval`] — metrics, guard-vs-model comparison, filtered
//!   evaluation, timing and dispatch simulation.
//! - [`report`] — CSV/SVG/markdown rendering of the above.

pub mod attribution;
pub mod datagen;
pub mod eval;
pub mod expr;
pub mod guards;
pub mod labeling;
pub mod model;
pub mod preprocess;
pub mod report;

pub use expr::{Expr, Function};
