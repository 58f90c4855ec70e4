//! Slang interpretation by semantic reranking.
//!
//! A context-based generator proposes an n-best list of candidate
//! interpretations for a slang word in a sentence. This crate reranks that
//! list with a prototype model of how slang extends the conventional senses
//! of a word form:
//!
//! - [`contrastive`] trains an encoder that pulls slang definitions towards
//!   the conventional senses of their word and away from unrelated senses;
//! - [`semantic`] scores a candidate meaning by an exponential kernel of its
//!   encoded distance to the word's prototype (mean conventional sense);
//! - [`reranker`] normalizes those scores over the candidate list and mixes
//!   in the distributions of similar words (collaborative filtering).
//!
//! [`eval_mrr`] and [`eval_translation`] are the evaluation harnesses;
//! [`corpus`] and [`embeddings`] load and validate the inputs.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod contrastive;
pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod eval_mrr;
pub mod eval_translation;
pub mod io;
pub mod reranker;
pub mod semantic;
pub mod synthetic;
pub mod text;

pub use error::{Error, Result};
