//! Semantic reranking of n-best candidate interpretations.
//!
//! Each candidate definition is encoded into the contrastive space and scored
//! against the query word's prototype; scores are normalized over the list
//! (`g`). With collaborative filtering on, the per-word distributions of the
//! query's nearest vocabulary neighbours are mixed in, weighted by a
//! word-vector similarity kernel (`g*`).

use std::cmp::Ordering;
use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embeddings::{cosine_distance, EmbeddingTable};
use crate::error::{Error, Result};
use crate::io;
use crate::semantic::PrototypeModel;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub rank_in: usize,
    #[serde(default)]
    pub surface: Option<String>,
    pub definition: String,
    pub definition_embedding_id: String,
    #[serde(default)]
    pub gen_score: Option<f64>,
    #[serde(default)]
    pub pos_match: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub query_id: String,
    pub word: String,
    pub context: String,
    pub generator: String,
    pub candidates: Vec<Candidate>,
}

impl CandidateSet {
    pub fn validate(&self) -> Result<()> {
        if self.candidates.is_empty() {
            return Err(Error::Empty("candidate list"));
        }
        for (i, c) in self.candidates.iter().enumerate() {
            if c.rank_in != i {
                return Err(Error::Invalid(format!(
                    "query `{}`: candidate at position {i} has rank_in {}",
                    self.query_id, c.rank_in
                )));
            }
            if c.definition.trim().is_empty() {
                return Err(Error::Invalid(format!(
                    "query `{}`: candidate {i} has an empty definition",
                    self.query_id
                )));
            }
        }
        Ok(())
    }
}

pub fn load_candidate_sets(path: &Path) -> Result<Vec<CandidateSet>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (line, set) in io::read_jsonl::<CandidateSet>(path)? {
        set.validate().map_err(|e| Error::parse(path, line, e.to_string()))?;
        if !seen.insert(set.query_id.clone()) {
            return Err(Error::DuplicateId {
                kind: "query",
                id: set.query_id,
            });
        }
        out.push(set);
    }
    Ok(out)
}

pub fn write_candidate_sets(path: &Path, sets: &[CandidateSet]) -> Result<()> {
    io::write_jsonl(path, sets)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidate {
    #[serde(flatten)]
    pub candidate: Candidate,
    pub score: f64,
}

/// Candidates sorted by score, best first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub query_id: String,
    pub word: String,
    pub context: String,
    pub generator: String,
    pub candidates: Vec<ScoredCandidate>,
}

impl RankedList {
    /// The selected interpretation.
    pub fn top(&self) -> &Candidate {
        &self.candidates[0].candidate
    }

    /// Original generator ranks in reranked order.
    pub fn order(&self) -> Vec<usize> {
        self.candidates.iter().map(|c| c.candidate.rank_in).collect()
    }
}

pub fn load_ranked_lists(path: &Path) -> Result<Vec<RankedList>> {
    Ok(io::read_jsonl(path)?.into_iter().map(|(_, r)| r).collect())
}

pub fn write_ranked_lists(path: &Path, lists: &[RankedList]) -> Result<()> {
    io::write_jsonl(path, lists)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RerankConfig {
    pub h_cf: f64,
    pub neighborhood_size: usize,
    pub use_cf: bool,
}

impl Default for RerankConfig {
    fn default() -> Self {
        RerankConfig {
            h_cf: 0.1,
            neighborhood_size: 5,
            use_cf: true,
        }
    }
}

impl RerankConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.h_cf > 0.0) {
            return Err(Error::Invalid("h_cf must be positive".into()));
        }
        if self.neighborhood_size == 0 {
            return Err(Error::Invalid("neighborhood_size must be at least 1".into()));
        }
        Ok(())
    }
}

/// The `size` vocabulary words closest to `word` by cosine distance of word
/// vectors. `word` itself always comes first; the rest are ordered by
/// distance, then lexicographically.
pub fn neighborhood(word: &str, vocab: &[String], word_vectors: &EmbeddingTable, size: usize) -> Result<Vec<String>> {
    let anchor = word_vectors.get(word)?;
    let mut others = Vec::with_capacity(vocab.len());
    for w in vocab {
        if w == word {
            continue;
        }
        others.push((cosine_distance(anchor, word_vectors.get(w)?)?, w));
    }
    others.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));
    others.dedup_by(|a, b| a.1 == b.1);
    let mut out = vec![word.to_string()];
    out.extend(others.into_iter().take(size.saturating_sub(1)).map(|(_, w)| w.clone()));
    Ok(out)
}

/// `exp(-cosine_distance(a, b) / h_cf)`.
pub fn word_sim(a: &str, b: &str, word_vectors: &EmbeddingTable, h_cf: f64) -> Result<f64> {
    let d = cosine_distance(word_vectors.get(a)?, word_vectors.get(b)?)?;
    Ok((-d / h_cf).exp())
}

/// Scales nonnegative scores to sum to one.
pub fn normalize(scores: &[f64]) -> Result<Vec<f64>> {
    let total: f64 = scores.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::Invalid(format!("cannot normalize scores summing to {total}")));
    }
    Ok(scores.iter().map(|s| s / total).collect())
}

/// `normalize(exp(logs))`, computed with the maximum factored out.
pub fn normalize_log(logs: &[f64]) -> Result<Vec<f64>> {
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::Invalid(format!(
            "cannot normalize log scores with maximum {max}"
        )));
    }
    normalize(&logs.iter().map(|l| (l - max).exp()).collect::<Vec<_>>())
}

/// `sum_i weights[i] * per_word[i]`, renormalized.
pub fn mix_scores(weights: &[f64], per_word: &[Vec<f64>]) -> Result<Vec<f64>> {
    if weights.len() != per_word.len() {
        return Err(Error::LengthMismatch {
            left: weights.len(),
            right: per_word.len(),
        });
    }
    let n = per_word.first().map(Vec::len).ok_or(Error::Empty("neighborhood"))?;
    let mut mixed = vec![0.0; n];
    for (w, g) in weights.iter().zip(per_word) {
        if g.len() != n {
            return Err(Error::LengthMismatch {
                left: g.len(),
                right: n,
            });
        }
        mixed.iter_mut().zip(g).for_each(|(m, x)| *m += w * x);
    }
    normalize(&mixed)
}

/// Sorts candidates by score, descending; exact ties keep generator order.
pub fn rank_by_scores(set: &CandidateSet, scores: &[f64]) -> Result<RankedList> {
    if scores.len() != set.candidates.len() {
        return Err(Error::LengthMismatch {
            left: scores.len(),
            right: set.candidates.len(),
        });
    }
    let mut entries: Vec<ScoredCandidate> = set
        .candidates
        .iter()
        .zip(scores)
        .map(|(c, &score)| ScoredCandidate {
            candidate: c.clone(),
            score,
        })
        .collect();
    entries.sort_by(|a, b| match b.score.partial_cmp(&a.score) {
        Some(Ordering::Equal) | None => a.candidate.rank_in.cmp(&b.candidate.rank_in),
        Some(o) => o,
    });
    Ok(RankedList {
        query_id: set.query_id.clone(),
        word: set.word.clone(),
        context: set.context.clone(),
        generator: set.generator.clone(),
        candidates: entries,
    })
}

/// Everything needed to rerank candidate sets for one slang vocabulary.
#[derive(Clone, Copy, Debug)]
pub struct Reranker<'a> {
    model: &'a PrototypeModel,
    candidate_embeddings: &'a EmbeddingTable,
    word_vectors: &'a EmbeddingTable,
    vocab: &'a [String],
    config: &'a RerankConfig,
}

impl<'a> Reranker<'a> {
    pub fn new(
        model: &'a PrototypeModel,
        candidate_embeddings: &'a EmbeddingTable,
        word_vectors: &'a EmbeddingTable,
        vocab: &'a [String],
        config: &'a RerankConfig,
    ) -> Result<Self> {
        config.validate()?;
        Ok(Reranker {
            model,
            candidate_embeddings,
            word_vectors,
            vocab,
            config,
        })
    }

    pub fn model(&self) -> &'a PrototypeModel {
        self.model
    }

    pub fn config(&self) -> &'a RerankConfig {
        self.config
    }

    pub fn with_model<'b>(&self, model: &'b PrototypeModel) -> Reranker<'b>
    where
        'a: 'b,
    {
        Reranker { model, ..*self }
    }

    pub fn encode_candidates(&self, set: &CandidateSet) -> Result<Vec<Vec<f64>>> {
        if set.candidates.is_empty() {
            return Err(Error::Empty("candidate list"));
        }
        set.candidates
            .iter()
            .map(|c| {
                self.model
                    .encoder()
                    .encode(self.candidate_embeddings.get(&c.definition_embedding_id)?)
            })
            .collect()
    }

    /// Unnormalized kernel scores `f(k, word)` for encoded candidates.
    pub fn kernel_scores(&self, encoded: &[Vec<f64>], word: &str) -> Result<Vec<f64>> {
        encoded.iter().map(|e| self.model.similarity(e, word)).collect()
    }

    /// Kernel scores of `word` normalized over the candidate list.
    fn normalized_scores(&self, encoded: &[Vec<f64>], word: &str) -> Result<Vec<f64>> {
        let logs: Vec<f64> = encoded
            .iter()
            .map(|e| self.model.log_similarity(e, word))
            .collect::<Result<_>>()?;
        normalize_log(&logs)
    }

    /// `g(k, S)`: kernel scores normalized over the candidate list.
    pub fn score_g(&self, set: &CandidateSet) -> Result<Vec<f64>> {
        self.normalized_scores(&self.encode_candidates(set)?, &set.word)
    }

    pub fn neighbors(&self, word: &str) -> Result<Vec<String>> {
        neighborhood(word, self.vocab, self.word_vectors, self.config.neighborhood_size)
    }

    /// `g*(k, S)`. Falls back to `g` when filtering is off or the
    /// neighborhood is the query word alone.
    pub fn score_g_star(&self, set: &CandidateSet) -> Result<Vec<f64>> {
        if !self.config.use_cf || self.config.neighborhood_size == 1 {
            return self.score_g(set);
        }
        let encoded = self.encode_candidates(set)?;
        let neighbors = self.neighbors(&set.word)?;
        if neighbors.len() == 1 {
            return self.normalized_scores(&encoded, &set.word);
        }
        let mut weights = Vec::with_capacity(neighbors.len());
        let mut per_word = Vec::with_capacity(neighbors.len());
        for n in &neighbors {
            weights.push(word_sim(&set.word, n, self.word_vectors, self.config.h_cf)?);
            per_word.push(self.normalized_scores(&encoded, n)?);
        }
        mix_scores(&weights, &per_word)
    }

    pub fn rerank(&self, set: &CandidateSet) -> Result<RankedList> {
        rank_by_scores(set, &self.score_g_star(set)?)
    }
}
