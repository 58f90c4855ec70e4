//! Multiple-choice evaluation: each query's groundtruth definition competes
//! with four sampled negatives, options are ranked by distance to the
//! predicted definition, and mean reciprocal rank is reported overall and
//! per context-length bucket.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{content_words, definitions_distinct, GlossEntry};
use crate::embeddings::{euclidean_distance, EmbeddingTable};
use crate::error::{Error, Result};

pub const NEGATIVES_PER_ITEM: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NegativeMode {
    Distinct,
    Random,
}

impl fmt::Display for NegativeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NegativeMode::Distinct => "distinct",
            NegativeMode::Random => "random",
        })
    }
}

/// A definition text and the id of its sentence embedding.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DefinitionOption {
    pub definition: String,
    pub embedding_id: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChoiceItem {
    pub query_id: String,
    pub groundtruth: DefinitionOption,
    pub negatives: Vec<DefinitionOption>,
    pub mode: NegativeMode,
    pub seed: u64,
}

/// Stable per-item seed derived from a run seed (splitmix64 finalizer).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draws four negatives uniformly without replacement from `pool`, skipping
/// the groundtruth itself and, in distinct mode, any definition that is not
/// distinct from it.
pub fn sample_negatives(
    query_id: &str,
    groundtruth: &DefinitionOption,
    pool: &[DefinitionOption],
    mode: NegativeMode,
    seed: u64,
    stopwords: &BTreeSet<String>,
) -> Result<ChoiceItem> {
    let eligible = |o: &DefinitionOption| {
        o.embedding_id != groundtruth.embedding_id
            && match mode {
                NegativeMode::Random => true,
                NegativeMode::Distinct => definitions_distinct(&groundtruth.definition, &o.definition, stopwords),
            }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..pool.len()).collect();
    let mut negatives = Vec::with_capacity(NEGATIVES_PER_ITEM);
    // lazy Fisher-Yates: position i receives a uniform pick of the rest
    for i in 0..order.len() {
        let j = rng.gen_range(i..order.len());
        order.swap(i, j);
        let option = &pool[order[i]];
        if eligible(option) {
            negatives.push(option.clone());
            if negatives.len() == NEGATIVES_PER_ITEM {
                break;
            }
        }
    }
    if negatives.len() < NEGATIVES_PER_ITEM {
        return Err(Error::PoolExhausted {
            needed: NEGATIVES_PER_ITEM,
            available: negatives.len(),
        });
    }
    Ok(ChoiceItem {
        query_id: query_id.to_string(),
        groundtruth: groundtruth.clone(),
        negatives,
        mode,
        seed,
    })
}

/// 1-based rank of the groundtruth among the five options by Euclidean
/// distance to the prediction. Negatives at exactly the groundtruth's
/// distance rank ahead of it.
pub fn rank_groundtruth(prediction: &[f64], item: &ChoiceItem, embeddings: &EmbeddingTable) -> Result<usize> {
    let gt = euclidean_distance(prediction, embeddings.get(&item.groundtruth.embedding_id)?)?;
    let mut rank = 1;
    for n in &item.negatives {
        if euclidean_distance(prediction, embeddings.get(&n.embedding_id)?)? <= gt {
            rank += 1;
        }
    }
    Ok(rank)
}

pub fn mrr(ranks: &[usize]) -> Result<f64> {
    if ranks.is_empty() {
        return Err(Error::Empty("rank list"));
    }
    Ok(ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / ranks.len() as f64)
}

/// Uniformly random 1-based ranks among `options` choices.
pub fn random_ranks(trials: usize, options: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..trials).map(|_| rng.gen_range(1..=options)).collect()
}

/// Content words of the example, not counting the slang expression.
pub fn context_length(entry: &GlossEntry, stopwords: &BTreeSet<String>) -> usize {
    let mut words = content_words(&entry.example, stopwords);
    for slang in content_words(&entry.word, stopwords) {
        if let Some(pos) = words.iter().position(|w| *w == slang) {
            words.remove(pos);
        }
    }
    words.len()
}

pub fn partition_by_context_length<'a>(
    entries: &'a [GlossEntry],
    stopwords: &BTreeSet<String>,
) -> BTreeMap<usize, Vec<&'a GlossEntry>> {
    let mut buckets: BTreeMap<usize, Vec<&GlossEntry>> = BTreeMap::new();
    for e in entries {
        buckets.entry(context_length(e, stopwords)).or_default().push(e);
    }
    buckets
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QueryResult {
    pub query_id: String,
    pub rank: usize,
    pub reciprocal_rank: f64,
    pub bucket: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BucketSummary {
    pub count: usize,
    pub mrr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub system: String,
    pub mode: NegativeMode,
    pub seed: u64,
    pub mrr: f64,
    pub queries: usize,
    pub partitions: BTreeMap<usize, BucketSummary>,
    #[serde(skip)]
    pub per_query: Vec<QueryResult>,
}

impl EvalReport {
    pub fn new(system: &str, mode: NegativeMode, seed: u64, per_query: Vec<QueryResult>) -> Result<Self> {
        let ranks: Vec<usize> = per_query.iter().map(|q| q.rank).collect();
        let overall = mrr(&ranks)?;
        let mut grouped: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for q in &per_query {
            grouped.entry(q.bucket).or_default().push(q.rank);
        }
        let partitions = grouped
            .into_iter()
            .map(|(b, r)| {
                Ok((
                    b,
                    BucketSummary {
                        count: r.len(),
                        mrr: mrr(&r)?,
                    },
                ))
            })
            .collect::<Result<_>>()?;
        Ok(EvalReport {
            system: system.to_string(),
            mode,
            seed,
            mrr: overall,
            queries: per_query.len(),
            partitions,
            per_query,
        })
    }

    /// Per-query TSV: query_id, mode, rank, reciprocal rank, bucket.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("query_id\tmode\trank\treciprocal_rank\tcontext_length\n");
        for q in &self.per_query {
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                q.query_id, self.mode, q.rank, q.reciprocal_rank, q.bucket
            )
            .unwrap();
        }
        out
    }
}

/// Scores one system: `predictions[i]` is the embedding id of the predicted
/// definition for `items[i]`, `buckets[i]` its context-length bucket.
pub fn evaluate(
    system: &str,
    items: &[ChoiceItem],
    predictions: &[&str],
    buckets: &[usize],
    embeddings: &EmbeddingTable,
    seed: u64,
) -> Result<EvalReport> {
    if items.len() != predictions.len() || items.len() != buckets.len() {
        return Err(Error::LengthMismatch {
            left: items.len(),
            right: predictions.len().min(buckets.len()),
        });
    }
    let mode = items.first().map(|i| i.mode).ok_or(Error::Empty("choice items"))?;
    let per_query = items
        .iter()
        .zip(predictions)
        .zip(buckets)
        .map(|((item, pred), &bucket)| {
            let rank = rank_groundtruth(embeddings.get(pred)?, item, embeddings)?;
            Ok(QueryResult {
                query_id: item.query_id.clone(),
                rank,
                reciprocal_rank: 1.0 / rank as f64,
                bucket,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    EvalReport::new(system, mode, seed, per_query)
}
