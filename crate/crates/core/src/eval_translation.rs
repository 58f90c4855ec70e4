//! Slang translation harness: paraphrase insertion, smoothed sentence BLEU,
//! externally computed metric scores, and best-of-top-n curves.

use std::collections::{BTreeMap, HashMap};
use std::fmt::{self, Write as _};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::text;

pub const DEFAULT_CURVE_LENGTH: usize = 20;

/// Replaces the single occurrence of `slang` in `source` with `paraphrase`,
/// leaving everything around the span untouched.
pub fn insert_paraphrase(source: &str, slang: &str, paraphrase: &str) -> Result<String> {
    let occ = text::find_occurrences(source, slang);
    if occ.len() != 1 {
        return Err(Error::Occurrence {
            word: slang.to_string(),
            text: source.to_string(),
            count: occ.len(),
        });
    }
    let span = occ[0].clone();
    Ok(format!(
        "{}{}{}",
        &source[..span.start],
        paraphrase,
        &source[span.end..]
    ))
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for g in tokens.windows(n) {
            *counts.entry(g).or_insert(0) += 1;
        }
    }
    counts
}

/// Sentence BLEU on a 0-100 scale with uniform 1..4-gram weights and
/// Chen & Cherry's smoothing method 4: the k-th order with no matches gets
/// numerator `ln(len(hyp)) / (5 * 2^k)` (only for hypotheses longer than one
/// token). Orders left at zero precision drop out of the geometric mean.
pub fn sentence_bleu(hypothesis: &[String], reference: &[String]) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::Empty("BLEU reference"));
    }
    if hypothesis.is_empty() {
        return Ok(0.0);
    }
    let hyp_len = hypothesis.len();
    let mut log_sum = 0.0;
    let mut smoothed = 1;
    for n in 1..=4 {
        let hyp = ngram_counts(hypothesis, n);
        let refs = ngram_counts(reference, n);
        let matches: usize = hyp.iter().map(|(g, &c)| c.min(refs.get(g).copied().unwrap_or(0))).sum();
        let total = hyp.values().sum::<usize>().max(1);
        let precision = if matches == 0 && hyp_len > 1 {
            let numerator = 1.0 / (2f64.powi(smoothed) * 5.0 / (hyp_len as f64).ln());
            smoothed += 1;
            numerator / total as f64
        } else {
            matches as f64 / total as f64
        };
        if precision > 0.0 {
            log_sum += 0.25 * precision.ln();
        }
    }
    let (c, r) = (hyp_len as f64, reference.len() as f64);
    let brevity = if c > r { 1.0 } else { (1.0 - r / c).exp() };
    Ok(100.0 * brevity * log_sum.exp())
}

/// Tokenizes both sentences and scores them.
pub fn sentence_bleu_str(hypothesis: &str, reference: &str) -> Result<f64> {
    sentence_bleu(&text::bleu_tokens(hypothesis), &text::bleu_tokens(reference))
}

/// Max of the first `n` scores.
pub fn best_of_topn(scores: &[f64], n: usize) -> Result<f64> {
    if n == 0 || n > scores.len() {
        return Err(Error::Invalid(format!("n = {n} outside 1..={}", scores.len())));
    }
    Ok(scores[..n].iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

/// Best-of-top-n for n = 1..=length, repeating the last value when there
/// are fewer scores than `length`.
pub fn best_of_topn_curve(scores: &[f64], length: usize) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(Error::Empty("score list"));
    }
    let mut out = Vec::with_capacity(length);
    let mut best = f64::NEG_INFINITY;
    for n in 0..length {
        if let Some(&s) = scores.get(n) {
            best = best.max(s);
        }
        out.push(best);
    }
    Ok(out)
}

/// Arithmetic mean of the first `length` curve points, padding a short
/// curve with its final value.
pub fn aggregate_curve(values: &[f64], length: usize) -> Result<f64> {
    let last = *values.last().ok_or(Error::Empty("curve"))?;
    if length == 0 {
        return Err(Error::Invalid("curve length must be positive".into()));
    }
    let sum: f64 = (0..length).map(|i| values.get(i).copied().unwrap_or(last)).sum();
    Ok(sum / length as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Bleu,
    Bleurt,
    Comet,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Bleu => "bleu",
            Metric::Bleurt => "bleurt",
            Metric::Comet => "comet",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranslationCandidate {
    pub paraphrase: String,
    pub interpreted_source: String,
    pub translation: String,
    #[serde(default)]
    pub bleu: Option<f64>,
    #[serde(default)]
    pub bleurt: Option<f64>,
    #[serde(default)]
    pub comet: Option<f64>,
}

impl TranslationCandidate {
    pub fn score(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Bleu => self.bleu,
            Metric::Bleurt => self.bleurt,
            Metric::Comet => self.comet,
        }
    }

    fn score_mut(&mut self, metric: Metric) -> &mut Option<f64> {
        match metric {
            Metric::Bleu => &mut self.bleu,
            Metric::Bleurt => &mut self.bleurt,
            Metric::Comet => &mut self.comet,
        }
    }
}

/// Candidates are in generator order: position i has rank i.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranslationRecord {
    pub query_id: String,
    pub word: String,
    pub source: String,
    pub gold_translation: String,
    pub candidates: Vec<TranslationCandidate>,
}

impl TranslationRecord {
    pub fn validate(&self) -> Result<()> {
        if self.candidates.is_empty() {
            return Err(Error::Empty("translation candidates"));
        }
        for c in &self.candidates {
            let expected = insert_paraphrase(&self.source, &self.word, &c.paraphrase)?;
            if expected != c.interpreted_source {
                return Err(Error::Invalid(format!(
                    "query `{}`: interpreted source `{}` differs from source outside the slang span",
                    self.query_id, c.interpreted_source
                )));
            }
        }
        Ok(())
    }

    /// Fills in missing BLEU scores from the translations.
    pub fn fill_bleu(&mut self) -> Result<()> {
        let reference = text::bleu_tokens(&self.gold_translation);
        for c in &mut self.candidates {
            if c.bleu.is_none() {
                c.bleu = Some(sentence_bleu(&text::bleu_tokens(&c.translation), &reference)?);
            }
        }
        Ok(())
    }

    /// Scores in the given candidate order (generator ranks).
    pub fn scores(&self, metric: Metric, order: &[usize]) -> Result<Vec<f64>> {
        order
            .iter()
            .map(|&r| {
                self.candidates
                    .get(r)
                    .and_then(|c| c.score(metric))
                    .ok_or_else(|| Error::MissingId {
                        kind: "metric score",
                        id: format!("{}:{r}:{metric}", self.query_id),
                    })
            })
            .collect()
    }
}

pub fn load_translation_records(path: &Path) -> Result<Vec<TranslationRecord>> {
    let mut out = Vec::new();
    for (line, r) in io::read_jsonl::<TranslationRecord>(path)? {
        r.validate().map_err(|e| Error::parse(path, line, e.to_string()))?;
        out.push(r);
    }
    Ok(out)
}

pub fn write_translation_records(path: &Path, records: &[TranslationRecord]) -> Result<()> {
    io::write_jsonl(path, records)
}

pub type MetricScores = BTreeMap<(String, usize), f64>;

/// Reads `query_id<TAB>rank<TAB>score` rows.
pub fn load_metric_scores(path: &Path) -> Result<MetricScores> {
    let mut out = BTreeMap::new();
    for (n, line) in io::data_lines(path)? {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.first() == Some(&"query_id") {
            continue;
        }
        let [qid, rank, score] = fields.as_slice() else {
            return Err(Error::parse(path, n, "expected query_id<TAB>rank<TAB>score"));
        };
        let rank: usize = rank.trim().parse().map_err(|_| Error::parse(path, n, "bad rank"))?;
        let score: f64 = score.trim().parse().map_err(|_| Error::parse(path, n, "bad score"))?;
        if out.insert((qid.to_string(), rank), score).is_some() {
            return Err(Error::DuplicateId {
                kind: "metric row",
                id: format!("{qid}:{rank}"),
            });
        }
    }
    Ok(out)
}

pub fn metric_scores_to_tsv(scores: &MetricScores) -> String {
    let mut out = String::new();
    for ((qid, rank), score) in scores {
        writeln!(out, "{qid}\t{rank}\t{score}").unwrap();
    }
    out
}

pub fn write_metric_scores(path: &Path, scores: &MetricScores) -> Result<()> {
    io::write_string(path, &metric_scores_to_tsv(scores))
}

/// Attaches scores to every candidate of every record. Rows for unknown
/// queries or ranks, and candidates left without a score, are errors.
pub fn attach_metric_scores(records: &mut [TranslationRecord], scores: &MetricScores, metric: Metric) -> Result<()> {
    let index: HashMap<&str, usize> = records
        .iter()
        .enumerate()
        .map(|(i, r)| (r.query_id.as_str(), i))
        .collect();
    for (qid, rank) in scores.keys() {
        let i = *index.get(qid.as_str()).ok_or_else(|| Error::MissingId {
            kind: "query",
            id: qid.clone(),
        })?;
        if *rank >= records[i].candidates.len() {
            return Err(Error::MissingId {
                kind: "candidate rank",
                id: format!("{qid}:{rank}"),
            });
        }
    }
    for r in records.iter_mut() {
        for (rank, c) in r.candidates.iter_mut().enumerate() {
            let s = scores
                .get(&(r.query_id.clone(), rank))
                .ok_or_else(|| Error::MissingId {
                    kind: "metric score",
                    id: format!("{}:{rank}", r.query_id),
                })?;
            *c.score_mut(metric) = Some(*s);
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreCurve {
    pub metric: Metric,
    /// Mean over queries of best-of-top-n, for n = 1..=values.len().
    pub values: Vec<f64>,
    /// Mean of `values`.
    pub aggregate: f64,
}

/// Averages per-query best-of-top-n curves. `orders[i]` lists record i's
/// candidate ranks in the order being evaluated.
pub fn score_curve(
    records: &[TranslationRecord],
    orders: &[Vec<usize>],
    metric: Metric,
    length: usize,
) -> Result<ScoreCurve> {
    if records.is_empty() {
        return Err(Error::Empty("translation records"));
    }
    if records.len() != orders.len() {
        return Err(Error::LengthMismatch {
            left: records.len(),
            right: orders.len(),
        });
    }
    let mut values = vec![0.0; length];
    for (r, order) in records.iter().zip(orders) {
        let curve = best_of_topn_curve(&r.scores(metric, order)?, length)?;
        values.iter_mut().zip(&curve).for_each(|(v, c)| *v += c);
    }
    let n = records.len() as f64;
    values.iter_mut().for_each(|v| *v /= n);
    let aggregate = aggregate_curve(&values, length)?;
    Ok(ScoreCurve {
        metric,
        values,
        aggregate,
    })
}
