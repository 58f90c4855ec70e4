//! Seeded synthetic corpora in the on-disk formats of the real data.
//!
//! Meaning lives in `2 * domains` clusters of the baseline embedding space.
//! Every word form has its conventional senses in one domain `a`; its slang
//! definitions sit in the paired slang domain `domains + a`. This planted
//! extension pattern is what the contrastive encoder has to learn. Candidate
//! lists contain one interpretation near the groundtruth definition and
//! distractors drawn from other slang domains, in a noisy generator order.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::corpus::{GlossEntry, SenseDef, SenseInventory, Split};
use crate::embeddings::{EmbeddingKind, EmbeddingTable};
use crate::error::{Error, Result};
use crate::eval_translation::{
    insert_paraphrase, metric_scores_to_tsv, sentence_bleu_str, MetricScores, TranslationCandidate, TranslationRecord,
};
use crate::io;
use crate::reranker::{Candidate, CandidateSet};
use crate::text;

pub const STOPWORDS: [&str; 24] = [
    "a", "an", "and", "at", "be", "but", "for", "i", "in", "is", "it", "me", "my", "of", "on", "or", "so", "that",
    "the", "this", "to", "very", "was", "when",
];

const SYLLABLES: [&str; 20] = [
    "ba", "ko", "li", "mu", "ne", "ra", "si", "tu", "vo", "ze", "da", "fi", "go", "ha", "ju", "ke", "lo", "mi", "nu",
    "pa",
];

const GENERIC: [&str; 6] = ["feeling", "state", "person", "thing", "manner", "situation"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub seed: u64,
    pub dim: usize,
    pub domains: usize,
    pub words_per_domain: usize,
    pub max_senses_per_word: usize,
    pub definitions_per_word: usize,
    pub min_examples_per_definition: usize,
    pub max_examples_per_definition: usize,
    pub test_fraction: f64,
    pub candidates_per_query: usize,
    /// Probability that the generator ranks the right interpretation first.
    pub generator_hit_rate: f64,
    /// Per-coordinate standard deviation around a domain centre.
    pub noise: f64,
    /// Extra entries that preprocessing must remove, one per removal reason
    /// in rotation.
    pub rejected_entries: usize,
    pub source: String,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            seed: 0,
            dim: 16,
            domains: 6,
            words_per_domain: 8,
            max_senses_per_word: 3,
            definitions_per_word: 3,
            min_examples_per_definition: 1,
            max_examples_per_definition: 2,
            test_fraction: 0.2,
            candidates_per_query: 10,
            generator_hit_rate: 0.3,
            noise: 0.5,
            rejected_entries: 3,
            source: "synthetic".into(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticCorpus {
    pub entries: Vec<GlossEntry>,
    pub inventory: SenseInventory,
    pub stopwords: BTreeSet<String>,
    pub sentence_embeddings: EmbeddingTable,
    pub word_vectors: EmbeddingTable,
    pub candidates: Vec<CandidateSet>,
    pub translations: Vec<TranslationRecord>,
    pub bleurt: MetricScores,
    pub comet: MetricScores,
    /// Generator rank of the planted right interpretation, per query.
    pub answers: BTreeMap<String, usize>,
}

pub const FILES: [&str; 9] = [
    "glosses.jsonl",
    "inventory.jsonl",
    "stopwords.txt",
    "sentence_embeddings.tsv",
    "word_vectors.tsv",
    "candidates.jsonl",
    "translations.jsonl",
    "bleurt.tsv",
    "comet.tsv",
];

impl SyntheticCorpus {
    pub fn write_to_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        io::write_jsonl(&dir.join(FILES[0]), &self.entries)?;
        self.inventory.write(&dir.join(FILES[1]))?;
        let stop: String = self.stopwords.iter().map(|w| format!("{w}\n")).collect();
        io::write_string(&dir.join(FILES[2]), &stop)?;
        self.sentence_embeddings.write(&dir.join(FILES[3]))?;
        self.word_vectors.write(&dir.join(FILES[4]))?;
        io::write_jsonl(&dir.join(FILES[5]), &self.candidates)?;
        io::write_jsonl(&dir.join(FILES[6]), &self.translations)?;
        io::write_string(&dir.join(FILES[7]), &metric_scores_to_tsv(&self.bleurt))?;
        io::write_string(&dir.join(FILES[8]), &metric_scores_to_tsv(&self.comet))
    }
}

struct Namer {
    used: HashSet<String>,
}

impl Namer {
    fn fresh(&mut self, rng: &mut ChaCha8Rng, syllables: usize) -> String {
        loop {
            let w: String = (0..syllables).map(|_| *SYLLABLES.choose(rng).unwrap()).collect();
            if !STOPWORDS.contains(&w.as_str()) && self.used.insert(w.clone()) {
                return w;
            }
        }
    }
}

fn gaussian(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> Vec<f64> {
    (0..dim).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

fn jitter(rng: &mut ChaCha8Rng, centre: &[f64], scale: f64) -> Vec<f64> {
    centre
        .iter()
        .map(|c| c + scale * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Word-by-word stand-in for machine translation: letters of each token
/// reversed, punctuation kept.
pub fn mock_translate(sentence: &str) -> String {
    let mut out = String::with_capacity(sentence.len());
    let mut last = 0;
    for span in text::word_spans(sentence) {
        out.push_str(&sentence[last..span.start]);
        out.extend(sentence[span.clone()].chars().rev());
        last = span.end;
    }
    out.push_str(&sentence[last..]);
    out
}

struct SlangDefinition {
    id: String,
    word: String,
    domain: usize,
    text: String,
    paraphrase: String,
    split: Split,
}

pub fn generate(config: &SyntheticConfig) -> Result<SyntheticCorpus> {
    if config.domains < 2 || config.words_per_domain == 0 || config.definitions_per_word == 0 {
        return Err(Error::Invalid(
            "synthetic corpus needs >= 2 domains and >= 1 word and definition".into(),
        ));
    }
    if config.min_examples_per_definition == 0
        || config.min_examples_per_definition > config.max_examples_per_definition
    {
        return Err(Error::Invalid("bad example count range".into()));
    }
    if config.candidates_per_query < 2 || config.max_senses_per_word == 0 {
        return Err(Error::Invalid("need >= 2 candidates and >= 1 sense per word".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut namer = Namer { used: HashSet::new() };
    let dim = config.dim;
    let p = config.domains;

    let centres: Vec<Vec<f64>> = (0..2 * p).map(|_| gaussian(&mut rng, dim, 1.0)).collect();
    let word_centres: Vec<Vec<f64>> = (0..p).map(|_| gaussian(&mut rng, dim, 1.0)).collect();
    let lexicons: Vec<Vec<String>> = (0..2 * p)
        .map(|_| (0..8).map(|_| namer.fresh(&mut rng, 3)).collect())
        .collect();
    let fillers: Vec<String> = (0..30).map(|_| namer.fresh(&mut rng, 2)).collect();

    let mut sentence = EmbeddingTable::new(dim, EmbeddingKind::Sentence)?;
    let mut word_vectors = EmbeddingTable::new(dim, EmbeddingKind::Word)?;
    let mut inventory: BTreeMap<String, Vec<SenseDef>> = BTreeMap::new();
    let mut sense_counter = 0;
    let mut definitions = Vec::new();

    let describe = |rng: &mut ChaCha8Rng, lexicon: &[String]| -> (String, String) {
        let picked: Vec<&String> = lexicon.choose_multiple(rng, 3).collect();
        let generic = GENERIC.choose(rng).unwrap();
        (
            format!("a {generic} that is {} or {} {}", picked[0], picked[1], picked[2]),
            picked[0].clone(),
        )
    };

    for domain in 0..p {
        for _ in 0..config.words_per_domain {
            let syllables = 2 + rng.gen_range(0..2);
            let word = namer.fresh(&mut rng, syllables);
            word_vectors.insert(word.clone(), jitter(&mut rng, &word_centres[domain], 0.4))?;
            let n_senses = rng.gen_range(1..=config.max_senses_per_word);
            let mut senses = Vec::new();
            for _ in 0..n_senses {
                let id = format!("sense{sense_counter:05}");
                sense_counter += 1;
                sentence.insert(id.clone(), jitter(&mut rng, &centres[domain], config.noise))?;
                senses.push(SenseDef {
                    sense_id: id,
                    definition: describe(&mut rng, &lexicons[domain]).0,
                    pos: Some("ADJ".into()),
                });
            }
            inventory.insert(word.clone(), senses);
            for _ in 0..config.definitions_per_word {
                let (text, paraphrase) = describe(&mut rng, &lexicons[p + domain]);
                definitions.push(SlangDefinition {
                    id: format!("def{:05}", definitions.len()),
                    word: word.clone(),
                    domain: p + domain,
                    text,
                    paraphrase,
                    split: Split::Train,
                });
            }
        }
    }

    let mut order: Vec<usize> = (0..definitions.len()).collect();
    order.shuffle(&mut rng);
    let n_test = (definitions.len() as f64 * config.test_fraction).round() as usize;
    for &i in &order[..n_test] {
        definitions[i].split = Split::Test;
    }

    let mut entries = Vec::new();
    let mut candidates = Vec::new();
    let mut translations = Vec::new();
    let mut answers = BTreeMap::new();
    let mut bleurt = MetricScores::new();
    let mut comet = MetricScores::new();
    let stop: Vec<&str> = STOPWORDS.to_vec();

    for def in &definitions {
        let gt = jitter(&mut rng, &centres[def.domain], config.noise);
        sentence.insert(def.id.clone(), gt.clone())?;
        let n_examples = rng.gen_range(config.min_examples_per_definition..=config.max_examples_per_definition);
        for k in 0..n_examples {
            let mut tokens: Vec<String> = Vec::new();
            for _ in 0..rng.gen_range(0..=5) {
                if rng.gen_bool(0.5) {
                    tokens.push(stop.choose(&mut rng).unwrap().to_string());
                }
                tokens.push(fillers.choose(&mut rng).unwrap().clone());
            }
            let at = rng.gen_range(0..=tokens.len());
            tokens.insert(at, def.word.clone());
            if rng.gen_bool(0.5) {
                tokens.insert(0, "so".into());
            }
            let example = format!("{}.", tokens.join(" "));
            debug_assert_eq!(text::count_occurrences(&example, &def.word), 1);
            let entry = GlossEntry {
                entry_id: format!("{}:{k}", def.id),
                definition_id: def.id.clone(),
                word: def.word.clone(),
                definition: def.text.clone(),
                example: example.clone(),
                pos: Some("ADJ".into()),
                split: def.split,
                source: config.source.clone(),
            };

            let n = config.candidates_per_query;
            let right = if rng.gen_bool(config.generator_hit_rate) {
                0
            } else {
                rng.gen_range(1..n)
            };
            answers.insert(entry.entry_id.clone(), right);
            let mut list = Vec::with_capacity(n);
            let mut trans = Vec::with_capacity(n);
            for rank in 0..n {
                let (vector, definition, surface) = if rank == right {
                    let v = jitter(&mut rng, &gt, 0.25 * config.noise);
                    (v, format!("{}: {}", def.paraphrase, def.text), def.paraphrase.clone())
                } else {
                    let other = p + (def.domain - p + rng.gen_range(1..p)) % p;
                    let (text, para) = describe(&mut rng, &lexicons[other]);
                    (
                        jitter(&mut rng, &centres[other], config.noise),
                        format!("{para}: {text}"),
                        para,
                    )
                };
                let id = format!("cand:{}:{rank}", entry.entry_id);
                sentence.insert(id.clone(), vector)?;
                list.push(Candidate {
                    rank_in: rank,
                    surface: Some(surface.clone()),
                    definition,
                    definition_embedding_id: id,
                    gen_score: Some(-(rank as f64) - 1.0),
                    pos_match: Some(true),
                });
                let interpreted = insert_paraphrase(&example, &def.word, &surface)?;
                trans.push(TranslationCandidate {
                    paraphrase: surface,
                    translation: mock_translate(&interpreted),
                    interpreted_source: interpreted,
                    bleu: None,
                    bleurt: None,
                    comet: None,
                });
            }
            candidates.push(CandidateSet {
                query_id: entry.entry_id.clone(),
                word: def.word.clone(),
                context: example.clone(),
                generator: "synthetic-infill".into(),
                candidates: list,
            });
            if def.split == Split::Test {
                let gold = mock_translate(&insert_paraphrase(&example, &def.word, &def.paraphrase)?);
                for (rank, c) in trans.iter().enumerate() {
                    let b = sentence_bleu_str(&c.translation, &gold)? / 100.0;
                    let key = (entry.entry_id.clone(), rank);
                    bleurt.insert(key.clone(), 0.2 + 0.6 * b + 0.05 * rng.sample::<f64, _>(StandardNormal));
                    comet.insert(key, -0.3 + 0.9 * b + 0.05 * rng.sample::<f64, _>(StandardNormal));
                }
                translations.push(TranslationRecord {
                    query_id: entry.entry_id.clone(),
                    word: def.word.clone(),
                    source: example,
                    gold_translation: gold,
                    candidates: trans,
                });
            }
            entries.push(entry);
        }
    }

    // entries preprocessing has to drop: unlisted word, double mention, no mention
    for i in 0..config.rejected_entries {
        let base = &definitions[i % definitions.len()];
        let (word, example) = match i % 3 {
            0 => {
                let w = namer.fresh(&mut rng, 4);
                (w.clone(), format!("that {w} again."))
            }
            1 => (base.word.clone(), format!("{} and {} again.", base.word, base.word)),
            _ => (base.word.clone(), format!("{} again.", fillers[0])),
        };
        entries.push(GlossEntry {
            entry_id: format!("rejected{i}"),
            definition_id: format!("rejected{i}"),
            word,
            definition: base.text.clone(),
            example,
            pos: None,
            split: Split::Train,
            source: config.source.clone(),
        });
    }

    Ok(SyntheticCorpus {
        entries,
        inventory: SenseInventory::new(inventory)?,
        stopwords: STOPWORDS.iter().map(|s| s.to_string()).collect(),
        sentence_embeddings: sentence,
        word_vectors,
        candidates,
        translations,
        bleurt,
        comet,
        answers,
    })
}
