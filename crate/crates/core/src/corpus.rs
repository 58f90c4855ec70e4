//! Slang gloss datasets, the conventional sense inventory, and the
//! preprocessing rules applied before training and evaluation.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::text;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        })
    }
}

/// One slang definition paired with one usage sentence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlossEntry {
    pub entry_id: String,
    pub definition_id: String,
    pub word: String,
    pub definition: String,
    pub example: String,
    pub pos: Option<String>,
    pub split: Split,
    pub source: String,
}

#[derive(Deserialize)]
struct GlossLine {
    entry_id: String,
    definition_id: String,
    word: String,
    definition: String,
    example: String,
    #[serde(default)]
    pos: Option<String>,
    split: Split,
    #[serde(default)]
    source: Option<String>,
}

/// A slang definition with all of its usage sentences, before fan-out.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawGlossRecord {
    pub definition_id: String,
    pub word: String,
    pub definition: String,
    pub examples: Vec<String>,
    #[serde(default)]
    pub pos: Option<String>,
    pub split: Split,
    pub source: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SenseDef {
    pub sense_id: String,
    pub definition: String,
    pub pos: Option<String>,
}

#[derive(Deserialize, Serialize)]
struct SenseLine {
    word: String,
    sense_id: String,
    definition: String,
    #[serde(default)]
    pos: Option<String>,
}

/// Conventional (standard dictionary) senses per word form.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SenseInventory {
    senses: BTreeMap<String, Vec<SenseDef>>,
}

impl SenseInventory {
    pub fn new(senses: BTreeMap<String, Vec<SenseDef>>) -> Result<Self> {
        let mut seen = HashSet::new();
        for (word, defs) in &senses {
            if defs.is_empty() {
                return Err(Error::Invalid(format!("word `{word}` has no senses")));
            }
            for d in defs {
                if !seen.insert(d.sense_id.as_str()) {
                    return Err(Error::DuplicateId {
                        kind: "sense",
                        id: d.sense_id.clone(),
                    });
                }
            }
        }
        Ok(SenseInventory { senses })
    }

    pub fn senses(&self, word: &str) -> Option<&[SenseDef]> {
        self.senses.get(word).map(Vec::as_slice)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.senses.contains_key(word)
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.senses.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[SenseDef])> {
        self.senses.iter().map(|(w, s)| (w.as_str(), s.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.senses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.senses.is_empty()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let lines: Vec<SenseLine> = self
            .iter()
            .flat_map(|(word, defs)| {
                defs.iter().map(move |d| SenseLine {
                    word: word.to_string(),
                    sense_id: d.sense_id.clone(),
                    definition: d.definition.clone(),
                    pos: d.pos.clone(),
                })
            })
            .collect();
        io::write_jsonl(path, &lines)
    }
}

pub fn load_inventory(path: &Path) -> Result<SenseInventory> {
    let mut senses: BTreeMap<String, Vec<SenseDef>> = BTreeMap::new();
    for (line, s) in io::read_jsonl::<SenseLine>(path)? {
        if s.definition.trim().is_empty() {
            return Err(Error::parse(path, line, "empty sense definition"));
        }
        senses.entry(s.word).or_default().push(SenseDef {
            sense_id: s.sense_id,
            definition: s.definition,
            pos: s.pos,
        });
    }
    SenseInventory::new(senses)
}

pub fn load_stopwords(path: &Path) -> Result<BTreeSet<String>> {
    Ok(io::data_lines(path)?
        .into_iter()
        .map(|(_, l)| l.trim().to_lowercase())
        .collect())
}

/// Reads gloss JSONL. Lines without a `source` take `source_label`.
pub fn load_glosses(path: &Path, source_label: &str) -> Result<Vec<GlossEntry>> {
    let mut seen = HashSet::new();
    let mut entries = Vec::new();
    for (line, g) in io::read_jsonl::<GlossLine>(path)? {
        if g.entry_id.is_empty() || g.definition_id.is_empty() {
            return Err(Error::parse(path, line, "empty entry_id or definition_id"));
        }
        if g.word.trim().is_empty() {
            return Err(Error::parse(path, line, "empty word"));
        }
        if g.definition.trim().is_empty() {
            return Err(Error::parse(path, line, "empty definition"));
        }
        if !seen.insert(g.entry_id.clone()) {
            return Err(Error::DuplicateId {
                kind: "entry",
                id: g.entry_id,
            });
        }
        entries.push(GlossEntry {
            entry_id: g.entry_id,
            definition_id: g.definition_id,
            word: g.word,
            definition: g.definition,
            example: g.example,
            pos: g.pos,
            split: g.split,
            source: g.source.unwrap_or_else(|| source_label.to_string()),
        });
    }
    check_split_consistency(&entries)?;
    Ok(entries)
}

pub fn write_glosses(path: &Path, entries: &[GlossEntry]) -> Result<()> {
    io::write_jsonl(path, entries)
}

fn check_split_consistency(entries: &[GlossEntry]) -> Result<()> {
    let mut splits: HashMap<&str, Split> = HashMap::new();
    for e in entries {
        match splits.insert(&e.definition_id, e.split) {
            Some(prev) if prev != e.split => {
                return Err(Error::Invalid(format!(
                    "definition `{}` appears in both {prev} and {}",
                    e.definition_id, e.split
                )))
            }
            _ => {}
        }
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub entries: Vec<GlossEntry>,
    pub inventory: SenseInventory,
    pub stopwords: BTreeSet<String>,
}

/// A slang definition shared by one or more entries.
#[derive(Clone, Debug, PartialEq)]
pub struct DefinitionRecord {
    pub definition_id: String,
    pub word: String,
    pub definition: String,
    pub split: Split,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub unique_word_forms: usize,
    pub definition_entries: usize,
    pub context_sentences: usize,
    pub test_definitions: usize,
    pub test_sentences: usize,
}

impl Dataset {
    pub fn new(entries: Vec<GlossEntry>, inventory: SenseInventory, stopwords: BTreeSet<String>) -> Result<Self> {
        check_split_consistency(&entries)?;
        Ok(Dataset {
            entries,
            inventory,
            stopwords,
        })
    }

    pub fn entries_in(&self, split: Split) -> impl Iterator<Item = &GlossEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    /// Sorted, deduplicated slang word forms.
    pub fn slang_vocabulary(&self) -> Vec<String> {
        self.entries
            .iter()
            .map(|e| e.word.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    /// Unique definitions of a split, ordered by definition_id.
    pub fn definitions(&self, split: Split) -> Vec<DefinitionRecord> {
        let mut by_id: BTreeMap<&str, DefinitionRecord> = BTreeMap::new();
        for e in self.entries_in(split) {
            by_id.entry(&e.definition_id).or_insert_with(|| DefinitionRecord {
                definition_id: e.definition_id.clone(),
                word: e.word.clone(),
                definition: e.definition.clone(),
                split: e.split,
            });
        }
        by_id.into_values().collect()
    }

    pub fn stats(&self) -> CorpusStats {
        let defs: HashSet<&str> = self.entries.iter().map(|e| e.definition_id.as_str()).collect();
        let test: Vec<&GlossEntry> = self.entries_in(Split::Test).collect();
        let test_defs: HashSet<&str> = test.iter().map(|e| e.definition_id.as_str()).collect();
        CorpusStats {
            unique_word_forms: self.slang_vocabulary().len(),
            definition_entries: defs.len(),
            context_sentences: self.entries.len(),
            test_definitions: test_defs.len(),
            test_sentences: test.len(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterReport {
    pub input: usize,
    pub retained: usize,
    pub no_conventional_sense: usize,
    pub no_mention: usize,
    pub multi_mention: usize,
}

impl FilterReport {
    pub fn removed(&self) -> usize {
        self.no_conventional_sense + self.no_mention + self.multi_mention
    }
}

/// Keeps entries whose word has a conventional sense and whose example
/// mentions the word exactly once.
pub fn filter_entries(dataset: Dataset) -> (Dataset, FilterReport) {
    let mut report = FilterReport {
        input: dataset.entries.len(),
        ..Default::default()
    };
    let Dataset {
        entries,
        inventory,
        stopwords,
    } = dataset;
    let entries: Vec<GlossEntry> = entries
        .into_iter()
        .filter(|e| {
            if !inventory.contains(&e.word) {
                report.no_conventional_sense += 1;
                return false;
            }
            match text::count_occurrences(&e.example, &e.word) {
                1 => true,
                0 => {
                    report.no_mention += 1;
                    false
                }
                _ => {
                    report.multi_mention += 1;
                    false
                }
            }
        })
        .collect();
    report.retained = entries.len();
    (
        Dataset {
            entries,
            inventory,
            stopwords,
        },
        report,
    )
}

/// One entry per usage sentence; siblings share definition_id and split.
pub fn expand_examples(records: &[RawGlossRecord]) -> Result<Vec<GlossEntry>> {
    let mut out = Vec::new();
    for r in records {
        if r.examples.is_empty() {
            return Err(Error::Invalid(format!(
                "definition `{}` has no example sentences",
                r.definition_id
            )));
        }
        out.extend(r.examples.iter().enumerate().map(|(i, ex)| GlossEntry {
            entry_id: format!("{}:{i}", r.definition_id),
            definition_id: r.definition_id.clone(),
            word: r.word.clone(),
            definition: r.definition.clone(),
            example: ex.clone(),
            pos: r.pos.clone(),
            split: r.split,
            source: r.source.clone(),
        }));
    }
    check_split_consistency(&out)?;
    Ok(out)
}

/// Moves a seeded `fraction` of training definitions to the dev split.
/// Leaves the entries untouched if a dev split already exists.
pub fn assign_dev_split(mut entries: Vec<GlossEntry>, fraction: f64, seed: u64) -> Vec<GlossEntry> {
    if entries.iter().any(|e| e.split == Split::Dev) {
        return entries;
    }
    let mut ids: Vec<&str> = entries
        .iter()
        .filter(|e| e.split == Split::Train)
        .map(|e| e.definition_id.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let take = (ids.len() as f64 * fraction).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    let dev: HashSet<String> = ids[..take].iter().map(|s| s.to_string()).collect();
    for e in &mut entries {
        if dev.contains(&e.definition_id) {
            e.split = Split::Dev;
        }
    }
    entries
}

/// Lowercase content tokens of `text`, with multiplicity, in order.
pub fn content_words(text: &str, stopwords: &BTreeSet<String>) -> Vec<String> {
    text::simple_preprocess(text)
        .into_iter()
        .filter(|t| !stopwords.contains(t))
        .collect()
}

/// Two definitions are distinct when their unique content words overlap by
/// less than half of the smaller set.
pub fn definitions_distinct(a: &str, b: &str, stopwords: &BTreeSet<String>) -> bool {
    let a: BTreeSet<String> = content_words(a, stopwords).into_iter().collect();
    let b: BTreeSet<String> = content_words(b, stopwords).into_iter().collect();
    let shared = a.intersection(&b).count();
    let denom = a.len().min(b.len()).max(1);
    (shared as f64) / (denom as f64) < 0.5
}
