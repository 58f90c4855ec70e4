//! Writes seeded synthetic corpora together with a ready-to-run config.

use std::path::Path;

use slang_interp::synthetic::{generate, SyntheticConfig};
use slang_interp::{io, Error};

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    /// 50 entries (two definitions per word, one example each), 10-dim
    /// embeddings, 5 candidates per query.
    Mini50,
    /// A few hundred entries with strongly clustered extensions.
    Planted,
}

impl Preset {
    pub fn config(self, seed: u64) -> SyntheticConfig {
        match self {
            Preset::Mini50 => SyntheticConfig {
                seed,
                dim: 10,
                domains: 5,
                words_per_domain: 5,
                max_senses_per_word: 3,
                definitions_per_word: 2,
                min_examples_per_definition: 1,
                max_examples_per_definition: 1,
                test_fraction: 0.4,
                candidates_per_query: 5,
                generator_hit_rate: 0.3,
                noise: 0.5,
                rejected_entries: 0,
                source: "mini50".into(),
            },
            Preset::Planted => SyntheticConfig {
                seed,
                ..SyntheticConfig::default()
            },
        }
    }

    fn run_config(self, seed: u64, dim: usize) -> String {
        format!(
            r#"seed = {seed}
source_label = "synthetic"

[paths]
glosses = ["glosses.jsonl"]
inventory = "inventory.jsonl"
stopwords = "stopwords.txt"
sentence_embeddings = ["sentence_embeddings.tsv"]
word_vectors = "word_vectors.tsv"
candidates = "candidates.jsonl"
translations = "translations.jsonl"
bleurt = "bleurt.tsv"
comet = "comet.tsv"
out_dir = "out"

[train]
output_dim = {dim}
epochs = {epochs}

[kernel]
grid = [0.1, 0.5, 1.0, 2.0]

[rerank]
h_cf = 0.1
neighborhood_size = 5
"#,
            epochs = match self {
                Preset::Mini50 => 10,
                Preset::Planted => 8,
            },
        )
    }
}

/// Generates the preset corpus into `dir` with a `run.toml` next to it.
pub fn cmd_synth(preset: Preset, seed: u64, dir: &Path) -> CliResult<()> {
    let config = preset.config(seed);
    let corpus = generate(&config).map_err(|e| CliError::Config(e.to_string()))?;
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    corpus.write_to_dir(dir)?;
    io::write_string(&dir.join("run.toml"), &preset.run_config(seed, config.dim))?;
    Ok(())
}
