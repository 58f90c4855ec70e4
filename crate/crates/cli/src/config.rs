//! Run configuration: one TOML file per run. Relative paths resolve
//! against the file's directory; `SLANG_INTERP_<KEY>` environment variables
//! override individual path keys (lists use the platform path separator).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use slang_interp::contrastive::TrainConfig;
use slang_interp::eval_mrr::NegativeMode;
use slang_interp::eval_translation::DEFAULT_CURVE_LENGTH;
use slang_interp::reranker::RerankConfig;

use crate::error::{CliError, CliResult};

pub const ENV_PREFIX: &str = "SLANG_INTERP_";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Gloss JSONL files, one entry per usage sentence.
    pub glosses: Vec<PathBuf>,
    /// Gloss JSONL files with an `examples` array per definition.
    pub raw_glosses: Vec<PathBuf>,
    pub inventory: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    /// Baseline sentence-embedding TSVs, merged on load.
    pub sentence_embeddings: Vec<PathBuf>,
    pub word_vectors: Option<PathBuf>,
    pub candidates: Option<PathBuf>,
    pub translations: Option<PathBuf>,
    pub bleurt: Option<PathBuf>,
    pub comet: Option<PathBuf>,
    /// Pipeline intermediates; default to files in `out_dir`.
    pub dataset: Option<PathBuf>,
    pub encoder: Option<PathBuf>,
    pub ranked: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSection {
    /// Share of training definitions moved to dev when the data has none.
    pub dev_fraction: f64,
    #[serde(flatten)]
    pub config: TrainConfig,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            dev_fraction: 0.05,
            config: TrainConfig::default(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSection {
    /// Fixed `h_m`. When unset, the best value of `grid` on the dev split
    /// is used, or the library default without a grid.
    pub h_m: Option<f64>,
    pub grid: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// Evaluation repeats; run r samples negatives with seed `seed + r`.
    pub runs: u64,
    pub modes: Vec<NegativeMode>,
    pub curve_length: usize,
    /// Trials of the stand-alone random-guess harness.
    pub random_trials: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            runs: 5,
            modes: vec![NegativeMode::Distinct, NegativeMode::Random],
            curve_length: DEFAULT_CURVE_LENGTH,
            random_trials: 100_000,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seeds training, the dev split and evaluation; overrides `train.seed`.
    pub seed: u64,
    /// Source recorded for gloss lines that carry none.
    pub source_label: Option<String>,
    pub paths: Paths,
    pub train: TrainSection,
    pub rerank: RerankConfig,
    pub kernel: KernelSection,
    pub eval: EvalSection,
}

/// Command-line overrides applied after the file and environment.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub no_cf: bool,
}

impl RunConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> CliResult<Self> {
        let mut config: RunConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.paths.resolve(base_dir);
        Ok(config)
    }

    /// Reads `path` and applies environment overrides from the process.
    pub fn load(path: &Path) -> CliResult<Self> {
        Self::load_with_env(path, |k| std::env::var_os(k))
    }

    pub fn load_with_env<F>(path: &Path, env: F) -> CliResult<Self>
    where
        F: Fn(&str) -> Option<std::ffi::OsString>,
    {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let mut config = Self::from_toml(&text, base)?;
        config.paths.apply_env(env);
        Ok(config)
    }

    pub fn apply(&mut self, overrides: &Overrides) {
        if let Some(seed) = overrides.seed {
            self.seed = seed;
        }
        if let Some(out) = &overrides.out_dir {
            self.paths.out_dir = Some(out.clone());
        }
        if overrides.no_cf {
            self.rerank.use_cf = false;
        }
    }

    /// Checks every numeric field; path checks happen per command.
    pub fn validate(&self) -> CliResult<()> {
        let invalid = |e: slang_interp::Error| CliError::Config(e.to_string());
        self.train_config().validate().map_err(invalid)?;
        self.rerank.validate().map_err(invalid)?;
        if !(0.0..1.0).contains(&self.train.dev_fraction) {
            return Err(CliError::Config("train.dev_fraction must lie in [0, 1)".into()));
        }
        if let Some(h) = self.kernel.h_m {
            if !(h > 0.0 && h.is_finite()) {
                return Err(CliError::Config("kernel.h_m must be positive".into()));
            }
        }
        if self.kernel.grid.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
            return Err(CliError::Config("kernel.grid values must be positive".into()));
        }
        if self.eval.runs == 0 || self.eval.modes.is_empty() {
            return Err(CliError::Config("eval needs at least one run and one mode".into()));
        }
        if self.eval.curve_length == 0 || self.eval.random_trials == 0 {
            return Err(CliError::Config(
                "eval.curve_length and eval.random_trials must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.train.config.clone()
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.paths.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn dataset_path(&self) -> PathBuf {
        self.paths
            .dataset
            .clone()
            .unwrap_or_else(|| self.out_dir().join("dataset.jsonl"))
    }

    pub fn encoder_path(&self) -> PathBuf {
        self.paths
            .encoder
            .clone()
            .unwrap_or_else(|| self.out_dir().join("encoder.txt"))
    }

    pub fn ranked_path(&self) -> PathBuf {
        self.paths
            .ranked
            .clone()
            .unwrap_or_else(|| self.out_dir().join("ranked.jsonl"))
    }
}

impl Paths {
    fn resolve(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        self.glosses.iter_mut().for_each(join);
        self.raw_glosses.iter_mut().for_each(join);
        self.sentence_embeddings.iter_mut().for_each(join);
        for p in self.singles_mut().into_iter().flatten() {
            join(p);
        }
    }

    fn singles_mut(&mut self) -> [&mut Option<PathBuf>; 11] {
        [
            &mut self.inventory,
            &mut self.stopwords,
            &mut self.word_vectors,
            &mut self.candidates,
            &mut self.translations,
            &mut self.bleurt,
            &mut self.comet,
            &mut self.dataset,
            &mut self.encoder,
            &mut self.ranked,
            &mut self.out_dir,
        ]
    }

    fn apply_env<F>(&mut self, env: F)
    where
        F: Fn(&str) -> Option<std::ffi::OsString>,
    {
        let key = |name: &str| format!("{ENV_PREFIX}{}", name.to_ascii_uppercase());
        for (name, list) in [
            ("glosses", &mut self.glosses),
            ("raw_glosses", &mut self.raw_glosses),
            ("sentence_embeddings", &mut self.sentence_embeddings),
        ] {
            if let Some(v) = env(&key(name)) {
                *list = std::env::split_paths(&v).collect();
            }
        }
        const SINGLES: [&str; 11] = [
            "inventory",
            "stopwords",
            "word_vectors",
            "candidates",
            "translations",
            "bleurt",
            "comet",
            "dataset",
            "encoder",
            "ranked",
            "out_dir",
        ];
        for (name, slot) in SINGLES.iter().zip(self.singles_mut()) {
            if let Some(v) = env(&key(name)) {
                *slot = Some(PathBuf::from(v));
            }
        }
    }
}
