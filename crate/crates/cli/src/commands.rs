//! The pipeline commands. Each one checks the configuration and every input
//! path before it reads data, and writes its outputs only after all of its
//! work has succeeded.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use slang_interp::contrastive::{train_encoder, EncoderParams, TripletSampler};
use slang_interp::corpus::{
    assign_dev_split, expand_examples, filter_entries, load_glosses, load_inventory, load_stopwords, write_glosses,
    CorpusStats, Dataset, FilterReport, GlossEntry, RawGlossRecord, Split,
};
use slang_interp::embeddings::{load_table, EmbeddingKind, EmbeddingTable};
use slang_interp::eval_mrr::{
    context_length, derive_seed, evaluate, mrr, random_ranks, sample_negatives, ChoiceItem, DefinitionOption,
    EvalReport, NegativeMode, QueryResult, NEGATIVES_PER_ITEM,
};
use slang_interp::eval_translation::{
    attach_metric_scores, load_metric_scores, load_translation_records, score_curve, Metric, ScoreCurve,
};
use slang_interp::reranker::{
    load_candidate_sets, load_ranked_lists, write_ranked_lists, CandidateSet, RankedList, Reranker,
};
use slang_interp::semantic::{select_kernel_width, DevQuery, PrototypeModel, DEFAULT_KERNEL_WIDTH};
use slang_interp::{io, Error};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

const DEFAULT_SOURCE: &str = "unknown";

fn require<'a>(path: Option<&'a PathBuf>, key: &str) -> CliResult<&'a Path> {
    let path = path.ok_or_else(|| CliError::Config(format!("paths.{key} is required")))?;
    if !path.is_file() {
        return Err(CliError::Config(format!(
            "paths.{key}: {} does not exist",
            path.display()
        )));
    }
    Ok(path)
}

fn require_file(path: &Path, key: &str) -> CliResult<()> {
    require(Some(&path.to_path_buf()), key).map(|_| ())
}

fn require_list(paths: &[PathBuf], key: &str) -> CliResult<()> {
    if paths.is_empty() {
        return Err(CliError::Config(format!("paths.{key} needs at least one file")));
    }
    paths.iter().try_for_each(|p| require_file(p, key))
}

fn prepare_out_dir(config: &RunConfig) -> CliResult<PathBuf> {
    let out = config.out_dir();
    std::fs::create_dir_all(&out).map_err(|e| Error::Io {
        path: out.clone(),
        source: e,
    })?;
    Ok(out)
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

fn source_label(config: &RunConfig) -> &str {
    config.source_label.as_deref().unwrap_or(DEFAULT_SOURCE)
}

fn load_dataset(config: &RunConfig) -> CliResult<Dataset> {
    let entries = load_glosses(&config.dataset_path(), source_label(config))?;
    let inventory = load_inventory(config.paths.inventory.as_deref().expect("checked"))?;
    let stopwords = load_stopwords(config.paths.stopwords.as_deref().expect("checked"))?;
    Ok(Dataset::new(entries, inventory, stopwords)?)
}

fn check_dataset_inputs(config: &RunConfig) -> CliResult<()> {
    require_file(&config.dataset_path(), "dataset")?;
    require(config.paths.inventory.as_ref(), "inventory")?;
    require(config.paths.stopwords.as_ref(), "stopwords")?;
    Ok(())
}

fn load_sentence_embeddings(config: &RunConfig) -> CliResult<EmbeddingTable> {
    let mut files = config.paths.sentence_embeddings.iter();
    let mut table = load_table(files.next().expect("checked"), EmbeddingKind::Sentence)?;
    for f in files {
        table.extend(load_table(f, EmbeddingKind::Sentence)?)?;
    }
    Ok(table)
}

fn by_query<T, F: Fn(&T) -> &str>(items: Vec<T>, key: F) -> HashMap<String, T> {
    items.into_iter().map(|t| (key(&t).to_string(), t)).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PreprocessReport {
    pub filter: FilterReport,
    pub removed: usize,
    pub dev_definitions_assigned: usize,
    pub stats: CorpusStats,
}

/// Merges gloss files, drops entries without a conventional sense or with
/// other than one exact mention, assigns a dev split if there is none, and
/// writes `dataset.jsonl` and `preprocess_report.json`.
pub fn cmd_preprocess(config: &RunConfig) -> CliResult<PreprocessReport> {
    config.validate()?;
    if config.paths.glosses.is_empty() && config.paths.raw_glosses.is_empty() {
        return Err(CliError::Config(
            "paths.glosses or paths.raw_glosses is required".into(),
        ));
    }
    config
        .paths
        .glosses
        .iter()
        .try_for_each(|p| require_file(p, "glosses"))?;
    config
        .paths
        .raw_glosses
        .iter()
        .try_for_each(|p| require_file(p, "raw_glosses"))?;
    let inventory = load_inventory(require(config.paths.inventory.as_ref(), "inventory")?)?;
    let stopwords = load_stopwords(require(config.paths.stopwords.as_ref(), "stopwords")?)?;

    let mut entries: Vec<GlossEntry> = Vec::new();
    for path in &config.paths.glosses {
        entries.extend(load_glosses(path, source_label(config))?);
    }
    for path in &config.paths.raw_glosses {
        let records: Vec<RawGlossRecord> = io::read_jsonl(path)?.into_iter().map(|(_, r)| r).collect();
        entries.extend(expand_examples(&records)?);
    }
    let mut seen = HashSet::new();
    for e in &entries {
        if !seen.insert(e.entry_id.as_str()) {
            return Err(Error::DuplicateId {
                kind: "entry_id",
                id: e.entry_id.clone(),
            }
            .into());
        }
    }

    let (filtered, filter) = filter_entries(Dataset::new(entries, inventory, stopwords)?);
    let dev_before = filtered.definitions(Split::Dev).len();
    let Dataset {
        entries,
        inventory,
        stopwords,
    } = filtered;
    let entries = assign_dev_split(entries, config.train.dev_fraction, config.seed);
    let dataset = Dataset::new(entries, inventory, stopwords)?;
    let report = PreprocessReport {
        removed: filter.removed(),
        filter,
        dev_definitions_assigned: dataset.definitions(Split::Dev).len() - dev_before,
        stats: dataset.stats(),
    };

    let out = prepare_out_dir(config)?;
    write_glosses(&config.dataset_path(), &dataset.entries)?;
    io::write_string(&out.join("preprocess_report.json"), &to_json(&report))?;
    Ok(report)
}

/// Trains the contrastive encoder on the train split (dev loss is logged
/// when a dev split exists) and writes `encoder.txt` and `train_log.tsv`.
pub fn cmd_train(config: &RunConfig) -> CliResult<slang_interp::contrastive::TrainReport> {
    config.validate()?;
    check_dataset_inputs(config)?;
    require_list(&config.paths.sentence_embeddings, "sentence_embeddings")?;

    let dataset = load_dataset(config)?;
    let embeddings = load_sentence_embeddings(config)?;
    let train = config.train_config();
    let sampler = TripletSampler::new(&dataset, Split::Train, &embeddings, &train)?;
    let dev = TripletSampler::new(&dataset, Split::Dev, &embeddings, &train)?.sample(0);
    let (encoder, report) = train_encoder(&sampler, &dev, &embeddings, &train)?;

    let out = prepare_out_dir(config)?;
    encoder.save(&config.encoder_path())?;
    io::write_string(&out.join("train_log.tsv"), &report.to_tsv())?;
    Ok(report)
}

fn definition_pool(dataset: &Dataset) -> Vec<DefinitionOption> {
    dataset
        .definitions(Split::Train)
        .into_iter()
        .map(|d| DefinitionOption {
            definition: d.definition,
            embedding_id: d.definition_id,
        })
        .collect()
}

fn groundtruth(entry: &GlossEntry) -> DefinitionOption {
    DefinitionOption {
        definition: entry.definition.clone(),
        embedding_id: entry.definition_id.clone(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RerankReport {
    pub h_m: f64,
    pub h_m_selected_on_dev: bool,
    pub h_cf: f64,
    pub neighborhood_size: usize,
    pub use_cf: bool,
    pub queries: usize,
    pub top_changed: usize,
}

/// Reranks every candidate set and writes `ranked.jsonl` and
/// `rerank_report.json`.
pub fn cmd_rerank(config: &RunConfig) -> CliResult<RerankReport> {
    config.validate()?;
    check_dataset_inputs(config)?;
    require_list(&config.paths.sentence_embeddings, "sentence_embeddings")?;
    let word_vectors_path = require(config.paths.word_vectors.as_ref(), "word_vectors")?;
    let candidates_path = require(config.paths.candidates.as_ref(), "candidates")?;
    require_file(&config.encoder_path(), "encoder")?;

    let dataset = load_dataset(config)?;
    let embeddings = Arc::new(load_sentence_embeddings(config)?);
    let word_vectors = load_table(word_vectors_path, EmbeddingKind::Word)?;
    let sets = load_candidate_sets(candidates_path)?;
    let encoder = EncoderParams::load(&config.encoder_path())?;
    let vocab = dataset.slang_vocabulary();
    let base = PrototypeModel::new(
        Arc::new(encoder),
        embeddings.clone(),
        Arc::new(dataset.inventory.clone()),
        config.kernel.h_m.unwrap_or(DEFAULT_KERNEL_WIDTH),
    )?;
    let reranker = Reranker::new(&base, &embeddings, &word_vectors, &vocab, &config.rerank)?;

    let (h_m, selected) = match config.kernel.h_m {
        Some(h) => (h, false),
        None if !config.kernel.grid.is_empty() => {
            let dev = dev_queries(config, &dataset, &sets)?;
            (
                select_kernel_width(&reranker, &dev, &embeddings, &config.kernel.grid)?,
                !dev.is_empty(),
            )
        }
        None => (DEFAULT_KERNEL_WIDTH, false),
    };
    let model = base.with_kernel_width(h_m)?;
    let reranker = reranker.with_model(&model);
    let ranked: Vec<RankedList> = sets.iter().map(|s| reranker.rerank(s)).collect::<Result<_, _>>()?;
    let report = RerankReport {
        h_m,
        h_m_selected_on_dev: selected,
        h_cf: config.rerank.h_cf,
        neighborhood_size: config.rerank.neighborhood_size,
        use_cf: config.rerank.use_cf,
        queries: ranked.len(),
        top_changed: ranked.iter().filter(|r| r.top().rank_in != 0).count(),
    };

    let out = prepare_out_dir(config)?;
    write_ranked_lists(&config.ranked_path(), &ranked)?;
    io::write_string(&out.join("rerank_report.json"), &to_json(&report))?;
    Ok(report)
}

/// Dev entries with candidate sets, scored against random-mode items.
fn dev_queries(config: &RunConfig, dataset: &Dataset, sets: &[CandidateSet]) -> CliResult<Vec<DevQuery>> {
    let pool = definition_pool(dataset);
    let by_id: HashMap<&str, &CandidateSet> = sets.iter().map(|s| (s.query_id.as_str(), s)).collect();
    let mut out = Vec::new();
    for (i, e) in dataset.entries_in(Split::Dev).enumerate() {
        let Some(set) = by_id.get(e.entry_id.as_str()) else {
            continue;
        };
        let item = sample_negatives(
            &e.entry_id,
            &groundtruth(e),
            &pool,
            NegativeMode::Random,
            derive_seed(config.seed, i as u64),
            &dataset.stopwords,
        )?;
        out.push(DevQuery {
            candidates: (*set).clone(),
            item,
        });
    }
    Ok(out)
}

pub const SYSTEMS: [&str; 3] = ["generator", "reranked", "random"];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SystemSummary {
    pub mean_mrr: f64,
    pub std_mrr: f64,
    pub per_run: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RandomHarness {
    pub options: usize,
    pub trials: usize,
    pub seed: u64,
    pub mrr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MrrSummary {
    pub queries: usize,
    pub seeds: Vec<u64>,
    /// system -> mode -> summary over runs
    pub systems: BTreeMap<String, BTreeMap<String, SystemSummary>>,
    pub runs: Vec<EvalReport>,
    pub random_harness: RandomHarness,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Multiple-choice MRR of the generator's first candidate, the reranked
/// first candidate and uniform guessing on the test split, for every run
/// and negative mode. Writes `eval_mrr.json`, one per-query TSV per system,
/// mode and seed, and the sampled items as `items_{mode}_seed{seed}.jsonl`.
pub fn cmd_eval_mrr(config: &RunConfig) -> CliResult<MrrSummary> {
    config.validate()?;
    check_dataset_inputs(config)?;
    require_list(&config.paths.sentence_embeddings, "sentence_embeddings")?;
    let candidates_path = require(config.paths.candidates.as_ref(), "candidates")?;
    require_file(&config.ranked_path(), "ranked")?;

    let dataset = load_dataset(config)?;
    let embeddings = load_sentence_embeddings(config)?;
    let sets = by_query(load_candidate_sets(candidates_path)?, |s| &s.query_id);
    let ranked = by_query(load_ranked_lists(&config.ranked_path())?, |r| &r.query_id);
    let test: Vec<&GlossEntry> = dataset.entries_in(Split::Test).collect();
    if test.is_empty() {
        return Err(Error::Empty("test split").into());
    }
    let missing = |kind: &'static str, id: &str| Error::MissingId {
        kind,
        id: id.to_string(),
    };
    let mut generator_pred = Vec::with_capacity(test.len());
    let mut reranked_pred = Vec::with_capacity(test.len());
    for e in &test {
        let set = sets
            .get(&e.entry_id)
            .ok_or_else(|| missing("candidate set", &e.entry_id))?;
        let list = ranked
            .get(&e.entry_id)
            .ok_or_else(|| missing("ranked list", &e.entry_id))?;
        generator_pred.push(set.candidates[0].definition_embedding_id.as_str());
        reranked_pred.push(list.top().definition_embedding_id.as_str());
    }
    let buckets: Vec<usize> = test.iter().map(|e| context_length(e, &dataset.stopwords)).collect();
    let pool = definition_pool(&dataset);

    let seeds: Vec<u64> = (0..config.eval.runs).map(|r| config.seed.wrapping_add(r)).collect();
    let mut files: Vec<(String, String)> = Vec::new();
    let mut runs = Vec::new();
    for &seed in &seeds {
        for &mode in &config.eval.modes {
            let items: Vec<ChoiceItem> = test
                .iter()
                .enumerate()
                .map(|(i, e)| {
                    sample_negatives(
                        &e.entry_id,
                        &groundtruth(e),
                        &pool,
                        mode,
                        derive_seed(seed, i as u64),
                        &dataset.stopwords,
                    )
                })
                .collect::<Result<_, _>>()?;
            let guesses = random_ranks(test.len(), NEGATIVES_PER_ITEM + 1, derive_seed(seed, u64::MAX));
            let random: Vec<QueryResult> = test
                .iter()
                .zip(&guesses)
                .zip(&buckets)
                .map(|((e, &rank), &bucket)| QueryResult {
                    query_id: e.entry_id.clone(),
                    rank,
                    reciprocal_rank: 1.0 / rank as f64,
                    bucket,
                })
                .collect();
            let reports = [
                evaluate(SYSTEMS[0], &items, &generator_pred, &buckets, &embeddings, seed)?,
                evaluate(SYSTEMS[1], &items, &reranked_pred, &buckets, &embeddings, seed)?,
                EvalReport::new(SYSTEMS[2], mode, seed, random)?,
            ];
            let item_lines: String = items
                .iter()
                .map(|i| serde_json::to_string(i).expect("items serialize") + "\n")
                .collect();
            files.push((format!("items_{mode}_seed{seed}.jsonl"), item_lines));
            for r in reports {
                files.push((format!("mrr_{}_{mode}_seed{seed}.tsv", r.system), r.to_tsv()));
                runs.push(r);
            }
        }
    }

    let mut systems: BTreeMap<String, BTreeMap<String, SystemSummary>> = BTreeMap::new();
    for system in SYSTEMS {
        for &mode in &config.eval.modes {
            let per_run: Vec<f64> = runs
                .iter()
                .filter(|r| r.system == system && r.mode == mode)
                .map(|r| r.mrr)
                .collect();
            let (mean_mrr, std_mrr) = mean_std(&per_run);
            systems.entry(system.to_string()).or_default().insert(
                mode.to_string(),
                SystemSummary {
                    mean_mrr,
                    std_mrr,
                    per_run,
                },
            );
        }
    }
    let trials = config.eval.random_trials;
    let summary = MrrSummary {
        queries: test.len(),
        seeds,
        systems,
        runs,
        random_harness: RandomHarness {
            options: NEGATIVES_PER_ITEM + 1,
            trials,
            seed: config.seed,
            mrr: mrr(&random_ranks(trials, NEGATIVES_PER_ITEM + 1, config.seed))?,
        },
    };

    let out = prepare_out_dir(config)?;
    for (name, contents) in &files {
        io::write_string(&out.join(name), contents)?;
    }
    io::write_string(&out.join("eval_mrr.json"), &to_json(&summary))?;
    Ok(summary)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricCurves {
    pub baseline: ScoreCurve,
    pub reranked: ScoreCurve,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MtSummary {
    pub records: usize,
    pub curve_length: usize,
    pub aggregate: String,
    pub metrics: BTreeMap<Metric, MetricCurves>,
}

fn curve_tsv(curves: &MetricCurves, length: usize) -> String {
    let mut out = format!(
        "# metric={} aggregate=mean of best-of-top-n over n=1..{length} baseline={} reranked={}\nn\tbaseline_best\tssi_best\n",
        curves.baseline.metric, curves.baseline.aggregate, curves.reranked.aggregate
    );
    for (i, (b, s)) in curves.baseline.values.iter().zip(&curves.reranked.values).enumerate() {
        out.push_str(&format!("{}\t{b}\t{s}\n", i + 1));
    }
    out
}

/// Best-of-top-n translation quality in generator order and reranked
/// order. BLEU is computed from the translations; BLEURT and COMET come
/// from metric TSVs when configured. Writes `curve_{metric}.tsv` and
/// `eval_mt.json`.
pub fn cmd_eval_mt(config: &RunConfig) -> CliResult<MtSummary> {
    config.validate()?;
    let translations = require(config.paths.translations.as_ref(), "translations")?;
    require_file(&config.ranked_path(), "ranked")?;
    let bleurt = config
        .paths
        .bleurt
        .as_ref()
        .map(|p| require(Some(p), "bleurt"))
        .transpose()?;
    let comet = config
        .paths
        .comet
        .as_ref()
        .map(|p| require(Some(p), "comet"))
        .transpose()?;

    let mut records = load_translation_records(translations)?;
    if records.is_empty() {
        return Err(Error::Empty("translation records").into());
    }
    let ranked = by_query(load_ranked_lists(&config.ranked_path())?, |r| &r.query_id);
    let mut metrics = vec![Metric::Bleu];
    for r in &mut records {
        r.fill_bleu()?;
    }
    for (path, metric) in [(bleurt, Metric::Bleurt), (comet, Metric::Comet)] {
        if let Some(path) = path {
            attach_metric_scores(&mut records, &load_metric_scores(path)?, metric)?;
            metrics.push(metric);
        }
    }
    let mut baseline_orders = Vec::with_capacity(records.len());
    let mut reranked_orders = Vec::with_capacity(records.len());
    for r in &records {
        let list = ranked.get(&r.query_id).ok_or_else(|| Error::MissingId {
            kind: "ranked list",
            id: r.query_id.clone(),
        })?;
        if list.candidates.len() != r.candidates.len() {
            return Err(Error::LengthMismatch {
                left: list.candidates.len(),
                right: r.candidates.len(),
            }
            .into());
        }
        baseline_orders.push((0..r.candidates.len()).collect::<Vec<_>>());
        reranked_orders.push(list.order());
    }
    let length = config.eval.curve_length;
    let mut curves = BTreeMap::new();
    for metric in metrics {
        curves.insert(
            metric,
            MetricCurves {
                baseline: score_curve(&records, &baseline_orders, metric, length)?,
                reranked: score_curve(&records, &reranked_orders, metric, length)?,
            },
        );
    }
    let summary = MtSummary {
        records: records.len(),
        curve_length: length,
        aggregate: format!("mean of best-of-top-n over n = 1..{length}"),
        metrics: curves,
    };

    let out = prepare_out_dir(config)?;
    for (metric, c) in &summary.metrics {
        io::write_string(&out.join(format!("curve_{metric}.tsv")), &curve_tsv(c, length))?;
    }
    io::write_string(&out.join("eval_mt.json"), &to_json(&summary))?;
    Ok(summary)
}
