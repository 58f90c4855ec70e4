use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use slang_interp::contrastive::{train_encoder, EncoderParams, TrainConfig, TripletSampler};
use slang_interp::corpus::{filter_entries, Dataset, Split};
use slang_interp::eval_mrr::{derive_seed, mrr, rank_groundtruth, sample_negatives, DefinitionOption, NegativeMode};
use slang_interp::reranker::{RerankConfig, Reranker};
use slang_interp::semantic::PrototypeModel;
use slang_interp::synthetic::{generate, SyntheticConfig};

/// MRR of (generator top-1, reranked top-1, planted answer) on the test split.
fn run(rerank: &RerankConfig, h_m: f64, trained: bool) -> (f64, f64, f64) {
    let corpus = generate(&SyntheticConfig::default()).unwrap();
    let dataset = Dataset::new(
        corpus.entries.clone(),
        corpus.inventory.clone(),
        corpus.stopwords.clone(),
    )
    .unwrap();
    let (dataset, _) = filter_entries(dataset);
    let config = TrainConfig {
        output_dim: 16,
        epochs: 8,
        ..TrainConfig::default()
    };
    let sampler = TripletSampler::new(&dataset, Split::Train, &corpus.sentence_embeddings, &config).unwrap();
    let encoder = if trained {
        train_encoder(&sampler, &[], &corpus.sentence_embeddings, &config)
            .unwrap()
            .0
    } else {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(config.seed);
        EncoderParams::init(16, 16, 16, &mut rng)
    };
    let model = PrototypeModel::new(
        Arc::new(encoder),
        Arc::new(corpus.sentence_embeddings.clone()),
        Arc::new(dataset.inventory.clone()),
        h_m,
    )
    .unwrap();
    let vocab = dataset.slang_vocabulary();
    let reranker = Reranker::new(
        &model,
        &corpus.sentence_embeddings,
        &corpus.word_vectors,
        &vocab,
        rerank,
    )
    .unwrap();
    let pool: Vec<DefinitionOption> = dataset
        .definitions(Split::Train)
        .into_iter()
        .map(|d| DefinitionOption {
            definition: d.definition,
            embedding_id: d.definition_id,
        })
        .collect();
    let sets: std::collections::HashMap<_, _> = corpus.candidates.iter().map(|c| (c.query_id.clone(), c)).collect();
    let (mut base, mut ssi, mut oracle) = (vec![], vec![], vec![]);
    for (i, e) in dataset.entries_in(Split::Test).enumerate() {
        let gt = DefinitionOption {
            definition: e.definition.clone(),
            embedding_id: e.definition_id.clone(),
        };
        let item = sample_negatives(
            &e.entry_id,
            &gt,
            &pool,
            NegativeMode::Random,
            derive_seed(0, i as u64),
            &dataset.stopwords,
        )
        .unwrap();
        let set = sets[&e.entry_id];
        let emb = &corpus.sentence_embeddings;
        base.push(rank_groundtruth(emb.get(&set.candidates[0].definition_embedding_id).unwrap(), &item, emb).unwrap());
        let top = reranker.rerank(set).unwrap();
        ssi.push(rank_groundtruth(emb.get(&top.top().definition_embedding_id).unwrap(), &item, emb).unwrap());
        let right = corpus.answers[&e.entry_id];
        oracle.push(
            rank_groundtruth(
                emb.get(&set.candidates[right].definition_embedding_id).unwrap(),
                &item,
                emb,
            )
            .unwrap(),
        );
    }
    (mrr(&base).unwrap(), mrr(&ssi).unwrap(), mrr(&oracle).unwrap())
}

#[test]
fn trained_reranker_beats_generator_order() {
    let start = Instant::now();
    for h_m in [0.1, 1.0] {
        for use_cf in [false, true] {
            let cfg = RerankConfig {
                use_cf,
                ..RerankConfig::default()
            };
            let (base, ssi, planted) = run(&cfg, h_m, true);
            assert_eq!(planted, 1.0);
            assert!(ssi - base >= 0.05, "h_m={h_m} cf={use_cf}: {base} -> {ssi}");
        }
    }
    assert!(start.elapsed().as_secs() < 120);
}

#[test]
fn untrained_encoder_does_not_find_extensions() {
    let (_, trained, _) = run(&RerankConfig::default(), 1.0, true);
    let (_, untrained, _) = run(&RerankConfig::default(), 1.0, false);
    assert!(trained - untrained > 0.2, "{untrained} vs {trained}");
}
