//! Values frozen from oracles/numeric_reference.py (numpy/scipy and plain
//! enumeration), compared against the library.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;

use serde_json::Value;
use slang_interp::contrastive::{build_triplets, EncoderParams, TrainConfig};
use slang_interp::corpus::{load_glosses, load_inventory, Dataset, SenseDef, SenseInventory};
use slang_interp::embeddings::{cosine_distance, euclidean_distance, load_table, EmbeddingKind, EmbeddingTable};
use slang_interp::eval_mrr::{rank_groundtruth, ChoiceItem, DefinitionOption, NegativeMode};
use slang_interp::reranker::{neighborhood, Candidate, CandidateSet, RerankConfig, Reranker};
use slang_interp::semantic::PrototypeModel;

fn reference() -> Value {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/numeric_reference.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

fn option(id: &str) -> DefinitionOption {
    DefinitionOption {
        definition: format!("definition {id}"),
        embedding_id: id.to_string(),
    }
}

#[test]
fn distances_match_scipy() {
    let r = reference();
    let pairs = r["distances"].as_array().unwrap();
    assert_eq!(pairs.len(), 100);
    for p in pairs {
        let (u, v) = (floats(&p["u"]), floats(&p["v"]));
        let e = euclidean_distance(&u, &v).unwrap();
        let c = cosine_distance(&u, &v).unwrap();
        assert!((e - p["euclidean"].as_f64().unwrap()).abs() < 1e-10);
        assert!((c - p["cosine"].as_f64().unwrap()).abs() < 1e-10);
    }
}

#[test]
fn seven_sense_prototype_is_the_mean_encoding() {
    let r = reference();
    let p = &r["prototype"];
    let dims: Vec<usize> = p["dims"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_u64().unwrap() as usize)
        .collect();
    let encoder = EncoderParams::from_parts(
        dims[0],
        dims[1],
        dims[2],
        floats(&p["w1"]),
        floats(&p["b1"]),
        floats(&p["w2"]),
        floats(&p["b2"]),
    )
    .unwrap();
    let mut table = EmbeddingTable::new(dims[0], EmbeddingKind::Sentence).unwrap();
    let mut senses = Vec::new();
    for (i, s) in p["senses"].as_array().unwrap().iter().enumerate() {
        let id = format!("wide{i}");
        table.insert(id.clone(), floats(s)).unwrap();
        senses.push(SenseDef {
            sense_id: id,
            definition: format!("sense {i}"),
            pos: None,
        });
    }
    assert_eq!(senses.len(), 7);
    let inventory = SenseInventory::new(BTreeMap::from([("wide".to_string(), senses)])).unwrap();
    let model = PrototypeModel::new(Arc::new(encoder), Arc::new(table), Arc::new(inventory), 1.0).unwrap();
    let got = model.prototype("wide").unwrap();
    for (g, e) in got.iter().zip(floats(&p["mean"])) {
        assert!((g - e).abs() < 1e-10, "{g} vs {e}");
    }
}

/// Near-identity 2-d encoder; inputs are pre-warped with atanh so the
/// encodings land on the intended points up to rounding.
fn identity_encoder() -> EncoderParams {
    let s = 1e-3;
    EncoderParams::from_parts(
        2,
        2,
        2,
        vec![s, 0.0, 0.0, s],
        vec![0.0; 2],
        vec![1.0 / s, 0.0, 0.0, 1.0 / s],
        vec![0.0; 2],
    )
    .unwrap()
}

fn warp(p: [f64; 2]) -> Vec<f64> {
    let s = 1e-3;
    p.iter().map(|x| (x * s).atanh() / s).collect()
}

#[test]
fn kernel_weights_for_hand_set_distances() {
    let r = reference();
    let k = &r["kernel_weights"];
    let distances = floats(&k["distances"]);
    let mut table = EmbeddingTable::new(2, EmbeddingKind::Sentence).unwrap();
    table.insert("proto", warp([0.0, 0.0])).unwrap();
    let mut candidates = Vec::new();
    for (i, d) in distances.iter().enumerate() {
        let id = format!("c{i}");
        table.insert(id.clone(), warp([*d, 0.0])).unwrap();
        candidates.push(Candidate {
            rank_in: i,
            surface: None,
            definition: format!("candidate {i}"),
            definition_embedding_id: id,
            gen_score: None,
            pos_match: None,
        });
    }
    let inventory = SenseInventory::new(BTreeMap::from([(
        "word".to_string(),
        vec![SenseDef {
            sense_id: "proto".into(),
            definition: "the only sense".into(),
            pos: None,
        }],
    )]))
    .unwrap();
    let table = Arc::new(table);
    let model = PrototypeModel::new(
        Arc::new(identity_encoder()),
        table.clone(),
        Arc::new(inventory),
        k["h_m"].as_f64().unwrap(),
    )
    .unwrap();
    let mut words = EmbeddingTable::new(2, EmbeddingKind::Word).unwrap();
    words.insert("word", vec![1.0, 0.0]).unwrap();
    let vocab = vec!["word".to_string()];
    let config = RerankConfig::default();
    let reranker = Reranker::new(&model, &table, &words, &vocab, &config).unwrap();
    let set = CandidateSet {
        query_id: "q".into(),
        word: "word".into(),
        context: "a word here".into(),
        generator: "hand".into(),
        candidates,
    };
    let got = reranker.score_g(&set).unwrap();
    for (g, e) in got.iter().zip(floats(&k["weights"])) {
        assert!((g - e).abs() < 1e-10, "{g} vs {e}");
    }
}

#[test]
fn neighborhood_matches_exhaustive_sort() {
    let r = reference();
    let n = &r["neighborhood"];
    let words: Vec<String> = n["words"]
        .as_array()
        .unwrap()
        .iter()
        .map(|w| w.as_str().unwrap().to_string())
        .collect();
    let mut table = EmbeddingTable::new(5, EmbeddingKind::Word).unwrap();
    for (w, v) in words.iter().zip(n["vectors"].as_array().unwrap()) {
        table.insert(w.clone(), floats(v)).unwrap();
    }
    let expected: Vec<String> = n["expected"]
        .as_array()
        .unwrap()
        .iter()
        .map(|w| w.as_str().unwrap().to_string())
        .collect();
    let query = n["query"].as_str().unwrap();
    for size in [1, 2, 5, 20, 30] {
        let got = neighborhood(query, &words, &table, size).unwrap();
        assert_eq!(got, expected[..size.min(expected.len())].to_vec(), "size {size}");
    }
}

#[test]
fn groundtruth_ranks_match_exhaustive_sort() {
    let r = reference();
    let mut table = EmbeddingTable::new(3, EmbeddingKind::Sentence).unwrap();
    for (id, v) in r["ranks"]["table"].as_object().unwrap() {
        table.insert(id.clone(), floats(v)).unwrap();
    }
    let items = r["ranks"]["items"].as_array().unwrap();
    assert_eq!(items.len(), 20);
    let mut ties = 0;
    for (k, it) in items.iter().enumerate() {
        let gt = it["groundtruth"].as_str().unwrap();
        let negatives: Vec<&str> = it["negatives"]
            .as_array()
            .unwrap()
            .iter()
            .map(|x| x.as_str().unwrap())
            .collect();
        let prediction = floats(&it["prediction"]);
        let item = ChoiceItem {
            query_id: format!("item{k}"),
            groundtruth: option(gt),
            negatives: negatives.iter().map(|n| option(n)).collect(),
            mode: NegativeMode::Random,
            seed: 0,
        };
        let d = |id: &str| euclidean_distance(&prediction, table.get(id).unwrap()).unwrap();
        ties += negatives.iter().filter(|n| d(n) == d(gt)).count();
        assert_eq!(
            rank_groundtruth(&prediction, &item, &table).unwrap(),
            it["rank"].as_u64().unwrap() as usize,
            "item {k}"
        );
    }
    // the integer grid makes some exact ties; make sure they are exercised
    assert!(ties > 0);
}

#[test]
fn triplets_match_independent_enumeration() {
    let r = reference();
    let t = &r["triplets"];
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mini50");
    let entries = load_glosses(&dir.join("glosses.jsonl"), "mini50").unwrap();
    assert_eq!(entries.len(), 50);
    let inventory = load_inventory(&dir.join("inventory.jsonl")).unwrap();
    let embeddings = load_table(&dir.join("sentence_embeddings.tsv"), EmbeddingKind::Sentence).unwrap();
    let dataset = Dataset::new(entries, inventory, BTreeSet::new()).unwrap();

    let expected_pairs: Vec<(String, String)> = t["anchor_positive_pairs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| (p[0].as_str().unwrap().to_string(), p[1].as_str().unwrap().to_string()))
        .collect();
    let forbidden = t["forbidden_negatives"].as_object().unwrap();
    let pool: BTreeSet<String> = dataset
        .inventory
        .iter()
        .flat_map(|(_, s)| s.iter().map(|d| d.sense_id.clone()))
        .collect();
    assert_eq!(pool.len() as u64, t["pool_size"].as_u64().unwrap());

    for k in [1, 3] {
        let config = TrainConfig {
            negatives_per_positive: k,
            ..TrainConfig::default()
        };
        let triplets = build_triplets(&dataset, &embeddings, &config).unwrap();
        let mut pairs: Vec<(String, String)> = triplets
            .iter()
            .map(|t| (t.anchor.clone(), t.positive.clone()))
            .collect();
        pairs.sort();
        let mut want: Vec<(String, String)> = expected_pairs
            .iter()
            .flat_map(|p| std::iter::repeat_n(p.clone(), k))
            .collect();
        want.sort();
        assert_eq!(pairs, want);
        for tr in &triplets {
            assert!(pool.contains(&tr.negative));
            let own: Vec<&str> = forbidden[&tr.anchor]
                .as_array()
                .unwrap()
                .iter()
                .map(|x| x.as_str().unwrap())
                .collect();
            assert!(!own.contains(&tr.negative.as_str()), "{tr:?}");
        }
    }
}
