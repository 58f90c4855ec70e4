//! Small hand-planted worlds where the right answer is known in advance.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use slang_interp::contrastive::{train_encoder, EncoderParams, TrainConfig, TripletSampler};
use slang_interp::corpus::{Dataset, GlossEntry, SenseDef, SenseInventory, Split};
use slang_interp::embeddings::{EmbeddingKind, EmbeddingTable};
use slang_interp::eval_mrr::{mrr, rank_groundtruth, ChoiceItem, DefinitionOption, NegativeMode};
use slang_interp::reranker::{Candidate, CandidateSet, RerankConfig, Reranker};
use slang_interp::semantic::{select_kernel_width, DevQuery, PrototypeModel};

fn sense(id: &str) -> SenseDef {
    SenseDef {
        sense_id: id.to_string(),
        definition: format!("sense {id}"),
        pos: None,
    }
}

fn candidate(i: usize, id: &str) -> Candidate {
    Candidate {
        rank_in: i,
        surface: None,
        definition: format!("meaning {id}"),
        definition_embedding_id: id.to_string(),
        gen_score: None,
        pos_match: None,
    }
}

fn option(id: &str) -> DefinitionOption {
    DefinitionOption {
        definition: format!("meaning {id}"),
        embedding_id: id.to_string(),
    }
}

/// Heat words gain anger senses, cold words calm senses, illness words
/// praise senses. "steamed" only has heat senses and no slang training data.
#[test]
fn steamed_reads_as_angry_after_training() {
    const DIM: usize = 6;
    let (heat, anger, cold, calm, ill, praise) = (0, 1, 2, 3, 4, 5);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let noise = Normal::new(0.0, 0.2).unwrap();
    let mut table = EmbeddingTable::new(DIM, EmbeddingKind::Sentence).unwrap();
    let mut point = |id: String, axis: usize, table: &mut EmbeddingTable| {
        let mut v: Vec<f64> = (0..DIM).map(|_| noise.sample(&mut rng)).collect();
        v[axis] += 3.0;
        table.insert(id, v).unwrap();
    };

    let families = [
        (heat, anger, ["boiling", "fuming", "heated"]),
        (cold, calm, ["frosty", "chilly", "icy"]),
        (ill, praise, ["ill", "nasty", "wicked"]),
    ];
    let mut inventory = BTreeMap::new();
    let mut entries = Vec::new();
    for (from, to, words) in families {
        for word in words {
            let senses: Vec<SenseDef> = (0..2).map(|k| sense(&format!("{word}.s{k}"))).collect();
            for s in &senses {
                point(s.sense_id.clone(), from, &mut table);
            }
            inventory.insert(word.to_string(), senses);
            for k in 0..2 {
                let def = format!("{word}.d{k}");
                point(def.clone(), to, &mut table);
                entries.push(GlossEntry {
                    entry_id: format!("{def}:0"),
                    definition_id: def,
                    word: word.to_string(),
                    definition: format!("slang meaning {k} of {word}"),
                    example: format!("that was so {word}"),
                    pos: None,
                    split: Split::Train,
                    source: "toy".into(),
                });
            }
        }
    }
    let steamed: Vec<SenseDef> = (0..2).map(|k| sense(&format!("steamed.s{k}"))).collect();
    for s in &steamed {
        point(s.sense_id.clone(), heat, &mut table);
    }
    inventory.insert("steamed".to_string(), steamed);
    // generator order puts the literal misreading first
    let names = ["sick", "angry", "hot", "tired", "late"];
    let axes = [ill, anger, praise, calm, cold];
    for (name, axis) in names.iter().zip(axes) {
        point(name.to_string(), axis, &mut table);
    }

    let dataset = Dataset::new(entries, SenseInventory::new(inventory).unwrap(), BTreeSet::new()).unwrap();
    let config = TrainConfig {
        output_dim: DIM,
        epochs: 40,
        batch_size: 8,
        negatives_per_positive: 2,
        ..TrainConfig::default()
    };
    let sampler = TripletSampler::new(&dataset, Split::Train, &table, &config).unwrap();
    let (encoder, _) = train_encoder(&sampler, &[], &table, &config).unwrap();

    let mut words = EmbeddingTable::new(2, EmbeddingKind::Word).unwrap();
    words.insert("steamed", vec![1.0, 0.1]).unwrap();
    for (k, w) in ["boiling", "fuming", "heated"].iter().enumerate() {
        words.insert(*w, vec![1.0, 0.2 + 0.1 * k as f64]).unwrap();
    }
    for w in ["frosty", "chilly", "icy", "ill", "nasty", "wicked"] {
        words.insert(w, vec![-1.0, 1.0]).unwrap();
    }
    let mut vocab = dataset.slang_vocabulary();
    vocab.push("steamed".into());
    vocab.sort();

    let table = Arc::new(table);
    let set = CandidateSet {
        query_id: "steamed:0".into(),
        word: "steamed".into(),
        context: "she was steamed about the delay".into(),
        generator: "toy".into(),
        candidates: names.iter().enumerate().map(|(i, n)| candidate(i, n)).collect(),
    };
    assert_eq!(set.candidates[0].definition_embedding_id, "sick");

    let model = PrototypeModel::new(
        Arc::new(encoder),
        table.clone(),
        Arc::new(dataset.inventory.clone()),
        0.1,
    )
    .unwrap();
    for use_cf in [false, true] {
        let rc = RerankConfig {
            use_cf,
            neighborhood_size: 4,
            h_cf: 0.1,
        };
        let reranker = Reranker::new(&model, &table, &words, &vocab, &rc).unwrap();
        assert_eq!(
            reranker.rerank(&set).unwrap().top().definition_embedding_id,
            "angry",
            "cf={use_cf}"
        );
    }
}

/// Two queries for the same word whose correct reading depends on how sharp
/// the kernel is: one needs a soft kernel, the other a sharp one, and only
/// width 0.5 gets both right.
#[test]
fn kernel_width_selection_finds_the_dominant_width() {
    let s = 1e-3;
    let encoder = EncoderParams::from_parts(
        2,
        2,
        2,
        vec![s, 0.0, 0.0, s],
        vec![0.0; 2],
        vec![1.0 / s, 0.0, 0.0, 1.0 / s],
        vec![0.0; 2],
    )
    .unwrap();
    let warp = |p: [f64; 2]| -> Vec<f64> { p.iter().map(|x| (x * s).atanh() / s).collect() };
    // a point at distance r1 from (0,0) and r2 from (D,0)
    const D: f64 = 5.0;
    let locate = |r1: f64, r2: f64| -> [f64; 2] {
        let x = (r1 * r1 - r2 * r2 + D * D) / (2.0 * D);
        [x, (r1 * r1 - x * x).sqrt()]
    };

    let mut enc_table = EmbeddingTable::new(2, EmbeddingKind::Sentence).unwrap();
    enc_table.insert("S.s0", warp([0.0, 0.0])).unwrap();
    enc_table.insert("N.s0", warp([D, 0.0])).unwrap();
    let mut eval = EmbeddingTable::new(2, EmbeddingKind::Sentence).unwrap();
    // query 1 is right only with a soft kernel, query 2 only with a sharp one
    let layouts = [("q1", 3.0, 3.0, 2.8, 3.6), ("q2", 3.0, 3.0, 3.5, 1.8)];
    let mut dev = Vec::new();
    for (q, a1, a2, b1, b2) in layouts {
        let (a, b) = (format!("{q}.A"), format!("{q}.B"));
        enc_table.insert(a.clone(), warp(locate(a1, a2))).unwrap();
        enc_table.insert(b.clone(), warp(locate(b1, b2))).unwrap();
        eval.insert(a.clone(), vec![0.0, 0.0]).unwrap();
        eval.insert(b.clone(), vec![10.0, 0.0]).unwrap();
        let negatives: Vec<DefinitionOption> = (1..=4)
            .map(|k| {
                let id = format!("{q}.n{k}");
                eval.insert(id.clone(), vec![10.0, k as f64]).unwrap();
                option(&id)
            })
            .collect();
        dev.push(DevQuery {
            candidates: CandidateSet {
                query_id: q.into(),
                word: "S".into(),
                context: "an S sentence".into(),
                generator: "toy".into(),
                // generator order is irrelevant here; put the wrong one first
                candidates: vec![candidate(0, &b), candidate(1, &a)],
            },
            item: ChoiceItem {
                query_id: q.into(),
                groundtruth: option(&a),
                negatives,
                mode: NegativeMode::Random,
                seed: 0,
            },
        });
    }
    let inventory = SenseInventory::new(BTreeMap::from([
        ("S".to_string(), vec![sense("S.s0")]),
        ("N".to_string(), vec![sense("N.s0")]),
    ]))
    .unwrap();
    // word similarity exp(-d_cos / 1) = 0.5
    let c = 1.0 - std::f64::consts::LN_2;
    let mut words = EmbeddingTable::new(2, EmbeddingKind::Word).unwrap();
    words.insert("S", vec![1.0, 0.0]).unwrap();
    words.insert("N", vec![c, (1.0 - c * c).sqrt()]).unwrap();
    let vocab = vec!["N".to_string(), "S".to_string()];
    let rc = RerankConfig {
        h_cf: 1.0,
        neighborhood_size: 2,
        use_cf: true,
    };
    let model = PrototypeModel::new(Arc::new(encoder), Arc::new(enc_table.clone()), Arc::new(inventory), 0.1).unwrap();
    let reranker = Reranker::new(&model, &enc_table, &words, &vocab, &rc).unwrap();

    let grid = [0.1, 0.5, 1.0, 2.0];
    let exhaustive: Vec<f64> = grid
        .iter()
        .map(|&h| {
            let m = model.with_kernel_width(h).unwrap();
            let r = reranker.with_model(&m);
            let ranks: Vec<usize> = dev
                .iter()
                .map(|q| {
                    let top = r.rerank(&q.candidates).unwrap();
                    rank_groundtruth(eval.get(&top.top().definition_embedding_id).unwrap(), &q.item, &eval).unwrap()
                })
                .collect();
            mrr(&ranks).unwrap()
        })
        .collect();
    assert_eq!(exhaustive, vec![0.6, 1.0, 0.6, 0.6]);
    assert_eq!(select_kernel_width(&reranker, &dev, &eval, &grid).unwrap(), 0.5);
}
