mod common;

use std::io::Write;
use std::sync::Arc;

use arda::knowledge::{
    Embedder, Embedding, HashEmbedder, InfraCorpus, KbConfig, KnowledgeBase, KnowledgeError, KnowledgeItem,
    MetricVector, RecordDraft,
};
use arda::symlang::{decompose, ComponentPredicate, FrameworkSchema};
use common::*;

fn kb() -> KnowledgeBase {
    KnowledgeBase::in_memory(KbConfig::default()).unwrap()
}

#[test]
fn stored_item_is_retrievable() {
    let kb = kb();
    let id = kb
        .put_text("CSRankNorm normalizes factor ranks cross-sectionally", Some("use before LGBModel"), "domain")
        .unwrap();
    let hits = kb.query_general("CSRankNorm cross-sectional rank", "domain", 3).unwrap();
    assert_eq!(hits[0].id, id);
    assert_eq!(hits[0].item.value.as_deref(), Some("use before LGBModel"));
}

#[test]
fn item_without_value_returns_key_only() {
    let kb = kb();
    kb.put_text("LSTM suits sequential factors", None, "domain").unwrap();
    let hits = kb.query_general("LSTM", "domain", 1).unwrap();
    assert_eq!(hits[0].item.key, "LSTM suits sequential factors");
    assert!(hits[0].item.value.is_none());
}

#[test]
fn unnormalized_and_wrong_dimension_items_are_rejected() {
    let kb = kb();
    let emb = HashEmbedder::default();
    let mut item = KnowledgeItem::new(&emb, "key", None, "domain").unwrap();
    let mut raw = item.embedding.as_slice().to_vec();
    raw[0] += 0.5;
    item.embedding = serde_json::from_value(serde_json::json!(raw)).unwrap();
    assert!(matches!(kb.put_knowledge(item), Err(KnowledgeError::NotNormalized(_))));

    let short = KnowledgeItem::new(&HashEmbedder::new(16), "key", None, "domain").unwrap();
    assert!(matches!(
        kb.put_knowledge(short),
        Err(KnowledgeError::DimensionMismatch { expected: 256, got: 16 })
    ));
    let empty_cat = KnowledgeItem::new(&emb, "key", None, " ").unwrap();
    assert!(matches!(kb.put_knowledge(empty_cat), Err(KnowledgeError::EmptyCategory)));
}

#[test]
fn general_query_edge_cases() {
    let kb = kb();
    assert!(kb.query_general("anything", "domain", 5).unwrap().is_empty());
    for key in ["alpha", "beta", "gamma"] {
        kb.put_text(key, None, "domain").unwrap();
    }
    assert_eq!(kb.query_general("alpha", "domain", 10).unwrap().len(), 3);
    assert!(kb.query_general("alpha", "unknown", 10).unwrap().is_empty());
    assert!(matches!(kb.query_general("alpha", "domain", 0), Err(KnowledgeError::InvalidK)));
}

#[test]
fn equal_similarity_ties_follow_insertion_order() {
    let kb = kb();
    let a = kb.put_text("same text", Some("first"), "domain").unwrap();
    let b = kb.put_text("same text", Some("second"), "domain").unwrap();
    let hits = kb.query_general("same text", "domain", 2).unwrap();
    assert_eq!(hits.iter().map(|h| h.id.clone()).collect::<Vec<_>>(), vec![a, b]);
    assert_eq!(hits[0].similarity, hits[1].similarity);
}

#[test]
fn leaderboard_ranks_follow_direction() {
    let schema = FrameworkSchema::demo();
    let kb = kb();
    let r1 = record("exp-000001", &schema, demo_plan(&schema, "none", "LGBModel", "a_share"), "g", metrics("s", &[("excess_return", 0.6), ("max_drawdown", 0.1)]));
    kb.add_experiment(r1).unwrap();
    let lb = kb.leaderboard("s", "excess_return").unwrap();
    assert_eq!(lb.len(), 1);
    assert_eq!(lb.rank_of("exp-000001"), Some(1));

    let r2 = record("exp-000002", &schema, demo_plan(&schema, "MinMaxNorm", "LGBModel", "a_share"), "g", metrics("s", &[("excess_return", 0.8), ("max_drawdown", 0.3)]));
    kb.add_experiment(r2).unwrap();
    let lb = kb.leaderboard("s", "excess_return").unwrap();
    assert_eq!((lb.rank_of("exp-000002"), lb.rank_of("exp-000001")), (Some(1), Some(2)));
    let dd = kb.leaderboard("s", "max_drawdown").unwrap();
    assert_eq!((dd.rank_of("exp-000001"), dd.rank_of("exp-000002")), (Some(1), Some(2)));
}

#[test]
fn failed_records_are_stored_but_not_ranked() {
    let schema = FrameworkSchema::demo();
    let kb = kb();
    let ok = record("exp-000001", &schema, demo_plan(&schema, "none", "LGBModel", "a_share"), "g", metrics("s", &[("excess_return", 0.6)]));
    kb.add_experiment(ok).unwrap();
    let before = kb.leaderboard("s", "excess_return").unwrap().len();
    let draft = RecordDraft {
        plan: demo_plan(&schema, "none", "LSTM", "a_share"),
        goal: "g".into(),
        results: MetricVector::empty("s"),
        implementation: None,
        failure: Some("grounding failed".into()),
        created_at: 0,
    };
    let failed = arda::knowledge::ExperimentRecord::from_draft("exp-000002", draft, &schema, &HashEmbedder::default()).unwrap();
    assert!(!failed.succeeded());
    kb.add_experiment(failed).unwrap();
    assert_eq!(kb.experiment_count(), 2);
    assert_eq!(kb.leaderboard("s", "excess_return").unwrap().len(), before);
}

#[test]
fn duplicate_ids_and_inconsistent_records_are_rejected() {
    let schema = FrameworkSchema::demo();
    let kb = kb();
    let r = record("exp-000001", &schema, demo_plan(&schema, "none", "LGBModel", "a_share"), "g", metrics("s", &[("excess_return", 0.6)]));
    kb.add_experiment(r.clone()).unwrap();
    assert!(matches!(kb.add_experiment(r.clone()), Err(KnowledgeError::DuplicateId(_))));
    let mut bad = r;
    bad.id = "exp-000002".into();
    bad.results = MetricVector::empty("s");
    assert!(matches!(kb.add_experiment(bad), Err(KnowledgeError::InvalidRecord(_))));
    assert_eq!(kb.next_experiment_id(), "exp-000002");
}

/// Three experiments, the first under a different evaluation setting: a
/// constraint on the evaluation component returns only the other two.
#[test]
fn constraint_query_returns_matching_experiments() {
    let schema = FrameworkSchema::demo();
    let kb = kb();
    let e0 = demo_plan(&schema, "none", "LGBModel", "a_share");
    let e1a = demo_plan(&schema, "none", "LSTM", "us");
    let e1b = demo_plan(&schema, "ZScoreNorm", "MLP", "us");
    for (id, plan) in [("EXP1", e0), ("EXP2", e1a), ("EXP3", e1b)] {
        kb.add_experiment(record(id, &schema, plan, "maximize excess_return", metrics("s", &[("excess_return", 0.1)]))).unwrap();
    }
    let on_e1 = [ComponentPredicate::Tag { slot: "evaluation".into(), tag: "us".into(), present: true }];
    let mut ids: Vec<String> = kb
        .query_experiments("maximize excess_return", &on_e1, 10)
        .unwrap()
        .into_iter()
        .map(|s| s.record.id.clone())
        .collect();
    ids.sort();
    assert_eq!(ids, ["EXP2", "EXP3"]);

    let contradictory = [
        ComponentPredicate::TemplateEquals { slot: "model".into(), template: "LSTM".into() },
        ComponentPredicate::TemplateNotIn { slot: "model".into(), templates: vec!["LSTM".into()] },
    ];
    assert!(kb.query_experiments("maximize excess_return", &contradictory, 10).unwrap().is_empty());
}

#[test]
fn normalization_pair_yields_datahandler_idea() {
    let schema = FrameworkSchema::demo();
    let kb = kb();
    let g1 = demo_plan(&schema, "none", "LGBModel", "a_share");
    let g2 = demo_plan(&schema, "MinMaxNorm", "LGBModel", "a_share");
    kb.add_experiment(record("G1", &schema, g1, "maximize excess_return", metrics("csi300", &[("excess_return", 0.05)]))).unwrap();
    assert!(kb.propose_idea_candidates("excess_return", &[], 5).unwrap().is_empty());
    kb.add_experiment(record("G2", &schema, g2, "maximize excess_return", metrics("csi300", &[("excess_return", 0.07)]))).unwrap();

    let ideas = kb.propose_idea_candidates("excess_return", &[], 5).unwrap();
    let top = &ideas[0];
    assert_eq!(top.source_pair, ("G1".to_string(), "G2".to_string()));
    assert_eq!(top.delta.changed_names(), ["datahandler"]);
    let change = &top.delta.changed_slots[0];
    assert_eq!(change.before.as_ref().unwrap().parameters["normalization"].render(), "none");
    assert_eq!(change.after.as_ref().unwrap().parameters["normalization"].render(), "MinMaxNorm");
    assert!((top.gap - 0.02).abs() < 1e-12);
    assert!(matches!(kb.propose_idea_candidates("nope", &[], 5), Err(KnowledgeError::UnknownMetric(_))));
}

#[test]
fn five_experiments_give_ten_pairs_ranked_by_gap() {
    let schema = FrameworkSchema::demo();
    let kb = kb();
    let models = ["LGBModel", "LSTM", "MLP", "Transformer", "Tabnet"];
    let values = [0.02, 0.08, 0.01, 0.16, 0.04];
    for (i, (m, v)) in models.iter().zip(values).enumerate() {
        let plan = demo_plan(&schema, "none", m, "a_share");
        kb.add_experiment(record(&format!("E{i}"), &schema, plan, "g", metrics("s", &[("excess_return", v)]))).unwrap();
    }
    let ideas = kb.propose_idea_candidates("excess_return", &[], 100).unwrap();
    assert_eq!(ideas.len(), 10);

    let mut pairs = Vec::new();
    for i in 0..5 {
        for j in 0..5 {
            if values[i] < values[j] {
                pairs.push(((values[j] - values[i]).abs(), format!("E{i}"), format!("E{j}")));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    for (idea, (gap, lo, hi)) in ideas.iter().zip(&pairs) {
        assert!((idea.gap - gap).abs() < 1e-12);
        assert_eq!(idea.source_pair, (lo.clone(), hi.clone()));
    }
    assert!(ideas.windows(2).all(|w| w[0].gap >= w[1].gap));
}

#[test]
fn demonstrations_filter_by_slot_kind() {
    let schema = FrameworkSchema::demo();
    let kb = kb();
    let plan = demo_plan(&schema, "MinMaxNorm", "LGBModel", "a_share");
    let subs = decompose(&plan, &schema).unwrap();
    assert!(kb.query_demonstrations(&subs[0], 3).unwrap().is_empty());
    kb.add_experiment(record("E1", &schema, plan.clone(), "g", metrics("s", &[("excess_return", 0.1)]))).unwrap();
    for sub in &subs {
        let demos = kb.query_demonstrations(sub, 3).unwrap();
        assert_eq!(demos.len(), 1);
        assert_eq!(demos[0].slot, sub.slot);
        assert_eq!(demos[0].plan_fragment, sub.slot_plan);
    }
}

#[test]
fn infrastructure_query_finds_normalization_extension_point() {
    let schema = FrameworkSchema::demo();
    let emb = HashEmbedder::default();
    let corpus = InfraCorpus::from_schema(&schema, &emb, 480).unwrap();
    let kb = kb();
    let query = "MinMaxNorm processor interface";
    let hits = kb.query_infrastructure(query, &corpus, 3).unwrap();
    assert!(hits[0].excerpt.contains("MinMaxNorm"), "{hits:?}");
    assert_eq!(hits[0].doc_id, "slot:datahandler");

    let q = emb.embed(query).unwrap();
    let best = corpus
        .chunks()
        .iter()
        .max_by(|a, b| q.cosine(&a.embedding).partial_cmp(&q.cosine(&b.embedding)).unwrap())
        .unwrap();
    assert_eq!(best.excerpt, hits[0].excerpt);

    assert_eq!(hits, kb.query_infrastructure(query, &corpus, 3).unwrap());
    assert!(matches!(kb.query_infrastructure(query, &corpus, 0), Err(KnowledgeError::InvalidK)));
    let empty = InfraCorpus::build(std::iter::empty(), &emb, 480).unwrap();
    assert!(kb.query_infrastructure(query, &empty, 3).unwrap().is_empty());
}

#[test]
fn embed_is_deterministic_and_unit_length() {
    let kb = kb();
    for s in ["", "MinMaxNorm", "a much longer sentence about excess return and drawdown"] {
        let a = kb.embed(s).unwrap();
        assert_eq!(a, kb.embed(s).unwrap());
        assert!((a.norm() - 1.0).abs() <= 1e-9);
        assert_eq!(a.dim(), 256);
    }
    let m = kb.embed("MinMaxNorm").unwrap();
    assert!(m.cosine(&kb.embed("MinMaxNorm normalization").unwrap()) > m.cosine(&kb.embed("LSTM hidden size").unwrap()));
    assert!(Embedding::from_unit(vec![0.6, 0.8]).is_ok());
}

#[test]
fn torn_tail_is_skipped_and_corruption_reported() {
    let schema = FrameworkSchema::demo();
    let dir = tempfile::tempdir().unwrap();
    {
        let kb = KnowledgeBase::open_or_create(dir.path(), KbConfig::default()).unwrap();
        kb.add_experiment(record("E1", &schema, demo_plan(&schema, "none", "LSTM", "us"), "g", metrics("s", &[("sharpe", 1.0)]))).unwrap();
        kb.put_text("note", None, "domain").unwrap();
    }
    let log = dir.path().join("experiments.log");
    std::fs::OpenOptions::new().append(true).open(&log).unwrap().write_all(b"{\"record_version\":1,\"exp").unwrap();
    let kb = KnowledgeBase::open(dir.path()).unwrap();
    assert_eq!(kb.experiment_count(), 1);
    assert_eq!(kb.knowledge_count(), 1);
    drop(kb);

    let mut text = std::fs::read_to_string(&log).unwrap();
    text.insert_str(0, "not json\n");
    std::fs::write(&log, text).unwrap();
    match KnowledgeBase::open(dir.path()) {
        Err(KnowledgeError::Corrupt { line, .. }) => assert_eq!(line, 1),
        other => panic!("expected corruption error, got {other:?}"),
    }
}

#[test]
fn concurrent_readers_see_consistent_snapshots() {
    let schema = FrameworkSchema::demo();
    let kb = Arc::new(kb());
    let plans = grid(&schema);
    std::thread::scope(|s| {
        let writer = {
            let kb = kb.clone();
            let schema = &schema;
            let plans = &plans;
            s.spawn(move || {
                for (i, p) in plans.iter().enumerate() {
                    let r = record(&format!("E{i:03}"), schema, p.clone(), "g", metrics("s", &[("excess_return", i as f64)]));
                    kb.add_experiment(r).unwrap();
                }
            })
        };
        for _ in 0..4 {
            let kb = kb.clone();
            s.spawn(move || {
                for _ in 0..50 {
                    let n = kb.experiment_count();
                    let got = kb.query_experiments("g", &[], 1000).unwrap();
                    assert!(got.len() >= n);
                    if let Some(lb) = kb.leaderboard("s", "excess_return") {
                        assert!(lb.rows.windows(2).all(|w| w[0].value >= w[1].value));
                    }
                }
            });
        }
        writer.join().unwrap();
    });
    assert_eq!(kb.experiment_count(), plans.len());
}
