use arda::knowledge::{HashEmbedder, KbConfig, KnowledgeBase};
use arda::symlang::{decompose, ComponentPredicate, FrameworkSchema};
use rand::seq::IndexedRandom;
use rand::Rng;

use super::*;

/// Runs a fixed mix of fifty queries and serializes every answer.
pub fn query_suite(kb: &KnowledgeBase, schema: &FrameworkSchema) -> Vec<String> {
    let mut rng = rng(4242);
    let plans = grid(schema);
    let mut out = Vec::new();
    for i in 0..50 {
        let text = phrase(&mut rng);
        let k = rng.random_range(1..=12);
        let json = match i % 5 {
            0 => serde_json::to_string(&kb.query_general(&text, "domain", k).unwrap()),
            1 => serde_json::to_string(&kb.query_experiments(&text, &[], k).unwrap()),
            2 => {
                let preds = [ComponentPredicate::TemplateIn {
                    slot: "model".into(),
                    templates: vec!["LSTM".into(), "IGMTF".into()],
                }];
                serde_json::to_string(&kb.query_experiments(&text, &preds, k).unwrap())
            }
            3 => {
                let sub = decompose(plans.choose(&mut rng).unwrap(), schema).unwrap().remove(i % 3);
                serde_json::to_string(&kb.query_demonstrations(&sub, k).unwrap())
            }
            _ => serde_json::to_string(&(kb.leaderboards(), kb.propose_idea_candidates("excess_return", &[], k).unwrap())),
        };
        out.push(json.unwrap());
    }
    out
}

/// Fills a 500-record store on disk, reopens it and compares the answers
/// of the fixed query suite.
pub fn reopened_store_answers_identically() {
    let schema = FrameworkSchema::demo();
    let plans = grid(&schema);
    let emb = HashEmbedder::default();
    let dir = tempfile::tempdir().unwrap();
    let before = {
        let kb = KnowledgeBase::open_or_create(dir.path(), KbConfig::default()).unwrap();
        let mut rng = rng(7);
        for i in 0..500 {
            let r = random_record(&mut rng, &kb.next_experiment_id(), &schema, &plans, &emb);
            kb.add_experiment(r).unwrap();
            if i % 5 == 0 {
                kb.put_text(&phrase(&mut rng), Some("v"), "domain").unwrap();
            }
        }
        assert_eq!(kb.experiment_count(), 500);
        query_suite(&kb, &schema)
    };
    let kb = KnowledgeBase::open(dir.path()).unwrap();
    assert_eq!(kb.experiment_count(), 500);
    assert_eq!(kb.knowledge_count(), 100);
    let after = query_suite(&kb, &schema);
    assert_eq!(before.len(), 50);
    for (i, (a, b)) in before.iter().zip(&after).enumerate() {
        assert_eq!(a, b, "query {i} differs after reopen");
    }
}
