//! Exhaustive linear-scan oracles for every retrieval family.

use std::collections::HashMap;

use arda::knowledge::{Direction, Embedder, HashEmbedder, InfraCorpus, KbConfig, KnowledgeBase, KnowledgeItem};
use arda::symlang::{decompose, diff_plans, ComponentPredicate, FrameworkSchema};
use rand::seq::IndexedRandom;
use rand::Rng;

use super::*;

pub const SEEDS: u64 = 100;
pub const SIZES: [usize; 10] = [0, 1, 3, 10, 50, 120, 250, 500, 750, 1000];

fn size_for(seed: u64) -> usize {
    SIZES[(seed % SIZES.len() as u64) as usize]
}

fn random_predicates(rng: &mut rand_chacha::ChaCha8Rng) -> Vec<ComponentPredicate> {
    let models = ["LGBModel", "LSTM", "MLP", "Transformer", "Tabnet", "IGMTF"];
    let mut out = Vec::new();
    for _ in 0..rng.random_range(0..=2) {
        let pick: Vec<String> = models
            .iter()
            .filter(|_| rng.random_bool(0.5))
            .map(|s| s.to_string())
            .collect();
        out.push(match rng.random_range(0..3) {
            0 => ComponentPredicate::TemplateEquals {
                slot: "model".into(),
                template: models.choose(rng).unwrap().to_string(),
            },
            1 => ComponentPredicate::TemplateIn {
                slot: "model".into(),
                templates: pick,
            },
            _ => ComponentPredicate::TemplateNotIn {
                slot: "model".into(),
                templates: pick,
            },
        });
    }
    out
}

/// Independent evaluation of the template predicates used above.
fn oracle_matches(plan: &arda::symlang::ExperimentPlan, preds: &[ComponentPredicate]) -> bool {
    preds.iter().all(|p| {
        let t = &plan.slots["model"].template;
        match p {
            ComponentPredicate::TemplateEquals { template, .. } => t == template,
            ComponentPredicate::TemplateIn { templates, .. } => templates.iter().any(|x| x == t),
            ComponentPredicate::TemplateNotIn { templates, .. } => templates.iter().all(|x| x != t),
            ComponentPredicate::Tag { .. } => unreachable!(),
        }
    })
}

/// Sort by similarity descending, then insertion order; keep k.
fn oracle_rank<T: Clone>(mut scored: Vec<(f64, usize, T)>, k: usize) -> Vec<(f64, T)> {
    scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    scored.into_iter().take(k).map(|(s, _, t)| (s, t)).collect()
}

pub fn general_queries_match_linear_scan(seeds: u64) {
    let emb = HashEmbedder::default();
    let categories = ["domain", "code", "paper"];
    for seed in 0..seeds {
        let mut rng = rng(seed);
        let kb = KnowledgeBase::in_memory(KbConfig::default()).unwrap();
        let mut mirror: Vec<(String, KnowledgeItem)> = Vec::new();
        for _ in 0..size_for(seed) {
            let value = rng.random_bool(0.5).then(|| phrase(&mut rng));
            let item = KnowledgeItem::new(&emb, phrase(&mut rng), value, *categories.choose(&mut rng).unwrap()).unwrap();
            let id = kb.put_knowledge(item.clone()).unwrap();
            mirror.push((id, item));
        }
        for _ in 0..5 {
            let q = phrase(&mut rng);
            let cat = *["domain", "code", "paper", "absent"].choose(&mut rng).unwrap();
            let k = rng.random_range(1..=20);
            let qe = emb.embed(&q).unwrap();
            let expected = oracle_rank(
                mirror
                    .iter()
                    .enumerate()
                    .filter(|(_, (_, it))| it.category == cat)
                    .map(|(i, (id, it))| (dot(qe.as_slice(), it.embedding.as_slice()), i, id.clone()))
                    .collect(),
                k,
            );
            let got: Vec<(f64, String)> = kb
                .query_general(&q, cat, k)
                .unwrap()
                .into_iter()
                .map(|s| (s.similarity, s.id))
                .collect();
            assert_eq!(got, expected, "seed {seed} query {q:?} category {cat} k {k}");
        }
    }
}

pub fn experiment_queries_match_linear_scan(seeds: u64) {
    let schema = FrameworkSchema::demo();
    let plans = grid(&schema);
    let emb = HashEmbedder::default();
    for seed in 0..seeds {
        let mut rng = rng(seed);
        let kb = KnowledgeBase::in_memory(KbConfig::default()).unwrap();
        let mut mirror = Vec::new();
        for i in 0..size_for(seed) {
            let r = random_record(&mut rng, &format!("exp-{:06}", i + 1), &schema, &plans, &emb);
            kb.add_experiment(r.clone()).unwrap();
            mirror.push(r);
        }
        for _ in 0..5 {
            let goal = phrase(&mut rng);
            let preds = random_predicates(&mut rng);
            let k = rng.random_range(1..=25);
            let ge = emb.embed(&goal).unwrap();
            let expected = oracle_rank(
                mirror
                    .iter()
                    .enumerate()
                    .filter(|(_, r)| oracle_matches(&r.plan, &preds))
                    .map(|(i, r)| (dot(ge.as_slice(), r.component_embeddings.goal.as_slice()), i, r.id.clone()))
                    .collect(),
                k,
            );
            let got: Vec<(f64, String)> = kb
                .query_experiments(&goal, &preds, k)
                .unwrap()
                .into_iter()
                .map(|s| (s.similarity, s.record.id.clone()))
                .collect();
            assert_eq!(got, expected, "seed {seed}");
        }
    }
}

pub fn demonstration_queries_match_filter_and_scan(seeds: u64) {
    let schema = FrameworkSchema::demo();
    let plans = grid(&schema);
    let emb = HashEmbedder::default();
    for seed in 0..seeds {
        let mut rng = rng(seed);
        let kb = KnowledgeBase::in_memory(KbConfig::default()).unwrap();
        let mut mirror = Vec::new();
        for i in 0..size_for(seed) {
            let r = random_record(&mut rng, &format!("exp-{:06}", i + 1), &schema, &plans, &emb);
            kb.add_experiment(r.clone()).unwrap();
            mirror.push(r);
        }
        let probe = plans.choose(&mut rng).unwrap();
        for sub in decompose(probe, &schema).unwrap() {
            let k = rng.random_range(1..=15);
            let qe = emb.embed(&sub.slot_plan.render()).unwrap();
            let mut scored = Vec::new();
            for r in mirror.iter().filter(|r| r.succeeded()) {
                let comp = match sub.kind {
                    arda::symlang::SlotKind::Data => &r.component_embeddings.data,
                    arda::symlang::SlotKind::Model => &r.component_embeddings.model,
                    arda::symlang::SlotKind::Evaluation => &r.component_embeddings.evaluation,
                };
                for (slot, unit) in &r.implementation.as_ref().unwrap().units {
                    if unit.kind == sub.kind {
                        let n = scored.len();
                        scored.push((dot(qe.as_slice(), comp.as_slice()), n, (r.id.clone(), slot.clone())));
                    }
                }
            }
            let expected = oracle_rank(scored, k);
            let got: Vec<(f64, (String, String))> = kb
                .query_demonstrations(&sub, k)
                .unwrap()
                .into_iter()
                .map(|d| {
                    assert_eq!(d.unit.kind, sub.kind);
                    (d.similarity, (d.experiment_id, d.slot))
                })
                .collect();
            assert_eq!(got, expected, "seed {seed} slot {}", sub.slot);
        }
    }
}

pub fn infrastructure_queries_match_linear_scan(seeds: u64) {
    let emb = HashEmbedder::default();
    for seed in 0..seeds {
        let mut rng = rng(seed);
        let docs: Vec<(String, String)> = (0..size_for(seed) / 4)
            .map(|i| {
                let body = (0..rng.random_range(1..6))
                    .map(|_| format!("{}.", phrase(&mut rng)))
                    .collect::<Vec<_>>()
                    .join(" ");
                (format!("doc-{i}"), body)
            })
            .collect();
        let corpus = InfraCorpus::build(docs.iter().map(|(a, b)| (a.as_str(), b.as_str())), &emb, 40).unwrap();
        let kb = KnowledgeBase::in_memory(KbConfig::default()).unwrap();
        for _ in 0..5 {
            let q = phrase(&mut rng);
            let k = rng.random_range(1..=10);
            let qe = emb.embed(&q).unwrap();
            let expected = oracle_rank(
                corpus
                    .chunks()
                    .iter()
                    .enumerate()
                    .map(|(i, c)| (dot(qe.as_slice(), c.embedding.as_slice()), i, (c.doc_id.clone(), c.excerpt.clone())))
                    .collect(),
                k,
            );
            let got: Vec<(f64, (String, String))> = kb
                .query_infrastructure(&q, &corpus, k)
                .unwrap()
                .into_iter()
                .map(|h| (h.similarity, (h.doc_id, h.excerpt)))
                .collect();
            assert_eq!(got, expected, "seed {seed}");
        }
    }
}

/// All-pairs enumeration is quadratic, so these stores stay small.
pub fn idea_candidates_match_pair_enumeration(seeds: u64) {
    let schema = FrameworkSchema::demo();
    let plans = grid(&schema);
    let emb = HashEmbedder::default();
    for seed in 0..seeds {
        let mut rng = rng(seed);
        let kb = KnowledgeBase::in_memory(KbConfig::default()).unwrap();
        let mut mirror = Vec::new();
        for i in 0..rng.random_range(0..=40) {
            let r = random_record(&mut rng, &format!("exp-{:06}", i + 1), &schema, &plans, &emb);
            kb.add_experiment(r.clone()).unwrap();
            mirror.push(r);
        }
        let (metric, direction) = if rng.random_bool(0.5) {
            ("excess_return", Direction::Maximize)
        } else {
            ("max_drawdown", Direction::Minimize)
        };
        let preds = random_predicates(&mut rng);
        let k = rng.random_range(1..=30);

        let matching: Vec<_> = mirror
            .iter()
            .filter(|r| r.succeeded() && oracle_matches(&r.plan, &preds))
            .collect();
        let mut novelty_cache: HashMap<String, f64> = HashMap::new();
        let mut all = Vec::new();
        for i in 0..matching.len() {
            for j in (i + 1)..matching.len() {
                let (a, b) = (matching[i], matching[j]);
                if a.results.evaluation_setting != b.results.evaluation_setting {
                    continue;
                }
                let (va, vb) = (a.results.get(metric).unwrap(), b.results.get(metric).unwrap());
                let b_better = match direction {
                    Direction::Maximize => vb > va,
                    Direction::Minimize => vb < va,
                };
                let (lo, hi) = if b_better || va == vb { (a, b) } else { (b, a) };
                let delta = diff_plans(&lo.plan, &hi.plan).unwrap();
                if delta.is_empty() {
                    continue;
                }
                let text = delta.render();
                let novelty = *novelty_cache.entry(text.clone()).or_insert_with(|| {
                    let e = emb.embed(&text).unwrap();
                    let best = mirror
                        .iter()
                        .map(|r| dot(e.as_slice(), r.plan_embedding.as_slice()))
                        .fold(f64::NEG_INFINITY, f64::max);
                    (1.0 - best).clamp(0.0, 1.0)
                });
                all.push(((va - vb).abs(), novelty, (lo.id.clone(), hi.id.clone()), text));
            }
        }
        all.sort_by(|x, y| {
            y.0.partial_cmp(&x.0)
                .unwrap()
                .then(y.1.partial_cmp(&x.1).unwrap())
                .then(x.2.cmp(&y.2))
        });
        all.truncate(k);

        let got: Vec<_> = kb
            .propose_idea_candidates(metric, &preds, k)
            .unwrap()
            .into_iter()
            .map(|c| {
                assert!(c.gap >= 0.0 && (0.0..=1.0).contains(&c.novelty));
                assert_eq!(c.metric, metric);
                (c.gap, c.novelty, c.source_pair, c.delta.render())
            })
            .collect();
        assert_eq!(got, all, "seed {seed}");
    }
}
