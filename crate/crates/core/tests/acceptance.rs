//! One PASS/FAIL line per acceptance criterion.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use arda::agent::{Intention, ProposalPolicy, Provenance, RequirementSpec, Transcript};
use arda::eval::{aggregate_all, compare_policies, offline_backend, Fixtures, LiveProtocol, Tolerances};
use arda::knowledge::Direction;
use arda::llm::{complete, ChatRequest, Message, RemoteBackend, RemoteConfig};
use arda::simenv::SimEnv;
use arda::symlang::{diff_plans, enumerate_plans, satisfies_all, validate_plan, ComponentPredicate, FrameworkSchema};
use common::stub::{ok, status, stub};
use common::*;
use rand::seq::IndexedRandom;
use rand::Rng;

/// Runs `check`, turning a panic or an `Err` into a failure line.
fn criterion(name: &str, check: impl FnOnce() -> Result<String, String>) -> bool {
    let started = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
        Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into()))
    });
    let secs = started.elapsed().as_secs_f64();
    match &outcome {
        Ok(detail) => println!("PASS {name} ({secs:.2}s): {detail}"),
        Err(detail) => println!("FAIL {name} ({secs:.2}s): {detail}"),
    }
    outcome.is_ok()
}

fn within(limit: Duration, started: Instant) -> Result<(), String> {
    let took = started.elapsed();
    if took < limit {
        Ok(())
    } else {
        Err(format!("took {took:?}, limit {limit:?}"))
    }
}

fn table_reproduction() -> Result<String, String> {
    let started = Instant::now();
    let fixtures = Fixtures::bundled().map_err(|e| e.to_string())?;
    let report = aggregate_all(&fixtures, Tolerances::default()).map_err(|e| e.to_string())?;
    within(Duration::from_secs(1), started)?;
    let entries: Vec<_> = report.entries().collect();
    let off: Vec<String> = entries
        .iter()
        .filter(|(_, _, r)| !r.within_tolerance)
        .map(|(method, phase, r)| format!("{method} {phase}: {:.4} vs {:.4}", r.computed, r.printed))
        .collect();
    if report.all_within_tolerance() && off.is_empty() {
        Ok(format!("{} aggregates within tolerance", entries.len()))
    } else {
        Err(off.join("; "))
    }
}

fn grounding_corpus() -> Result<String, String> {
    let started = Instant::now();
    let schema = FrameworkSchema::demo();
    let fixtures = Fixtures::bundled().map_err(|e| e.to_string())?;
    let mut valid = 0;
    for (task, plan) in &fixtures.plans {
        let report = validate_plan(plan, &schema);
        if !report.valid {
            return Err(format!("{task} does not validate: {:?}", report.violations));
        }
        valid += 1;
    }
    let delta = diff_plans(&fixtures.plans["G1"], &fixtures.plans["G2"]).map_err(|e| e.to_string())?;
    within(Duration::from_secs(1), started)?;
    match (valid, delta.changed_slots.len()) {
        (20, 1) => Ok(format!("20 plans validate; G1/G2 differ in `{}`", delta.changed_slots[0].slot)),
        (n, c) => Err(format!("{n} plans, G1/G2 differ in {c} slots")),
    }
}

fn retrieval_oracle() -> Result<String, String> {
    oracle::general_queries_match_linear_scan(oracle::SEEDS);
    oracle::experiment_queries_match_linear_scan(oracle::SEEDS);
    oracle::demonstration_queries_match_filter_and_scan(oracle::SEEDS);
    oracle::infrastructure_queries_match_linear_scan(oracle::SEEDS);
    oracle::idea_candidates_match_pair_enumeration(oracle::SEEDS);
    Ok(format!("5 query families x {} seeds, stores up to {} records", oracle::SEEDS, oracle::SIZES[9]))
}

fn explore_exploit() -> Result<String, String> {
    let started = Instant::now();
    let c = compare_policies(&SimEnv::demo(), &LiveProtocol::default()).map_err(|e| e.to_string())?;
    within(Duration::from_secs(30), started)?;
    let detail = format!(
        "median regret utility {:.4} vs random {:.4}; median iterations to epsilon warm {} vs cold {}",
        c.median_regret_utility, c.median_regret_random, c.median_iterations_warm, c.median_iterations_cold
    );
    if c.utility_beats_random() && c.warm_no_later_than_cold() {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_spec(r: &mut rand_chacha::ChaCha8Rng, schema: &FrameworkSchema, setting: &str) -> RequirementSpec {
    let mut spec = RequirementSpec::new("excess_return", Direction::Maximize, setting);
    let tags = ["gpu", "cpu", "neural", "tree", "a_share", "us", "CSRankNorm", "none", "factor"];
    for _ in 0..r.random_range(0..=2) {
        let slot = schema.slots().choose(r).unwrap();
        let names: Vec<String> = slot.templates.iter().map(|t| t.name.clone()).collect();
        let predicate = match r.random_range(0..3) {
            0 => ComponentPredicate::TemplateNotIn { slot: slot.name.clone(), templates: vec![names.choose(r).unwrap().clone()] },
            1 => ComponentPredicate::TemplateIn {
                slot: slot.name.clone(),
                templates: names.choose_multiple(r, 2.min(names.len())).cloned().collect(),
            },
            _ => ComponentPredicate::Tag {
                slot: slot.name.clone(),
                tag: tags.choose(r).unwrap().to_string(),
                present: r.random_bool(0.5),
            },
        };
        spec = spec.with_constraint(predicate, Provenance::Phrase("constraint".into()));
    }
    spec
}

fn loop_accounting() -> Result<String, String> {
    let intention = Intention::new("accounting", "maximize excess_return").unwrap();
    let llm = offline_backend();
    let mut cycles = 0;
    let mut proposed = 0;
    let mut violations = 0;
    let mut r = rng(99);
    for (b, k) in [(1, 1), (5, 2), (2, 3), (3, 4), (8, 2)] {
        for _ in 0..6 {
            let stack = Stack::demo();
            let spec = loop {
                let spec = random_spec(&mut r, &stack.schema, &stack.env.surface().evaluation_setting);
                if !enumerate_plans(&stack.schema, &spec.predicates(), Some(1)).is_empty() {
                    break spec;
                }
            };
            let preds = spec.predicates();
            let prior = stack.kb.experiment_count();
            let report = stack
                .agent(&llm, logical(b, k, cycles as u64))
                .run_with_spec(&intention, spec, Transcript::new())
                .map_err(|e| e.to_string())?;
            let attempted: usize = report.iterations.iter().map(|i| i.outcomes.len()).sum();
            if attempted != b * k || report.records_added != b * k {
                return Err(format!("budget {b} x width {k} attempted {attempted}, added {}", report.records_added));
            }
            if stack.kb.experiment_count() != prior + attempted {
                return Err("record count differs from attempted experiments".into());
            }
            for it in &report.iterations {
                for e in &it.proposal.experiments {
                    proposed += 1;
                    if !satisfies_all(&e.plan, &preds, Some(&stack.schema)) {
                        violations += 1;
                    }
                }
            }
            cycles += 1;
        }
    }
    if violations > 0 {
        return Err(format!("{violations} constraint violations among {proposed} proposals"));
    }
    let replay = |policy: ProposalPolicy| {
        let stack = Stack::demo();
        let llm = offline_backend();
        let mut config = logical(5, 2, 17);
        config.proposal.policy = policy;
        let spec = RequirementSpec::new("excess_return", Direction::Maximize, "csi300-daily");
        stack.agent(&llm, config).run_with_spec(&intention, spec, Transcript::new()).unwrap().to_json()
    };
    for policy in [ProposalPolicy::Utility, ProposalPolicy::Random] {
        if replay(policy) != replay(policy) {
            return Err(format!("{policy:?} replay differs"));
        }
    }
    Ok(format!("{cycles} cycles, {proposed} proposals, 0 violations, replays byte-identical"))
}

fn persistence() -> Result<String, String> {
    persist::reopened_store_answers_identically();
    Ok("500 records reopened, 50 queries identical".into())
}

fn remote_contract() -> Result<String, String> {
    let s = stub(vec![status(429), status(429), ok("done")]);
    let config = RemoteConfig {
        endpoint: s.url.clone(),
        model: None,
        timeout_ms: 2_000,
        max_attempts: 3,
        backoff_base_ms: 20,
        backoff_max_ms: 200,
        rate_limit: None,
    };
    let backend = RemoteBackend::new(config, None).map_err(|e| e.to_string())?;
    let request = ChatRequest::new(vec![Message::user("ping")]);
    let c = complete(&request, &backend).map_err(|e| e.to_string())?;
    let statuses: Vec<Option<u16>> = c.attempts.iter().map(|a| a.status).collect();
    if c.text == "done" && statuses == [Some(429), Some(429), Some(200)] && s.seen.lock().unwrap().len() == 3 {
        Ok("429, 429, 200 -> success in 3 attempts".into())
    } else {
        Err(format!("text {:?}, statuses {statuses:?}", c.text))
    }
}

#[test]
fn acceptance() {
    let results = [
        criterion("table reproduction", table_reproduction),
        criterion("grounding fixture corpus", grounding_corpus),
        criterion("retrieval oracle equivalence", retrieval_oracle),
        criterion("explore/exploit property", explore_exploit),
        criterion("loop accounting invariants", loop_accounting),
        criterion("persistence", persistence),
        criterion("remote-client contract", remote_contract),
    ];
    let passed = results.iter().filter(|p| **p).count();
    println!("{passed}/{} criteria passed", results.len());
    assert_eq!(passed, results.len());
}
