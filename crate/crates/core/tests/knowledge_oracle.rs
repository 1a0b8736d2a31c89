//! Every retrieval family checked against an exhaustive linear scan on
//! randomized stores of up to a thousand items.

mod common;

use common::oracle;

#[test]
fn general_queries_match_linear_scan() {
    oracle::general_queries_match_linear_scan(oracle::SEEDS);
}

#[test]
fn experiment_queries_match_linear_scan() {
    oracle::experiment_queries_match_linear_scan(oracle::SEEDS);
}

#[test]
fn demonstration_queries_match_filter_and_scan() {
    oracle::demonstration_queries_match_filter_and_scan(oracle::SEEDS);
}

#[test]
fn infrastructure_queries_match_linear_scan() {
    oracle::infrastructure_queries_match_linear_scan(oracle::SEEDS);
}

#[test]
fn idea_candidates_match_pair_enumeration() {
    oracle::idea_candidates_match_pair_enumeration(oracle::SEEDS);
}
