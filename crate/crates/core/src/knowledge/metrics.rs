use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::KnowledgeError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Maximize,
    Minimize,
}

impl Direction {
    /// Orders `a` before `b` when `a` is the better value.
    pub fn rank(self, a: f64, b: f64) -> Ordering {
        match self {
            Direction::Maximize => b.total_cmp(&a),
            Direction::Minimize => a.total_cmp(&b),
        }
    }

    pub fn better(self, a: f64, b: f64) -> bool {
        self.rank(a, b) == Ordering::Less
    }

    /// Value mapped so that larger is always better.
    pub fn oriented(self, v: f64) -> f64 {
        match self {
            Direction::Maximize => v,
            Direction::Minimize => -v,
        }
    }

    pub fn verb(self) -> &'static str {
        match self {
            Direction::Maximize => "maximize",
            Direction::Minimize => "minimize",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.verb())
    }
}

/// Metric name → optimization direction, as declared in configuration.
pub type MetricCatalog = BTreeMap<String, Direction>;

pub fn default_metric_catalog() -> MetricCatalog {
    [
        ("excess_return", Direction::Maximize),
        ("max_drawdown", Direction::Minimize),
        ("sharpe", Direction::Maximize),
        ("training_time", Direction::Minimize),
    ]
    .into_iter()
    .map(|(k, d)| (k.to_string(), d))
    .collect()
}

/// Named metric values observed under one evaluation setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricVector {
    pub entries: BTreeMap<String, f64>,
    pub evaluation_setting: String,
}

impl MetricVector {
    pub fn new(evaluation_setting: impl Into<String>, entries: BTreeMap<String, f64>) -> Result<Self, KnowledgeError> {
        if let Some((name, v)) = entries.iter().find(|(_, v)| !v.is_finite()) {
            return Err(KnowledgeError::InvalidRecord(format!("metric `{name}` is not finite ({v})")));
        }
        Ok(Self {
            entries,
            evaluation_setting: evaluation_setting.into(),
        })
    }

    pub fn empty(evaluation_setting: impl Into<String>) -> Self {
        Self {
            entries: BTreeMap::new(),
            evaluation_setting: evaluation_setting.into(),
        }
    }

    pub fn get(&self, metric: &str) -> Option<f64> {
        self.entries.get(metric).copied()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardRow {
    pub experiment_id: String,
    pub value: f64,
}

/// Experiments sharing one evaluation setting ranked on one metric, best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leaderboard {
    pub evaluation_setting: String,
    pub metric: String,
    pub direction: Direction,
    pub rows: Vec<LeaderboardRow>,
}

impl Leaderboard {
    pub fn new(evaluation_setting: &str, metric: &str, direction: Direction) -> Self {
        Self {
            evaluation_setting: evaluation_setting.to_string(),
            metric: metric.to_string(),
            direction,
            rows: Vec::new(),
        }
    }

    /// Inserts after every row that is at least as good, so equal values keep
    /// insertion order.
    pub fn insert(&mut self, experiment_id: &str, value: f64) {
        let pos = self
            .rows
            .partition_point(|r| self.direction.rank(r.value, value) != Ordering::Greater);
        self.rows.insert(
            pos,
            LeaderboardRow {
                experiment_id: experiment_id.to_string(),
                value,
            },
        );
    }

    pub fn rank_of(&self, experiment_id: &str) -> Option<usize> {
        self.rows.iter().position(|r| r.experiment_id == experiment_id).map(|i| i + 1)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}
