use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::fixtures::{Fixtures, Phase, ScoreSheet};
use super::EvalError;

/// Weights for accuracy, professionalism and feasibility.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EeWeights {
    pub accuracy: f64,
    pub professionalism: f64,
    pub feasibility: f64,
}

impl EeWeights {
    pub const EQUAL: EeWeights = EeWeights { accuracy: 1.0 / 3.0, professionalism: 1.0 / 3.0, feasibility: 1.0 / 3.0 };
    pub const WARM: EeWeights = EeWeights { accuracy: 0.25, professionalism: 0.5, feasibility: 0.25 };

    pub fn new(accuracy: f64, professionalism: f64, feasibility: f64) -> Result<Self, EvalError> {
        let w = Self { accuracy, professionalism, feasibility };
        w.check()?;
        Ok(w)
    }

    pub fn check(&self) -> Result<(), EvalError> {
        let parts = [self.accuracy, self.professionalism, self.feasibility];
        if parts.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(EvalError::InvalidWeights(format!("{parts:?} has a negative or non-finite weight")));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(EvalError::InvalidWeights(format!("{parts:?} sums to {sum}, not 1")));
        }
        Ok(())
    }
}

/// Mean over `tasks` of a per-row score. Every task needs a row.
fn mean_over_tasks(
    sheet: &ScoreSheet,
    tasks: &[String],
    arity: usize,
    score: impl Fn(&[f64]) -> f64,
) -> Result<f64, EvalError> {
    if tasks.is_empty() {
        return Err(EvalError::InvalidSheet { header: sheet.header.clone(), message: "no tasks to average".into() });
    }
    let mut total = 0.0;
    for t in tasks {
        let row = sheet
            .rows
            .get(t)
            .ok_or_else(|| EvalError::MissingRow { header: sheet.header.clone(), task: t.clone() })?;
        if row.len() != arity {
            return Err(EvalError::InvalidSheet {
                header: sheet.header.clone(),
                message: format!("row {t} has {} scores, expected {arity}", row.len()),
            });
        }
        total += score(row);
    }
    Ok(total / tasks.len() as f64)
}

/// Mean over tasks of the mean of target and constraint alignment.
pub fn aggregate_understanding(sheet: &ScoreSheet, tasks: &[String]) -> Result<f64, EvalError> {
    mean_over_tasks(sheet, tasks, 2, |r| (r[0] + r[1]) / 2.0)
}

/// Mean over tasks of the weighted accuracy, professionalism and
/// feasibility scores.
pub fn aggregate_ee(sheet: &ScoreSheet, tasks: &[String], weights: EeWeights) -> Result<f64, EvalError> {
    weights.check()?;
    mean_over_tasks(sheet, tasks, 3, |r| {
        weights.accuracy * r[0] + weights.professionalism * r[1] + weights.feasibility * r[2]
    })
}

/// Mean of the pass rate and the mean planning alignment.
pub fn aggregate_grounding(sheet: &ScoreSheet, tasks: &[String]) -> Result<f64, EvalError> {
    let pass = mean_over_tasks(sheet, tasks, 2, |r| r[0])?;
    let alignment = mean_over_tasks(sheet, tasks, 2, |r| r[1])?;
    Ok((pass + alignment) / 2.0)
}

/// Mean over tasks of the mean of exploitation and exploration.
pub fn aggregate_transferability(sheet: &ScoreSheet, tasks: &[String]) -> Result<f64, EvalError> {
    mean_over_tasks(sheet, tasks, 2, |r| (r[0] + r[1]) / 2.0)
}

pub fn overall(understanding: f64, explore_exploit: f64, grounding: f64) -> f64 {
    (understanding + explore_exploit + grounding) / 3.0
}

/// Allowed |computed - printed| per reproduced table entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub understanding: f64,
    pub ee_cold: f64,
    pub ee_warm: f64,
    pub grounding: f64,
    pub transferability: f64,
    pub overall: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { understanding: 0.006, ee_cold: 0.006, ee_warm: 0.003, grounding: 0.003, transferability: 0.001, overall: 0.003 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reproduced {
    pub computed: f64,
    pub printed: f64,
    pub delta: f64,
    pub tolerance: f64,
    pub within_tolerance: bool,
}

impl Reproduced {
    fn new(computed: f64, printed: f64, tolerance: f64) -> Self {
        let delta = computed - printed;
        Self { computed, printed, delta, tolerance, within_tolerance: delta.abs() <= tolerance + 1e-12 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColdRow {
    pub method: String,
    pub understanding: Reproduced,
    pub explore_exploit: Reproduced,
    pub grounding: Reproduced,
    /// Mean of the three printed phase scores, compared with the printed overall.
    pub overall: Reproduced,
    /// Mean of the three recomputed phase scores, for reference.
    pub overall_from_computed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarmRow {
    pub method: String,
    pub explore_exploit: Reproduced,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transferability: Option<Reproduced>,
}

/// Recomputed score-sheet averages next to the values printed under them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SheetAverage {
    pub phase: Phase,
    pub scenario: super::fixtures::Scenario,
    pub position: usize,
    pub header: String,
    pub methods: Vec<String>,
    pub computed: f64,
    pub printed: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub tolerances: Tolerances,
    pub cold: Vec<ColdRow>,
    pub warm: Vec<WarmRow>,
    pub sheets: Vec<SheetAverage>,
}

impl AggregateReport {
    pub fn all_within_tolerance(&self) -> bool {
        self.entries().all(|(_, _, r)| r.within_tolerance)
    }

    /// (method, column, value) for every reproduced entry.
    pub fn entries(&self) -> impl Iterator<Item = (&str, &'static str, &Reproduced)> {
        let cold = self.cold.iter().flat_map(|r| {
            [
                (r.method.as_str(), "understanding", &r.understanding),
                (r.method.as_str(), "explore_exploit_cold", &r.explore_exploit),
                (r.method.as_str(), "grounding", &r.grounding),
                (r.method.as_str(), "overall", &r.overall),
            ]
        });
        let warm = self.warm.iter().flat_map(|r| {
            std::iter::once((r.method.as_str(), "explore_exploit_warm", &r.explore_exploit))
                .chain(r.transferability.as_ref().map(|t| (r.method.as_str(), "transferability", t)))
        });
        cold.chain(warm)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn render_text(&self) -> String {
        let cell = |r: &Reproduced| {
            let mark = if r.within_tolerance { ' ' } else { '!' };
            format!("{:.4} ({:.3}){mark}", r.computed, r.printed)
        };
        let mut s = String::from("Cold start: computed (printed)\n");
        let _ = writeln!(s, "{:<12} {:>17} {:>17} {:>17} {:>17}", "method", "understanding", "explore/exploit", "grounding", "overall");
        for r in &self.cold {
            let _ = writeln!(
                s,
                "{:<12} {:>17} {:>17} {:>17} {:>17}",
                r.method,
                cell(&r.understanding),
                cell(&r.explore_exploit),
                cell(&r.grounding),
                cell(&r.overall)
            );
        }
        s.push_str("\nWarm start: computed (printed)\n");
        let _ = writeln!(s, "{:<12} {:>17} {:>17}", "method", "explore/exploit", "transferability");
        for r in &self.warm {
            let t = r.transferability.as_ref().map_or("N/A".to_string(), cell);
            let _ = writeln!(s, "{:<12} {:>17} {:>17}", r.method, cell(&r.explore_exploit), t);
        }
        s.push_str("\nScore sheets\n");
        for a in &self.sheets {
            let _ = writeln!(
                s,
                "{:<16} {:<5} col {} {:<20} -> {:<22} {:.4} (printed {:.3}){}",
                a.phase.to_string(),
                a.scenario.to_string(),
                a.position,
                a.header,
                a.methods.join(" / "),
                a.computed,
                a.printed,
                if a.note.is_some() { " *" } else { "" }
            );
        }
        if self.sheets.iter().any(|a| a.note.is_some()) {
            s.push_str("* column attributed by its printed average rather than its header\n");
        }
        let _ = writeln!(
            s,
            "\nAll entries within tolerance: {}",
            if self.all_within_tolerance() { "yes" } else { "NO (marked !)" }
        );
        s
    }
}

fn sheet_for<'a>(sheets: &'a [ScoreSheet], method: &str, what: &str) -> Result<&'a ScoreSheet, EvalError> {
    sheets
        .iter()
        .find(|s| s.covers(method))
        .ok_or_else(|| EvalError::InvalidFixture(format!("no {what} sheet covers method `{method}`")))
}

/// Recomputes every score-sheet average and main-table entry.
pub fn aggregate_all(fixtures: &Fixtures, tolerances: Tolerances) -> Result<AggregateReport, EvalError> {
    let score = |sheet: &ScoreSheet| -> Result<f64, EvalError> {
        let tasks = fixtures.sheet_tasks(sheet);
        match (sheet.phase, sheet.scenario) {
            (Phase::Understanding, _) => aggregate_understanding(sheet, &tasks),
            (Phase::ExploreExploit, super::fixtures::Scenario::Cold) => aggregate_ee(sheet, &tasks, EeWeights::EQUAL),
            (Phase::ExploreExploit, super::fixtures::Scenario::Warm) => aggregate_ee(sheet, &tasks, EeWeights::WARM),
            (Phase::Grounding, _) => aggregate_grounding(sheet, &tasks),
            (Phase::Transferability, _) => aggregate_transferability(sheet, &tasks),
        }
    };

    let mut cold = Vec::new();
    for p in &fixtures.printed.cold {
        let u = score(sheet_for(&fixtures.understanding, &p.method, "understanding")?)?;
        let e = score(sheet_for(&fixtures.ee_cold, &p.method, "cold explore/exploit")?)?;
        let g = score(sheet_for(&fixtures.grounding, &p.method, "grounding")?)?;
        cold.push(ColdRow {
            method: p.method.clone(),
            understanding: Reproduced::new(u, p.understanding, tolerances.understanding),
            explore_exploit: Reproduced::new(e, p.explore_exploit, tolerances.ee_cold),
            grounding: Reproduced::new(g, p.grounding, tolerances.grounding),
            overall: Reproduced::new(
                overall(p.understanding, p.explore_exploit, p.grounding),
                p.overall,
                tolerances.overall,
            ),
            overall_from_computed: overall(u, e, g),
        });
    }

    let mut warm = Vec::new();
    for p in &fixtures.printed.warm {
        let e = score(sheet_for(&fixtures.ee_warm, &p.method, "warm explore/exploit")?)?;
        let transferability = match p.transferability {
            Some(printed) => {
                let t = score(sheet_for(&fixtures.transferability, &p.method, "transferability")?)?;
                Some(Reproduced::new(t, printed, tolerances.transferability))
            }
            None => None,
        };
        warm.push(WarmRow {
            method: p.method.clone(),
            explore_exploit: Reproduced::new(e, p.explore_exploit, tolerances.ee_warm),
            transferability,
        });
    }

    let sheets = fixtures
        .all_sheets()
        .map(|s| {
            Ok(SheetAverage {
                phase: s.phase,
                scenario: s.scenario,
                position: s.position,
                header: s.header.clone(),
                methods: s.methods.clone(),
                computed: score(s)?,
                printed: s.printed,
                note: s.note.clone(),
            })
        })
        .collect::<Result<_, EvalError>>()?;

    Ok(AggregateReport { tolerances, cold, warm, sheets })
}
