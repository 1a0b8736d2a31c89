use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::EvalError;
use crate::symlang::ExperimentPlan;

pub const FIXTURE_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Understanding,
    ExploreExploit,
    Grounding,
    Transferability,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Understanding => "understanding",
            Phase::ExploreExploit => "explore_exploit",
            Phase::Grounding => "grounding",
            Phase::Transferability => "transferability",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Cold,
    Warm,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::Cold => "cold",
            Scenario::Warm => "warm",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalTask {
    pub id: String,
    pub phase: Phase,
    pub scenario: Scenario,
    pub text: String,
}

/// Expert scores for one column group of a benchmark table. Columns are
/// kept in their printed order; `methods` records which compared methods
/// the column is attributed to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSheet {
    pub phase: Phase,
    pub scenario: Scenario,
    pub criteria: Vec<String>,
    pub position: usize,
    /// The column header as printed.
    pub header: String,
    pub methods: Vec<String>,
    /// The average printed under the column.
    pub printed: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub rows: IndexMap<String, Vec<f64>>,
}

impl ScoreSheet {
    pub fn covers(&self, method: &str) -> bool {
        self.methods.iter().any(|m| m == method)
    }

    /// Checks score ranges and row shapes.
    pub fn check(&self) -> Result<(), EvalError> {
        let invalid = |message: String| EvalError::InvalidSheet { header: self.header.clone(), message };
        if self.rows.is_empty() {
            return Err(invalid("no rows".into()));
        }
        for (task, scores) in &self.rows {
            if scores.len() != self.criteria.len() {
                return Err(invalid(format!(
                    "row {task} has {} scores for {} criteria",
                    scores.len(),
                    self.criteria.len()
                )));
            }
            if let Some(s) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
                return Err(invalid(format!("row {task} has score {s} outside [0, 1]")));
            }
            if self.phase == Phase::Grounding && scores[0] != 0.0 && scores[0] != 1.0 {
                return Err(invalid(format!("row {task} has pass value {} (expected 0 or 1)", scores[0])));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Deserialize)]
struct SheetFile {
    fixture_version: u32,
    phase: Phase,
    scenario: Scenario,
    criteria: Vec<String>,
    sheet: Vec<RawSheet>,
}

#[derive(Debug, Deserialize)]
struct RawSheet {
    position: usize,
    header: String,
    methods: Vec<String>,
    printed: f64,
    #[serde(default)]
    note: Option<String>,
    rows: IndexMap<String, Vec<f64>>,
}

#[derive(Debug, Deserialize)]
struct TaskFile {
    fixture_version: u32,
    task: Vec<EvalTask>,
}

#[derive(Debug, Deserialize)]
struct Manifest {
    fixture_version: u32,
    sha256: BTreeMap<String, String>,
}

/// Phase scores of the main cold-start table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrintedCold {
    pub method: String,
    pub understanding: f64,
    pub explore_exploit: f64,
    pub grounding: f64,
    pub overall: f64,
}

/// Phase scores of the main warm-start table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrintedWarm {
    pub method: String,
    pub explore_exploit: f64,
    #[serde(default)]
    pub transferability: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrintedTables {
    pub fixture_version: u32,
    pub cold: Vec<PrintedCold>,
    pub warm: Vec<PrintedWarm>,
}

/// Everything the evaluation harness reads: task texts, score sheets,
/// printed tables and the grounding plans.
#[derive(Debug, Clone, PartialEq)]
pub struct Fixtures {
    pub tasks: Vec<EvalTask>,
    pub understanding: Vec<ScoreSheet>,
    pub ee_cold: Vec<ScoreSheet>,
    pub ee_warm: Vec<ScoreSheet>,
    pub grounding: Vec<ScoreSheet>,
    pub transferability: Vec<ScoreSheet>,
    pub printed: PrintedTables,
    /// Grounding task plans keyed by task id, in task order.
    pub plans: IndexMap<String, ExperimentPlan>,
}

macro_rules! bundled_files {
    ($($name:literal),* $(,)?) => {
        &[$(($name, include_bytes!(concat!("../../assets/fixtures/", $name)).as_slice())),*]
    };
}

const BUNDLED: &[(&str, &[u8])] = bundled_files!(
    "manifest.toml",
    "tasks.toml",
    "printed.toml",
    "sheets/understanding.toml",
    "sheets/ee_cold.toml",
    "sheets/ee_warm.toml",
    "sheets/grounding.toml",
    "sheets/transferability.toml",
    "plans/G1.toml",
    "plans/G2.toml",
    "plans/G3.toml",
    "plans/G4.toml",
    "plans/G5.toml",
    "plans/G6.toml",
    "plans/G7.toml",
    "plans/G8.toml",
    "plans/G9.toml",
    "plans/G10.toml",
    "plans/G11.toml",
    "plans/G12.toml",
    "plans/G13.toml",
    "plans/G14.toml",
    "plans/G15.toml",
    "plans/G16.toml",
    "plans/G17.toml",
    "plans/G18.toml",
    "plans/G19.toml",
    "plans/G20.toml",
);

/// The bundled fixture files as (relative path, bytes).
pub fn bundled_fixture_files() -> impl Iterator<Item = (&'static str, &'static [u8])> {
    BUNDLED.iter().copied()
}

impl Fixtures {
    /// The fixtures compiled into the library.
    pub fn bundled() -> Result<Self, EvalError> {
        let files = BUNDLED.iter().map(|(n, b)| ((*n).to_string(), b.to_vec())).collect();
        Self::from_files(&files)
    }

    /// Reads every file listed in `dir/manifest.toml` and verifies it.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self, EvalError> {
        let dir = dir.as_ref();
        let read = |rel: &str| {
            std::fs::read(dir.join(rel)).map_err(|e| EvalError::Io(format!("{}: {e}", dir.join(rel).display())))
        };
        let manifest_bytes = read(MANIFEST_FILE)?;
        let manifest = parse_manifest(&manifest_bytes)?;
        let mut files = BTreeMap::from([(MANIFEST_FILE.to_string(), manifest_bytes)]);
        for rel in manifest.sha256.keys() {
            files.insert(rel.clone(), read(rel)?);
        }
        Self::from_files(&files)
    }

    fn from_files(files: &BTreeMap<String, Vec<u8>>) -> Result<Self, EvalError> {
        let manifest = parse_manifest(files.get(MANIFEST_FILE).ok_or_else(|| missing(MANIFEST_FILE))?)?;
        for (rel, expected) in &manifest.sha256 {
            let bytes = files.get(rel).ok_or_else(|| missing(rel))?;
            let actual = hex::encode(Sha256::digest(bytes));
            if &actual != expected {
                return Err(EvalError::Checksum { file: rel.clone(), expected: expected.clone(), actual });
            }
        }
        let text = |rel: &str| -> Result<&str, EvalError> {
            if !manifest.sha256.contains_key(rel) {
                return Err(EvalError::InvalidFixture(format!("`{rel}` is not listed in the manifest")));
            }
            let bytes = files.get(rel).ok_or_else(|| missing(rel))?;
            std::str::from_utf8(bytes).map_err(|e| EvalError::InvalidFixture(format!("{rel}: {e}")))
        };
        let parse = |rel: &str, e: toml::de::Error| EvalError::InvalidFixture(format!("{rel}: {e}"));

        let tasks: TaskFile = toml::from_str(text("tasks.toml")?).map_err(|e| parse("tasks.toml", e))?;
        check_version("tasks.toml", tasks.fixture_version)?;
        let printed: PrintedTables = toml::from_str(text("printed.toml")?).map_err(|e| parse("printed.toml", e))?;
        check_version("printed.toml", printed.fixture_version)?;
        let sheets = |name: &str| -> Result<Vec<ScoreSheet>, EvalError> {
            let rel = format!("sheets/{name}.toml");
            let f: SheetFile = toml::from_str(text(&rel)?).map_err(|e| parse(&rel, e))?;
            check_version(&rel, f.fixture_version)?;
            f.sheet
                .into_iter()
                .map(|s| {
                    let sheet = ScoreSheet {
                        phase: f.phase,
                        scenario: f.scenario,
                        criteria: f.criteria.clone(),
                        position: s.position,
                        header: s.header,
                        methods: s.methods,
                        printed: s.printed,
                        note: s.note,
                        rows: s.rows,
                    };
                    sheet.check()?;
                    Ok(sheet)
                })
                .collect()
        };
        let mut plans = IndexMap::new();
        for t in tasks.task.iter().filter(|t| t.phase == Phase::Grounding) {
            let rel = format!("plans/{}.toml", t.id);
            let plan = ExperimentPlan::from_toml_str(text(&rel)?)
                .map_err(|e| EvalError::InvalidFixture(format!("{rel}: {e}")))?;
            plans.insert(t.id.clone(), plan);
        }
        let fixtures = Self {
            tasks: tasks.task,
            understanding: sheets("understanding")?,
            ee_cold: sheets("ee_cold")?,
            ee_warm: sheets("ee_warm")?,
            grounding: sheets("grounding")?,
            transferability: sheets("transferability")?,
            printed,
            plans,
        };
        fixtures.check_consistency()?;
        Ok(fixtures)
    }

    /// Task ids of one phase and scenario, in fixture order.
    pub fn task_ids(&self, phase: Phase, scenario: Scenario) -> Vec<String> {
        self.tasks.iter().filter(|t| t.phase == phase && t.scenario == scenario).map(|t| t.id.clone()).collect()
    }

    pub fn tasks_of(&self, phase: Phase) -> Vec<&EvalTask> {
        self.tasks.iter().filter(|t| t.phase == phase).collect()
    }

    pub fn task(&self, id: &str) -> Option<&EvalTask> {
        self.tasks.iter().find(|t| t.id == id)
    }

    /// The task set a sheet is scored over. Cold-start exploration reuses
    /// the understanding tasks.
    pub fn sheet_tasks(&self, sheet: &ScoreSheet) -> Vec<String> {
        match (sheet.phase, sheet.scenario) {
            (Phase::ExploreExploit, Scenario::Cold) => self.task_ids(Phase::Understanding, Scenario::Cold),
            (phase, scenario) => self.task_ids(phase, scenario),
        }
    }

    pub fn all_sheets(&self) -> impl Iterator<Item = &ScoreSheet> {
        self.understanding
            .iter()
            .chain(&self.ee_cold)
            .chain(&self.ee_warm)
            .chain(&self.grounding)
            .chain(&self.transferability)
    }

    fn check_consistency(&self) -> Result<(), EvalError> {
        let mut seen = std::collections::BTreeSet::new();
        for t in &self.tasks {
            if !seen.insert(t.id.as_str()) {
                return Err(EvalError::InvalidFixture(format!("duplicate task id {}", t.id)));
            }
            let expected = match t.id.chars().next() {
                Some('U') => (Phase::Understanding, Scenario::Cold),
                Some('E') => (Phase::ExploreExploit, Scenario::Warm),
                Some('G') => (Phase::Grounding, Scenario::Cold),
                Some('T') => (Phase::Transferability, Scenario::Warm),
                _ => return Err(EvalError::InvalidFixture(format!("unrecognized task id {}", t.id))),
            };
            if (t.phase, t.scenario) != expected {
                return Err(EvalError::InvalidFixture(format!(
                    "task {} is labeled {}/{} but its id implies {}/{}",
                    t.id, t.phase, t.scenario, expected.0, expected.1
                )));
            }
        }
        for sheet in self.all_sheets() {
            let expected = self.sheet_tasks(sheet);
            let actual: Vec<&String> = sheet.rows.keys().collect();
            let mut a = actual.clone();
            a.sort();
            let mut e: Vec<&String> = expected.iter().collect();
            e.sort();
            if a != e {
                return Err(EvalError::InvalidSheet {
                    header: sheet.header.clone(),
                    message: format!("rows {a:?} do not match the {} {} task set {e:?}", sheet.scenario, sheet.phase),
                });
            }
        }
        Ok(())
    }
}

fn parse_manifest(bytes: &[u8]) -> Result<Manifest, EvalError> {
    let text = std::str::from_utf8(bytes).map_err(|e| EvalError::InvalidFixture(format!("{MANIFEST_FILE}: {e}")))?;
    let manifest: Manifest =
        toml::from_str(text).map_err(|e| EvalError::InvalidFixture(format!("{MANIFEST_FILE}: {e}")))?;
    check_version(MANIFEST_FILE, manifest.fixture_version)?;
    Ok(manifest)
}

fn check_version(file: &str, version: u32) -> Result<(), EvalError> {
    if version == FIXTURE_VERSION {
        Ok(())
    } else {
        Err(EvalError::InvalidFixture(format!("{file}: unsupported fixture_version {version}")))
    }
}

fn missing(rel: &str) -> EvalError {
    EvalError::InvalidFixture(format!("missing fixture file `{rel}`"))
}
